//! Small hand-checkable instances.

use super::{Instance, InstanceData, NodeData, NodeKind, StationData, Tech};
use crate::pwl::Pwl;
use crate::PwlFunction;

/// Three-segment concave test curve reaching 16 kWh after 3 h.
pub fn curve_c1() -> PwlFunction {
    Pwl::from_pairs(&[(0.0, 0.0), (1.0, 12000.0), (1.8, 15200.0), (3.0, 16000.0)]).expect("valid curve")
}

/// The uniform example network: every arc takes 2 h and 2000 Wh, the
/// battery holds 16000 Wh, the horizon is 10 h, customers need 0.5 h of
/// service within `[2, 7.5]`, and every station charges along [`curve_c1`].
pub fn ex1(customers: usize, stations: usize) -> Instance {
    Instance::build(ex1_data(customers, stations)).expect("fixture is valid")
}

pub fn ex1_data(customers: usize, stations: usize) -> InstanceData {
    let n = 1 + customers + stations;
    let mut nodes = vec![NodeData::new(0, NodeKind::Depot)];
    for i in 1..=customers {
        let mut nd = NodeData::new(i, NodeKind::Customer);
        nd.service_time = Some(0.5);
        nd.demand = Some(1.0);
        nd.window = Some([2.0, 7.5]);
        nodes.push(nd);
    }
    for k in 0..stations {
        nodes.push(NodeData::new(1 + customers + k, NodeKind::Station));
    }
    let off = |v: f64| (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { v }).collect()).collect();
    InstanceData {
        name: format!("ex1-c{customers}-s{stations}"),
        fleet: customers.max(1),
        capacity: customers as f64,
        battery: 16000.0,
        horizon: 10.0,
        speed: None,
        consumption_rate: None,
        nodes,
        travel_time: Some(off(2.0)),
        energy: Some(off(2000.0)),
        stations: (0..stations)
            .map(|k| StationData { id: 1 + customers + k, curve: curve_c1(), tech: Tech::Fast })
            .collect(),
    }
}
