//! Synthetic instances on a square service area.
//!
//! Distances are euclidean, speed is 40 km/h and consumption 125 Wh/km, so
//! battery sizes of 4 to 7 kWh cover 32 to 56 km and the far corners of the
//! 40 km square usually need a station visit.

use rand::Rng;

use super::{Instance, InstanceData, NodeData, NodeKind, StationData, Tech};
use crate::pwl::Pwl;
use crate::PwlFunction;

#[derive(Debug, Clone)]
pub struct RandomParams {
    pub customers: usize,
    pub stations: usize,
    /// Range of segment counts for each charging curve.
    pub segments: (usize, usize),
    /// Probability that a customer receives a window tighter than the derived one.
    pub tight_window_prob: f64,
    pub side_km: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self { customers: 5, stations: 2, segments: (2, 3), tight_window_prob: 0.0, side_km: 40.0 }
    }
}

const SPEED: f64 = 40.0;
const RATE: f64 = 125.0;

/// Concave curve from empty to `battery` with the given number of segments.
pub fn random_concave_curve<R: Rng + ?Sized>(rng: &mut R, segments: usize, battery: f64) -> PwlFunction {
    let segments = segments.max(1);
    let mut slopes: Vec<f64> = (0..segments).map(|_| rng.gen_range(0.2..1.0)).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    for k in 1..segments {
        // strictly decreasing so no breakpoint is collinear
        slopes[k] = slopes[k].min(slopes[k - 1] * 0.8);
    }
    let spans: Vec<f64> = (0..segments).map(|_| rng.gen_range(0.1..0.6)).collect();
    let raw: f64 = slopes.iter().zip(&spans).map(|(s, d)| s * d).sum();
    let mut pts = vec![(0.0, 0.0)];
    let (mut t, mut v) = (0.0, 0.0);
    for (s, d) in slopes.iter().zip(&spans) {
        t += d;
        v += s * d * battery / raw;
        pts.push((t, v));
    }
    pts.last_mut().expect("at least one segment").1 = battery;
    Pwl::from_pairs(&pts).expect("random curve is increasing")
}

pub fn random_data<R: Rng + ?Sized>(rng: &mut R, p: &RandomParams) -> InstanceData {
    let side = p.side_km;
    let battery = rng.gen_range(4000.0..7000.0_f64).round();
    let horizon = (rng.gen_range(3.0..5.0_f64) * 100.0).round() / 100.0;
    let mut nodes = vec![NodeData::new(0, NodeKind::Depot).at(side / 2.0, side / 2.0)];
    for i in 1..=p.customers {
        let mut nd = NodeData::new(i, NodeKind::Customer).at(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        nd.service_time = Some((rng.gen_range(0.1..0.3_f64) * 100.0).round() / 100.0);
        nd.demand = Some(rng.gen_range(1..=3) as f64);
        nodes.push(nd);
    }
    let mut stations = Vec::new();
    for k in 0..p.stations {
        let id = 1 + p.customers + k;
        nodes.push(NodeData::new(id, NodeKind::Station).at(rng.gen_range(0.0..side), rng.gen_range(0.0..side)));
        let segs = rng.gen_range(p.segments.0..=p.segments.1.max(p.segments.0));
        let tech = [Tech::Slow, Tech::Moderate, Tech::Fast][rng.gen_range(0..3)];
        stations.push(StationData { id, curve: random_concave_curve(rng, segs, battery), tech });
    }
    let mut data = InstanceData {
        name: format!("rand-c{}-s{}", p.customers, p.stations),
        fleet: p.customers.max(1),
        capacity: 6.0,
        battery,
        horizon,
        speed: Some(SPEED),
        consumption_rate: Some(RATE),
        nodes,
        travel_time: None,
        energy: None,
        stations,
    };
    if p.tight_window_prob > 0.0 {
        let inst = Instance::build(data.clone()).expect("generated data is valid");
        for i in 1..=p.customers {
            if rng.gen_bool(p.tight_window_prob.min(1.0)) {
                let (e, l) = inst.window(i);
                if l > e {
                    let open = rng.gen_range(e..l);
                    let close = rng.gen_range(open..=l);
                    data.nodes[i].window = Some([open, close]);
                }
            }
        }
    }
    data
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, p: &RandomParams) -> Instance {
    Instance::build(random_data(rng, p)).expect("generated data is valid")
}
