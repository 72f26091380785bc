//! Import of the public E-VRP-NL benchmark files in VRP-REP XML form.
//!
//! Node types: `0` depot, otherwise a node carrying a `cs_type` in its
//! `custom` block is a station and the rest are customers. Distances are
//! euclidean in kilometres; `speed_factor` is km/h, `consumption_rate` is
//! kWh/km and battery levels are kWh (converted to Wh). Instances carry no
//! demands and no fleet limit, so `Q = 0` and `K = n`.

use roxmltree::{Document, Node as XmlNode};

use super::{Instance, InstanceData, ModelError, NodeData, NodeKind, StationData, Tech};
use crate::pwl::{Breakpoint, Pwl};

fn xml_err(msg: impl Into<String>) -> ModelError {
    ModelError::Xml(msg.into())
}

fn child<'a, 'i>(n: XmlNode<'a, 'i>, name: &str) -> Option<XmlNode<'a, 'i>> {
    n.children().find(|c| c.has_tag_name(name))
}

fn descendant<'a, 'i>(n: XmlNode<'a, 'i>, name: &str) -> Option<XmlNode<'a, 'i>> {
    n.descendants().find(|c| c.has_tag_name(name))
}

fn number(n: Option<XmlNode>, what: &str) -> Result<f64, ModelError> {
    let text = n.and_then(|n| n.text()).ok_or_else(|| xml_err(format!("missing <{what}>")))?;
    text.trim().parse::<f64>().map_err(|_| xml_err(format!("<{what}> is not a number: {text}")))
}

fn tech_of(s: &str) -> Result<Tech, ModelError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "slow" => Ok(Tech::Slow),
        "normal" | "moderate" | "medium" => Ok(Tech::Moderate),
        "fast" => Ok(Tech::Fast),
        other => Err(xml_err(format!("unknown charging technology {other}"))),
    }
}

struct RawNode {
    xml_id: String,
    x: f64,
    y: f64,
    kind: NodeKind,
    tech: Option<Tech>,
}

/// Converts one benchmark XML document into instance data.
pub fn convert(xml: &str, name_hint: &str) -> Result<InstanceData, ModelError> {
    let doc = Document::parse(xml).map_err(|e| xml_err(e.to_string()))?;
    let root = doc.root_element();
    let name = descendant(root, "name").and_then(|n| n.text()).map(|s| s.trim().to_string()).unwrap_or_else(|| name_hint.to_string());

    let nodes_el = descendant(root, "nodes").ok_or_else(|| xml_err("missing <nodes>"))?;
    let mut raw = Vec::new();
    for n in nodes_el.children().filter(|c| c.has_tag_name("node")) {
        let xml_id = n.attribute("id").ok_or_else(|| xml_err("node without id"))?.to_string();
        let ty = n.attribute("type").unwrap_or("1");
        let cs = descendant(n, "cs_type").and_then(|c| c.text()).map(tech_of).transpose()?;
        let kind = if ty == "0" {
            NodeKind::Depot
        } else if cs.is_some() {
            NodeKind::Station
        } else {
            NodeKind::Customer
        };
        raw.push(RawNode { xml_id, x: number(child(n, "cx"), "cx")?, y: number(child(n, "cy"), "cy")?, kind, tech: cs });
    }
    if raw.iter().filter(|r| r.kind == NodeKind::Depot).count() != 1 {
        return Err(xml_err("expected exactly one depot node"));
    }

    let profile = descendant(root, "vehicle_profile").ok_or_else(|| xml_err("missing <vehicle_profile>"))?;
    let speed = number(descendant(profile, "speed_factor"), "speed_factor")?;
    let horizon = number(descendant(profile, "max_travel_time"), "max_travel_time")?;
    let rate = number(descendant(profile, "consumption_rate"), "consumption_rate")? * 1000.0;
    let battery = number(descendant(profile, "battery_capacity"), "battery_capacity")? * 1000.0;

    let mut curves: Vec<(Tech, Vec<Breakpoint<f64>>)> = Vec::new();
    if let Some(funcs) = descendant(profile, "charging_functions") {
        for f in funcs.children().filter(|c| c.has_tag_name("function")) {
            let tech = tech_of(f.attribute("cs_type").ok_or_else(|| xml_err("function without cs_type"))?)?;
            let mut pts = Vec::new();
            for bp in f.children().filter(|c| c.has_tag_name("breakpoint")) {
                let v = number(child(bp, "battery_level"), "battery_level")? * 1000.0;
                let t = number(child(bp, "charging_time"), "charging_time")?;
                pts.push(Breakpoint::new(t, v));
            }
            curves.push((tech, pts));
        }
    }

    let mut service = std::collections::BTreeMap::new();
    if let Some(reqs) = descendant(root, "requests") {
        for r in reqs.children().filter(|c| c.has_tag_name("request")) {
            let node = r.attribute("node").ok_or_else(|| xml_err("request without node"))?.to_string();
            let s = match child(r, "service_time") {
                Some(s) => number(Some(s), "service_time")?,
                None => 0.0,
            };
            service.insert(node, s);
        }
    }

    let ordered: Vec<&RawNode> = [NodeKind::Depot, NodeKind::Customer, NodeKind::Station]
        .iter()
        .flat_map(|k| raw.iter().filter(move |r| r.kind == *k))
        .collect();
    let n_customers = ordered.iter().filter(|r| r.kind == NodeKind::Customer).count();
    let mut nodes = Vec::with_capacity(ordered.len());
    let mut stations = Vec::new();
    for (id, r) in ordered.iter().enumerate() {
        let mut nd = NodeData::new(id, r.kind).at(r.x, r.y);
        if r.kind == NodeKind::Customer {
            nd.service_time = Some(service.get(&r.xml_id).copied().unwrap_or(0.0));
            nd.demand = Some(0.0);
        }
        if r.kind == NodeKind::Station {
            let tech = r.tech.expect("station nodes carry a technology");
            let pts = curves
                .iter()
                .find(|(t, _)| *t == tech)
                .map(|(_, p)| p.clone())
                .ok_or_else(|| xml_err(format!("no charging function for {tech:?}")))?;
            let curve = Pwl::new(pts).map_err(|e| xml_err(e.to_string()))?;
            stations.push(StationData { id, curve, tech });
        }
        nodes.push(nd);
    }

    Ok(InstanceData {
        name,
        fleet: n_customers.max(1),
        capacity: 0.0,
        battery,
        horizon,
        speed: Some(speed),
        consumption_rate: Some(rate),
        nodes,
        travel_time: None,
        energy: None,
        stations,
    })
}

/// Converts and validates.
pub fn convert_instance(xml: &str, name_hint: &str) -> Result<Instance, ModelError> {
    Instance::build(convert(xml, name_hint)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<instance>
  <info><dataset>test</dataset><name>tiny</name></info>
  <network>
    <nodes>
      <node id="0" type="0"><cx>0.0</cx><cy>0.0</cy></node>
      <node id="1" type="1"><cx>10.0</cx><cy>0.0</cy><custom><cs_type>fast</cs_type></custom></node>
      <node id="2" type="2"><cx>20.0</cx><cy>0.0</cy></node>
    </nodes>
    <euclidean/>
  </network>
  <fleet>
    <vehicle_profile type="0">
      <departure_node>0</departure_node><arrival_node>0</arrival_node>
      <speed_factor>40.0</speed_factor>
      <max_travel_time>10.0</max_travel_time>
      <custom>
        <consumption_rate>0.125</consumption_rate>
        <battery_capacity>16.0</battery_capacity>
        <charging_functions>
          <function cs_type="fast">
            <breakpoint><battery_level>0.0</battery_level><charging_time>0.0</charging_time></breakpoint>
            <breakpoint><battery_level>13.6</battery_level><charging_time>0.31</charging_time></breakpoint>
            <breakpoint><battery_level>15.2</battery_level><charging_time>0.39</charging_time></breakpoint>
            <breakpoint><battery_level>16.0</battery_level><charging_time>0.51</charging_time></breakpoint>
          </function>
        </charging_functions>
      </custom>
    </vehicle_profile>
  </fleet>
  <requests>
    <request id="1" node="2"><service_time>0.5</service_time></request>
  </requests>
</instance>"#;

    #[test]
    fn converts_sample() {
        let inst = convert_instance(SAMPLE, "x").unwrap();
        assert_eq!(inst.name, "tiny");
        assert_eq!(inst.n_customers(), 1);
        assert_eq!(inst.n_stations(), 1);
        assert!((inst.travel(0, 1) - 0.5).abs() < 1e-12);
        assert!((inst.energy(0, 1) - 2500.0).abs() < 1e-9);
        assert_eq!(inst.service(1), 0.5);
        assert_eq!(inst.battery, 16000.0);
        assert_eq!(inst.station(2).curve.last_value(), 16000.0);
    }
}
