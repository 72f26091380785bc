//! Result rows and the CSV tables built from them.

use serde::Serialize;

use evrpnl::bpc::SolveReport;
use evrpnl::tabu::TabuOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ExactBpc,
    ExactBp,
    Tabu,
    Both,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ExactBpc => "exact-bpc",
            Mode::ExactBp => "exact-bp",
            Mode::Tabu => "tabu",
            Mode::Both => "both",
        }
    }
}

/// One line of a results table. Tabu rows leave the bound columns empty.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub instance: String,
    pub mode: Mode,
    pub lp_cost: Option<f64>,
    pub ip_cost: Option<f64>,
    pub root_time: Option<f64>,
    pub total_time: f64,
    pub sr_cuts: Option<usize>,
    pub nodes: Option<usize>,
    pub optimal: bool,
}

impl ResultRow {
    pub fn from_report(mode: Mode, r: &SolveReport) -> Self {
        Self {
            instance: r.instance.clone(),
            mode,
            lp_cost: r.lp_cost,
            ip_cost: r.ip_cost,
            root_time: Some(r.root_time),
            total_time: r.total_time,
            sr_cuts: Some(r.sr_cuts),
            nodes: Some(r.nodes),
            optimal: r.optimal,
        }
    }

    pub fn from_tabu(instance: &str, out: &TabuOutcome, seconds: f64) -> Self {
        Self {
            instance: instance.to_string(),
            mode: Mode::Tabu,
            lp_cost: None,
            ip_cost: Some(out.solution.cost),
            root_time: None,
            total_time: seconds,
            sr_cuts: None,
            nodes: None,
            optimal: false,
        }
    }
}

pub const HEADER: [&str; 9] =
    ["Instance", "LP Cost", "IP Cost", "Root Time", "IP Time", "SR Cuts", "Nodes", "Optimal", "Mode"];

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.2}"))
}

fn count(v: Option<usize>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize, usize) {
    let (mut sum, mut present, mut total) = (0.0, 0, 0);
    for v in values {
        total += 1;
        if let Some(v) = v.filter(|v| v.is_finite()) {
            sum += v;
            present += 1;
        }
    }
    ((present > 0).then(|| sum / present as f64), present, total)
}

/// CSV text with one line per row and, when there are rows, an averages
/// line. Missing values are left out of the averages and the line says how
/// many went in.
pub fn emit_table(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("writing to memory");
    for r in rows {
        w.write_record([
            r.instance.clone(),
            fixed(r.lp_cost),
            fixed(r.ip_cost),
            fixed(r.root_time),
            format!("{:.2}", r.total_time),
            count(r.sr_cuts),
            count(r.nodes),
            r.optimal.to_string(),
            r.mode.name().to_string(),
        ])
        .expect("writing to memory");
    }
    if !rows.is_empty() {
        let columns = [
            ("LP Cost", mean(rows.iter().map(|r| r.lp_cost))),
            ("IP Cost", mean(rows.iter().map(|r| r.ip_cost))),
            ("Root Time", mean(rows.iter().map(|r| r.root_time))),
            ("IP Time", mean(rows.iter().map(|r| Some(r.total_time)))),
            ("SR Cuts", mean(rows.iter().map(|r| r.sr_cuts.map(|v| v as f64)))),
            ("Nodes", mean(rows.iter().map(|r| r.nodes.map(|v| v as f64)))),
        ];
        let partial: Vec<String> = columns
            .iter()
            .filter(|(_, (_, present, total))| present < total)
            .map(|(name, (_, present, total))| format!("{name} over {present} of {total}"))
            .collect();
        let label = if partial.is_empty() { "Average".to_string() } else { format!("Average ({})", partial.join("; ")) };
        let optimal = rows.iter().filter(|r| r.optimal).count();
        let mut record = vec![label];
        record.extend(columns.iter().map(|(_, (m, _, _))| fixed(*m)));
        record.push(format!("{optimal}/{}", rows.len()));
        record.push(String::new());
        w.write_record(record).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}
