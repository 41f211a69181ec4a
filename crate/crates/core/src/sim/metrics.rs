//! Per-scenario metrics and their tab-separated and JSON forms.

use serde::{Deserialize, Serialize};

/// Outcome tallies for one run, counted per (bundle, destination) pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub in_flight: u64,
    /// Summed over delivered pairs, milliseconds.
    pub delay_sum_ms: i128,
    pub transmissions: u64,
    pub control_messages: u64,
    pub state_entries_per_node: f64,
    pub state_entries_max: u64,
    /// Seconds until the first node death, `None` when nobody died.
    pub lifetime: Option<f64>,
    pub measurement_ticks: u64,
    pub rate_updates: u64,
    pub final_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub policy: String,
    pub nodes: usize,
    pub seed: u64,
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    pub in_flight: u64,
    pub delivery_ratio: f64,
    /// Nothing was generated; `delivery_ratio` is 1 by convention.
    pub degenerate: bool,
    /// Seconds, over delivered pairs only.
    pub mean_delay: f64,
    pub transmissions: u64,
    pub control_messages: u64,
    /// `None` when nothing was delivered.
    pub overhead_ratio: Option<f64>,
    pub state_entries_per_node: f64,
    pub state_entries_max: u64,
    pub lifetime: Option<f64>,
    pub measurement_ticks: u64,
    pub rate_updates: u64,
    pub final_rate: f64,
}

pub fn overhead_ratio(transmissions: u64, control_messages: u64, delivered: u64) -> Option<f64> {
    (delivered > 0).then(|| (transmissions + control_messages) as f64 / delivered as f64)
}

pub fn collect_metrics(
    scenario: &str,
    policy: &str,
    nodes: usize,
    seed: u64,
    t: &Tally,
) -> Metrics {
    let degenerate = t.generated == 0;
    Metrics {
        scenario: scenario.to_string(),
        policy: policy.to_string(),
        nodes,
        seed,
        generated: t.generated,
        delivered: t.delivered,
        lost: t.lost,
        in_flight: t.in_flight,
        delivery_ratio: if degenerate {
            1.0
        } else {
            t.delivered as f64 / t.generated as f64
        },
        degenerate,
        mean_delay: if t.delivered == 0 {
            0.0
        } else {
            t.delay_sum_ms as f64 / 1000.0 / t.delivered as f64
        },
        transmissions: t.transmissions,
        control_messages: t.control_messages,
        overhead_ratio: overhead_ratio(t.transmissions, t.control_messages, t.delivered),
        state_entries_per_node: t.state_entries_per_node,
        state_entries_max: t.state_entries_max,
        lifetime: t.lifetime,
        measurement_ticks: t.measurement_ticks,
        rate_updates: t.rate_updates,
        final_rate: t.final_rate,
    }
}

/// Column order of the tab-separated table.
pub const FIELDS: [&str; 20] = [
    "scenario",
    "policy",
    "nodes",
    "seed",
    "generated",
    "delivered",
    "lost",
    "in_flight",
    "delivery_ratio",
    "degenerate",
    "mean_delay",
    "transmissions",
    "control_messages",
    "overhead_ratio",
    "state_entries_per_node",
    "state_entries_max",
    "lifetime",
    "measurement_ticks",
    "rate_updates",
    "final_rate",
];

fn opt(v: Option<f64>) -> String {
    v.map_or("inf".to_string(), |x| x.to_string())
}

impl Metrics {
    pub fn tsv_row(&self) -> String {
        [
            self.scenario.clone(),
            self.policy.clone(),
            self.nodes.to_string(),
            self.seed.to_string(),
            self.generated.to_string(),
            self.delivered.to_string(),
            self.lost.to_string(),
            self.in_flight.to_string(),
            self.delivery_ratio.to_string(),
            self.degenerate.to_string(),
            self.mean_delay.to_string(),
            self.transmissions.to_string(),
            self.control_messages.to_string(),
            opt(self.overhead_ratio),
            self.state_entries_per_node.to_string(),
            self.state_entries_max.to_string(),
            opt(self.lifetime),
            self.measurement_ticks.to_string(),
            self.rate_updates.to_string(),
            self.final_rate.to_string(),
        ]
        .join("\t")
    }
}

pub fn render_tsv(rows: &[Metrics]) -> String {
    let mut out = FIELDS.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&r.tsv_row());
        out.push('\n');
    }
    out
}

pub fn render_json(rows: &[Metrics]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("metrics serialise");
    s.push('\n');
    s
}

/// Reads a table written by [`render_tsv`].
pub fn parse_tsv(text: &str) -> Result<Vec<Metrics>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty metrics file")?;
    if header.split('\t').collect::<Vec<_>>() != FIELDS {
        return Err("metrics header does not match the expected columns".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            let row = i + 2;
            if f.len() != FIELDS.len() {
                return Err(format!("row {row}: expected {} columns", FIELDS.len()));
            }
            let bad = |col: usize| format!("row {row}: invalid {}", FIELDS[col]);
            let int = |col: usize| f[col].parse::<u64>().map_err(|_| bad(col));
            let float = |col: usize| f[col].parse::<f64>().map_err(|_| bad(col));
            let maybe = |col: usize| match f[col] {
                "inf" => Ok(None),
                _ => float(col).map(Some),
            };
            Ok(Metrics {
                scenario: f[0].to_string(),
                policy: f[1].to_string(),
                nodes: int(2)? as usize,
                seed: int(3)?,
                generated: int(4)?,
                delivered: int(5)?,
                lost: int(6)?,
                in_flight: int(7)?,
                delivery_ratio: float(8)?,
                degenerate: f[9].parse().map_err(|_| bad(9))?,
                mean_delay: float(10)?,
                transmissions: int(11)?,
                control_messages: int(12)?,
                overhead_ratio: maybe(13)?,
                state_entries_per_node: float(14)?,
                state_entries_max: int(15)?,
                lifetime: maybe(16)?,
                measurement_ticks: int(17)?,
                rate_updates: int(18)?,
                final_rate: float(19)?,
            })
        })
        .collect()
}
