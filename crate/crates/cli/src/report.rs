//! Side-by-side comparison of metrics tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dtnsim_core::sim::Metrics;

/// Columns are keyed by policy, or by policy and node count when the rows
/// span several network sizes.
fn group_key(m: &Metrics, by_size: bool) -> String {
    if by_size {
        format!("{}@{}", m.policy, m.nodes)
    } else {
        m.policy.clone()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn cell(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.4}")
    }
}

type Extract = fn(&Metrics) -> f64;

const ROWS: [(&str, Extract); 6] = [
    ("rows", |_| 1.0),
    ("delivery_ratio", |m| m.delivery_ratio),
    ("mean_delay", |m| m.mean_delay),
    ("overhead_ratio", |m| {
        m.overhead_ratio.unwrap_or(f64::INFINITY)
    }),
    ("state_per_node", |m| m.state_entries_per_node),
    ("lifetime", |m| m.lifetime.unwrap_or(f64::INFINITY)),
];

/// One line per metric, one column per group, plus a delta column (second
/// minus first) when exactly two groups are present.
pub fn render_report(rows: &[Metrics]) -> String {
    let first_n = rows.first().map(|m| m.nodes);
    let by_size = rows.iter().any(|m| Some(m.nodes) != first_n);
    let mut groups: BTreeMap<String, Vec<&Metrics>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for m in rows {
        let key = group_key(m, by_size);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(m);
    }
    let delta = order.len() == 2;
    let mut out = format!("{:<16}", "metric");
    for g in &order {
        write!(out, "{g:>16}").unwrap();
    }
    if delta {
        write!(out, "{:>16}", "delta").unwrap();
    }
    out.push('\n');
    for (name, f) in ROWS {
        write!(out, "{name:<16}").unwrap();
        let values: Vec<f64> = order
            .iter()
            .map(|g| {
                if name == "rows" {
                    groups[g].len() as f64
                } else {
                    mean(groups[g].iter().map(|m| f(m)))
                }
            })
            .collect();
        for (g, v) in order.iter().zip(&values) {
            let text = if name == "rows" {
                groups[g].len().to_string()
            } else {
                cell(*v)
            };
            write!(out, "{text:>16}").unwrap();
        }
        if delta {
            let d = if name == "rows" || values.iter().any(|v| v.is_infinite()) {
                "-".to_string()
            } else {
                cell(values[1] - values[0])
            };
            write!(out, "{d:>16}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use dtnsim_core::sim::{collect_metrics, Tally};

    fn row(policy: &str, nodes: usize, delivered: u64) -> Metrics {
        let t = Tally {
            generated: 10,
            delivered,
            lost: 10 - delivered,
            state_entries_per_node: nodes as f64,
            ..Default::default()
        };
        collect_metrics("contact", policy, nodes, 1, &t)
    }

    #[test]
    fn delta_only_for_two_groups() {
        let two = render_report(&[row("esp", 9, 10), row("dhr_cic", 9, 8)]);
        assert!(two.lines().next().unwrap().contains("delta"));
        let ratio = two
            .lines()
            .find(|l| l.starts_with("delivery_ratio"))
            .unwrap();
        assert!(ratio.trim_end().ends_with("-0.2000"), "{ratio}");
        let one = render_report(&[row("esp", 9, 10)]);
        assert!(!one.contains("delta"));
    }

    #[test]
    fn sizes_split_columns() {
        let text = render_report(&[row("esp", 9, 10), row("esp", 27, 10), row("dhr_cic", 9, 10)]);
        let header = text.lines().next().unwrap();
        assert!(
            header.contains("esp@9") && header.contains("esp@27") && header.contains("dhr_cic@9")
        );
        assert!(text
            .lines()
            .any(|l| l.starts_with("lifetime") && l.contains("inf")));
    }
}
