//! Contact-information compression.
//!
//! Three independent reductions of a contact plan into a
//! [`CompressedContactTable`]:
//!
//! * [`compress_time`]: same-pair contacts starting in the same window bucket
//!   collapse into one entry;
//! * [`compress_space`]: node endpoints are replaced by their cluster at a
//!   hierarchy level, intra-cluster contacts vanish and time-overlapping
//!   contacts between the same cluster pair merge;
//! * [`compress_probabilistic`]: one summary per pair, kept only when its
//!   probability clears a threshold in `[0.6, 0.8]`, optionally capped to a
//!   budget of the most probable entries.
//!
//! Volumes are summed exactly. Availability is the covered fraction of an
//! entry's window. [`esp_on_compressed`] routes over a table by treating
//! every entry as continuously open across its window at the
//! volume-conserving rate `volume / window`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{Bundle, Contact, ContactPlan, NodeId};
use crate::dhr::ClusterTree;
use crate::time::{SimTime, Volume};

pub const MIN_THRESHOLD: f64 = 0.6;
pub const MAX_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CicError {
    #[error("aggregation window must be positive")]
    InvalidWindow,
    #[error("level {level} outside 1..={max}")]
    InvalidLevel { level: usize, max: usize },
    #[error("threshold {0} outside [{MIN_THRESHOLD}, {MAX_THRESHOLD}]")]
    ThresholdOutOfRange(f64),
    #[error("no route from {from} to {to} in compressed table")]
    NoRoute { from: u32, to: u32 },
    #[error("space aggregation needs a node-level table, got level {0}")]
    NotNodeLevel(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A summary of one or more contacts between two endpoints. Endpoints are
/// node ids in a level-0 table and cluster ids above that.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatedContact {
    pub from: u32,
    pub to: u32,
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub total_volume: Volume,
    pub contact_count: u32,
    pub availability: f64,
    pub probability: f64,
}

impl AggregatedContact {
    pub fn from_contact(c: &Contact) -> Self {
        AggregatedContact {
            from: c.from.0,
            to: c.to.0,
            window_start: c.start,
            window_end: c.end,
            total_volume: c.volume(),
            contact_count: 1,
            availability: 1.0,
            probability: c.probability,
        }
    }

    pub fn window(&self) -> SimTime {
        self.window_end - self.window_start
    }

    /// Bytes per second when spread evenly across the window.
    pub fn effective_rate(&self) -> f64 {
        self.total_volume.as_bytes_f64() / self.window().as_secs_f64()
    }

    /// Time the endpoints are actually in contact inside the window.
    fn busy(&self) -> i64 {
        (self.availability * self.window().0 as f64).round() as i64
    }

    pub fn covers(&self, c: &Contact) -> bool {
        self.window_start <= c.start && c.end <= self.window_end
    }

    fn sort_key(&self) -> (u32, u32, SimTime, SimTime) {
        (self.from, self.to, self.window_start, self.window_end)
    }

    pub fn render(&self, level: usize) -> String {
        let mut line = format!(
            "agg {} {} {} {} {} {} {} {}",
            self.from,
            self.to,
            self.window_start,
            self.window_end,
            self.total_volume,
            self.contact_count,
            self.availability,
            self.probability
        );
        if level > 0 {
            line.push_str(&format!(" level={level}"));
        }
        line
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressedContactTable {
    pub entries: Vec<AggregatedContact>,
    /// 0 for node endpoints, otherwise the hierarchy level of the clusters.
    pub level: usize,
    /// Time-aggregation window, when time aggregation was applied.
    pub window: Option<SimTime>,
    /// Probability threshold, when probabilistic filtering was applied.
    pub threshold: Option<f64>,
    pub budget: Option<usize>,
}

impl CompressedContactTable {
    fn new(mut entries: Vec<AggregatedContact>, level: usize) -> Self {
        entries.sort_by_key(|a| a.sort_key());
        CompressedContactTable {
            entries,
            level,
            window: None,
            threshold: None,
            budget: None,
        }
    }

    /// Each contact as its own entry.
    pub fn from_plan(plan: &ContactPlan) -> Self {
        Self::new(
            plan.contacts()
                .iter()
                .map(AggregatedContact::from_contact)
                .collect(),
            0,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_volume(&self) -> Volume {
        self.entries.iter().map(|e| e.total_volume).sum()
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| e.render(self.level) + "\n")
            .collect()
    }
}

/// Parses `agg` records (and `#` comments) back into a table.
pub fn parse_compressed_table(text: &str) -> Result<CompressedContactTable, CicError> {
    let mut entries = Vec::new();
    let mut level = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CicError::Parse {
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "agg" {
            return Err(err(format!("unknown record '{}'", fields[0])));
        }
        if !(9..=10).contains(&fields.len()) {
            return Err(err("expected 8 fields after 'agg'".into()));
        }
        let int = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| err(format!("invalid integer '{s}'")))
        };
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("invalid number '{s}'")))
        };
        let entry = AggregatedContact {
            from: int(fields[1])?,
            to: int(fields[2])?,
            window_start: SimTime::parse_secs(fields[3]).map_err(err)?,
            window_end: SimTime::parse_secs(fields[4]).map_err(err)?,
            total_volume: Volume::parse_bytes(fields[5]).map_err(err)?,
            contact_count: int(fields[6])?,
            availability: float(fields[7])?,
            probability: float(fields[8])?,
        };
        if entry.window_start >= entry.window_end {
            return Err(err("window start must precede window end".into()));
        }
        if !(entry.availability > 0.0 && entry.availability <= 1.0)
            || !(entry.probability > 0.0 && entry.probability <= 1.0)
        {
            return Err(err("availability and probability must lie in (0, 1]".into()));
        }
        let entry_level = match fields.get(9) {
            Some(opt) => match opt.strip_prefix("level=") {
                Some(v) => v
                    .parse::<usize>()
                    .map_err(|_| err(format!("invalid level '{v}'")))?,
                None => return Err(err(format!("unknown option '{opt}'"))),
            },
            None => 0,
        };
        match level {
            None => level = Some(entry_level),
            Some(l) if l != entry_level => return Err(err("mixed levels in one table".into())),
            _ => {}
        }
        entries.push(entry);
    }
    Ok(CompressedContactTable::new(entries, level.unwrap_or(0)))
}

/// Length of the union of half-open intervals.
fn union_length(mut spans: Vec<(i64, i64)>) -> i64 {
    spans.sort_unstable();
    let mut total = 0;
    let mut current: Option<(i64, i64)> = None;
    for (s, e) in spans {
        match current {
            Some((cs, ce)) if s < ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = current {
        total += ce - cs;
    }
    total
}

/// Merges a group of same-endpoint entries into one.
fn merge(from: u32, to: u32, group: &[&AggregatedContact]) -> AggregatedContact {
    let window_start = group.iter().map(|e| e.window_start).min().unwrap();
    let window_end = group.iter().map(|e| e.window_end).max().unwrap();
    let busy_sum: i64 = group.iter().map(|e| e.busy()).sum();
    let covered = union_length(
        group
            .iter()
            .map(|e| (e.window_start.0, e.window_end.0))
            .collect(),
    );
    // Exact for raw contacts; an upper bound once inputs are aggregates.
    let busy = busy_sum.min(covered);
    AggregatedContact {
        from,
        to,
        window_start,
        window_end,
        total_volume: group.iter().map(|e| e.total_volume).sum(),
        contact_count: group.iter().map(|e| e.contact_count).sum(),
        availability: busy as f64 / (window_end - window_start).0 as f64,
        probability: group.iter().map(|e| e.probability).fold(0.0, f64::max),
    }
}

/// Buckets same-pair entries by `floor(start / window)` and merges each
/// bucket.
pub fn aggregate_time(
    table: &CompressedContactTable,
    window: SimTime,
) -> Result<CompressedContactTable, CicError> {
    if window <= SimTime::ZERO {
        return Err(CicError::InvalidWindow);
    }
    let mut buckets: BTreeMap<(u32, u32, i64), Vec<&AggregatedContact>> = BTreeMap::new();
    for e in &table.entries {
        let bucket = e.window_start.0.div_euclid(window.0);
        buckets.entry((e.from, e.to, bucket)).or_default().push(e);
    }
    let entries = buckets
        .into_iter()
        .map(|((from, to, _), group)| merge(from, to, &group))
        .collect();
    let mut out = CompressedContactTable::new(entries, table.level);
    out.window = Some(window);
    out.threshold = table.threshold;
    out.budget = table.budget;
    Ok(out)
}

pub fn compress_time(
    plan: &ContactPlan,
    window: SimTime,
) -> Result<CompressedContactTable, CicError> {
    aggregate_time(&CompressedContactTable::from_plan(plan), window)
}

/// Relabels a node-level table by level-`level` clusters, drops entries
/// internal to a cluster and merges time-overlapping entries between the
/// same cluster pair.
pub fn aggregate_space(
    table: &CompressedContactTable,
    tree: &ClusterTree,
    level: usize,
) -> Result<CompressedContactTable, CicError> {
    if table.level != 0 {
        return Err(CicError::NotNodeLevel(table.level));
    }
    if level == 0 || level > tree.levels() {
        return Err(CicError::InvalidLevel {
            level,
            max: tree.levels(),
        });
    }
    let mut pairs: BTreeMap<(u32, u32), Vec<&AggregatedContact>> = BTreeMap::new();
    for e in &table.entries {
        let x = tree.cluster_of(NodeId(e.from), level).0;
        let y = tree.cluster_of(NodeId(e.to), level).0;
        if x != y {
            pairs.entry((x, y)).or_default().push(e);
        }
    }
    let mut entries = Vec::new();
    for ((x, y), mut group) in pairs {
        group.sort_by_key(|e| (e.window_start, e.window_end));
        let mut run: Vec<&AggregatedContact> = Vec::new();
        let mut run_end = SimTime::ZERO;
        for e in group {
            if !run.is_empty() && e.window_start >= run_end {
                entries.push(merge(x, y, &run));
                run.clear();
            }
            run_end = if run.is_empty() {
                e.window_end
            } else {
                run_end.max(e.window_end)
            };
            run.push(e);
        }
        if !run.is_empty() {
            entries.push(merge(x, y, &run));
        }
    }
    let mut out = CompressedContactTable::new(entries, level);
    out.window = table.window;
    out.threshold = table.threshold;
    out.budget = table.budget;
    Ok(out)
}

pub fn compress_space(
    plan: &ContactPlan,
    tree: &ClusterTree,
    level: usize,
) -> Result<CompressedContactTable, CicError> {
    aggregate_space(&CompressedContactTable::from_plan(plan), tree, level)
}

pub fn check_threshold(threshold: f64) -> Result<(), CicError> {
    if (MIN_THRESHOLD..=MAX_THRESHOLD).contains(&threshold) {
        Ok(())
    } else {
        Err(CicError::ThresholdOutOfRange(threshold))
    }
}

/// One summary per endpoint pair carrying the pair's best probability, its
/// total volume and its mean contact duration (as a fraction of the
/// summary window). Pairs below `threshold` are dropped; with a `budget`,
/// only the most probable pairs survive (ties by pair id).
pub fn summarize_probabilistic(
    table: &CompressedContactTable,
    threshold: f64,
    budget: Option<usize>,
) -> Result<CompressedContactTable, CicError> {
    check_threshold(threshold)?;
    let mut pairs: BTreeMap<(u32, u32), Vec<&AggregatedContact>> = BTreeMap::new();
    for e in &table.entries {
        pairs.entry((e.from, e.to)).or_default().push(e);
    }
    let mut entries: Vec<AggregatedContact> = pairs
        .into_iter()
        .map(|((from, to), group)| {
            let mut summary = merge(from, to, &group);
            let busy: i64 = group.iter().map(|e| e.busy()).sum();
            let mean = busy as f64 / summary.contact_count as f64;
            summary.availability = (mean / summary.window().0 as f64).min(1.0);
            summary
        })
        .filter(|e| e.probability >= threshold)
        .collect();
    if let Some(b) = budget {
        entries.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then((a.from, a.to).cmp(&(b.from, b.to)))
        });
        entries.truncate(b);
    }
    let mut out = CompressedContactTable::new(entries, table.level);
    out.window = table.window;
    out.threshold = Some(threshold);
    out.budget = budget;
    Ok(out)
}

pub fn compress_probabilistic(
    plan: &ContactPlan,
    threshold: f64,
    budget: Option<usize>,
) -> Result<CompressedContactTable, CicError> {
    summarize_probabilistic(&CompressedContactTable::from_plan(plan), threshold, budget)
}

/// Default composition: time aggregation, then (for `level ≥ 1`) space
/// aggregation, then probabilistic summarisation.
pub fn compress_pipeline(
    plan: &ContactPlan,
    tree: &ClusterTree,
    level: usize,
    window: SimTime,
    threshold: f64,
    budget: Option<usize>,
) -> Result<CompressedContactTable, CicError> {
    let timed = compress_time(plan, window)?;
    let spaced = if level == 0 {
        timed
    } else {
        aggregate_space(&timed, tree, level)?
    };
    summarize_probabilistic(&spaced, threshold, budget)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    pub original_entries: usize,
    pub compressed_entries: usize,
    pub ratio: f64,
}

pub fn compression_stats(before: &ContactPlan, after: &CompressedContactTable) -> CompressionStats {
    CompressionStats {
        original_entries: before.len(),
        compressed_entries: after.len(),
        ratio: before.len() as f64 / after.len().max(1) as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatedHop {
    pub entry_index: usize,
    pub from: u32,
    pub to: u32,
    /// Seconds.
    pub depart: f64,
    pub arrive: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteEstimate {
    pub hops: Vec<EstimatedHop>,
    /// Seconds.
    pub delivery_time: f64,
}

impl RouteEstimate {
    pub fn first_hop(&self) -> Option<&EstimatedHop> {
        self.hops.first()
    }
}

/// Earliest-delivery estimate for `bundle` to `dest` over a node-level
/// table.
pub fn esp_on_compressed(
    table: &CompressedContactTable,
    bundle: &Bundle,
    dest: NodeId,
    t0: SimTime,
) -> Result<RouteEstimate, CicError> {
    estimate_route(
        &table.entries,
        bundle.source.0,
        dest.0,
        bundle.size,
        t0.as_secs_f64(),
        bundle.expires_at().as_secs_f64(),
        |_| true,
    )
}

/// Earliest-delivery search over aggregated entries.
///
/// A hop over entry `e` may begin once the bundle is ready and the window is
/// open, and must begin before the window closes. The transfer takes
/// `size / e.effective_rate()` seconds, stretched by `1 / e.probability`.
/// Minimises delivery time, then hop count. Only endpoints accepted by
/// `allow` are traversed.
pub fn estimate_route(
    entries: &[AggregatedContact],
    from: u32,
    to: u32,
    size: u64,
    t0: f64,
    deadline: f64,
    allow: impl Fn(u32) -> bool,
) -> Result<RouteEstimate, CicError> {
    if from == to {
        return Ok(RouteEstimate {
            hops: Vec::new(),
            delivery_time: t0,
        });
    }
    let usable: Vec<usize> = (0..entries.len())
        .filter(|&i| allow(entries[i].from) && allow(entries[i].to))
        .collect();
    let mut index: BTreeMap<u32, usize> = BTreeMap::new();
    for id in [from, to].into_iter().chain(
        usable
            .iter()
            .flat_map(|&i| [entries[i].from, entries[i].to]),
    ) {
        let next = index.len();
        index.entry(id).or_insert(next);
    }
    let n = index.len();
    let src = index[&from];
    let dst = index[&to];

    // arrival, predecessor entry, hop count
    let mut label: Vec<Option<(f64, Option<usize>, usize)>> = vec![None; n];
    label[src] = Some((t0, None, 0));
    for _ in 0..n {
        let mut next = label.clone();
        let mut changed = false;
        for &i in &usable {
            let e = &entries[i];
            let Some((ready, _, hops)) = label[index[&e.from]] else {
                continue;
            };
            let start = ready.max(e.window_start.as_secs_f64());
            if start >= e.window_end.as_secs_f64() {
                continue;
            }
            let arrive = start + size as f64 / e.effective_rate() / e.probability;
            let slot = &mut next[index[&e.to]];
            let better = match slot {
                None => true,
                Some((a, _, h)) => arrive < *a || (arrive == *a && hops + 1 < *h),
            };
            if better {
                *slot = Some((arrive, Some(i), hops + 1));
                changed = true;
            }
        }
        label = next;
        if !changed {
            break;
        }
    }
    let no_route = CicError::NoRoute { from, to };
    let (delivery, _, _) = label[dst].ok_or(no_route.clone())?;
    if delivery > deadline {
        return Err(no_route);
    }
    let mut hops = Vec::new();
    let mut at = dst;
    while let Some((arrive, Some(i), _)) = label[at] {
        let e = &entries[i];
        let prev = index[&e.from];
        let ready = label[prev].expect("predecessor labelled").0;
        hops.push(EstimatedHop {
            entry_index: i,
            from: e.from,
            to: e.to,
            depart: ready.max(e.window_start.as_secs_f64()),
            arrive,
        });
        at = prev;
        if hops.len() > n {
            unreachable!("predecessor chain is acyclic");
        }
    }
    hops.reverse();
    Ok(RouteEstimate {
        hops,
        delivery_time: delivery,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{parse_contact_plan, ContactKind};
    use crate::dhr::ClusterTree;

    fn s(v: i64) -> SimTime {
        SimTime::from_secs(v)
    }

    #[test]
    fn time_merge_in_one_bucket() {
        let plan = parse_contact_plan("contact 0 1 0 10 2\ncontact 0 1 20 30 2").unwrap();
        let t = compress_time(&plan, s(60)).unwrap();
        assert_eq!(t.len(), 1);
        let e = &t.entries[0];
        assert_eq!((e.window_start, e.window_end), (s(0), s(30)));
        assert_eq!(e.total_volume, Volume::from_bytes(40));
        assert_eq!(e.contact_count, 2);
        assert!((e.availability - 20.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn time_single_contact_is_identity() {
        let plan = parse_contact_plan("contact 3 1 5 12 7").unwrap();
        for w in [1, 10, 1000] {
            let t = compress_time(&plan, s(w)).unwrap();
            let e = &t.entries[0];
            assert_eq!(e.total_volume, Volume::from_bytes(49));
            assert_eq!((e.window_start, e.window_end), (s(5), s(12)));
            assert_eq!(e.availability, 1.0);
        }
    }

    #[test]
    fn time_buckets_split() {
        let plan = parse_contact_plan("contact 0 1 0 10 1\ncontact 0 1 70 80 1").unwrap();
        assert_eq!(compress_time(&plan, s(60)).unwrap().len(), 2);
        assert_eq!(
            compress_time(&plan, SimTime::ZERO).unwrap_err(),
            CicError::InvalidWindow
        );
    }

    #[test]
    fn overlapping_contacts_keep_availability_bounded() {
        let plan = parse_contact_plan("contact 0 1 0 10 1\ncontact 0 1 5 15 1").unwrap();
        let e = &compress_time(&plan, s(100)).unwrap().entries[0];
        assert_eq!(e.availability, 1.0);
        assert_eq!(e.total_volume, Volume::from_bytes(20));
    }

    #[test]
    fn space_merge_across_clusters() {
        // clusters {0,1} and {2,3}
        let tree = ClusterTree::from_groups(4, 2, &[vec![vec![0, 1], vec![2, 3]]]).unwrap();
        let plan = parse_contact_plan("contact 0 2 0 10 1\ncontact 1 3 0 10 1").unwrap();
        let t = compress_space(&plan, &tree, 1).unwrap();
        assert_eq!(t.len(), 1);
        let e = &t.entries[0];
        assert_eq!(e.total_volume, Volume::from_bytes(20));
        assert_eq!((e.window_start, e.window_end), (s(0), s(10)));
        assert_eq!(e.from, tree.cluster_of(NodeId(0), 1).0);
        assert_eq!(e.to, tree.cluster_of(NodeId(3), 1).0);

        let internal = parse_contact_plan("contact 0 1 0 10 1\ncontact 3 2 0 10 1").unwrap();
        assert!(compress_space(&internal, &tree, 1).unwrap().is_empty());

        assert_eq!(
            compress_space(&plan, &tree, 3).unwrap_err(),
            CicError::InvalidLevel { level: 3, max: 2 }
        );
        assert!(compress_space(&plan, &tree, 0).is_err());
    }

    #[test]
    fn space_keeps_disjoint_runs_apart() {
        let tree = ClusterTree::from_groups(4, 2, &[vec![vec![0, 1], vec![2, 3]]]).unwrap();
        let plan =
            parse_contact_plan("contact 0 2 0 10 1\ncontact 1 3 10 20 1\ncontact 1 2 5 12 1")
                .unwrap();
        let t = compress_space(&plan, &tree, 1).unwrap();
        // [0,10) and [5,12) overlap, [10,20) overlaps [5,12): one run.
        assert_eq!(t.len(), 1);
        let plan = parse_contact_plan("contact 0 2 0 10 1\ncontact 1 3 10 20 1").unwrap();
        assert_eq!(compress_space(&plan, &tree, 1).unwrap().len(), 2);
    }

    fn predicted(from: u32, to: u32, p: f64) -> Contact {
        Contact {
            from: NodeId(from),
            to: NodeId(to),
            start: s(0),
            end: s(10),
            rate: 1,
            probability: p,
            kind: ContactKind::Predicted,
        }
    }

    #[test]
    fn probabilistic_threshold_and_budget() {
        let plan = ContactPlan::new(
            vec![
                predicted(0, 1, 0.9),
                predicted(0, 2, 0.7),
                predicted(0, 3, 0.5),
            ],
            None,
            None,
        )
        .unwrap();
        let t = compress_probabilistic(&plan, 0.6, Some(2)).unwrap();
        let kept: Vec<_> = t.entries.iter().map(|e| e.probability).collect();
        assert_eq!(kept, vec![0.9, 0.7]);
        assert_eq!(
            compress_probabilistic(&plan, 0.9, None).unwrap_err(),
            CicError::ThresholdOutOfRange(0.9)
        );
        let t = compress_probabilistic(&plan, 0.6, Some(1)).unwrap();
        assert_eq!(t.entries[0].probability, 0.9);
    }

    #[test]
    fn probabilistic_keeps_every_scheduled_pair() {
        let plan = parse_contact_plan(
            "contact 0 1 0 10 1\ncontact 0 1 20 30 1\ncontact 1 0 0 4 1\ncontact 2 0 1 2 1",
        )
        .unwrap();
        let t = compress_probabilistic(&plan, 0.8, None).unwrap();
        assert_eq!(t.len(), 3);
        let pair = &t.entries[0];
        assert_eq!((pair.from, pair.to, pair.contact_count), (0, 1, 2));
        // mean duration 10 s over a 30 s window
        assert!((pair.availability - 10.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_single_entry_matches_exact() {
        let plan = parse_contact_plan("contact 0 1 0 10 2").unwrap();
        let table = compress_time(&plan, s(60)).unwrap();
        let b = Bundle::new(1, NodeId(0), [NodeId(1)], 10, s(0), s(100)).unwrap();
        let est = esp_on_compressed(&table, &b, NodeId(1), s(0)).unwrap();
        assert_eq!(est.delivery_time, 5.0);
        assert_eq!(est.hops.len(), 1);
    }

    #[test]
    fn estimate_uses_volume_over_window() {
        let plan = parse_contact_plan("contact 0 1 0 10 2\ncontact 0 1 20 30 2").unwrap();
        let table = compress_time(&plan, s(60)).unwrap();
        let b = Bundle::new(1, NodeId(0), [NodeId(1)], 10, s(0), s(100)).unwrap();
        let est = esp_on_compressed(&table, &b, NodeId(1), s(0)).unwrap();
        assert!((est.delivery_time - 7.5).abs() < 1e-12);
    }

    #[test]
    fn estimate_scales_by_probability_and_respects_windows() {
        let entries = vec![AggregatedContact {
            from: 0,
            to: 1,
            window_start: s(10),
            window_end: s(20),
            total_volume: Volume::from_bytes(10),
            contact_count: 1,
            availability: 1.0,
            probability: 0.5,
        }];
        let est = estimate_route(&entries, 0, 1, 2, 0.0, f64::INFINITY, |_| true).unwrap();
        assert_eq!(est.delivery_time, 14.0);
        assert!(estimate_route(&entries, 0, 1, 2, 20.0, f64::INFINITY, |_| true).is_err());
        assert!(estimate_route(&entries, 0, 1, 2, 0.0, 13.0, |_| true).is_err());
        assert!(estimate_route(&entries, 0, 1, 2, 0.0, 100.0, |id| id != 1).is_err());
    }

    #[test]
    fn stats() {
        let plan = parse_contact_plan("contact 0 1 0 10 2\ncontact 0 1 20 30 2").unwrap();
        let t = compress_time(&plan, s(60)).unwrap();
        assert_eq!(compression_stats(&plan, &t).ratio, 2.0);
        let empty = ContactPlan::empty(0);
        let t = compress_time(&empty, s(60)).unwrap();
        assert_eq!(compression_stats(&empty, &t).ratio, 0.0);
    }

    #[test]
    fn table_text_round_trip() {
        let plan = parse_contact_plan(
            "contact 0 1 0 10 3\ncontact 0 1 20 30.5 2\ncontact 2 1 0.25 0.5 7 prob=0.75 kind=predicted",
        )
        .unwrap();
        let t = compress_time(&plan, s(60)).unwrap();
        let back = parse_compressed_table(&t.render()).unwrap();
        assert_eq!(back.entries, t.entries);
        let tree = ClusterTree::from_groups(3, 2, &[vec![vec![0, 2], vec![1]]]).unwrap();
        let spaced = compress_space(&plan, &tree, 1).unwrap();
        let text = spaced.render();
        assert!(text.contains("level=1"));
        let back = parse_compressed_table(&text).unwrap();
        assert_eq!((back.level, &back.entries), (1, &spaced.entries));
        assert!(parse_compressed_table("agg 0 1 0 10").is_err());
        assert!(
            parse_compressed_table("agg 0 1 0 10 5 1 1 1\nagg 0 1 0 10 5 1 1 1 level=1").is_err()
        );
    }
}
