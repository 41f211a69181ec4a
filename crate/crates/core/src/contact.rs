//! Nodes, contacts, contact plans and bundles.
//!
//! A [`ContactPlan`] is the ground truth of a scenario: every timed,
//! unidirectional communication opportunity between two nodes. Intervals are
//! half-open, `[start, end)`. Plans may be cyclic, in which case every
//! contact lies inside `[0, period)` and repeats with that period.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{SimTime, Volume};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ContactKind {
    /// Always-on link.
    Persistent,
    /// Known in advance, certain.
    #[default]
    Scheduled,
    /// Expected with some probability.
    Predicted,
    /// Arises from chance encounters.
    Opportunistic,
}

impl ContactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactKind::Persistent => "persistent",
            ContactKind::Scheduled => "scheduled",
            ContactKind::Predicted => "predicted",
            ContactKind::Opportunistic => "opportunistic",
        }
    }

    /// Scheduled and persistent contacts are certain.
    pub fn is_certain(self) -> bool {
        matches!(self, ContactKind::Persistent | ContactKind::Scheduled)
    }
}

impl FromStr for ContactKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "persistent" => Ok(ContactKind::Persistent),
            "scheduled" => Ok(ContactKind::Scheduled),
            "predicted" => Ok(ContactKind::Predicted),
            "opportunistic" => Ok(ContactKind::Opportunistic),
            other => Err(format!("unknown contact kind '{other}'")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}invalid plan: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        line: Option<usize>,
        message: String,
    },
    #[error("plan is not cyclic")]
    NotCyclic,
    #[error("horizon must be positive")]
    InvalidHorizon,
}

impl PlanError {
    fn invalid(message: impl Into<String>) -> Self {
        PlanError::Validation {
            line: None,
            message: message.into(),
        }
    }
}

/// A unidirectional transmission opportunity over `[start, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub from: NodeId,
    pub to: NodeId,
    pub start: SimTime,
    pub end: SimTime,
    /// Bytes per second.
    pub rate: u64,
    pub probability: f64,
    pub kind: ContactKind,
}

impl Contact {
    /// A scheduled contact with probability 1.
    pub fn scheduled(from: u32, to: u32, start: SimTime, end: SimTime, rate: u64) -> Self {
        Contact {
            from: NodeId(from),
            to: NodeId(to),
            start,
            end,
            rate,
            probability: 1.0,
            kind: ContactKind::Scheduled,
        }
    }

    pub fn duration(&self) -> SimTime {
        self.end - self.start
    }

    pub fn volume(&self) -> Volume {
        Volume::of(self.rate, self.duration())
    }

    pub fn is_active_at(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.from == self.to {
            return Err(format!(
                "contact {} -> {} is a self-loop",
                self.from, self.to
            ));
        }
        if self.start < SimTime::ZERO {
            return Err("contact start is negative".into());
        }
        if self.start >= self.end {
            return Err(format!(
                "start {} >= end {} for contact {} -> {}",
                self.start, self.end, self.from, self.to
            ));
        }
        if self.rate == 0 {
            return Err("rate must be positive".into());
        }
        if !(self.probability > 0.0 && self.probability <= 1.0) {
            return Err(format!("probability {} outside (0, 1]", self.probability));
        }
        if self.kind.is_certain() && self.probability != 1.0 {
            return Err(format!(
                "{} contact must have probability 1, got {}",
                self.kind.as_str(),
                self.probability
            ));
        }
        Ok(())
    }

    fn sort_key(&self) -> (SimTime, NodeId, NodeId, SimTime, u64, ContactKind, u64) {
        (
            self.start,
            self.from,
            self.to,
            self.end,
            self.rate,
            self.kind,
            self.probability.to_bits(),
        )
    }

    /// One plan-file line for this contact.
    pub fn render(&self) -> String {
        let mut line = format!(
            "contact {} {} {} {} {}",
            self.from, self.to, self.start, self.end, self.rate
        );
        if self.probability != 1.0 {
            line.push_str(&format!(" prob={}", self.probability));
        }
        if self.kind != ContactKind::Scheduled {
            line.push_str(&format!(" kind={}", self.kind.as_str()));
        }
        line
    }
}

/// A validated, canonically sorted set of contacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPlan {
    contacts: Vec<Contact>,
    period: Option<SimTime>,
    node_count: usize,
}

impl ContactPlan {
    /// Validates and sorts `contacts`. `node_count` defaults to one past the
    /// largest node id mentioned.
    pub fn new(
        mut contacts: Vec<Contact>,
        period: Option<SimTime>,
        node_count: Option<usize>,
    ) -> Result<Self, PlanError> {
        for c in &contacts {
            c.validate().map_err(PlanError::invalid)?;
        }
        let max_id = contacts
            .iter()
            .map(|c| c.from.0.max(c.to.0) as usize + 1)
            .max()
            .unwrap_or(0);
        let node_count = match node_count {
            Some(n) if n < max_id => {
                return Err(PlanError::invalid(format!(
                    "node id {} out of range for {} nodes",
                    max_id - 1,
                    n
                )))
            }
            Some(n) => n,
            None => max_id,
        };
        if let Some(p) = period {
            if p <= SimTime::ZERO {
                return Err(PlanError::invalid("period must be positive"));
            }
            if let Some(c) = contacts.iter().find(|c| c.end > p) {
                return Err(PlanError::invalid(format!(
                    "contact {} -> {} ends at {} after period {}",
                    c.from, c.to, c.end, p
                )));
            }
        }
        contacts.sort_by_key(|a| a.sort_key());
        Ok(ContactPlan {
            contacts,
            period,
            node_count,
        })
    }

    pub fn empty(node_count: usize) -> Self {
        ContactPlan {
            contacts: Vec::new(),
            period: None,
            node_count,
        }
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn period(&self) -> Option<SimTime> {
        self.period
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    /// Latest contact end, or zero for an empty plan.
    pub fn horizon(&self) -> SimTime {
        self.contacts
            .iter()
            .map(|c| c.end)
            .max()
            .unwrap_or(SimTime::ZERO)
    }

    pub fn total_volume(&self) -> Volume {
        self.contacts.iter().map(Contact::volume).sum()
    }

    /// Contacts with `start <= t < end`. Cyclic plans reduce `t` modulo the
    /// period first.
    pub fn contacts_active_at(&self, t: SimTime) -> Vec<&Contact> {
        let t = match self.period {
            Some(p) => SimTime(t.0.rem_euclid(p.0)),
            None => t,
        };
        self.contacts.iter().filter(|c| c.is_active_at(t)).collect()
    }

    /// Expands a cyclic plan into `⌈horizon/period⌉` shifted copies, clipping
    /// at `horizon`. The result is aperiodic.
    pub fn unroll(&self, horizon: SimTime) -> Result<ContactPlan, PlanError> {
        let period = self.period.ok_or(PlanError::NotCyclic)?;
        if horizon <= SimTime::ZERO {
            return Err(PlanError::InvalidHorizon);
        }
        let copies = (horizon.0 as u64).div_ceil(period.0 as u64) as i64;
        let mut out = Vec::with_capacity(self.contacts.len() * copies as usize);
        for k in 0..copies {
            let shift = SimTime(k * period.0);
            for c in &self.contacts {
                let start = c.start + shift;
                if start >= horizon {
                    continue;
                }
                out.push(Contact {
                    start,
                    end: (c.end + shift).min(horizon),
                    ..c.clone()
                });
            }
        }
        ContactPlan::new(out, None, Some(self.node_count))
    }

    /// The sub-plan of contacts satisfying `keep`.
    pub fn filtered(&self, keep: impl Fn(&Contact) -> bool) -> ContactPlan {
        ContactPlan {
            contacts: self.contacts.iter().filter(|c| keep(c)).cloned().collect(),
            period: self.period,
            node_count: self.node_count,
        }
    }

    /// Plan-file text; `parse_contact_plan(plan.render())` reproduces `plan`.
    pub fn render(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count);
        if let Some(p) = self.period {
            out.push_str(&format!("period {p}\n"));
        }
        for c in &self.contacts {
            out.push_str(&c.render());
            out.push('\n');
        }
        out
    }
}

/// Parses the line-oriented plan format:
///
/// ```text
/// # comment
/// nodes 30
/// period 100
/// contact <from> <to> <start_s> <end_s> <rate_Bps> [prob=<p>] [kind=<kind>]
/// ```
pub fn parse_contact_plan(text: &str) -> Result<ContactPlan, PlanError> {
    let mut contacts = Vec::new();
    let mut period = None;
    let mut nodes = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| PlanError::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "contact" => {
                let contact = parse_contact_fields(&fields[1..]).map_err(parse_err)?;
                contact
                    .validate()
                    .map_err(|message| PlanError::Validation {
                        line: Some(line_no),
                        message,
                    })?;
                contacts.push(contact);
            }
            "period" => {
                if period.is_some() {
                    return Err(parse_err("period given more than once".into()));
                }
                if fields.len() != 2 {
                    return Err(parse_err("expected 'period <seconds>'".into()));
                }
                period = Some(SimTime::parse_secs(fields[1]).map_err(parse_err)?);
            }
            "nodes" => {
                if nodes.is_some() {
                    return Err(parse_err("nodes given more than once".into()));
                }
                if fields.len() != 2 {
                    return Err(parse_err("expected 'nodes <count>'".into()));
                }
                nodes = Some(
                    fields[1]
                        .parse::<usize>()
                        .map_err(|_| parse_err(format!("invalid node count '{}'", fields[1])))?,
                );
            }
            other => return Err(parse_err(format!("unknown record '{other}'"))),
        }
    }
    ContactPlan::new(contacts, period, nodes)
}

fn parse_contact_fields(fields: &[&str]) -> Result<Contact, String> {
    if fields.len() < 5 {
        return Err("expected 'contact <from> <to> <start> <end> <rate>'".into());
    }
    let node = |s: &str| {
        s.parse::<u32>()
            .map(NodeId)
            .map_err(|_| format!("invalid node id '{s}'"))
    };
    let from = node(fields[0])?;
    let to = node(fields[1])?;
    let start = SimTime::parse_secs(fields[2])?;
    let end = SimTime::parse_secs(fields[3])?;
    let rate: i64 = fields[4]
        .parse()
        .map_err(|_| format!("invalid rate '{}'", fields[4]))?;
    let mut probability = 1.0;
    let mut kind = ContactKind::Scheduled;
    for opt in &fields[5..] {
        match opt.split_once('=') {
            Some(("prob", v)) => {
                probability = v
                    .parse::<f64>()
                    .map_err(|_| format!("invalid probability '{v}'"))?;
            }
            Some(("kind", v)) => kind = v.parse()?,
            _ => return Err(format!("unknown option '{opt}'")),
        }
    }
    Ok(Contact {
        from,
        to,
        start,
        end,
        // Non-positive rates become 0 and fail validation.
        rate: rate.max(0) as u64,
        probability,
        kind,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("bundle needs at least one destination")]
    NoDestination,
    #[error("bundle source {0} is also a destination")]
    SourceIsDestination(NodeId),
    #[error("bundle size must be positive")]
    EmptyPayload,
    #[error("bundle ttl must be positive")]
    InvalidTtl,
}

/// A message with a source, a multicast destination set, a size and a
/// lifetime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub id: u64,
    pub source: NodeId,
    pub destinations: BTreeSet<NodeId>,
    /// Bytes.
    pub size: u64,
    pub created_at: SimTime,
    pub ttl: SimTime,
}

impl Bundle {
    pub fn new(
        id: u64,
        source: NodeId,
        destinations: impl IntoIterator<Item = NodeId>,
        size: u64,
        created_at: SimTime,
        ttl: SimTime,
    ) -> Result<Self, BundleError> {
        let destinations: BTreeSet<NodeId> = destinations.into_iter().collect();
        if destinations.is_empty() {
            return Err(BundleError::NoDestination);
        }
        if destinations.contains(&source) {
            return Err(BundleError::SourceIsDestination(source));
        }
        if size == 0 {
            return Err(BundleError::EmptyPayload);
        }
        if ttl <= SimTime::ZERO {
            return Err(BundleError::InvalidTtl);
        }
        Ok(Bundle {
            id,
            source,
            destinations,
            size,
            created_at,
            ttl,
        })
    }

    /// Last instant at which the bundle may still be delivered.
    pub fn expires_at(&self) -> SimTime {
        self.created_at.saturating_add(self.ttl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(secs: i64) -> SimTime {
        SimTime::from_secs(secs)
    }

    #[test]
    fn parses_single_scheduled_contact() {
        let plan = parse_contact_plan("contact 0 1 10 20 100").unwrap();
        assert_eq!(plan.len(), 1);
        let c = &plan.contacts()[0];
        assert_eq!(c.probability, 1.0);
        assert_eq!(c.kind, ContactKind::Scheduled);
        assert_eq!((c.start, c.end, c.rate), (s(10), s(20), 100));
        assert_eq!(plan.node_count(), 2);
    }

    #[test]
    fn rejects_inverted_interval() {
        let err = parse_contact_plan("contact 0 1 20 10 100").unwrap_err();
        assert!(
            matches!(err, PlanError::Validation { line: Some(1), .. }),
            "{err}"
        );
    }

    #[test]
    fn rejects_bad_rate_and_probability() {
        for text in [
            "contact 0 1 10 20 0",
            "contact 0 1 10 20 -5",
            "contact 0 1 10 20 5 prob=1.5 kind=predicted",
            "contact 0 1 10 20 5 prob=0 kind=predicted",
            "contact 0 1 10 20 5 prob=0.5",
        ] {
            let err = parse_contact_plan(text).unwrap_err();
            assert!(matches!(err, PlanError::Validation { .. }), "{text}: {err}");
        }
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse_contact_plan("# header\ncontact 0 1 10\n").unwrap_err();
        assert!(matches!(err, PlanError::Parse { line: 2, .. }), "{err}");
        let err = parse_contact_plan("link 0 1").unwrap_err();
        assert!(matches!(err, PlanError::Parse { line: 1, .. }));
        let err = parse_contact_plan("period 10\nperiod 20").unwrap_err();
        assert!(matches!(err, PlanError::Parse { line: 2, .. }));
        let err = parse_contact_plan("contact 0 1 1 2 3 color=red").unwrap_err();
        assert!(matches!(err, PlanError::Parse { line: 1, .. }));
    }

    #[test]
    fn sorts_canonically_regardless_of_input_order() {
        let a =
            parse_contact_plan("contact 2 3 5 6 1\ncontact 0 1 5 6 1\ncontact 1 0 0 1 1").unwrap();
        let b =
            parse_contact_plan("contact 1 0 0 1 1\ncontact 0 1 5 6 1\ncontact 2 3 5 6 1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.contacts()[0].from, NodeId(1));
        assert_eq!(a.contacts()[1].from, NodeId(0));
    }

    #[test]
    fn thirty_node_mixed_plan() {
        let mut text = String::from("# mixed scheduled and predicted\n");
        for i in 0..29 {
            text.push_str(&format!(
                "contact {} {} {} {} 100\n",
                i,
                i + 1,
                i * 10,
                i * 10 + 5
            ));
            text.push_str(&format!(
                "contact {} {} {} {} 50 prob=0.7 kind=predicted\n",
                i + 1,
                i,
                i * 10,
                i * 10 + 8
            ));
        }
        let plan = parse_contact_plan(&text).unwrap();
        assert_eq!(plan.node_count(), 30);
        assert_eq!(plan.len(), 58);
    }

    #[test]
    fn nodes_directive_bounds_ids() {
        let plan = parse_contact_plan("nodes 5\ncontact 0 1 0 1 1").unwrap();
        assert_eq!(plan.node_count(), 5);
        assert!(parse_contact_plan("nodes 1\ncontact 0 1 0 1 1").is_err());
    }

    #[test]
    fn active_contacts_use_half_open_intervals() {
        let plan = parse_contact_plan("contact 0 1 10 20 1").unwrap();
        assert_eq!(plan.contacts_active_at(s(15)).len(), 1);
        assert_eq!(plan.contacts_active_at(s(10)).len(), 1);
        assert!(plan.contacts_active_at(s(20)).is_empty());
        assert!(plan.contacts_active_at(s(5)).is_empty());
    }

    #[test]
    fn cyclic_activity_matches_unrolled_membership() {
        let plan = parse_contact_plan("period 100\ncontact 0 1 10 20 1").unwrap();
        let active = plan.contacts_active_at(s(115));
        assert_eq!(active.len(), 1);
        let unrolled = plan.unroll(s(200)).unwrap();
        let direct: Vec<_> = unrolled
            .contacts()
            .iter()
            .filter(|c| c.is_active_at(s(115)))
            .collect();
        assert_eq!(direct.len(), 1);
        assert_eq!(direct[0].start, s(110));
    }

    #[test]
    fn unroll_shifts_and_truncates() {
        let plan = parse_contact_plan("period 100\ncontact 0 1 10 20 1").unwrap();
        let out = plan.unroll(s(250)).unwrap();
        let intervals: Vec<_> = out.contacts().iter().map(|c| (c.start, c.end)).collect();
        assert_eq!(
            intervals,
            vec![(s(10), s(20)), (s(110), s(120)), (s(210), s(220))]
        );
        assert_eq!(out.period(), None);

        let late = parse_contact_plan("period 100\ncontact 0 1 60 70 1").unwrap();
        assert!(late.unroll(s(50)).unwrap().is_empty());

        let same = plan.unroll(s(100)).unwrap();
        assert_eq!(same.contacts(), plan.contacts());

        let clipped = parse_contact_plan("period 100\ncontact 0 1 10 90 1")
            .unwrap()
            .unroll(s(150))
            .unwrap();
        assert_eq!(clipped.contacts()[1].end, s(150));
    }

    #[test]
    fn unroll_requires_period() {
        let plan = parse_contact_plan("contact 0 1 10 20 1").unwrap();
        assert_eq!(plan.unroll(s(100)).unwrap_err(), PlanError::NotCyclic);
    }

    #[test]
    fn period_bounds_contacts() {
        assert!(parse_contact_plan("period 10\ncontact 0 1 5 15 1").is_err());
    }

    #[test]
    fn bundle_invariants() {
        let ok = Bundle::new(1, NodeId(0), [NodeId(1)], 10, s(0), s(100));
        assert!(ok.is_ok());
        assert_eq!(
            Bundle::new(1, NodeId(0), [NodeId(0)], 10, s(0), s(1)).unwrap_err(),
            BundleError::SourceIsDestination(NodeId(0))
        );
        assert_eq!(
            Bundle::new(1, NodeId(0), [], 10, s(0), s(1)).unwrap_err(),
            BundleError::NoDestination
        );
        assert_eq!(
            Bundle::new(1, NodeId(0), [NodeId(1)], 0, s(0), s(1)).unwrap_err(),
            BundleError::EmptyPayload
        );
        assert_eq!(
            Bundle::new(1, NodeId(0), [NodeId(1)], 1, s(0), s(0)).unwrap_err(),
            BundleError::InvalidTtl
        );
    }
}
