use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MultipathError;
use crate::contact::NodeId;
use crate::time::SimTime;

/// Nodes at planar positions (metres) joined by undirected links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    /// Each link stored once as `(low, high)`.
    links: BTreeSet<(u32, u32)>,
    range: f64,
    capacity: usize,
}

fn key(a: NodeId, b: NodeId) -> (u32, u32) {
    (a.0.min(b.0), a.0.max(b.0))
}

impl Topology {
    pub fn new(positions: Vec<(f64, f64)>, range: f64, capacity: usize) -> Self {
        Topology {
            positions,
            links: BTreeSet::new(),
            range,
            capacity,
        }
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn position(&self, v: NodeId) -> (f64, f64) {
        self.positions[v.index()]
    }

    pub fn set_position(&mut self, v: NodeId, x: f64, y: f64) {
        self.positions[v.index()] = (x, y);
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (ax, ay) = self.position(a);
        let (bx, by) = self.position(b);
        (ax - bx).hypot(ay - by)
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.links
            .iter()
            .filter(|&&(a, b)| a == v.0 || b == v.0)
            .count()
    }

    pub fn has_link(&self, a: NodeId, b: NodeId) -> bool {
        self.links.contains(&key(a, b))
    }

    /// Whether `a`-`b` could be linked now: distinct, in range, both below
    /// capacity and not already linked.
    pub fn can_link(&self, a: NodeId, b: NodeId) -> bool {
        a != b
            && !self.has_link(a, b)
            && self.distance(a, b) <= self.range
            && self.degree(a) < self.capacity
            && self.degree(b) < self.capacity
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId) -> Result<(), MultipathError> {
        for v in [a, b] {
            if v.index() >= self.node_count() {
                return Err(MultipathError::UnknownNode(v));
            }
        }
        if !self.can_link(a, b) {
            return Err(MultipathError::Invalid(format!("cannot link {a} and {b}")));
        }
        self.links.insert(key(a, b));
        Ok(())
    }

    pub fn remove_link(&mut self, a: NodeId, b: NodeId) -> bool {
        self.links.remove(&key(a, b))
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.links.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// A link is alive while its endpoints remain within range.
    pub fn link_alive(&self, a: NodeId, b: NodeId) -> bool {
        self.has_link(a, b) && self.distance(a, b) <= self.range
    }

    /// Linked neighbours in id order, alive or not.
    pub fn neighbors(&self, v: NodeId) -> Vec<NodeId> {
        self.links
            .iter()
            .filter_map(|&(a, b)| {
                if a == v.0 {
                    Some(NodeId(b))
                } else if b == v.0 {
                    Some(NodeId(a))
                } else {
                    None
                }
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn live_neighbors(&self, v: NodeId) -> Vec<NodeId> {
        self.neighbors(v)
            .into_iter()
            .filter(|&u| self.link_alive(v, u))
            .collect()
    }

    /// Connected components over linked pairs, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![NodeId(start as u32)];
            let mut queue = VecDeque::from([NodeId(start as u32)]);
            while let Some(v) = queue.pop_front() {
                for u in self.neighbors(v) {
                    if !seen[u.index()] {
                        seen[u.index()] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// `range`, `capacity`, `node` and `link` records.
    pub fn render(&self) -> String {
        let mut out = format!("range {}\ncapacity {}\n", self.range, self.capacity);
        for (i, (x, y)) in self.positions.iter().enumerate() {
            out.push_str(&format!("node {i} {x} {y}\n"));
        }
        for (a, b) in &self.links {
            out.push_str(&format!("link {a} {b}\n"));
        }
        out
    }
}

pub fn parse_topology(text: &str) -> Result<Topology, MultipathError> {
    let mut range = None;
    let mut capacity = None;
    let mut nodes: Vec<(u32, f64, f64)> = Vec::new();
    let mut links: Vec<(usize, u32, u32)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| MultipathError::Parse {
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid number '{s}'")))
        };
        let id = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| err(format!("invalid node id '{s}'")))
        };
        match (f[0], f.len()) {
            ("range", 2) => range = Some(num(f[1])?),
            ("capacity", 2) => {
                capacity = Some(
                    f[1].parse::<usize>()
                        .map_err(|_| err(format!("invalid capacity '{}'", f[1])))?,
                )
            }
            ("node", 4) => nodes.push((id(f[1])?, num(f[2])?, num(f[3])?)),
            ("link", 3) => links.push((idx + 1, id(f[1])?, id(f[2])?)),
            (kw @ ("range" | "capacity" | "node" | "link"), _) => {
                return Err(err(format!("wrong field count for '{kw}'")))
            }
            (other, _) => return Err(err(format!("unknown record '{other}'"))),
        }
    }
    nodes.sort_by_key(|n| n.0);
    if nodes.iter().enumerate().any(|(i, n)| n.0 as usize != i) {
        return Err(MultipathError::Invalid(
            "node ids must be exactly 0..n, each once".into(),
        ));
    }
    let mut topo = Topology::new(
        nodes.iter().map(|&(_, x, y)| (x, y)).collect(),
        range.ok_or_else(|| MultipathError::Invalid("missing 'range'".into()))?,
        capacity.unwrap_or(usize::MAX),
    );
    for (line, a, b) in links {
        topo.add_link(NodeId(a), NodeId(b))
            .map_err(|e| MultipathError::Parse {
                line,
                message: e.to_string(),
            })?;
    }
    Ok(topo)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub n: usize,
    pub seed: u64,
    /// Side of the square deployment area, metres.
    pub side: f64,
    pub range: f64,
    pub k_neighbors: usize,
    pub capacity: usize,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            n: 30,
            seed: 7,
            side: 100.0,
            range: 30.0,
            k_neighbors: 3,
            capacity: 6,
        }
    }
}

/// Uniform random placement followed by [`link_nearest`].
pub fn create_topology(params: &TopologyParams) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let positions = (0..params.n)
        .map(|_| {
            (
                rng.gen_range(0.0..params.side),
                rng.gen_range(0.0..params.side),
            )
        })
        .collect();
    let mut topo = Topology::new(positions, params.range, params.capacity);
    link_nearest(&mut topo, params.k_neighbors);
    topo
}

/// Links every node to its `k` nearest neighbours (ties by id) where range
/// and capacity allow, then repeatedly adds the shortest admissible link
/// between two components until none remains.
pub fn link_nearest(topo: &mut Topology, k: usize) {
    let n = topo.node_count() as u32;
    for v in (0..n).map(NodeId) {
        let mut others: Vec<NodeId> = (0..n).map(NodeId).filter(|&u| u != v).collect();
        others.sort_by(|&a, &b| {
            topo.distance(v, a)
                .total_cmp(&topo.distance(v, b))
                .then(a.cmp(&b))
        });
        for u in others.into_iter().take(k) {
            if topo.can_link(v, u) {
                topo.links.insert(key(v, u));
            }
        }
    }
    loop {
        let comps = topo.components();
        if comps.len() <= 1 {
            break;
        }
        let mut comp_of = vec![0; n as usize];
        for (i, c) in comps.iter().enumerate() {
            for v in c {
                comp_of[v.index()] = i;
            }
        }
        let best = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (NodeId(a), NodeId(b))))
            .filter(|&(a, b)| comp_of[a.index()] != comp_of[b.index()] && topo.can_link(a, b))
            .min_by(|&(a1, b1), &(a2, b2)| {
                topo.distance(a1, b1)
                    .total_cmp(&topo.distance(a2, b2))
                    .then((a1, b1).cmp(&(a2, b2)))
            });
        match best {
            Some((a, b)) => {
                topo.links.insert(key(a, b));
            }
            None => break,
        }
    }
}

/// A scripted position change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub node: NodeId,
    pub at: SimTime,
    pub x: f64,
    pub y: f64,
}

impl Move {
    pub fn render(&self) -> String {
        format!("move {} {} {} {}", self.node, self.at, self.x, self.y)
    }
}

/// `move <node> <time_s> <x> <y>` records, sorted by time then node.
pub fn parse_moves(text: &str) -> Result<Vec<Move>, MultipathError> {
    let mut moves = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| MultipathError::Parse {
            line: idx + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f[0] != "move" || f.len() != 5 {
            return Err(err("expected 'move <node> <time_s> <x> <y>'".into()));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid number '{s}'")))
        };
        moves.push(Move {
            node: NodeId(
                f[1].parse()
                    .map_err(|_| err(format!("invalid node id '{}'", f[1])))?,
            ),
            at: SimTime::parse_secs(f[2]).map_err(err)?,
            x: num(f[3])?,
            y: num(f[4])?,
        });
    }
    moves.sort_by_key(|m| (m.at, m.node));
    Ok(moves)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64], range: f64, capacity: usize, k: usize) -> Topology {
        let mut t = Topology::new(xs.iter().map(|&x| (x, 0.0)).collect(), range, capacity);
        link_nearest(&mut t, k);
        t
    }

    fn links(t: &Topology) -> Vec<(u32, u32)> {
        t.links().map(|(a, b)| (a.0, b.0)).collect()
    }

    #[test]
    fn nearest_then_bridge() {
        let t = line(&[0.0, 1.0, 2.1, 3.1], 2.0, 8, 1);
        assert_eq!(links(&t), vec![(0, 1), (1, 2), (2, 3)]);
        assert!(t.is_connected());
    }

    #[test]
    fn capacity_limits_links() {
        let t = line(&[0.0, 1.0, 2.0], 5.0, 1, 1);
        assert_eq!(links(&t), vec![(0, 1)]);
        assert_eq!(
            t.components(),
            vec![vec![NodeId(0), NodeId(1)], vec![NodeId(2)]]
        );
    }

    #[test]
    fn out_of_range_stays_apart() {
        let t = line(&[0.0, 1.0, 10.0, 11.0], 2.0, 8, 1);
        assert_eq!(t.components().len(), 2);
    }

    #[test]
    fn seeded_topology_is_reproducible() {
        let p = TopologyParams::default();
        let a = create_topology(&p);
        assert_eq!(a, create_topology(&p));
        assert_eq!(a.node_count(), 30);
        for (x, y) in (0..30).map(|v| a.position(NodeId(v))) {
            assert!((0.0..100.0).contains(&x) && (0.0..100.0).contains(&y));
        }
        let other = create_topology(&TopologyParams { seed: 8, ..p });
        assert_ne!(a, other);
    }

    #[test]
    fn round_trip() {
        let t = create_topology(&TopologyParams::default());
        let back = parse_topology(&t.render()).unwrap();
        assert_eq!(back, t);
        assert!(parse_topology("range 1\nnode 0 0 0\nnode 2 0 0").is_err());
        assert!(parse_topology("range 1\nnode 0 0 0\nnode 1 5 0\nlink 0 1").is_err());
        assert!(parse_topology("node 0 0 0").is_err());
    }

    #[test]
    fn moves_parse_sorted() {
        let m = parse_moves("move 3 5 1 2\n# c\nmove 1 2.5 0 0\n").unwrap();
        assert_eq!(m[0].node, NodeId(1));
        assert_eq!(m[0].at, SimTime(2500));
        assert_eq!(m[1].render(), "move 3 5 1 2");
        assert!(parse_moves("move 1 2").is_err());
    }

    #[test]
    fn liveness_follows_position() {
        let mut t = line(&[0.0, 1.0], 2.0, 8, 1);
        assert!(t.link_alive(NodeId(0), NodeId(1)));
        t.set_position(NodeId(1), 5.0, 0.0);
        assert!(!t.link_alive(NodeId(0), NodeId(1)));
        assert!(t.has_link(NodeId(0), NodeId(1)));
        assert!(t.live_neighbors(NodeId(0)).is_empty());
    }
}
