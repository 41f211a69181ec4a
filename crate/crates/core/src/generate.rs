//! Reproducible scenario generators.
//!
//! Every generator is a pure function of its kind, size and seed. The same
//! output backs both `generate` (written to files) and in-memory scenarios
//! named by a `generator` config key.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contact::{Contact, ContactPlan, NodeId};
use crate::multipath::{
    create_topology, select_disjoint_paths, Move, PathSet, Topology, TopologyParams,
};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    RandomTopology,
    GridPlan,
    CyclicPlan,
    DumbbellEnergy,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] = [
        GeneratorKind::RandomTopology,
        GeneratorKind::GridPlan,
        GeneratorKind::CyclicPlan,
        GeneratorKind::DumbbellEnergy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::RandomTopology => "random-topology",
            GeneratorKind::GridPlan => "grid-plan",
            GeneratorKind::CyclicPlan => "cyclic-plan",
            GeneratorKind::DumbbellEnergy => "dumbbell-energy",
        }
    }

    /// Config keys describing how to run what this generator produces.
    pub fn defaults(self, n: usize) -> Vec<(String, String)> {
        let list =
            |r: std::ops::Range<usize>| r.map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        match self {
            GeneratorKind::GridPlan => {
                kv(&[("scenario", "contact".into()), ("branching", "3".into())])
            }
            GeneratorKind::CyclicPlan => kv(&[("scenario", "contact".into())]),
            GeneratorKind::RandomTopology => kv(&[
                ("scenario", "multipath".into()),
                ("source", "0".into()),
                ("destinations", list(n.saturating_sub(3)..n)),
                ("horizon", MULTIPATH_HORIZON_S.to_string()),
            ]),
            GeneratorKind::DumbbellEnergy => kv(&[
                ("scenario", "energy".into()),
                ("sources", list(0..n.saturating_sub(5))),
                ("sink", n.saturating_sub(1).to_string()),
                ("horizon", "2000".into()),
            ]),
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            GeneratorKind::RandomTopology => 30,
            GeneratorKind::GridPlan => 27,
            GeneratorKind::CyclicPlan => 12,
            GeneratorKind::DumbbellEnergy => 9,
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown generator kind '{s}'"))
    }
}

/// Generated inputs plus the config keys that describe how to use them.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub plan: Option<ContactPlan>,
    pub topology: Option<Topology>,
    pub moves: Vec<Move>,
    /// Initial energy per node, joules.
    pub energy: Vec<f64>,
    pub config: Vec<(String, String)>,
}

pub fn generate(kind: GeneratorKind, n: usize, seed: u64) -> Result<Generated, String> {
    match kind {
        GeneratorKind::GridPlan => grid_plan(n, seed),
        GeneratorKind::CyclicPlan => cyclic_plan(n, seed),
        GeneratorKind::RandomTopology => random_topology(n, seed),
        GeneratorKind::DumbbellEnergy => dumbbell_energy(n),
    }
}

fn kv(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

pub const GRID_PERIOD_S: i64 = 100;
const GRID_CONTACT_S: i64 = 20;
const GRID_BASE_RATE: u64 = 10_000;

/// Nodes on a base-3 lattice: node `v`'s coordinates are its base-3 digits.
/// Neighbours along digit `j` meet for 20 s once per 100 s period, at
/// `10000 / 2^j` B/s, with seeded offsets. Lower digits talk faster, so
/// volume-driven clustering groups them first.
pub fn grid_plan(n: usize, seed: u64) -> Result<Generated, String> {
    if n < 2 {
        return Err("grid plan needs at least 2 nodes".into());
    }
    let mut dims = 0;
    while 3usize.pow(dims) < n {
        dims += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = SimTime::from_secs(GRID_PERIOD_S);
    let mut contacts = Vec::new();
    for j in 0..dims {
        let step = 3usize.pow(j);
        let rate = (GRID_BASE_RATE >> j).max(1);
        for v in 0..n {
            if (v / step) % 3 == 2 || v + step >= n {
                continue;
            }
            let u = v + step;
            for (a, b) in [(v, u), (u, v)] {
                let offset = rng.gen_range(0..=(GRID_PERIOD_S - GRID_CONTACT_S) * 1000);
                contacts.push(Contact::scheduled(
                    a as u32,
                    b as u32,
                    SimTime(offset),
                    SimTime(offset + GRID_CONTACT_S * 1000),
                    rate,
                ));
            }
        }
    }
    let plan = ContactPlan::new(contacts, Some(period), Some(n)).map_err(|e| e.to_string())?;
    Ok(Generated {
        plan: Some(plan),
        topology: None,
        moves: Vec::new(),
        energy: Vec::new(),
        config: GeneratorKind::GridPlan.defaults(n),
    })
}

/// A bidirectional ring (so the plan is connected) plus `n` random extra
/// contacts, all within a 100 s period.
pub fn cyclic_plan(n: usize, seed: u64) -> Result<Generated, String> {
    if n < 2 {
        return Err("cyclic plan needs at least 2 nodes".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let contact = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(5_000..=10_000);
        let start = rng.gen_range(0..=100_000 - len);
        Contact::scheduled(
            a as u32,
            b as u32,
            SimTime(start),
            SimTime(start + len),
            rng.gen_range(1..=5) * 1000,
        )
    };
    let mut contacts = Vec::new();
    for v in 0..n {
        let u = (v + 1) % n;
        if u != v && !(n == 2 && v == 1) {
            contacts.push(contact(v, u, &mut rng));
            contacts.push(contact(u, v, &mut rng));
        }
    }
    for _ in 0..n {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        contacts.push(contact(a, b, &mut rng));
    }
    let plan = ContactPlan::new(contacts, Some(SimTime::from_secs(100)), Some(n))
        .map_err(|e| e.to_string())?;
    Ok(Generated {
        plan: Some(plan),
        topology: None,
        moves: Vec::new(),
        energy: Vec::new(),
        config: GeneratorKind::CyclicPlan.defaults(n),
    })
}

pub const MULTIPATH_HORIZON_S: i64 = 60;

/// Seeded positional topology with node 0 as multicast source and the three
/// highest ids as destinations. At mid-run one interior node of a primary
/// path walks out of range.
pub fn random_topology(n: usize, seed: u64) -> Result<Generated, String> {
    if n < 5 {
        return Err("random topology needs at least 5 nodes".into());
    }
    let params = TopologyParams {
        n,
        seed,
        ..TopologyParams::default()
    };
    let topo = create_topology(&params);
    let dests: Vec<usize> = (n - 3..n).collect();
    // Prefer a destination whose primary path has a disjoint backup, so the
    // move exercises failover rather than a full rediscovery.
    let sets: Vec<PathSet> = dests
        .iter()
        .filter_map(|&d| select_disjoint_paths(&topo, NodeId(0), NodeId(d as u32), 2).ok())
        .collect();
    let interior = |s: &PathSet| {
        s.primary().and_then(|p| {
            p[1..p.len() - 1]
                .iter()
                .copied()
                .find(|v| !dests.contains(&v.index()))
        })
    };
    let chosen = sets
        .iter()
        .filter(|s| s.paths.len() > 1)
        .chain(sets.iter())
        .find_map(interior);
    let mut moves = Vec::new();
    if let Some(node) = chosen {
        let (x, y) = topo.position(node);
        moves.push(Move {
            node,
            at: SimTime::from_secs(MULTIPATH_HORIZON_S / 2),
            x: x + 10.0 * params.side,
            y,
        });
    }
    Ok(Generated {
        plan: None,
        topology: Some(topo),
        moves,
        energy: Vec::new(),
        config: GeneratorKind::RandomTopology.defaults(n),
    })
}

/// Two halves joined only through two gateways. Sources sit on the left,
/// the sink on the right. The lower-id gateway starts with half the energy
/// of the other, so always relaying through it exhausts it early.
///
/// Layout for `n` nodes: `n - 5` sources, gateways `n - 5` and `n - 4`,
/// right-side nodes `n - 3`, `n - 2` and the sink `n - 1`.
pub fn dumbbell_energy(n: usize) -> Result<Generated, String> {
    if n < 6 {
        return Err("dumbbell needs at least 6 nodes".into());
    }
    let sources = n - 5;
    let (g1, g2) = (sources, sources + 1);
    let right = [n - 3, n - 2, n - 1];
    let mut positions = Vec::new();
    for i in 0..sources {
        positions.push((0.0, 10.0 * i as f64));
    }
    positions.push((50.0, 0.0));
    positions.push((50.0, 10.0));
    for (i, _) in right.iter().enumerate() {
        positions.push((100.0, 10.0 * i as f64));
    }
    let mut topo = Topology::new(positions, 80.0, n);
    let link = |t: &mut Topology, a: usize, b: usize| {
        t.add_link(NodeId(a as u32), NodeId(b as u32))
            .map_err(|e| e.to_string())
    };
    for s in 0..sources {
        link(&mut topo, s, g1)?;
        link(&mut topo, s, g2)?;
    }
    for &r in &right {
        link(&mut topo, g1, r)?;
        link(&mut topo, g2, r)?;
    }
    link(&mut topo, right[0], right[1])?;
    link(&mut topo, right[1], right[2])?;
    let mut energy = vec![10.0; n];
    energy[g1] = 0.5;
    energy[g2] = 1.0;
    energy[n - 1] = 1000.0;
    Ok(Generated {
        plan: None,
        topology: Some(topo),
        moves: Vec::new(),
        energy,
        config: GeneratorKind::DumbbellEnergy.defaults(n),
    })
}

/// `initial <node> <joules>` records.
pub fn render_energy(energy: &[f64]) -> String {
    energy
        .iter()
        .enumerate()
        .map(|(i, e)| format!("initial {i} {e}\n"))
        .collect()
}

pub fn parse_energy(text: &str, n: usize, default: f64) -> Result<Vec<f64>, String> {
    let mut out = vec![default; n];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || format!("line {}: expected 'initial <node> <joules>'", idx + 1);
        if f.len() != 3 || f[0] != "initial" {
            return Err(bad());
        }
        let node: usize = f[1].parse().map_err(|_| bad())?;
        let joules: f64 = f[2].parse().map_err(|_| bad())?;
        if node >= n || !(joules.is_finite() && joules >= 0.0) {
            return Err(format!("line {}: invalid energy record", idx + 1));
        }
        out[node] = joules;
    }
    Ok(out)
}
