//! Radio energy accounting, directed-diffusion gradients and power-aware
//! next-hop choice.
//!
//! Energy is tracked in integer picojoules so that drained energy and the
//! sum of charges agree exactly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::NodeId;
use crate::multipath::Topology;
use crate::time::SimTime;

const PJ_PER_J: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnergyError {
    #[error("source {0} cannot reach the sink")]
    NoGradient(NodeId),
    #[error("node {0} has no live neighbour on a gradient")]
    NoAliveNeighbor(NodeId),
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
}

/// First-order radio model constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// J/B spent by transmitter electronics.
    pub tx_elec: f64,
    /// J/(B·m²) spent by the amplifier.
    pub tx_amp: f64,
    /// J/B spent receiving.
    pub rx_elec: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_elec: 5e-8,
            tx_amp: 1e-10,
            rx_elec: 5e-8,
        }
    }
}

/// Joules to send `size` bytes over `distance` metres.
pub fn transmit_energy(size: u64, distance: f64, params: &RadioParams) -> f64 {
    let size = size as f64;
    params.tx_elec * size + params.tx_amp * size * distance * distance
}

pub fn receive_energy(size: u64, params: &RadioParams) -> f64 {
    params.rx_elec * size as f64
}

fn to_pj(joules: f64) -> u64 {
    (joules * PJ_PER_J).round() as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub params: RadioParams,
    initial: Vec<u64>,
    residual: Vec<u64>,
    charged: Vec<u64>,
    died_at: Vec<Option<SimTime>>,
}

impl EnergyState {
    pub fn new(initial_joules: &[f64], params: RadioParams) -> Self {
        let initial: Vec<u64> = initial_joules.iter().map(|&j| to_pj(j)).collect();
        let n = initial.len();
        EnergyState {
            params,
            residual: initial.clone(),
            initial,
            charged: vec![0; n],
            died_at: vec![None; n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.initial.len()
    }

    pub fn initial_pj(&self, v: NodeId) -> u64 {
        self.initial[v.index()]
    }

    pub fn residual_pj(&self, v: NodeId) -> u64 {
        self.residual[v.index()]
    }

    pub fn residual(&self, v: NodeId) -> f64 {
        self.residual[v.index()] as f64 / PJ_PER_J
    }

    /// Total drained from `v`.
    pub fn charged_pj(&self, v: NodeId) -> u64 {
        self.charged[v.index()]
    }

    pub fn is_alive(&self, v: NodeId) -> bool {
        self.residual[v.index()] > 0
    }

    pub fn died_at(&self, v: NodeId) -> Option<SimTime> {
        self.died_at[v.index()]
    }

    /// Drains up to `joules` from `v`. Returns false when the node could not
    /// afford the full amount, in which case it is left dead.
    pub fn charge(&mut self, v: NodeId, joules: f64, now: SimTime) -> bool {
        let i = v.index();
        if self.residual[i] == 0 {
            return false;
        }
        let cost = to_pj(joules);
        let paid = cost.min(self.residual[i]);
        self.residual[i] -= paid;
        self.charged[i] += paid;
        if self.residual[i] == 0 {
            self.died_at[i] = Some(now);
        }
        paid == cost
    }

    pub fn charge_tx(&mut self, v: NodeId, size: u64, distance: f64, now: SimTime) -> bool {
        let cost = transmit_energy(size, distance, &self.params);
        self.charge(v, cost, now)
    }

    pub fn charge_rx(&mut self, v: NodeId, size: u64, now: SimTime) -> bool {
        let cost = receive_energy(size, &self.params);
        self.charge(v, cost, now)
    }

    pub fn min_residual(&self) -> f64 {
        self.residual.iter().copied().min().unwrap_or(0) as f64 / PJ_PER_J
    }

    /// Time of the first death.
    pub fn first_death(&self) -> Option<SimTime> {
        self.died_at.iter().flatten().min().copied()
    }
}

/// One `energy <t> <node> <residual>` sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub at: SimTime,
    pub node: NodeId,
    pub residual: f64,
}

impl EnergyRecord {
    pub fn render(&self) -> String {
        format!("energy {} {} {}", self.at, self.node, self.residual)
    }
}

/// First time any node's residual reads zero, in seconds; infinite when
/// nobody died.
pub fn network_lifetime(trace: &[EnergyRecord]) -> f64 {
    trace
        .iter()
        .filter(|r| r.residual <= 0.0)
        .map(|r| r.at.as_secs_f64())
        .fold(f64::INFINITY, f64::min)
}

/// Gradient state toward one sink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientTable {
    pub sink: NodeId,
    pub interest_expiry: SimTime,
    /// Hop distance to the sink over the interest flood.
    pub distance: Vec<Option<u32>>,
    /// Neighbours one hop closer to the sink, in id order.
    pub gradients: Vec<Vec<NodeId>>,
    /// Neighbour reinforced by exploratory data, per node.
    pub reinforced: Vec<Option<NodeId>>,
}

impl GradientTable {
    pub fn reinforced_path(&self, source: NodeId) -> Vec<NodeId> {
        let mut path = vec![source];
        let mut at = source;
        while let Some(next) = self.reinforced[at.index()] {
            path.push(next);
            at = next;
        }
        path
    }
}

/// Floods the sink's interest over live links among `alive` nodes, then
/// reinforces the earliest exploratory-data path from every source (ties to
/// the lower neighbour id).
pub fn diffuse_and_reinforce(
    topo: &Topology,
    sink: NodeId,
    sources: &[NodeId],
    now: SimTime,
    interest_lifetime: SimTime,
    alive: impl Fn(NodeId) -> bool,
) -> Result<GradientTable, EnergyError> {
    let n = topo.node_count();
    if sink.index() >= n {
        return Err(EnergyError::UnknownNode(sink));
    }
    let mut distance: Vec<Option<u32>> = vec![None; n];
    distance[sink.index()] = Some(0);
    let mut queue = VecDeque::from([sink]);
    while let Some(v) = queue.pop_front() {
        let d = distance[v.index()].unwrap();
        for u in topo.live_neighbors(v) {
            if distance[u.index()].is_none() && alive(u) {
                distance[u.index()] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    let gradients: Vec<Vec<NodeId>> = (0..n as u32)
        .map(NodeId)
        .map(|v| match distance[v.index()] {
            Some(d) if d > 0 => topo
                .live_neighbors(v)
                .into_iter()
                .filter(|u| distance[u.index()] == Some(d - 1))
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    let mut reinforced: Vec<Option<NodeId>> = vec![None; n];
    for &s in sources {
        if s.index() >= n {
            return Err(EnergyError::UnknownNode(s));
        }
        if distance[s.index()].is_none() {
            return Err(EnergyError::NoGradient(s));
        }
        let mut at = s;
        while at != sink {
            if reinforced[at.index()].is_some() {
                break;
            }
            let next = gradients[at.index()][0];
            reinforced[at.index()] = Some(next);
            at = next;
        }
    }
    Ok(GradientTable {
        sink,
        interest_expiry: now.saturating_add(interest_lifetime),
        distance,
        gradients,
        reinforced,
    })
}

/// The live gradient neighbour with the most residual energy; ties go to
/// the reinforced neighbour, then the lower id.
pub fn power_aware_next_hop(
    node: NodeId,
    table: &GradientTable,
    energy: &EnergyState,
) -> Result<NodeId, EnergyError> {
    let reinforced = table.reinforced[node.index()];
    table.gradients[node.index()]
        .iter()
        .copied()
        .filter(|&u| energy.is_alive(u))
        .max_by(|&a, &b| {
            energy
                .residual_pj(a)
                .cmp(&energy.residual_pj(b))
                .then((Some(a) == reinforced).cmp(&(Some(b) == reinforced)))
                .then(b.cmp(&a))
        })
        .ok_or(EnergyError::NoAliveNeighbor(node))
}

/// The reinforced neighbour while it lives, else the lowest-id live
/// gradient neighbour.
pub fn min_hop_next_hop(
    node: NodeId,
    table: &GradientTable,
    energy: &EnergyState,
) -> Result<NodeId, EnergyError> {
    table.reinforced[node.index()]
        .filter(|&u| energy.is_alive(u))
        .or_else(|| {
            table.gradients[node.index()]
                .iter()
                .copied()
                .find(|&u| energy.is_alive(u))
        })
        .ok_or(EnergyError::NoAliveNeighbor(node))
}
