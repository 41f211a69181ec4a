//! Deterministic discrete-event simulation of the routing schemes.
//!
//! Three scenario families share one event queue, one measurement/rate
//! cadence and one metrics schema:
//!
//! * `contact`: bundles cross a (possibly cyclic) contact plan under ESP,
//!   hierarchical DHR over compressed tables, epidemic, gossip or direct
//!   delivery;
//! * `multipath`: a positional network where a source multicasts packets
//!   over AODV-discovered disjoint paths (or floods them);
//! * `energy`: sources report to a sink over diffusion gradients, choosing
//!   next hops by hop count or residual energy.

pub mod config;
mod contact;
mod energy;
pub mod event;
pub mod metrics;
mod positional;
pub mod rate;
pub mod runner;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{ConfigError, ExperimentSpec, Policy, ScenarioConfig, ScenarioKind, Source};
pub use metrics::{collect_metrics, Metrics, Tally};
pub use runner::{run_all, run_scenario, write_outputs, Loss, RunOutput};

use crate::contact::{parse_contact_plan, ContactPlan, NodeId};
use crate::generate::{generate, parse_energy, Generated};
use crate::multipath::{parse_moves, parse_topology, Move, Topology};
use crate::time::SimTime;
use event::{EventKind, EventQueue};
use rate::{loss_sample, rate_update, MeasurementHistory, RateParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario input: {0}")]
    Input(String),
}

fn read(path: &Path) -> Result<String, SimError> {
    fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn generated(cfg: &ScenarioConfig) -> Result<Option<Generated>, SimError> {
    match cfg.source {
        Source::Generator { kind, n } => generate(kind, n, cfg.seed)
            .map(Some)
            .map_err(SimError::Input),
        _ => Ok(None),
    }
}

fn load_plan(cfg: &ScenarioConfig) -> Result<ContactPlan, SimError> {
    if let Some(g) = generated(cfg)? {
        return g
            .plan
            .ok_or_else(|| SimError::Input("generator does not produce a contact plan".into()));
    }
    match &cfg.source {
        Source::Plan(p) => parse_contact_plan(&read(p)?)
            .map_err(|e| SimError::Input(format!("{}: {e}", p.display()))),
        _ => Err(SimError::Input("contact scenarios need a plan".into())),
    }
}

/// Topology, scripted moves and initial energy of a positional scenario.
fn load_positional(cfg: &ScenarioConfig) -> Result<(Topology, Vec<Move>, Vec<f64>), SimError> {
    let (topo, mut moves, mut energy) = match generated(cfg)? {
        Some(g) => (
            g.topology
                .ok_or_else(|| SimError::Input("generator does not produce a topology".into()))?,
            g.moves,
            g.energy,
        ),
        None => match &cfg.source {
            Source::Topology(p) => (
                parse_topology(&read(p)?)
                    .map_err(|e| SimError::Input(format!("{}: {e}", p.display())))?,
                Vec::new(),
                Vec::new(),
            ),
            _ => {
                return Err(SimError::Input(
                    "positional scenarios need a topology".into(),
                ))
            }
        },
    };
    let n = topo.node_count();
    if let Some(p) = &cfg.moves {
        moves =
            parse_moves(&read(p)?).map_err(|e| SimError::Input(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = &cfg.energy {
        energy = parse_energy(&read(p)?, n, cfg.energy_default)
            .map_err(|e| SimError::Input(format!("{}: {e}", p.display())))?;
    }
    if energy.is_empty() {
        energy = vec![cfg.energy_default; n];
    }
    if let Some(m) = moves.iter().find(|m| m.node.index() >= n) {
        return Err(SimError::Input(format!(
            "move names node {} of {n}",
            m.node
        )));
    }
    Ok((topo, moves, energy))
}

fn check_node(v: u32, n: usize, what: &str) -> Result<NodeId, SimError> {
    if (v as usize) < n {
        Ok(NodeId(v))
    } else {
        Err(SimError::Input(format!(
            "{what} {v} is not among {n} nodes"
        )))
    }
}

/// Seeded uniform draw in `[0, 1)` for an unordered event pair, independent
/// of the order in which the simulation asks for it.
pub fn hashed_draw(seed: u64, a: u64, b: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mix = ChaCha8Rng::seed_from_u64(rng.gen::<u64>() ^ a.rotate_left(32) ^ b);
    mix.gen::<f64>()
}

/// Gap between packets at `rate` per second, at least one millisecond.
fn packet_interval(rate: f64) -> SimTime {
    SimTime(((1000.0 / rate).round() as i64).max(1))
}

/// Measurement and rate-update ticks.
#[derive(Debug)]
pub(crate) struct Cadence {
    pub history: MeasurementHistory,
    pub rate: f64,
    pub params: RateParams,
    pub ticks: u64,
    pub updates: u64,
    sent: u64,
    lost: u64,
}

impl Cadence {
    /// Schedules every tick up to the horizon. Measurements go first so that
    /// a measurement and an update sharing a timestamp run in that order.
    pub fn new(cfg: &ScenarioConfig, q: &mut EventQueue) -> Self {
        for (period, kind) in [
            (cfg.measurement_period, EventKind::MeasurementTick),
            (cfg.rate_update_period, EventKind::RateUpdateTick),
        ] {
            for k in 1..=cfg.horizon.0 / period.0 {
                q.schedule(SimTime(k * period.0), kind);
            }
        }
        Cadence {
            history: MeasurementHistory::default(),
            rate: cfg.rate,
            params: RateParams {
                beta: cfg.beta,
                rate_min: cfg.rate_min,
                measurement_period: cfg.measurement_period.as_secs_f64(),
            },
            ticks: 0,
            updates: 0,
            sent: 0,
            lost: 0,
        }
    }

    /// A (bundle, destination) outcome settled during the current period.
    pub fn resolved(&mut self, lost: bool) {
        self.sent += 1;
        self.lost += lost as u64;
    }

    pub fn measure(&mut self) -> f64 {
        let sample = loss_sample(self.sent, self.lost);
        self.history.push(sample);
        self.ticks += 1;
        self.sent = 0;
        self.lost = 0;
        sample
    }

    pub fn update(&mut self) -> Option<f64> {
        let next = rate_update(&self.history, self.rate, &self.params)?;
        self.rate = next;
        self.updates += 1;
        Some(next)
    }

    pub fn fill(&self, t: &mut Tally) {
        t.measurement_ticks = self.ticks;
        t.rate_updates = self.updates;
        t.final_rate = self.rate;
    }
}

/// Trace lines, collected only when asked for.
#[derive(Debug, Default)]
pub(crate) struct Trace {
    enabled: bool,
    pub lines: Vec<String>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Trace {
            enabled,
            lines: Vec::new(),
        }
    }

    pub fn note(&mut self, line: impl FnOnce() -> String) {
        if self.enabled {
            self.lines.push(line());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_stable_and_spread() {
        assert_eq!(hashed_draw(7, 3, 4), hashed_draw(7, 3, 4));
        assert_ne!(hashed_draw(7, 3, 4), hashed_draw(8, 3, 4));
        assert_ne!(hashed_draw(7, 3, 4), hashed_draw(7, 4, 3));
        let mean: f64 = (0..2000).map(|i| hashed_draw(1, i, 0)).sum::<f64>() / 2000.0;
        assert!((mean - 0.5).abs() < 0.05);
    }
}
