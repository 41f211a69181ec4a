//! Sources reporting to a sink over diffusion gradients while batteries
//! drain.

use super::event::{EventKind, EventQueue};
use super::{
    check_node, load_positional, packet_interval, Cadence, Policy, RunOutput, ScenarioConfig,
    SimError, Tally, Trace,
};
use crate::contact::NodeId;
use crate::energy::{
    diffuse_and_reinforce, min_hop_next_hop, power_aware_next_hop, EnergyError, EnergyRecord,
    EnergyState, GradientTable, RadioParams,
};
use crate::multipath::Topology;
use crate::time::SimTime;

struct EnergySim<'a> {
    cfg: &'a ScenarioConfig,
    topo: Topology,
    sink: NodeId,
    sources: Vec<NodeId>,
    energy: EnergyState,
    table: GradientTable,
    /// Creation time of each packet.
    packets: Vec<SimTime>,
    transfers: Vec<(usize, NodeId, NodeId)>,
    in_flight: u64,
    q: EventQueue,
    cadence: Cadence,
    trace: Trace,
    tally: Tally,
    records: Vec<EnergyRecord>,
    recorded: Vec<bool>,
}

/// Gradients toward `sink` over living nodes; sources cut off from the sink
/// are left out.
fn gradients(
    topo: &Topology,
    sink: NodeId,
    sources: &[NodeId],
    energy: &EnergyState,
    now: SimTime,
    lifetime: SimTime,
) -> GradientTable {
    let mut sources: Vec<NodeId> = sources
        .iter()
        .copied()
        .filter(|&s| energy.is_alive(s))
        .collect();
    loop {
        match diffuse_and_reinforce(topo, sink, &sources, now, lifetime, |v| energy.is_alive(v)) {
            Ok(t) => return t,
            Err(EnergyError::NoGradient(s)) => sources.retain(|&x| x != s),
            Err(e) => unreachable!("nodes were validated: {e}"),
        }
    }
}

pub(crate) fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let (topo, _, initial) = load_positional(cfg)?;
    let n = topo.node_count();
    let sink = check_node(
        cfg.sink
            .ok_or_else(|| SimError::Input("energy scenarios need a sink".into()))?,
        n,
        "sink",
    )?;
    let sources = cfg
        .sources
        .iter()
        .map(|&s| check_node(s, n, "source"))
        .collect::<Result<Vec<_>, _>>()?;
    if sources.is_empty() || sources.contains(&sink) {
        return Err(SimError::Input(
            "sources must be non-empty and exclude the sink".into(),
        ));
    }
    let energy = EnergyState::new(&initial, RadioParams::default());
    let table = gradients(
        &topo,
        sink,
        &sources,
        &energy,
        SimTime::ZERO,
        cfg.measurement_period,
    );
    let mut q = EventQueue::new();
    let cadence = Cadence::new(cfg, &mut q);
    for k in 0..sources.len() {
        q.schedule(SimTime::ZERO, EventKind::BundleGenerated(k));
    }
    let mut sim = EnergySim {
        cfg,
        topo,
        sink,
        sources,
        energy,
        table,
        packets: Vec::new(),
        transfers: Vec::new(),
        in_flight: 0,
        q,
        cadence,
        trace: Trace::new(cfg.trace),
        tally: Tally::default(),
        records: Vec::new(),
        recorded: vec![false; n],
    };
    sim.run();
    let mut tally = std::mem::take(&mut sim.tally);
    tally.in_flight = sim.in_flight;
    tally.lifetime = sim.energy.first_death().map(SimTime::as_secs_f64);
    let state: Vec<usize> = sim.table.gradients.iter().map(Vec::len).collect();
    tally.state_entries_per_node = state.iter().sum::<usize>() as f64 / n as f64;
    tally.state_entries_max = state.iter().copied().max().unwrap_or(0) as u64;
    sim.cadence.fill(&mut tally);
    let mut out = RunOutput::new(cfg, n, tally, sim.trace.lines, Vec::new());
    out.energy = sim.records;
    Ok(out)
}

impl EnergySim<'_> {
    fn run(&mut self) {
        while let Some(ev) = self.q.pop_until(self.cfg.horizon) {
            let now = ev.time;
            match ev.kind {
                EventKind::BundleGenerated(k) => {
                    let s = self.sources[k];
                    if self.energy.is_alive(s) {
                        self.generate(s);
                        // Sensors report at the configured rate; the computed rate is only
                        // recorded.
                        let next = now + packet_interval(self.cfg.rate);
                        if next <= self.cfg.horizon {
                            self.q.schedule(next, EventKind::BundleGenerated(k));
                        }
                    }
                }
                EventKind::HopComplete(slot) => self.completed(slot),
                EventKind::MeasurementTick => {
                    self.table = gradients(
                        &self.topo,
                        self.sink,
                        &self.sources,
                        &self.energy,
                        now,
                        self.cfg.measurement_period,
                    );
                    if self.cfg.trace {
                        for v in 0..self.topo.node_count() as u32 {
                            let residual = self.energy.residual(NodeId(v));
                            self.records.push(EnergyRecord {
                                at: now,
                                node: NodeId(v),
                                residual,
                            });
                        }
                    }
                    let s = self.cadence.measure();
                    self.trace.note(|| format!("{now}\tmeasure\t{s}"));
                }
                EventKind::RateUpdateTick => {
                    if let Some(r) = self.cadence.update() {
                        self.trace.note(|| format!("{now}\trate\t{r}"));
                    }
                }
                _ => {}
            }
        }
    }

    fn generate(&mut self, s: NodeId) {
        let now = self.q.now();
        let id = self.packets.len();
        self.packets.push(now);
        self.tally.generated += 1;
        self.in_flight += 1;
        self.trace.note(|| format!("{now}\tgen\t{id}\t{s}"));
        self.forward(id, s);
    }

    fn note_death(&mut self, v: NodeId) {
        if !self.energy.is_alive(v) && !self.recorded[v.index()] {
            self.recorded[v.index()] = true;
            let at = self.energy.died_at(v).unwrap_or(self.q.now());
            self.records.push(EnergyRecord {
                at,
                node: v,
                residual: 0.0,
            });
            self.trace.note(|| format!("{at}\tdeath\t{v}"));
        }
    }

    fn forward(&mut self, packet: usize, v: NodeId) {
        let now = self.q.now();
        let next = match self.cfg.policy {
            Policy::PowerAware => power_aware_next_hop(v, &self.table, &self.energy),
            _ => min_hop_next_hop(v, &self.table, &self.energy),
        };
        let Ok(u) = next else {
            return self.finish(packet, false);
        };
        let d = self.topo.distance(v, u);
        let paid = self.energy.charge_tx(v, self.cfg.bundle_size, d, now);
        self.note_death(v);
        if !paid {
            return self.finish(packet, false);
        }
        self.tally.transmissions += 1;
        self.transfers.push((packet, v, u));
        self.q.schedule(
            now + self.cfg.hop_delay,
            EventKind::HopComplete(self.transfers.len() - 1),
        );
    }

    fn completed(&mut self, slot: usize) {
        let now = self.q.now();
        let (packet, v, u) = self.transfers[slot];
        if !self.energy.is_alive(u) || !self.topo.link_alive(v, u) {
            return self.finish(packet, false);
        }
        let paid = self.energy.charge_rx(u, self.cfg.bundle_size, now);
        self.note_death(u);
        if !paid {
            return self.finish(packet, false);
        }
        if u == self.sink {
            self.finish(packet, true);
        } else {
            self.forward(packet, u);
        }
    }

    fn finish(&mut self, packet: usize, delivered: bool) {
        let now = self.q.now();
        self.in_flight -= 1;
        if delivered {
            self.tally.delivered += 1;
            self.tally.delay_sum_ms += (now - self.packets[packet]).0 as i128;
        } else {
            self.tally.lost += 1;
        }
        self.cadence.resolved(!delivered);
        let what = if delivered { "deliver" } else { "lost" };
        self.trace.note(|| format!("{now}\t{what}\t{packet}"));
    }
}
