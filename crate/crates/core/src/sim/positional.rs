//! Multicast from one source over a positional network, either along
//! disjoint AODV-discovered paths or by flooding.

use std::collections::{BTreeMap, BTreeSet};

use super::event::{EventKind, EventQueue};
use super::{
    check_node, hashed_draw, load_positional, packet_interval, Cadence, Loss, Policy, RunOutput,
    ScenarioConfig, SimError, Tally, Trace,
};
use crate::contact::NodeId;
use crate::multipath::{
    maintain_routes, path_alive, select_disjoint_paths, Aodv, Move, MulticastMode, MultipathError,
    PathSet, Topology,
};
use crate::time::SimTime;

#[derive(Debug)]
struct Packet {
    created: SimTime,
    /// Path chosen per destination.
    paths: BTreeMap<NodeId, Vec<NodeId>>,
    unresolved: BTreeSet<NodeId>,
    seen: Vec<bool>,
    broadcasts: u32,
}

#[derive(Debug)]
enum Transfer {
    Unicast {
        packet: usize,
        from: NodeId,
        to: NodeId,
        dests: Vec<NodeId>,
    },
    Broadcast {
        packet: usize,
        from: NodeId,
    },
}

struct PositionalSim<'a> {
    cfg: &'a ScenarioConfig,
    topo: Topology,
    moves: Vec<Move>,
    src: NodeId,
    dests: Vec<NodeId>,
    aodv: Aodv,
    sets: BTreeMap<NodeId, PathSet>,
    stripe: BTreeMap<NodeId, usize>,
    packets: Vec<Packet>,
    transfers: Vec<Transfer>,
    q: EventQueue,
    cadence: Cadence,
    trace: Trace,
    tally: Tally,
    losses: Vec<Loss>,
    moved: bool,
    failovers: u64,
    broken_paths: u64,
}

pub(crate) fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let (topo, moves, _) = load_positional(cfg)?;
    let n = topo.node_count();
    let src = check_node(cfg.source_node, n, "source")?;
    let dests = cfg
        .destinations
        .iter()
        .map(|&d| check_node(d, n, "destination"))
        .collect::<Result<Vec<_>, _>>()?;
    if dests.is_empty() || dests.contains(&src) {
        return Err(SimError::Input(
            "destinations must be non-empty and exclude the source".into(),
        ));
    }
    let mut q = EventQueue::new();
    // Position changes become visible at the next measurement tick.
    let p = cfg.measurement_period.0;
    for (j, m) in moves.iter().enumerate() {
        let tick = SimTime((m.at.0.max(0) + p - 1) / p * p);
        if tick <= cfg.horizon {
            q.schedule(tick, EventKind::Move(j));
        }
    }
    let cadence = Cadence::new(cfg, &mut q);
    q.schedule(SimTime::ZERO, EventKind::BundleGenerated(0));
    let mut sim = PositionalSim {
        cfg,
        topo,
        moves,
        src,
        dests,
        aodv: Aodv::new(cfg.route_expiry, 3),
        sets: BTreeMap::new(),
        stripe: BTreeMap::new(),
        packets: Vec::new(),
        transfers: Vec::new(),
        q,
        cadence,
        trace: Trace::new(cfg.trace),
        tally: Tally::default(),
        losses: Vec::new(),
        moved: false,
        failovers: 0,
        broken_paths: 0,
    };
    sim.run();
    let mut tally = std::mem::take(&mut sim.tally);
    tally.in_flight = sim.packets.iter().map(|p| p.unresolved.len() as u64).sum();
    sim.cadence.fill(&mut tally);
    let mut out = RunOutput::new(cfg, n, tally, sim.trace.lines, Vec::new());
    out.losses = sim.losses;
    out.failovers = sim.failovers;
    out.broken_paths = sim.broken_paths;
    Ok(out)
}

impl PositionalSim<'_> {
    fn flooding(&self) -> bool {
        matches!(self.cfg.policy, Policy::Epidemic | Policy::Gossip)
    }

    fn run(&mut self) {
        while let Some(ev) = self.q.pop_until(self.cfg.horizon) {
            let now = ev.time;
            match ev.kind {
                EventKind::BundleGenerated(_) => {
                    self.generate();
                    let next = now + packet_interval(self.cadence.rate);
                    if next <= self.cfg.horizon {
                        self.q.schedule(next, EventKind::BundleGenerated(0));
                    }
                }
                EventKind::HopComplete(slot) => self.completed(slot),
                EventKind::Move(j) => {
                    let m = self.moves[j].clone();
                    self.topo.set_position(m.node, m.x, m.y);
                    self.moved = true;
                    self.trace
                        .note(|| format!("{now}\tmove\t{}\t{}\t{}", m.node, m.x, m.y));
                }
                EventKind::MeasurementTick => {
                    if self.moved && !self.flooding() {
                        self.maintain();
                    }
                    self.moved = false;
                    let s = self.cadence.measure();
                    self.trace.note(|| format!("{now}\tmeasure\t{s}"));
                }
                EventKind::RateUpdateTick => {
                    if let Some(r) = self.cadence.update() {
                        self.trace.note(|| format!("{now}\trate\t{r}"));
                    }
                }
                EventKind::ContactStart(_) | EventKind::ContactEnd(_) => {}
            }
        }
    }

    fn maintain(&mut self) {
        let now = self.q.now();
        for d in self.dests.clone() {
            let Some(set) = self.sets.get(&d) else {
                continue;
            };
            let primary_broke = set.primary().is_some_and(|p| !path_alive(&self.topo, p));
            match maintain_routes(&self.topo, set, self.src, d, self.cfg.k_paths) {
                Ok(m) => {
                    self.tally.control_messages += m.control_messages;
                    self.broken_paths += m.broken.len() as u64;
                    // Traffic moves to a survivor or to a freshly found path.
                    self.failovers += primary_broke as u64;
                    if !m.broken.is_empty() {
                        let (b, r) = (m.broken.len(), m.replacements);
                        self.trace
                            .note(|| format!("{now}\tbreak\t{d}\t{b}\t{r}\t{primary_broke}"));
                    }
                    self.sets.insert(d, m.set);
                }
                Err(_) => {
                    self.broken_paths += set.paths.len() as u64;
                    self.sets.remove(&d);
                    self.trace.note(|| format!("{now}\tbreak\t{d}\tall"));
                }
            }
        }
    }

    /// Path toward `d` for the next packet, discovering routes on demand.
    fn path_to(&mut self, d: NodeId) -> Option<Vec<NodeId>> {
        let now = self.q.now();
        if !self.sets.contains_key(&d) {
            self.aodv.invalidate(self.src, d);
        }
        match self.aodv.discover(&self.topo, self.src, d, now) {
            Ok(found) => {
                self.tally.control_messages += found.control_messages;
                if found.control_messages > 0 || !self.sets.contains_key(&d) {
                    let cost = found.control_messages;
                    self.trace.note(|| format!("{now}\tdiscover\t{d}\t{cost}"));
                    match select_disjoint_paths(&self.topo, self.src, d, self.cfg.k_paths) {
                        Ok(set) => {
                            self.sets.insert(d, set);
                        }
                        Err(_) => {
                            self.sets.remove(&d);
                            return None;
                        }
                    }
                }
            }
            Err(MultipathError::NoRoute {
                control_messages, ..
            }) => {
                self.tally.control_messages += control_messages;
                self.sets.remove(&d);
                return None;
            }
            Err(_) => return None,
        }
        let set = &self.sets[&d];
        let i = match self.cfg.mode {
            MulticastMode::Failover => 0,
            MulticastMode::Stripe => {
                let k = self.stripe.entry(d).or_default();
                *k += 1;
                (*k - 1) % set.paths.len()
            }
        };
        Some(set.paths[i].clone())
    }

    fn generate(&mut self) {
        let now = self.q.now();
        let id = self.packets.len();
        self.tally.generated += self.dests.len() as u64;
        self.packets.push(Packet {
            created: now,
            paths: BTreeMap::new(),
            unresolved: self.dests.iter().copied().collect(),
            seen: vec![false; self.topo.node_count()],
            broadcasts: 0,
        });
        self.trace.note(|| format!("{now}\tgen\t{id}"));
        if self.flooding() {
            self.packets[id].seen[self.src.index()] = true;
            self.broadcast(id, self.src);
            return;
        }
        let mut hops: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for d in self.dests.clone() {
            match self.path_to(d) {
                Some(path) => {
                    hops.entry(path[1]).or_default().push(d);
                    self.packets[id].paths.insert(d, path);
                }
                None => self.lose(id, d),
            }
        }
        for (to, dests) in hops {
            self.send(id, self.src, to, dests);
        }
    }

    fn send(&mut self, packet: usize, from: NodeId, to: NodeId, dests: Vec<NodeId>) {
        let now = self.q.now();
        self.transfers.push(Transfer::Unicast {
            packet,
            from,
            to,
            dests,
        });
        self.tally.transmissions += 1;
        self.q.schedule(
            now + self.cfg.hop_delay,
            EventKind::HopComplete(self.transfers.len() - 1),
        );
    }

    fn broadcast(&mut self, packet: usize, from: NodeId) {
        let now = self.q.now();
        self.transfers.push(Transfer::Broadcast { packet, from });
        self.packets[packet].broadcasts += 1;
        self.tally.transmissions += 1;
        self.q.schedule(
            now + self.cfg.hop_delay,
            EventKind::HopComplete(self.transfers.len() - 1),
        );
    }

    fn forwards(&self, packet: usize, v: NodeId) -> bool {
        match self.cfg.policy {
            Policy::Gossip => {
                hashed_draw(self.cfg.seed, packet as u64, v.0 as u64) < self.cfg.gossip_p
            }
            _ => true,
        }
    }

    fn completed(&mut self, slot: usize) {
        match std::mem::replace(
            &mut self.transfers[slot],
            Transfer::Broadcast {
                packet: usize::MAX,
                from: NodeId(0),
            },
        ) {
            Transfer::Unicast {
                packet,
                from,
                to,
                dests,
            } => {
                if !self.topo.link_alive(from, to) {
                    for d in dests {
                        self.lose(packet, d);
                    }
                    return;
                }
                let mut hops: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
                for d in dests {
                    if d == to {
                        self.deliver(packet, d);
                        continue;
                    }
                    let path = &self.packets[packet].paths[&d];
                    let at = path
                        .iter()
                        .position(|&v| v == to)
                        .expect("hop lies on the path");
                    hops.entry(path[at + 1]).or_default().push(d);
                }
                for (next, dests) in hops {
                    self.send(packet, to, next, dests);
                }
            }
            Transfer::Broadcast { packet, from } => {
                self.packets[packet].broadcasts -= 1;
                for u in self.topo.live_neighbors(from) {
                    if self.packets[packet].seen[u.index()] {
                        continue;
                    }
                    self.packets[packet].seen[u.index()] = true;
                    if self.packets[packet].unresolved.contains(&u) {
                        self.deliver(packet, u);
                    }
                    if self.forwards(packet, u) {
                        self.broadcast(packet, u);
                    }
                }
                if self.packets[packet].broadcasts == 0 {
                    let left: Vec<NodeId> =
                        self.packets[packet].unresolved.iter().copied().collect();
                    for d in left {
                        self.lose(packet, d);
                    }
                }
            }
        }
    }

    fn deliver(&mut self, packet: usize, d: NodeId) {
        let now = self.q.now();
        if self.packets[packet].unresolved.remove(&d) {
            self.tally.delivered += 1;
            self.tally.delay_sum_ms += (now - self.packets[packet].created).0 as i128;
            self.cadence.resolved(false);
            self.trace.note(|| format!("{now}\tdeliver\t{packet}\t{d}"));
        }
    }

    fn lose(&mut self, packet: usize, d: NodeId) {
        let now = self.q.now();
        if self.packets[packet].unresolved.remove(&d) {
            self.tally.lost += 1;
            self.cadence.resolved(true);
            self.losses.push(Loss {
                packet: packet as u64,
                dest: d,
                created: self.packets[packet].created,
                at: now,
            });
            self.trace.note(|| format!("{now}\tlost\t{packet}\t{d}"));
        }
    }
}
