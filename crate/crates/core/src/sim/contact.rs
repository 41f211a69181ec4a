//! Bundles over a contact plan.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::event::{EventKind, EventQueue};
use super::{
    hashed_draw, load_plan, Cadence, Policy, RunOutput, ScenarioConfig, SimError, Tally, Trace,
};
use crate::contact::{Bundle, ContactPlan, NodeId};
use crate::dhr::{DhrConfig, DhrRouter};
use crate::esp::earliest_route;
use crate::time::{transmission_time, SimTime};

#[derive(Debug, Default)]
struct Link {
    queue: VecDeque<usize>,
    busy: bool,
}

struct ContactSim<'a> {
    cfg: &'a ScenarioConfig,
    plan: ContactPlan,
    /// Contacts leaving each node, by start time.
    outgoing: Vec<Vec<usize>>,
    tx: Vec<SimTime>,
    links: Vec<Link>,
    bundles: Vec<Bundle>,
    dest: Vec<NodeId>,
    /// Flooding copies, per bundle and node.
    held: Vec<Vec<bool>>,
    /// Routed bundles with no usable contact yet, per node.
    waiting: Vec<Vec<usize>>,
    delivered: Vec<Option<SimTime>>,
    routes: Vec<Vec<NodeId>>,
    transfers: Vec<(usize, usize)>,
    router: Option<DhrRouter>,
    q: EventQueue,
    cadence: Cadence,
    trace: Trace,
    transmissions: u64,
    last_tick: SimTime,
}

/// Unicast bundles with uniform endpoints and creation times, ordered by
/// creation.
pub(crate) fn generate_bundles(cfg: &ScenarioConfig, n: usize) -> Vec<Bundle> {
    if n < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drawn: Vec<(SimTime, u32, u32)> = (0..cfg.bundles)
        .map(|_| {
            let src = rng.gen_range(0..n as u32);
            let dst = (src + rng.gen_range(1..n as u32)) % n as u32;
            let at = SimTime(rng.gen_range(0..=cfg.gen_window.0));
            (at, src, dst)
        })
        .collect();
    drawn.sort_by_key(|d| d.0);
    drawn
        .into_iter()
        .enumerate()
        .map(|(i, (at, src, dst))| {
            Bundle::new(
                i as u64,
                NodeId(src),
                [NodeId(dst)],
                cfg.bundle_size,
                at,
                cfg.ttl,
            )
            .expect("generated bundles are well formed")
        })
        .collect()
}

pub(crate) fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let base = load_plan(cfg)?;
    let plan = match base.period() {
        Some(_) => base
            .unroll(cfg.horizon)
            .map_err(|e| SimError::Input(e.to_string()))?,
        None => base.clone(),
    };
    let n = plan.node_count();
    let router = match cfg.policy {
        Policy::DhrCic => Some(
            DhrRouter::build(
                &plan,
                &DhrConfig {
                    branching: cfg.branching,
                    window: cfg.window,
                    threshold: cfg.threshold,
                    budget: cfg.budget,
                    reference_size: cfg.bundle_size,
                },
            )
            .map_err(|e| SimError::Input(e.to_string()))?,
        ),
        _ => None,
    };
    let state: Vec<usize> = (0..n as u32)
        .map(|v| match (&router, cfg.policy) {
            (Some(r), _) => r.state_size(NodeId(v)),
            (None, Policy::Esp) => base.len(),
            _ => 0,
        })
        .collect();

    let mut q = EventQueue::new();
    let mut outgoing = vec![Vec::new(); n];
    for (i, c) in plan.contacts().iter().enumerate() {
        if c.start <= cfg.horizon {
            q.schedule(c.start, EventKind::ContactStart(i));
            q.schedule(c.end.min(cfg.horizon), EventKind::ContactEnd(i));
            outgoing[c.from.index()].push(i);
        }
    }
    for list in &mut outgoing {
        list.sort_by_key(|&i| (plan.contacts()[i].start, i));
    }
    let bundles = generate_bundles(cfg, n);
    for (b, bundle) in bundles.iter().enumerate() {
        q.schedule(bundle.created_at, EventKind::BundleGenerated(b));
    }
    let cadence = Cadence::new(cfg, &mut q);
    let tx = plan
        .contacts()
        .iter()
        .map(|c| transmission_time(cfg.bundle_size, c.rate))
        .collect();
    let links = (0..plan.len()).map(|_| Link::default()).collect();
    let m = bundles.len();
    let mut sim = ContactSim {
        cfg,
        outgoing,
        tx,
        links,
        dest: bundles
            .iter()
            .map(|b| *b.destinations.first().unwrap())
            .collect(),
        held: vec![vec![false; n]; m],
        waiting: vec![Vec::new(); n],
        delivered: vec![None; m],
        routes: bundles.iter().map(|b| vec![b.source]).collect(),
        bundles,
        transfers: Vec::new(),
        router,
        plan,
        q,
        cadence,
        trace: Trace::new(cfg.trace),
        transmissions: 0,
        last_tick: SimTime::ZERO,
    };
    sim.run();

    let horizon = cfg.horizon;
    let mut tally = Tally::default();
    for (b, bundle) in sim.bundles.iter().enumerate() {
        if bundle.created_at > horizon {
            continue;
        }
        tally.generated += 1;
        match sim.delivered[b] {
            Some(at) => {
                tally.delivered += 1;
                tally.delay_sum_ms += (at - bundle.created_at).0 as i128;
            }
            None if bundle.expires_at() <= horizon => tally.lost += 1,
            None => tally.in_flight += 1,
        }
    }
    tally.transmissions = sim.transmissions;
    tally.state_entries_per_node = state.iter().sum::<usize>() as f64 / n.max(1) as f64;
    tally.state_entries_max = state.iter().copied().max().unwrap_or(0) as u64;
    sim.cadence.fill(&mut tally);
    let routes = match cfg.policy {
        Policy::Epidemic | Policy::Gossip => Vec::new(),
        _ => (0..sim.bundles.len())
            .filter(|&b| sim.delivered[b].is_some())
            .map(|b| std::mem::take(&mut sim.routes[b]))
            .collect(),
    };
    Ok(RunOutput::new(cfg, n, tally, sim.trace.lines, routes))
}

impl ContactSim<'_> {
    fn flooding(&self) -> bool {
        matches!(self.cfg.policy, Policy::Epidemic | Policy::Gossip)
    }

    fn run(&mut self) {
        while let Some(ev) = self.q.pop_until(self.cfg.horizon) {
            match ev.kind {
                EventKind::ContactStart(i) => self.contact_start(i),
                EventKind::ContactEnd(i) => self.contact_end(i),
                EventKind::BundleGenerated(b) => self.generated(b),
                EventKind::HopComplete(slot) => self.arrived(slot),
                EventKind::MeasurementTick => self.measure(),
                EventKind::RateUpdateTick => {
                    if let Some(r) = self.cadence.update() {
                        let now = self.q.now();
                        self.trace.note(|| format!("{now}\trate\t{r}"));
                    }
                }
                EventKind::Move(_) => {}
            }
        }
    }

    fn measure(&mut self) {
        let now = self.q.now();
        for b in 0..self.bundles.len() {
            let exp = self.bundles[b].expires_at();
            if exp > self.last_tick && exp <= now && self.delivered[b].is_none() {
                self.cadence.resolved(true);
            }
        }
        self.last_tick = now;
        let s = self.cadence.measure();
        self.trace.note(|| format!("{now}\tmeasure\t{s}"));
    }

    fn generated(&mut self, b: usize) {
        let now = self.q.now();
        let src = self.bundles[b].source;
        let dst = self.dest[b];
        self.trace.note(|| format!("{now}\tgen\t{b}\t{src}\t{dst}"));
        if self.flooding() {
            self.held[b][src.index()] = true;
            self.offer(b, src);
        } else {
            self.decide(b, src);
        }
    }

    fn contact_start(&mut self, i: usize) {
        let v = self.plan.contacts()[i].from;
        if self.flooding() {
            let to = self.plan.contacts()[i].to;
            let now = self.q.now();
            for b in 0..self.bundles.len() {
                if self.held[b][v.index()]
                    && !self.held[b][to.index()]
                    && now < self.bundles[b].expires_at()
                    && self.forwards(b, v)
                {
                    self.links[i].queue.push_back(b);
                }
            }
        } else {
            for b in std::mem::take(&mut self.waiting[v.index()]) {
                self.decide(b, v);
            }
        }
        self.try_start(i);
    }

    fn contact_end(&mut self, i: usize) {
        let queued = std::mem::take(&mut self.links[i].queue);
        if !self.flooding() {
            let v = self.plan.contacts()[i].from;
            for b in queued {
                self.decide(b, v);
            }
        }
    }

    fn arrived(&mut self, slot: usize) {
        let now = self.q.now();
        let (b, i) = self.transfers[slot];
        self.links[i].busy = false;
        let (v, u) = (self.plan.contacts()[i].from, self.plan.contacts()[i].to);
        self.trace.note(|| format!("{now}\trx\t{b}\t{v}\t{u}"));
        if self.flooding() {
            if !self.held[b][u.index()] {
                self.held[b][u.index()] = true;
                if u == self.dest[b] {
                    self.deliver(b);
                } else if self.forwards(b, u) {
                    self.offer(b, u);
                }
            }
        } else {
            self.routes[b].push(u);
            if u == self.dest[b] {
                self.deliver(b);
            } else {
                self.decide(b, u);
            }
        }
        self.try_start(i);
    }

    fn deliver(&mut self, b: usize) {
        if self.delivered[b].is_none() {
            let now = self.q.now();
            self.delivered[b] = Some(now);
            self.cadence.resolved(false);
            self.trace.note(|| format!("{now}\tdeliver\t{b}"));
        }
    }

    fn forwards(&self, b: usize, v: NodeId) -> bool {
        if v == self.dest[b] {
            return false;
        }
        match self.cfg.policy {
            Policy::Gossip => {
                v == self.bundles[b].source
                    || hashed_draw(self.cfg.seed, b as u64, v.0 as u64) < self.cfg.gossip_p
            }
            _ => true,
        }
    }

    /// Hands a fresh flooding copy at `v` to every contact currently open.
    fn offer(&mut self, b: usize, v: NodeId) {
        let now = self.q.now();
        for k in 0..self.outgoing[v.index()].len() {
            let i = self.outgoing[v.index()][k];
            let c = &self.plan.contacts()[i];
            if c.start > now {
                break;
            }
            if now < c.end && !self.held[b][c.to.index()] && !self.links[i].queue.contains(&b) {
                self.links[i].queue.push_back(b);
                self.try_start(i);
            }
        }
    }

    /// Earliest contact `v → u` that can carry a bundle before `limit`.
    fn next_contact(&self, v: NodeId, u: NodeId, now: SimTime, limit: SimTime) -> Option<usize> {
        self.outgoing[v.index()].iter().copied().find(|&i| {
            let c = &self.plan.contacts()[i];
            let done = c.start.max(now) + self.tx[i];
            c.to == u && done <= c.end && done <= limit
        })
    }

    fn decide(&mut self, b: usize, v: NodeId) {
        let now = self.q.now();
        let bundle = &self.bundles[b];
        let (dest, expires, size) = (self.dest[b], bundle.expires_at(), bundle.size);
        if now >= expires {
            self.trace.note(|| format!("{now}\texpire\t{b}\t{v}"));
            return;
        }
        let choice = match self.cfg.policy {
            Policy::Esp => earliest_route(&self.plan, v, dest, size, now, expires)
                .ok()
                .and_then(|r| r.hops.first().map(|h| h.contact_index)),
            Policy::DhrCic => self
                .router
                .as_ref()
                .and_then(|r| r.next_hop(v, dest, now, size).ok())
                .and_then(|d| self.next_contact(v, d.next_hop, now, expires)),
            _ if v == bundle.source => self.next_contact(v, dest, now, expires),
            _ => None,
        };
        match choice {
            Some(i) => {
                self.links[i].queue.push_back(b);
                self.try_start(i);
            }
            None => self.waiting[v.index()].push(b),
        }
    }

    /// Starts the next queued transfer if contact `i` is open and idle.
    fn try_start(&mut self, i: usize) {
        let now = self.q.now();
        let c = &self.plan.contacts()[i];
        let (from, to, end) = (c.from, c.to, c.end);
        if self.links[i].busy || now < c.start || now >= end {
            return;
        }
        let done = now + self.tx[i];
        while let Some(b) = self.links[i].queue.pop_front() {
            let expires = self.bundles[b].expires_at();
            if self.flooding() {
                if self.held[b][to.index()] || done > end || done > expires {
                    continue;
                }
            } else if done > end {
                self.links[i].queue.push_front(b);
                return;
            } else if done > expires {
                self.trace.note(|| format!("{now}\texpire\t{b}\t{from}"));
                continue;
            }
            self.links[i].busy = true;
            self.transfers.push((b, i));
            self.q
                .schedule(done, EventKind::HopComplete(self.transfers.len() - 1));
            self.transmissions += 1;
            self.trace.note(|| format!("{now}\ttx\t{b}\t{from}\t{to}"));
            return;
        }
    }
}
