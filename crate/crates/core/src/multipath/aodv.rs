use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{MultipathError, Topology};
use crate::contact::NodeId;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub seq: u64,
    pub hop_count: u32,
    pub expires_at: SimTime,
}

impl RoutingEntry {
    pub fn is_fresh(&self, now: SimTime) -> bool {
        now < self.expires_at
    }
}

/// Outcome of one request flood.
#[derive(Clone, Debug, PartialEq)]
pub struct Flood {
    /// Reverse-pointer path, when the request reached the destination.
    pub path: Option<Vec<NodeId>>,
    /// One per node that rebroadcast the request (the destination does not).
    pub broadcasts: u64,
}

impl Flood {
    /// Broadcasts plus one reply message per hop back to the source.
    pub fn control_messages(&self) -> u64 {
        self.broadcasts + self.path.as_ref().map_or(0, |p| p.len() as u64 - 1)
    }
}

/// Floods a route request from `src` over live links. Every node hearing the
/// request for the first time records the sender as its reverse pointer and
/// rebroadcasts once; neighbours are visited in id order.
pub fn flood(topo: &Topology, src: NodeId, dst: NodeId) -> Flood {
    let n = topo.node_count();
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut heard = vec![false; n];
    heard[src.index()] = true;
    let mut queue = VecDeque::from([src]);
    let mut broadcasts = 0;
    while let Some(v) = queue.pop_front() {
        if v == dst {
            continue;
        }
        broadcasts += 1;
        for u in topo.live_neighbors(v) {
            if !heard[u.index()] {
                heard[u.index()] = true;
                parent[u.index()] = Some(v);
                queue.push_back(u);
            }
        }
    }
    let path = heard[dst.index()].then(|| {
        let mut path = vec![dst];
        let mut at = dst;
        while let Some(p) = parent[at.index()] {
            path.push(p);
            at = p;
        }
        path.reverse();
        path
    });
    Flood { path, broadcasts }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discovery {
    pub entry: RoutingEntry,
    pub path: Vec<NodeId>,
    pub control_messages: u64,
}

/// Source-side route cache with on-demand discovery.
#[derive(Clone, Debug)]
pub struct Aodv {
    pub expiry: SimTime,
    /// Floods attempted before giving up.
    pub attempts: u32,
    seq: u64,
    routes: BTreeMap<(NodeId, NodeId), (RoutingEntry, Vec<NodeId>)>,
}

impl Default for Aodv {
    fn default() -> Self {
        Aodv::new(SimTime::from_secs(30), 3)
    }
}

impl Aodv {
    pub fn new(expiry: SimTime, attempts: u32) -> Self {
        Aodv {
            expiry,
            attempts,
            seq: 0,
            routes: BTreeMap::new(),
        }
    }

    /// Returns a fresh cached route at no cost, otherwise floods up to
    /// `attempts` times.
    pub fn discover(
        &mut self,
        topo: &Topology,
        src: NodeId,
        dst: NodeId,
        now: SimTime,
    ) -> Result<Discovery, MultipathError> {
        if src == dst {
            return Err(MultipathError::SameNode(src));
        }
        for v in [src, dst] {
            if v.index() >= topo.node_count() {
                return Err(MultipathError::UnknownNode(v));
            }
        }
        if let Some((entry, path)) = self.routes.get(&(src, dst)) {
            if entry.is_fresh(now) {
                return Ok(Discovery {
                    entry: entry.clone(),
                    path: path.clone(),
                    control_messages: 0,
                });
            }
        }
        let mut spent = 0;
        for _ in 0..self.attempts.max(1) {
            let result = flood(topo, src, dst);
            spent += result.control_messages();
            if let Some(path) = result.path {
                self.seq += 1;
                let entry = RoutingEntry {
                    dest: dst,
                    next_hop: path[1],
                    seq: self.seq,
                    hop_count: path.len() as u32 - 1,
                    expires_at: now.saturating_add(self.expiry),
                };
                self.routes
                    .insert((src, dst), (entry.clone(), path.clone()));
                return Ok(Discovery {
                    entry,
                    path,
                    control_messages: spent,
                });
            }
        }
        Err(MultipathError::NoRoute {
            from: src,
            to: dst,
            control_messages: spent,
        })
    }

    pub fn invalidate(&mut self, src: NodeId, dst: NodeId) {
        self.routes.remove(&(src, dst));
    }

    pub fn cached(&self, src: NodeId, dst: NodeId) -> Option<&RoutingEntry> {
        self.routes.get(&(src, dst)).map(|(e, _)| e)
    }
}
