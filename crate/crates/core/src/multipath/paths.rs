use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{flood, MultipathError, Topology};
use crate::contact::NodeId;

/// Paths from one source to one destination, highest priority first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Vec<NodeId>>,
    /// No interior node is shared between two paths.
    pub disjoint: bool,
}

impl PathSet {
    pub fn primary(&self) -> Option<&Vec<NodeId>> {
        self.paths.first()
    }
}

pub fn path_alive(topo: &Topology, path: &[NodeId]) -> bool {
    path.windows(2).all(|w| topo.link_alive(w[0], w[1]))
}

/// BFS over live links avoiding `banned` nodes and `banned_links`.
fn shortest_path(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    banned: &BTreeSet<NodeId>,
    banned_links: &BTreeSet<(NodeId, NodeId)>,
) -> Option<Vec<NodeId>> {
    let n = topo.node_count();
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[src.index()] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        if v == dst {
            break;
        }
        for u in topo.live_neighbors(v) {
            if seen[u.index()]
                || banned.contains(&u)
                || banned_links.contains(&(v.min(u), v.max(u)))
            {
                continue;
            }
            seen[u.index()] = true;
            parent[u.index()] = Some(v);
            queue.push_back(u);
        }
    }
    if !seen[dst.index()] {
        return None;
    }
    let mut path = vec![dst];
    let mut at = dst;
    while let Some(p) = parent[at.index()] {
        path.push(p);
        at = p;
    }
    path.reverse();
    Some(path)
}

fn disjoint_search(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    k: usize,
    mut banned: BTreeSet<NodeId>,
) -> Vec<Vec<NodeId>> {
    let mut banned_links = BTreeSet::new();
    let mut paths = Vec::new();
    while paths.len() < k {
        let Some(path) = shortest_path(topo, src, dst, &banned, &banned_links) else {
            break;
        };
        if path.len() == 2 {
            banned_links.insert((src.min(dst), src.max(dst)));
        }
        banned.extend(path[1..path.len() - 1].iter().copied());
        paths.push(path);
    }
    paths
}

/// Up to `k` interior-disjoint shortest paths, found by repeated BFS with
/// each found path's interior removed. A direct link is used at most once.
pub fn select_disjoint_paths(
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Result<PathSet, MultipathError> {
    if src == dst {
        return Err(MultipathError::SameNode(src));
    }
    for v in [src, dst] {
        if v.index() >= topo.node_count() {
            return Err(MultipathError::UnknownNode(v));
        }
    }
    let paths = disjoint_search(topo, src, dst, k, BTreeSet::new());
    if paths.is_empty() {
        return Err(MultipathError::NoRoute {
            from: src,
            to: dst,
            control_messages: 0,
        });
    }
    Ok(PathSet {
        paths,
        disjoint: true,
    })
}

/// Checks endpoints, link adjacency, simplicity and (when flagged)
/// interior disjointness.
pub fn check_disjoint(
    topo: &Topology,
    set: &PathSet,
    src: NodeId,
    dst: NodeId,
) -> Result<(), String> {
    let mut interiors: BTreeSet<NodeId> = BTreeSet::new();
    let mut direct = 0;
    for (i, p) in set.paths.iter().enumerate() {
        if p.len() < 2 || p[0] != src || p[p.len() - 1] != dst {
            return Err(format!("path {i} does not run from {src} to {dst}"));
        }
        if let Some(w) = p.windows(2).find(|w| !topo.has_link(w[0], w[1])) {
            return Err(format!("path {i} uses missing link {}-{}", w[0], w[1]));
        }
        let distinct: BTreeSet<_> = p.iter().collect();
        if distinct.len() != p.len() {
            return Err(format!("path {i} revisits a node"));
        }
        if p.len() == 2 {
            direct += 1;
        }
        if set.disjoint {
            for v in &p[1..p.len() - 1] {
                if !interiors.insert(*v) {
                    return Err(format!("node {v} is shared by two paths"));
                }
            }
        }
    }
    if set.disjoint && direct > 1 {
        return Err("direct link used twice".into());
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Maintenance {
    /// Surviving paths in their old order, then any replacements.
    pub set: PathSet,
    pub broken: Vec<Vec<NodeId>>,
    /// The primary path broke and another took over.
    pub failed_over: bool,
    pub replacements: usize,
    pub control_messages: u64,
}

/// Re-checks every path against current positions. When any path broke, a
/// request flood looks for replacements disjoint from the survivors.
pub fn maintain_routes(
    topo: &Topology,
    set: &PathSet,
    src: NodeId,
    dst: NodeId,
    k: usize,
) -> Result<Maintenance, MultipathError> {
    let (alive, broken): (Vec<_>, Vec<_>) =
        set.paths.iter().cloned().partition(|p| path_alive(topo, p));
    let failed_over = !broken.is_empty()
        && !alive.is_empty()
        && set.primary().is_some_and(|p| !path_alive(topo, p));
    let mut paths = alive;
    let mut replacements = 0;
    let mut control_messages = 0;
    if !broken.is_empty() {
        control_messages = flood(topo, src, dst).control_messages();
        let banned: BTreeSet<NodeId> = paths
            .iter()
            .flat_map(|p| p[1..p.len() - 1].iter().copied())
            .collect();
        let has_direct = paths.iter().any(|p| p.len() == 2);
        let fresh: Vec<_> = disjoint_search(topo, src, dst, k.saturating_sub(paths.len()), banned)
            .into_iter()
            .filter(|p| !(has_direct && p.len() == 2))
            .collect();
        replacements = fresh.len();
        paths.extend(fresh);
    }
    if paths.is_empty() {
        return Err(MultipathError::AllPathsBroken { from: src, to: dst });
    }
    Ok(Maintenance {
        set: PathSet {
            paths,
            disjoint: set.disjoint,
        },
        broken,
        failed_over,
        replacements,
        control_messages,
    })
}
