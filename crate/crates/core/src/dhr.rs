//! Cluster hierarchy and two-phase hierarchical forwarding.
//!
//! Nodes are grouped bottom-up by contact volume into `branching`-sized
//! clusters, then those clusters into clusters, until one cluster remains.
//! A node forwards toward a destination in another cluster by looking up the
//! gateway of its own cluster at the highest level on which the two differ.
//! Inside a level-1 cluster it routes exactly on the contact plan.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cic::{self, AggregatedContact, CicError, CompressedContactTable};
use crate::contact::{ContactPlan, NodeId};
use crate::esp::earliest_route;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DhrError {
    #[error("branching must be at least 2, got {0}")]
    InvalidBranching(usize),
    #[error("hierarchy needs at least one node")]
    EmptyNetwork,
    #[error("source and destination are both {0}")]
    SameNode(NodeId),
    #[error("node {0} is not in the hierarchy")]
    UnknownNode(NodeId),
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("no route from {from} toward {dest}")]
    Unreachable { from: NodeId, dest: NodeId },
    #[error("expected a table for level {expected}, got level {found}")]
    TableLevel { expected: usize, found: usize },
    #[error(transparent)]
    Compression(#[from] CicError),
}

/// Nested clusters over nodes `0..n`. Level 0 holds singletons whose id is
/// the node id; level `levels()` holds one cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    branching: usize,
    /// `membership[level][node]`
    membership: Vec<Vec<ClusterId>>,
}

impl ClusterTree {
    /// Builds a tree from explicit groupings, one entry per level starting
    /// at level 1, each a partition of the node ids. A single top cluster is
    /// appended when the last level given has more than one cluster.
    pub fn from_groups(
        node_count: usize,
        branching: usize,
        levels: &[Vec<Vec<u32>>],
    ) -> Result<Self, DhrError> {
        if branching < 2 {
            return Err(DhrError::InvalidBranching(branching));
        }
        if node_count == 0 {
            return Err(DhrError::EmptyNetwork);
        }
        let mut membership = vec![(0..node_count as u32).map(ClusterId).collect::<Vec<_>>()];
        for (i, groups) in levels.iter().enumerate() {
            let level = i + 1;
            let mut groups: Vec<Vec<u32>> = groups.clone();
            for g in &mut groups {
                g.sort_unstable();
            }
            groups.retain(|g| !g.is_empty());
            groups.sort();
            let mut row = vec![None; node_count];
            for (id, g) in groups.iter().enumerate() {
                for &v in g {
                    let slot = row.get_mut(v as usize).ok_or_else(|| {
                        DhrError::InvalidGrouping(format!("node {v} out of range"))
                    })?;
                    if slot.is_some() {
                        return Err(DhrError::InvalidGrouping(format!(
                            "node {v} appears twice at level {level}"
                        )));
                    }
                    *slot = Some(ClusterId(id as u32));
                }
            }
            let row: Vec<ClusterId> = row
                .into_iter()
                .enumerate()
                .map(|(v, c)| {
                    c.ok_or_else(|| {
                        DhrError::InvalidGrouping(format!("node {v} missing at level {level}"))
                    })
                })
                .collect::<Result<_, _>>()?;
            membership.push(row);
        }
        if membership.len() == 1 || membership.last().unwrap().iter().any(|c| c.0 != 0) {
            membership.push(vec![ClusterId(0); node_count]);
        }
        let tree = ClusterTree {
            branching,
            membership,
        };
        tree.check_nesting()?;
        Ok(tree)
    }

    fn check_nesting(&self) -> Result<(), DhrError> {
        for level in 0..self.levels() {
            let mut parent: BTreeMap<ClusterId, ClusterId> = BTreeMap::new();
            for v in 0..self.node_count() {
                let c = self.membership[level][v];
                let p = self.membership[level + 1][v];
                if *parent.entry(c).or_insert(p) != p {
                    return Err(DhrError::InvalidGrouping(format!(
                        "cluster {c} at level {level} splits across level {}",
                        level + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of levels above the singletons.
    pub fn levels(&self) -> usize {
        self.membership.len() - 1
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn node_count(&self) -> usize {
        self.membership[0].len()
    }

    /// Panics if `node` or `level` is out of range.
    pub fn cluster_of(&self, node: NodeId, level: usize) -> ClusterId {
        self.membership[level][node.index()]
    }

    pub fn cluster_count(&self, level: usize) -> usize {
        self.membership[level]
            .iter()
            .map(|c| c.0 as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn members(&self, level: usize, cluster: ClusterId) -> Vec<NodeId> {
        self.membership[level]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(v, _)| NodeId(v as u32))
            .collect()
    }

    /// The level-`level + 1` cluster containing `cluster`.
    pub fn parent(&self, level: usize, cluster: ClusterId) -> ClusterId {
        let v = self.membership[level]
            .iter()
            .position(|&c| c == cluster)
            .expect("cluster exists");
        self.membership[level + 1][v]
    }

    /// Other level-`level` clusters under the same parent.
    pub fn siblings(&self, level: usize, cluster: ClusterId) -> Vec<ClusterId> {
        let parent = self.parent(level, cluster);
        (0..self.cluster_count(level) as u32)
            .map(ClusterId)
            .filter(|&c| c != cluster && self.parent(level, c) == parent)
            .collect()
    }

    /// `cluster <level> <id> <members...>` lines for levels 1..=L.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for level in 1..=self.levels() {
            for id in 0..self.cluster_count(level) as u32 {
                out.push_str(&format!("cluster {level} {id}"));
                for m in self.members(level, ClusterId(id)) {
                    out.push_str(&format!(" {m}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Smallest `L ≥ 1` with `branching^L ≥ n`.
pub fn level_count(n: usize, branching: usize) -> usize {
    let mut levels = 1;
    let mut reach = branching;
    while reach < n {
        reach = reach.saturating_mul(branching);
        levels += 1;
    }
    levels
}

/// Greedy bottom-up agglomeration on total contact volume in both
/// directions. Each new group is seeded with the heaviest remaining pair and
/// grown with the remaining cluster most strongly connected to it, until it
/// holds `branching` clusters. Ties go to the smallest member id.
pub fn build_hierarchy(plan: &ContactPlan, branching: usize) -> Result<ClusterTree, DhrError> {
    if branching < 2 {
        return Err(DhrError::InvalidBranching(branching));
    }
    let n = plan.node_count();
    if n == 0 {
        return Err(DhrError::EmptyNetwork);
    }
    let mut weight = vec![vec![0u128; n]; n];
    for c in plan.contacts() {
        let (a, b) = (c.from.index(), c.to.index());
        if a != b {
            weight[a][b] += c.volume().0;
            weight[b][a] += c.volume().0;
        }
    }
    // clusters at the current level, each a sorted member list, ordered by
    // smallest member
    let mut clusters: Vec<Vec<u32>> = (0..n as u32).map(|v| vec![v]).collect();
    let mut levels = Vec::new();
    for _ in 0..level_count(n, branching) {
        let m = clusters.len();
        let mut assigned = vec![false; m];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        while let Some(first) = assigned.iter().position(|a| !a) {
            let mut seed = (first, None, 0u128);
            for i in 0..m {
                for j in i + 1..m {
                    if assigned[i] || assigned[j] {
                        continue;
                    }
                    if seed.1.is_none() || weight[i][j] > seed.2 {
                        seed = (i, Some(j), weight[i][j]);
                    }
                }
            }
            let mut group = vec![seed.0];
            assigned[seed.0] = true;
            if let Some(j) = seed.1 {
                group.push(j);
                assigned[j] = true;
            }
            while group.len() < branching {
                let best = (0..m)
                    .filter(|&k| !assigned[k])
                    .map(|k| (group.iter().map(|&g| weight[g][k]).sum::<u128>(), k))
                    .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
                match best {
                    Some((_, k)) => {
                        group.push(k);
                        assigned[k] = true;
                    }
                    None => break,
                }
            }
            groups.push(group);
        }
        let mut next: Vec<(Vec<u32>, Vec<usize>)> = groups
            .into_iter()
            .map(|g| {
                let mut members: Vec<u32> = g
                    .iter()
                    .flat_map(|&i| clusters[i].iter().copied())
                    .collect();
                members.sort_unstable();
                (members, g)
            })
            .collect();
        next.sort();
        let mut next_weight = vec![vec![0u128; next.len()]; next.len()];
        for (x, (_, gx)) in next.iter().enumerate() {
            for (y, (_, gy)) in next.iter().enumerate() {
                if x != y {
                    next_weight[x][y] = gx
                        .iter()
                        .flat_map(|&i| gy.iter().map(move |&j| (i, j)))
                        .map(|(i, j)| weight[i][j])
                        .sum();
                }
            }
        }
        clusters = next.into_iter().map(|(members, _)| members).collect();
        weight = next_weight;
        levels.push(clusters.clone());
    }
    ClusterTree::from_groups(n, branching, &levels)
}

/// The largest level at which `a` and `b` sit in different clusters.
pub fn highest_differing_level(
    tree: &ClusterTree,
    a: NodeId,
    b: NodeId,
) -> Result<usize, DhrError> {
    for v in [a, b] {
        if v.index() >= tree.node_count() {
            return Err(DhrError::UnknownNode(v));
        }
    }
    if a == b {
        return Err(DhrError::SameNode(a));
    }
    Ok((0..tree.levels())
        .rev()
        .find(|&l| tree.cluster_of(a, l) != tree.cluster_of(b, l))
        .expect("distinct nodes differ at level 0"))
}

/// Where a cluster hands traffic for one sibling: `exit` is the member that
/// holds the outgoing contact, `entry` the node across it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gateway {
    Via { exit: NodeId, entry: NodeId },
    Unreachable,
}

/// Sibling gateways per level-`l` cluster, for `l` in 1..L.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhrTables {
    /// `gateways[l - 1][cluster]` maps each sibling to its gateway.
    gateways: Vec<Vec<BTreeMap<ClusterId, Gateway>>>,
}

impl DhrTables {
    pub fn gateway(&self, level: usize, from: ClusterId, to: ClusterId) -> Option<Gateway> {
        self.gateways
            .get(level.checked_sub(1)?)?
            .get(from.0 as usize)?
            .get(&to)
            .copied()
    }

    /// The table a single node carries: for each level, its cluster's
    /// sibling entries.
    pub fn table_for(&self, tree: &ClusterTree, node: NodeId) -> DhrTable {
        let levels = self
            .gateways
            .iter()
            .enumerate()
            .map(|(i, row)| row[tree.cluster_of(node, i + 1).0 as usize].clone())
            .collect();
        DhrTable {
            owner: node,
            levels,
        }
    }
}

/// One node's view of [`DhrTables`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhrTable {
    pub owner: NodeId,
    /// `levels[l - 1]`: sibling cluster → gateway.
    pub levels: Vec<BTreeMap<ClusterId, Gateway>>,
}

impl DhrTable {
    pub fn entry_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }
}

/// Fills the gateway tables.
///
/// `node_table` is a level-0 table used to pin a cluster-level hop to a
/// concrete node pair. `level_tables[i]` is the table at level `i + 1`. For
/// each cluster and sibling the first hop of the compressed-table route
/// (restricted to clusters under the shared parent) names the next cluster;
/// the earliest node-level contact from a member into that cluster names the
/// gateway pair.
pub fn build_dhr_tables(
    tree: &ClusterTree,
    node_table: &CompressedContactTable,
    level_tables: &[CompressedContactTable],
    reference_size: u64,
) -> Result<DhrTables, DhrError> {
    if node_table.level != 0 {
        return Err(DhrError::TableLevel {
            expected: 0,
            found: node_table.level,
        });
    }
    let mut gateways = Vec::new();
    for level in 1..tree.levels() {
        let table = level_tables.get(level - 1).ok_or(DhrError::TableLevel {
            expected: level,
            found: level_tables.len(),
        })?;
        if table.level != level {
            return Err(DhrError::TableLevel {
                expected: level,
                found: table.level,
            });
        }
        let mut row = Vec::new();
        for x in 0..tree.cluster_count(level) as u32 {
            let x = ClusterId(x);
            let parent = tree.parent(level, x);
            let mut entries = BTreeMap::new();
            for y in tree.siblings(level, x) {
                let estimate = cic::estimate_route(
                    &table.entries,
                    x.0,
                    y.0,
                    reference_size,
                    0.0,
                    f64::INFINITY,
                    |c| tree.parent(level, ClusterId(c)) == parent,
                );
                let gateway = estimate
                    .ok()
                    .and_then(|est| est.first_hop().map(|h| ClusterId(h.to)))
                    .and_then(|next| pin_gateway(tree, level, &node_table.entries, x, next))
                    .unwrap_or(Gateway::Unreachable);
                entries.insert(y, gateway);
            }
            row.push(entries);
        }
        gateways.push(row);
    }
    Ok(DhrTables { gateways })
}

fn pin_gateway(
    tree: &ClusterTree,
    level: usize,
    node_entries: &[AggregatedContact],
    from: ClusterId,
    to: ClusterId,
) -> Option<Gateway> {
    node_entries
        .iter()
        .filter(|e| {
            tree.cluster_of(NodeId(e.from), level) == from
                && tree.cluster_of(NodeId(e.to), level) == to
        })
        .min_by_key(|e| (e.window_start, e.from, e.to))
        .map(|e| Gateway::Via {
            exit: NodeId(e.from),
            entry: NodeId(e.to),
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Cluster-level table lookup.
    Inter,
    /// Exact routing inside the level-1 cluster.
    Intra,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub next_hop: NodeId,
    pub phase: Phase,
    /// Highest differing level between the node and the destination.
    pub level: usize,
    /// Table levels looked up while resolving the hop, outermost first.
    pub consulted: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhrConfig {
    pub branching: usize,
    pub window: SimTime,
    pub threshold: f64,
    pub budget: Option<usize>,
    /// Bundle size assumed when estimating cluster-level routes.
    pub reference_size: u64,
}

impl Default for DhrConfig {
    fn default() -> Self {
        DhrConfig {
            branching: 3,
            window: SimTime::from_secs(3600),
            threshold: 0.7,
            budget: None,
            reference_size: 1000,
        }
    }
}

/// Hierarchy, gateway tables and per-cluster sub-plans for forwarding over
/// one finite plan.
#[derive(Clone, Debug)]
pub struct DhrRouter {
    tree: ClusterTree,
    tables: DhrTables,
    /// Contacts internal to each level-1 cluster.
    local_plans: Vec<ContactPlan>,
}

impl DhrRouter {
    pub fn build(plan: &ContactPlan, config: &DhrConfig) -> Result<Self, DhrError> {
        let tree = build_hierarchy(plan, config.branching)?;
        Self::with_tree(plan, tree, config)
    }

    pub fn with_tree(
        plan: &ContactPlan,
        tree: ClusterTree,
        config: &DhrConfig,
    ) -> Result<Self, DhrError> {
        let node_table = cic::compress_time(plan, config.window)?;
        let level_tables = (1..tree.levels())
            .map(|l| {
                let spaced = cic::aggregate_space(&node_table, &tree, l)?;
                cic::summarize_probabilistic(&spaced, config.threshold, config.budget)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tables = build_dhr_tables(&tree, &node_table, &level_tables, config.reference_size)?;
        let local_plans = (0..tree.cluster_count(1) as u32)
            .map(|c| {
                let c = ClusterId(c);
                plan.filtered(|k| tree.cluster_of(k.from, 1) == c && tree.cluster_of(k.to, 1) == c)
            })
            .collect();
        Ok(DhrRouter {
            tree,
            tables,
            local_plans,
        })
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn tables(&self) -> &DhrTables {
        &self.tables
    }

    /// Table entries plus the size of the node's own level-1 cluster.
    pub fn state_size(&self, node: NodeId) -> usize {
        self.tables.table_for(&self.tree, node).entry_count()
            + self.tree.members(1, self.tree.cluster_of(node, 1)).len()
    }

    /// Two-phase next hop of a `size`-byte bundle at `node` bound for `dest`
    /// at time `t`.
    pub fn next_hop(
        &self,
        node: NodeId,
        dest: NodeId,
        t: SimTime,
        size: u64,
    ) -> Result<Decision, DhrError> {
        let level = highest_differing_level(&self.tree, node, dest)?;
        let mut consulted = Vec::new();
        let next_hop = self.resolve(node, dest, level, t, size, &mut consulted)?;
        Ok(Decision {
            next_hop,
            phase: if level >= 1 {
                Phase::Inter
            } else {
                Phase::Intra
            },
            level,
            consulted,
        })
    }

    fn resolve(
        &self,
        node: NodeId,
        dest: NodeId,
        level: usize,
        t: SimTime,
        size: u64,
        consulted: &mut Vec<usize>,
    ) -> Result<NodeId, DhrError> {
        let unreachable = DhrError::Unreachable { from: node, dest };
        if level == 0 {
            let local = &self.local_plans[self.tree.cluster_of(node, 1).0 as usize];
            let route = earliest_route(local, node, dest, size, t, SimTime::MAX)
                .map_err(|_| unreachable.clone())?;
            return route.next_hop().ok_or(unreachable);
        }
        consulted.push(level);
        let here = self.tree.cluster_of(node, level);
        let there = self.tree.cluster_of(dest, level);
        match self.tables.gateway(level, here, there) {
            Some(Gateway::Via { exit, entry }) if exit == node => Ok(entry),
            Some(Gateway::Via { exit, .. }) => {
                let inner = highest_differing_level(&self.tree, node, exit)?;
                self.resolve(node, exit, inner, t, size, consulted)
                    .map_err(|_| unreachable)
            }
            _ => Err(unreachable),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{parse_contact_plan, Contact};

    fn s(v: i64) -> SimTime {
        SimTime::from_secs(v)
    }

    fn uniform(n: u32) -> ContactPlan {
        let mut contacts = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    contacts.push(Contact::scheduled(a, b, s(0), s(10), 1));
                }
            }
        }
        ContactPlan::new(contacts, None, None).unwrap()
    }

    #[test]
    fn level_counts() {
        assert_eq!(level_count(1, 3), 1);
        assert_eq!(level_count(3, 3), 1);
        assert_eq!(level_count(4, 3), 2);
        assert_eq!(level_count(27, 3), 3);
        assert_eq!(level_count(81, 3), 4);
        assert_eq!(level_count(6, 2), 3);
    }

    #[test]
    fn uniform_27_nodes() {
        let tree = build_hierarchy(&uniform(27), 3).unwrap();
        assert_eq!(tree.levels(), 3);
        assert_eq!(tree.cluster_count(1), 9);
        for c in 0..9 {
            assert_eq!(tree.members(1, ClusterId(c)).len(), 3);
        }
        assert_eq!(tree.cluster_count(3), 1);
        assert_eq!(
            tree.members(1, ClusterId(0)),
            vec![NodeId(0), NodeId(1), NodeId(2)]
        );
    }

    #[test]
    fn single_node() {
        let tree = build_hierarchy(&ContactPlan::empty(1), 3).unwrap();
        assert_eq!(tree.levels(), 1);
        assert_eq!(tree.cluster_count(1), 1);
        assert!(matches!(
            build_hierarchy(&ContactPlan::empty(0), 3),
            Err(DhrError::EmptyNetwork)
        ));
        assert!(matches!(
            build_hierarchy(&ContactPlan::empty(3), 1),
            Err(DhrError::InvalidBranching(1))
        ));
    }

    #[test]
    fn disconnected_groups_stay_apart() {
        // {0,3,5} and {1,2,4} only talk internally
        let plan = parse_contact_plan(
            "contact 0 3 0 10 1\ncontact 3 5 0 10 1\ncontact 5 0 0 10 1\n\
             contact 1 2 0 10 1\ncontact 2 4 0 10 1\ncontact 4 1 0 10 1",
        )
        .unwrap();
        let tree = build_hierarchy(&plan, 3).unwrap();
        assert_eq!(
            tree.members(1, ClusterId(0)),
            vec![NodeId(0), NodeId(3), NodeId(5)]
        );
        assert_eq!(
            tree.members(1, ClusterId(1)),
            vec![NodeId(1), NodeId(2), NodeId(4)]
        );
        assert_eq!(
            tree.render(),
            "cluster 1 0 0 3 5\ncluster 1 1 1 2 4\ncluster 2 0 0 1 2 3 4 5\n"
        );
    }

    #[test]
    fn heavy_pairs_cluster_first() {
        let plan =
            parse_contact_plan("contact 0 3 0 100 1\ncontact 1 2 0 100 1\ncontact 0 1 0 1 1")
                .unwrap();
        let tree = build_hierarchy(&plan, 2).unwrap();
        assert_eq!(tree.cluster_of(NodeId(0), 1), tree.cluster_of(NodeId(3), 1));
        assert_eq!(tree.cluster_of(NodeId(1), 1), tree.cluster_of(NodeId(2), 1));
    }

    #[test]
    fn differing_levels() {
        let tree = build_hierarchy(&uniform(27), 3).unwrap();
        assert_eq!(
            highest_differing_level(&tree, NodeId(4), NodeId(4)),
            Err(DhrError::SameNode(NodeId(4)))
        );
        assert_eq!(highest_differing_level(&tree, NodeId(0), NodeId(2)), Ok(0));
        assert_eq!(highest_differing_level(&tree, NodeId(0), NodeId(5)), Ok(1));
        assert_eq!(highest_differing_level(&tree, NodeId(0), NodeId(26)), Ok(2));
        assert!(highest_differing_level(&tree, NodeId(0), NodeId(27)).is_err());
    }

    #[test]
    fn from_groups_rejects_bad_partitions() {
        assert!(ClusterTree::from_groups(3, 2, &[vec![vec![0, 1]]]).is_err());
        assert!(ClusterTree::from_groups(3, 2, &[vec![vec![0, 1], vec![1, 2]]]).is_err());
        // level-2 splits the level-1 cluster {0,1}
        assert!(ClusterTree::from_groups(
            4,
            2,
            &[vec![vec![0, 1], vec![2, 3]], vec![vec![0, 2], vec![1, 3]]]
        )
        .is_err());
    }

    /// Two clusters {0,1,2} and {3,4,5}; the only bridge is 2 -> 4.
    fn bridged() -> (ContactPlan, ClusterTree) {
        let plan = parse_contact_plan(
            "contact 0 1 0 100 10\ncontact 1 0 0 100 10\ncontact 1 2 0 100 10\n\
             contact 2 1 0 100 10\ncontact 3 4 0 100 10\ncontact 4 3 0 100 10\n\
             contact 4 5 0 100 10\ncontact 5 4 0 100 10\ncontact 2 4 50 60 10",
        )
        .unwrap();
        let tree = ClusterTree::from_groups(6, 3, &[vec![vec![0, 1, 2], vec![3, 4, 5]]]).unwrap();
        (plan, tree)
    }

    #[test]
    fn single_bridge_is_the_gateway() {
        let (plan, tree) = bridged();
        let router = DhrRouter::with_tree(&plan, tree.clone(), &DhrConfig::default()).unwrap();
        let expected = Gateway::Via {
            exit: NodeId(2),
            entry: NodeId(4),
        };
        for v in 0..3 {
            let table = router.tables().table_for(&tree, NodeId(v));
            assert_eq!(table.levels[0][&ClusterId(1)], expected);
        }
        assert_eq!(
            router.tables().gateway(1, ClusterId(1), ClusterId(0)),
            Some(Gateway::Unreachable)
        );

        let d = router.next_hop(NodeId(0), NodeId(5), s(0), 10).unwrap();
        assert_eq!((d.next_hop, d.phase, d.level), (NodeId(1), Phase::Inter, 1));
        assert_eq!(d.consulted, vec![1]);
        let d = router.next_hop(NodeId(2), NodeId(5), s(0), 10).unwrap();
        assert_eq!(d.next_hop, NodeId(4));
        let d = router.next_hop(NodeId(4), NodeId(5), s(0), 10).unwrap();
        assert_eq!((d.next_hop, d.phase), (NodeId(5), Phase::Intra));
        assert!(d.consulted.is_empty());
        assert_eq!(
            router.next_hop(NodeId(5), NodeId(0), s(0), 10),
            Err(DhrError::Unreachable {
                from: NodeId(5),
                dest: NodeId(0)
            })
        );
    }

    #[test]
    fn isolated_cluster_has_no_gateways() {
        let plan = parse_contact_plan("contact 0 1 0 10 1\ncontact 3 4 0 10 1").unwrap();
        let tree = ClusterTree::from_groups(6, 3, &[vec![vec![0, 1, 2], vec![3, 4, 5]]]).unwrap();
        let router = DhrRouter::with_tree(&plan, tree, &DhrConfig::default()).unwrap();
        assert_eq!(
            router.tables().gateway(1, ClusterId(0), ClusterId(1)),
            Some(Gateway::Unreachable)
        );
    }

    #[test]
    fn state_stays_within_bound() {
        for n in [9u32, 27, 81] {
            let plan = uniform(n);
            let router = DhrRouter::build(&plan, &DhrConfig::default()).unwrap();
            let tree = router.tree();
            let bound = tree.branching() * tree.levels() + 3;
            for v in 0..n {
                assert!(router.state_size(NodeId(v)) <= bound);
            }
        }
    }
}
