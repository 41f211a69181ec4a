use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PathSet;
use crate::contact::NodeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MulticastMode {
    /// Highest-priority live path carries everything.
    #[default]
    Failover,
    /// Round-robin over live paths.
    Stripe,
}

impl MulticastMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MulticastMode::Failover => "failover",
            MulticastMode::Stripe => "stripe",
        }
    }
}

impl FromStr for MulticastMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "failover" => Ok(MulticastMode::Failover),
            "stripe" => Ok(MulticastMode::Stripe),
            _ => Err(format!("unknown multicast mode '{s}'")),
        }
    }
}

/// Path `path` toward `dest` breaks while packet `packet` (1-based) is in
/// flight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Breakage {
    pub dest: NodeId,
    pub path: usize,
    pub packet: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestReport {
    pub delivered: u32,
    pub lost: u32,
    /// Packets carried by each path index.
    pub per_path: BTreeMap<usize, u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryReport {
    pub packets: u32,
    pub destinations: BTreeMap<NodeId, DestReport>,
    /// Directed link → packets carried.
    pub link_transmissions: BTreeMap<(NodeId, NodeId), u32>,
}

impl DeliveryReport {
    pub fn transmissions(&self) -> u64 {
        self.link_transmissions.values().map(|&c| c as u64).sum()
    }
}

/// Sends `packets` packets to every destination of `sets`. Each packet
/// crosses a link at most once even when several destinations' paths share
/// it. A packet riding a path as it breaks is lost after its first hop.
pub fn multicast_transmit(
    sets: &BTreeMap<NodeId, PathSet>,
    packets: u32,
    mode: MulticastMode,
    breaks: &[Breakage],
) -> DeliveryReport {
    let mut report = DeliveryReport {
        packets,
        ..Default::default()
    };
    let mut live: BTreeMap<NodeId, Vec<bool>> = sets
        .iter()
        .map(|(&d, s)| (d, vec![true; s.paths.len()]))
        .collect();
    let mut turn: BTreeMap<NodeId, usize> = BTreeMap::new();
    for packet in 1..=packets {
        let mut links: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for (&dest, set) in sets {
            let alive = live.get_mut(&dest).expect("one entry per destination");
            let open: Vec<usize> = (0..alive.len()).filter(|&i| alive[i]).collect();
            let chosen = match mode {
                _ if open.is_empty() => None,
                MulticastMode::Failover => Some(open[0]),
                MulticastMode::Stripe => {
                    let t = turn.entry(dest).or_default();
                    let pick = open[*t % open.len()];
                    *t += 1;
                    Some(pick)
                }
            };
            let mut lost_in_flight = false;
            for b in breaks
                .iter()
                .filter(|b| b.dest == dest && b.packet == packet)
            {
                if b.path < alive.len() {
                    alive[b.path] = false;
                }
                lost_in_flight |= chosen == Some(b.path);
            }
            let entry = report.destinations.entry(dest).or_default();
            let Some(idx) = chosen else {
                entry.lost += 1;
                continue;
            };
            *entry.per_path.entry(idx).or_default() += 1;
            let path = &set.paths[idx];
            let hops = if lost_in_flight { 1 } else { path.len() - 1 };
            links.extend(path.windows(2).take(hops).map(|w| (w[0], w[1])));
            if lost_in_flight {
                entry.lost += 1;
            } else {
                entry.delivered += 1;
            }
        }
        for l in links {
            *report.link_transmissions.entry(l).or_default() += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn set(paths: &[&[u32]]) -> PathSet {
        PathSet {
            paths: paths.iter().map(|p| ids(p)).collect(),
            disjoint: true,
        }
    }

    #[test]
    fn shared_prefix_sent_once() {
        let sets = BTreeMap::from([
            (NodeId(2), set(&[&[0, 1, 2]])),
            (NodeId(3), set(&[&[0, 1, 3]])),
        ]);
        let r = multicast_transmit(&sets, 10, MulticastMode::Failover, &[]);
        assert_eq!(r.link_transmissions[&(NodeId(0), NodeId(1))], 10);
        assert_eq!(r.link_transmissions[&(NodeId(1), NodeId(2))], 10);
        assert_eq!(r.transmissions(), 30);
        assert_eq!(r.destinations[&NodeId(3)].delivered, 10);
    }

    #[test]
    fn failover_loses_the_packet_in_flight() {
        let sets = BTreeMap::from([(NodeId(9), set(&[&[0, 1, 9], &[0, 2, 9]]))]);
        let breaks = [Breakage {
            dest: NodeId(9),
            path: 0,
            packet: 3,
        }];
        let r = multicast_transmit(&sets, 10, MulticastMode::Failover, &breaks);
        let d = &r.destinations[&NodeId(9)];
        assert_eq!((d.delivered, d.lost), (9, 1));
        assert_eq!(d.per_path[&0], 3);
        assert_eq!(d.per_path[&1], 7);
        assert_eq!(r.link_transmissions[&(NodeId(0), NodeId(1))], 3);
        assert_eq!(r.link_transmissions[&(NodeId(1), NodeId(9))], 2);
    }

    #[test]
    fn stripe_round_robin() {
        let sets = BTreeMap::from([(NodeId(9), set(&[&[0, 1, 9], &[0, 2, 9]]))]);
        let r = multicast_transmit(&sets, 10, MulticastMode::Stripe, &[]);
        let d = &r.destinations[&NodeId(9)];
        assert_eq!(d.per_path[&0], 5);
        assert_eq!(d.per_path[&1], 5);
        assert_eq!(d.delivered, 10);
    }

    #[test]
    fn no_live_path_loses_everything_after() {
        let sets = BTreeMap::from([(NodeId(9), set(&[&[0, 9]]))]);
        let breaks = [Breakage {
            dest: NodeId(9),
            path: 0,
            packet: 1,
        }];
        let r = multicast_transmit(&sets, 4, MulticastMode::Failover, &breaks);
        assert_eq!(r.destinations[&NodeId(9)].lost, 4);
        assert_eq!(r.transmissions(), 1);
    }

    #[test]
    fn mode_names() {
        assert_eq!("stripe".parse::<MulticastMode>(), Ok(MulticastMode::Stripe));
        assert_eq!(MulticastMode::default().as_str(), "failover");
        assert!("x".parse::<MulticastMode>().is_err());
    }
}
