//! Earliest-delivery ("estimated shortest path") routing over a contact plan.
//!
//! A route is a time-respecting chain of contacts: every hop transmits the
//! whole bundle inside its contact and starts no earlier than the previous
//! hop finished. Among all such routes the one returned minimises, in order:
//!
//! 1. delivery time,
//! 2. hop count,
//! 3. the node sequence (lexicographically),
//! 4. the per-hop arrival times (lexicographically),
//! 5. the plan positions of the contacts used.
//!
//! Each hop is sent as early as possible. The search runs three passes over
//! the contacts: a hop-layered earliest-arrival relaxation gives the best
//! delivery time and the fewest hops achieving it; a backward pass computes,
//! for each node and remaining hop budget, the latest moment a bundle can be
//! ready there and still make that delivery time; a forward greedy walk then
//! picks the smallest feasible next node at every step.
//!
//! [`brute_force_route`] enumerates every simple contact sequence instead and
//! exists to check [`esp_route`] on small plans.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{Bundle, Contact, ContactPlan, NodeId};
use crate::time::{transmission_time, SimTime};

/// Contact-count ceiling for [`brute_force_route`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EspError {
    #[error("no time-respecting route from {from} to {to}")]
    NoRoute { from: NodeId, to: NodeId },
    #[error("node {0} is not a destination of the bundle")]
    NotADestination(NodeId),
    #[error("release time precedes bundle creation")]
    ReleaseBeforeCreation,
    #[error("plan is cyclic; unroll it before routing")]
    CyclicPlan,
    #[error("plan has {contacts} contacts, exhaustive search is limited to {limit}")]
    TooLarge { contacts: usize, limit: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub contact: Contact,
    /// Position of `contact` in the plan it came from.
    pub contact_index: usize,
    pub send_start: SimTime,
    pub send_end: SimTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub hops: Vec<Hop>,
    pub delivery_time: SimTime,
}

impl Route {
    pub fn empty(at: SimTime) -> Self {
        Route {
            hops: Vec::new(),
            delivery_time: at,
        }
    }

    /// Node sequence visited, starting at `source`.
    pub fn nodes(&self, source: NodeId) -> Vec<NodeId> {
        let mut out = vec![source];
        out.extend(self.hops.iter().map(|h| h.contact.to));
        out
    }

    pub fn next_hop(&self) -> Option<NodeId> {
        self.hops.first().map(|h| h.contact.to)
    }
}

/// Earliest-delivery route for `bundle` towards `dest`, released at `t0`.
pub fn esp_route(
    plan: &ContactPlan,
    bundle: &Bundle,
    dest: NodeId,
    t0: SimTime,
) -> Result<Route, EspError> {
    check_request(plan, bundle, dest, t0)?;
    earliest_route(
        plan,
        bundle.source,
        dest,
        bundle.size,
        t0,
        bundle.expires_at(),
    )
}

pub fn esp_delivery_time(
    plan: &ContactPlan,
    bundle: &Bundle,
    dest: NodeId,
    t0: SimTime,
) -> Result<SimTime, EspError> {
    esp_route(plan, bundle, dest, t0).map(|r| r.delivery_time)
}

fn check_request(
    plan: &ContactPlan,
    bundle: &Bundle,
    dest: NodeId,
    t0: SimTime,
) -> Result<(), EspError> {
    if plan.period().is_some() {
        return Err(EspError::CyclicPlan);
    }
    if !bundle.destinations.contains(&dest) {
        return Err(EspError::NotADestination(dest));
    }
    if t0 < bundle.created_at {
        return Err(EspError::ReleaseBeforeCreation);
    }
    Ok(())
}

const UNREACHED: i64 = i64::MAX;
const INFEASIBLE: i64 = i64::MIN;

/// Route search on raw endpoints; `deadline` is the last acceptable
/// delivery time.
pub fn earliest_route(
    plan: &ContactPlan,
    source: NodeId,
    dest: NodeId,
    size: u64,
    t0: SimTime,
    deadline: SimTime,
) -> Result<Route, EspError> {
    if source == dest {
        return Ok(Route::empty(t0));
    }
    let no_route = EspError::NoRoute {
        from: source,
        to: dest,
    };
    let n = plan
        .node_count()
        .max(source.index() + 1)
        .max(dest.index() + 1);
    let contacts = plan.contacts();
    let tx: Vec<i64> = contacts
        .iter()
        .map(|c| transmission_time(size, c.rate).0)
        .collect();

    // Hop-layered earliest arrival. After h rounds, `arrival[v]` is the
    // earliest ready time at v over walks of at most h hops.
    let mut arrival = vec![UNREACHED; n];
    arrival[source.index()] = t0.0;
    let mut best_hops = None;
    let mut hops = 0;
    loop {
        let mut next = arrival.clone();
        for (c, &dur) in contacts.iter().zip(&tx) {
            let ready = arrival[c.from.index()];
            if ready == UNREACHED {
                continue;
            }
            let send = ready.max(c.start.0);
            let done = send + dur;
            if done <= c.end.0 && done < next[c.to.index()] {
                next[c.to.index()] = done;
            }
        }
        hops += 1;
        if next[dest.index()] < arrival[dest.index()] {
            best_hops = Some(hops);
        }
        let settled = next == arrival || hops >= n;
        arrival = next;
        if settled {
            break;
        }
    }
    let delivery = arrival[dest.index()];
    let best_hops = match best_hops {
        Some(h) if delivery != UNREACHED && delivery <= deadline.0 => h,
        _ => return Err(no_route),
    };

    // latest[r][v]: latest ready time at v from which dest is reachable in
    // exactly r hops by `delivery`.
    let mut latest = vec![vec![INFEASIBLE; n]; best_hops + 1];
    latest[0][dest.index()] = delivery;
    for r in 1..=best_hops {
        let (done, rest) = latest.split_at_mut(r);
        let prev = &done[r - 1];
        let cur = &mut rest[0];
        for (c, &dur) in contacts.iter().zip(&tx) {
            let bound = prev[c.to.index()];
            if bound == INFEASIBLE {
                continue;
            }
            let send = bound.min(c.end.0) - dur;
            if send >= c.start.0 && send > cur[c.from.index()] {
                cur[c.from.index()] = send;
            }
        }
    }
    debug_assert!(latest[best_hops][source.index()] >= t0.0);

    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in contacts.iter().enumerate() {
        outgoing[c.from.index()].push(i);
    }

    let mut route = Vec::with_capacity(best_hops);
    let mut at = source;
    let mut ready = t0.0;
    for remaining in (1..=best_hops).rev() {
        // (next node, arrival, contact index) minimised lexicographically.
        let mut choice: Option<(NodeId, i64, usize)> = None;
        for &i in &outgoing[at.index()] {
            let c = &contacts[i];
            let send = ready.max(c.start.0);
            let done = send + tx[i];
            if done > c.end.0 || done > latest[remaining - 1][c.to.index()] {
                continue;
            }
            let cand = (c.to, done, i);
            if choice.is_none_or(|best| cand < best) {
                choice = Some(cand);
            }
        }
        let (to, done, i) = choice.expect("backward pass guarantees a feasible hop");
        route.push(Hop {
            contact: contacts[i].clone(),
            contact_index: i,
            send_start: SimTime(done - tx[i]),
            send_end: SimTime(done),
        });
        at = to;
        ready = done;
    }
    debug_assert_eq!(at, dest);
    Ok(Route {
        hops: route,
        delivery_time: SimTime(delivery),
    })
}

/// Exhaustive search over all simple contact sequences. Only for plans of at
/// most [`BRUTE_FORCE_LIMIT`] contacts.
pub fn brute_force_route(
    plan: &ContactPlan,
    bundle: &Bundle,
    dest: NodeId,
    t0: SimTime,
) -> Result<Route, EspError> {
    check_request(plan, bundle, dest, t0)?;
    if plan.len() > BRUTE_FORCE_LIMIT {
        return Err(EspError::TooLarge {
            contacts: plan.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if bundle.source == dest {
        return Ok(Route::empty(t0));
    }

    struct Search<'a> {
        contacts: &'a [Contact],
        size: u64,
        dest: NodeId,
        deadline: SimTime,
        best: Option<(Vec<i64>, Vec<Hop>)>,
    }

    impl Search<'_> {
        fn visit(
            &mut self,
            at: NodeId,
            ready: SimTime,
            visited: &mut Vec<NodeId>,
            path: &mut Vec<Hop>,
        ) {
            for (i, c) in self.contacts.iter().enumerate() {
                if c.from != at || visited.contains(&c.to) {
                    continue;
                }
                let send = ready.max(c.start);
                let done = send + transmission_time(self.size, c.rate);
                if done > c.end {
                    continue;
                }
                path.push(Hop {
                    contact: c.clone(),
                    contact_index: i,
                    send_start: send,
                    send_end: done,
                });
                if c.to == self.dest {
                    if done <= self.deadline {
                        self.offer(path);
                    }
                } else {
                    visited.push(c.to);
                    self.visit(c.to, done, visited, path);
                    visited.pop();
                }
                path.pop();
            }
        }

        fn offer(&mut self, path: &[Hop]) {
            // delivery, hops, node ids..., arrivals..., contact indices...
            let mut key = vec![path.last().unwrap().send_end.0, path.len() as i64];
            key.extend(path.iter().map(|h| h.contact.to.0 as i64));
            key.extend(path.iter().map(|h| h.send_end.0));
            key.extend(path.iter().map(|h| h.contact_index as i64));
            if self.best.as_ref().is_none_or(|(k, _)| key < *k) {
                self.best = Some((key, path.to_vec()));
            }
        }
    }

    let mut search = Search {
        contacts: plan.contacts(),
        size: bundle.size,
        dest,
        deadline: bundle.expires_at(),
        best: None,
    };
    search.visit(bundle.source, t0, &mut vec![bundle.source], &mut Vec::new());
    match search.best {
        Some((_, hops)) => Ok(Route {
            delivery_time: hops.last().unwrap().send_end,
            hops,
        }),
        None => Err(EspError::NoRoute {
            from: bundle.source,
            to: dest,
        }),
    }
}

/// Checks every hop and route invariant. Returns a description of the first
/// violation.
pub fn validate_route(
    plan: &ContactPlan,
    size: u64,
    source: NodeId,
    dest: NodeId,
    t0: SimTime,
    route: &Route,
) -> Result<(), String> {
    let mut at = source;
    let mut ready = t0;
    for (i, hop) in route.hops.iter().enumerate() {
        let c = &hop.contact;
        if plan.contacts().get(hop.contact_index) != Some(c) {
            return Err(format!("hop {i}: contact not found in plan"));
        }
        if c.from != at {
            return Err(format!(
                "hop {i}: starts at {} but bundle is at {at}",
                c.from
            ));
        }
        if hop.send_start < c.start || hop.send_end > c.end {
            return Err(format!("hop {i}: transmission outside contact window"));
        }
        if hop.send_end - hop.send_start != transmission_time(size, c.rate) {
            return Err(format!(
                "hop {i}: transmission time does not match size/rate"
            ));
        }
        if hop.send_start < ready {
            return Err(format!("hop {i}: sent before the bundle was ready"));
        }
        at = c.to;
        ready = hop.send_end;
    }
    if at != dest {
        return Err(format!("route ends at {at}, expected {dest}"));
    }
    if route.delivery_time != ready {
        return Err("delivery time differs from last hop completion".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::parse_contact_plan;

    fn s(v: i64) -> SimTime {
        SimTime::from_secs(v)
    }

    fn bundle(src: u32, dst: u32, size: u64) -> Bundle {
        Bundle::new(1, NodeId(src), [NodeId(dst)], size, s(0), s(10_000)).unwrap()
    }

    #[test]
    fn identity_route_is_empty() {
        let plan = parse_contact_plan("contact 0 1 0 10 1").unwrap();
        let r = earliest_route(&plan, NodeId(0), NodeId(0), 5, s(3), s(100)).unwrap();
        assert!(r.hops.is_empty());
        assert_eq!(r.delivery_time, s(3));
    }

    #[test]
    fn single_feasible_path() {
        let plan = parse_contact_plan("contact 0 1 10 20 1\ncontact 1 2 30 40 1").unwrap();
        let b = bundle(0, 2, 5);
        let r = esp_route(&plan, &b, NodeId(2), s(0)).unwrap();
        let windows: Vec<_> = r.hops.iter().map(|h| (h.send_start, h.send_end)).collect();
        assert_eq!(windows, vec![(s(10), s(15)), (s(30), s(35))]);
        assert_eq!(r.delivery_time, s(35));
        assert_eq!(
            esp_delivery_time(&plan, &b, NodeId(2), s(0)).unwrap(),
            s(35)
        );
        validate_route(&plan, 5, NodeId(0), NodeId(2), s(0), &r).unwrap();
    }

    #[test]
    fn short_window_is_skipped() {
        // A=0 B=1 C=2 D=3; B->D offers only 3 s for a 5 s transfer.
        let plan = parse_contact_plan(
            "contact 0 1 0 10 1\ncontact 1 3 5 8 1\ncontact 0 2 0 10 1\ncontact 2 3 10 20 1",
        )
        .unwrap();
        let b = bundle(0, 3, 5);
        let r = esp_route(&plan, &b, NodeId(3), s(0)).unwrap();
        assert_eq!(r.nodes(NodeId(0)), vec![NodeId(0), NodeId(2), NodeId(3)]);
        assert_eq!(r.delivery_time, s(15));
        assert_eq!(brute_force_route(&plan, &b, NodeId(3), s(0)).unwrap(), r);
    }

    #[test]
    fn fewer_hops_win_ties() {
        // 0->1->2 arrives at 12; 0->2 directly also arrives at 12.
        let plan =
            parse_contact_plan("contact 0 1 0 100 1\ncontact 1 2 10 100 1\ncontact 0 2 10 100 1")
                .unwrap();
        let r = earliest_route(&plan, NodeId(0), NodeId(2), 2, s(0), s(1000)).unwrap();
        assert_eq!(r.hops.len(), 1);
        assert_eq!(r.delivery_time, s(12));
    }

    #[test]
    fn lexicographic_node_tie_break_ignores_intermediate_arrival() {
        // Via 2 reaches node 3 earlier, via 1 later, both deliver at 61.
        let plan = parse_contact_plan(
            "contact 0 2 0 10 1\ncontact 2 3 0 10 1\ncontact 0 1 20 30 1\ncontact 1 3 20 40 1\ncontact 3 4 60 70 1",
        )
        .unwrap();
        let r = earliest_route(&plan, NodeId(0), NodeId(4), 1, s(0), s(1000)).unwrap();
        assert_eq!(
            r.nodes(NodeId(0)),
            vec![NodeId(0), NodeId(1), NodeId(3), NodeId(4)]
        );
        assert_eq!(r.delivery_time, s(61));
    }

    #[test]
    fn errors() {
        let empty = ContactPlan::empty(3);
        let b = bundle(0, 2, 1);
        assert_eq!(
            brute_force_route(&empty, &b, NodeId(2), s(0)).unwrap_err(),
            EspError::NoRoute {
                from: NodeId(0),
                to: NodeId(2)
            }
        );
        assert!(matches!(
            esp_route(&empty, &b, NodeId(2), s(0)),
            Err(EspError::NoRoute { .. })
        ));
        assert_eq!(
            esp_route(&empty, &b, NodeId(1), s(0)).unwrap_err(),
            EspError::NotADestination(NodeId(1))
        );
        let cyclic = parse_contact_plan("period 10\ncontact 0 2 0 5 1").unwrap();
        assert_eq!(
            esp_route(&cyclic, &b, NodeId(2), s(0)).unwrap_err(),
            EspError::CyclicPlan
        );
        let late = Bundle::new(1, NodeId(0), [NodeId(2)], 1, s(5), s(10)).unwrap();
        assert_eq!(
            esp_route(&empty, &late, NodeId(2), s(0)).unwrap_err(),
            EspError::ReleaseBeforeCreation
        );
    }

    #[test]
    fn ttl_bounds_delivery() {
        let plan = parse_contact_plan("contact 0 1 50 60 1").unwrap();
        let short = Bundle::new(1, NodeId(0), [NodeId(1)], 1, s(0), s(40)).unwrap();
        assert!(esp_route(&plan, &short, NodeId(1), s(0)).is_err());
        assert!(brute_force_route(&plan, &short, NodeId(1), s(0)).is_err());
        let long = Bundle::new(1, NodeId(0), [NodeId(1)], 1, s(0), s(51)).unwrap();
        assert_eq!(
            esp_delivery_time(&plan, &long, NodeId(1), s(0)).unwrap(),
            s(51)
        );
    }

    #[test]
    fn brute_force_refuses_large_plans() {
        let text: String = (0..21)
            .map(|i| format!("contact 0 1 {} {} 1\n", i * 10, i * 10 + 5))
            .collect();
        let plan = parse_contact_plan(&text).unwrap();
        assert_eq!(
            brute_force_route(&plan, &bundle(0, 1, 1), NodeId(1), s(0)).unwrap_err(),
            EspError::TooLarge {
                contacts: 21,
                limit: BRUTE_FORCE_LIMIT
            }
        );
    }

    #[test]
    fn validator_catches_broken_routes() {
        let plan = parse_contact_plan("contact 0 1 10 20 1\ncontact 1 2 30 40 1").unwrap();
        let mut r = earliest_route(&plan, NodeId(0), NodeId(2), 5, s(0), s(100)).unwrap();
        r.hops[1].send_start = s(12);
        assert!(validate_route(&plan, 5, NodeId(0), NodeId(2), s(0), &r).is_err());
    }
}
