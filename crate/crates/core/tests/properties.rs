use std::collections::BTreeSet;
use std::path::Path;

use dtnsim_core::cic::{compress_space, compress_time, summarize_probabilistic};
use dtnsim_core::contact::{Bundle, Contact, ContactKind, ContactPlan, NodeId};
use dtnsim_core::dhr::{build_hierarchy, level_count};
use dtnsim_core::energy::{EnergyState, RadioParams};
use dtnsim_core::esp::esp_delivery_time;
use dtnsim_core::multipath::{
    check_disjoint, create_topology, path_alive, select_disjoint_paths, TopologyParams,
};
use dtnsim_core::sim::event::{EventKind, EventQueue};
use dtnsim_core::sim::rate::{rate_update, MeasurementHistory, RateParams};
use dtnsim_core::sim::{run_scenario, ScenarioConfig};
use dtnsim_core::time::{SimTime, Volume};
use proptest::prelude::*;

fn contact() -> impl Strategy<Value = (u32, u32, i64, i64, u64, f64)> {
    (
        0u32..8,
        0u32..8,
        0i64..500,
        1i64..60,
        1u64..50,
        0.5f64..=1.0,
    )
}

fn plan_from(raw: Vec<(u32, u32, i64, i64, u64, f64)>) -> ContactPlan {
    let contacts = raw
        .into_iter()
        .filter(|c| c.0 != c.1)
        .map(|(from, to, start, len, rate, p)| Contact {
            from: NodeId(from),
            to: NodeId(to),
            start: SimTime::from_secs(start),
            end: SimTime::from_secs(start + len),
            rate,
            probability: p,
            kind: if p < 1.0 {
                ContactKind::Predicted
            } else {
                ContactKind::Scheduled
            },
        })
        .collect();
    ContactPlan::new(contacts, None, Some(8)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hierarchy_nests(raw in prop::collection::vec(contact(), 0..40), b in 2usize..5) {
        let plan = plan_from(raw);
        let tree = build_hierarchy(&plan, b).unwrap();
        let levels = tree.levels();
        prop_assert_eq!(levels, level_count(8, b));
        prop_assert_eq!(tree.cluster_count(levels), 1);
        for l in 0..levels {
            for a in 0..8u32 {
                for c in 0..8u32 {
                    if tree.cluster_of(NodeId(a), l) == tree.cluster_of(NodeId(c), l) {
                        prop_assert_eq!(
                            tree.cluster_of(NodeId(a), l + 1),
                            tree.cluster_of(NodeId(c), l + 1)
                        );
                    }
                }
            }
            for k in 0..tree.cluster_count(l + 1) as u32 {
                let members = tree.members(l + 1, dtnsim_core::dhr::ClusterId(k));
                prop_assert!(members.len() <= b.pow(l as u32 + 1));
            }
        }
    }

    #[test]
    fn time_compression_conserves_and_covers(
        raw in prop::collection::vec(contact(), 1..40),
        window in 1i64..400,
    ) {
        let plan = plan_from(raw);
        let table = compress_time(&plan, SimTime::from_secs(window)).unwrap();
        prop_assert_eq!(table.total_volume(), plan.total_volume());
        prop_assert!(table.len() <= plan.len());
        for c in plan.contacts() {
            prop_assert!(table.entries.iter().any(|e| e.covers(c)));
        }
        for e in &table.entries {
            prop_assert!((0.0..=1.0).contains(&e.availability));
        }
    }

    #[test]
    fn space_compression_keeps_inter_cluster_volume(
        raw in prop::collection::vec(contact(), 1..40),
        b in 2usize..4,
    ) {
        let plan = plan_from(raw);
        let tree = build_hierarchy(&plan, b).unwrap();
        for level in 1..=tree.levels() {
            let table = compress_space(&plan, &tree, level).unwrap();
            let crossing: Volume = plan
                .contacts()
                .iter()
                .filter(|c| tree.cluster_of(c.from, level) != tree.cluster_of(c.to, level))
                .map(|c| c.volume())
                .sum();
            prop_assert_eq!(table.total_volume(), crossing);
            for c in plan.contacts() {
                let (x, y) = (tree.cluster_of(c.from, level).0, tree.cluster_of(c.to, level).0);
                if x != y {
                    prop_assert!(table.entries.iter().any(|e| e.from == x && e.to == y
                        && e.window_start <= c.start && c.end <= e.window_end));
                }
            }
        }
    }

    #[test]
    fn probabilistic_summary_respects_threshold(
        raw in prop::collection::vec(contact(), 1..40),
        threshold in 0.6f64..=0.8,
        budget in prop::option::of(1usize..10),
    ) {
        let plan = plan_from(raw);
        let timed = compress_time(&plan, SimTime::from_secs(100)).unwrap();
        let table = summarize_probabilistic(&timed, threshold, budget).unwrap();
        prop_assert!(table.entries.iter().all(|e| e.probability >= threshold));
        if let Some(b) = budget {
            prop_assert!(table.len() <= b);
        }
        let pairs: BTreeSet<_> = table.entries.iter().map(|e| (e.from, e.to)).collect();
        prop_assert_eq!(pairs.len(), table.len());
    }

    #[test]
    fn later_or_bigger_never_arrives_sooner(
        raw in prop::collection::vec(contact(), 1..15),
        t0 in 0i64..300,
        dt in 0i64..100,
        size in 1u64..200,
    ) {
        let plan = plan_from(raw);
        let bundle = |size, at| {
            Bundle::new(0, NodeId(0), [NodeId(7)], size, SimTime::from_secs(at), SimTime::from_secs(10_000)).unwrap()
        };
        let early = esp_delivery_time(&plan, &bundle(size, t0), NodeId(7), SimTime::from_secs(t0));
        let late = esp_delivery_time(&plan, &bundle(size, t0 + dt), NodeId(7), SimTime::from_secs(t0 + dt));
        let big = esp_delivery_time(&plan, &bundle(size * 2, t0), NodeId(7), SimTime::from_secs(t0));
        if let Ok(l) = late {
            prop_assert!(early.as_ref().is_ok_and(|&e| e <= l));
        }
        if let Ok(b) = big {
            prop_assert!(early.as_ref().is_ok_and(|&e| e <= b));
        }
    }

    #[test]
    fn disjoint_paths_are_disjoint(n in 5usize..30, seed in 0u64..1000, k in 1usize..4) {
        let topo = create_topology(&TopologyParams { n, seed, ..TopologyParams::default() });
        let (src, dst) = (NodeId(0), NodeId(n as u32 - 1));
        if let Ok(set) = select_disjoint_paths(&topo, src, dst, k) {
            prop_assert!(!set.paths.is_empty() && set.paths.len() <= k);
            prop_assert!(check_disjoint(&topo, &set, src, dst).is_ok());
            for p in &set.paths {
                prop_assert!(path_alive(&topo, p));
                prop_assert_eq!((p[0], *p.last().unwrap()), (src, dst));
            }
        } else {
            prop_assert!(!topo.is_connected());
        }
    }

    #[test]
    fn energy_is_conserved(
        initial in prop::collection::vec(0.0f64..2.0, 1..6),
        charges in prop::collection::vec((0usize..6, 0.0f64..0.5), 0..40),
    ) {
        let mut e = EnergyState::new(&initial, RadioParams::default());
        for (i, (v, j)) in charges.into_iter().enumerate() {
            let v = NodeId((v % initial.len()) as u32);
            let alive = e.is_alive(v);
            let before = e.residual_pj(v);
            let paid = e.charge(v, j, SimTime(i as i64));
            prop_assert!(!paid || alive);
            prop_assert!(e.residual_pj(v) <= before);
        }
        for v in 0..initial.len() as u32 {
            let v = NodeId(v);
            prop_assert_eq!(e.residual_pj(v) + e.charged_pj(v), e.initial_pj(v));
            prop_assert_eq!(e.is_alive(v), e.died_at(v).is_none() && e.initial_pj(v) > 0);
        }
    }

    #[test]
    fn events_pop_in_causal_order(times in prop::collection::vec(0i64..1000, 1..50)) {
        let mut q = EventQueue::new();
        for (i, &t) in times.iter().enumerate() {
            q.schedule(SimTime(t), EventKind::BundleGenerated(i));
        }
        let mut last = (SimTime(-1), 0usize);
        while let Some(ev) = q.pop_until(SimTime::MAX) {
            let EventKind::BundleGenerated(i) = ev.kind else { unreachable!() };
            prop_assert!((ev.time, i) > last);
            last = (ev.time, i);
            if i % 3 == 0 {
                q.schedule(ev.time + SimTime(5), EventKind::BundleGenerated(1000 + i));
            }
        }
    }

    #[test]
    fn rate_stays_above_floor(
        samples in prop::collection::vec(0.0f64..=1.0, 0..6),
        rate in 1.0f64..200.0,
        beta in 0.0f64..5.0,
    ) {
        let mut h = MeasurementHistory::default();
        for &s in &samples {
            h.push(s);
        }
        let params = RateParams { beta, rate_min: 1.0, measurement_period: 1.0 };
        match rate_update(&h, rate, &params) {
            None => prop_assert!(samples.len() < 2),
            Some(r) => {
                prop_assert!(r >= 1.0);
                let (a, b) = (samples[samples.len() - 2], samples[samples.len() - 1]);
                if b <= a {
                    prop_assert_eq!(r, rate + 1.0);
                } else {
                    prop_assert!(r <= rate);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_bundle_ends_in_one_state(
        seed in 0u64..10_000,
        case in 0usize..9,
        horizon in 5i64..200,
    ) {
        let (gen, policy) = [
            ("grid-plan\nn = 9", "esp"),
            ("grid-plan\nn = 9", "dhr_cic"),
            ("cyclic-plan", "epidemic"),
            ("cyclic-plan", "gossip"),
            ("cyclic-plan", "direct"),
            ("random-topology", "multipath"),
            ("random-topology", "gossip"),
            ("dumbbell-energy", "min_hop"),
            ("dumbbell-energy", "power_aware"),
        ][case];
        let text = format!(
            "generator = {gen}\npolicy = {policy}\nseed = {seed}\nhorizon = {horizon}\ngen_window = {}\nttl = 60",
            horizon / 2
        );
        let cfg = ScenarioConfig::parse(&text, Path::new(".")).unwrap();
        let m = run_scenario(&cfg).unwrap().metrics;
        prop_assert_eq!(m.delivered + m.lost + m.in_flight, m.generated);
        prop_assert_eq!(m.measurement_ticks, horizon as u64);
    }
}
