use dtnsim_core::contact::{Bundle, Contact, ContactKind, ContactPlan, NodeId};
use dtnsim_core::esp::{brute_force_route, esp_route, validate_route};
use dtnsim_core::time::SimTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_plan(seed: u64, nodes: u32, contacts: usize) -> ContactPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < contacts {
        let from = rng.gen_range(0..nodes);
        let to = rng.gen_range(0..nodes);
        if from == to {
            continue;
        }
        let start = rng.gen_range(0..60);
        let len = rng.gen_range(1..20);
        out.push(Contact {
            from: NodeId(from),
            to: NodeId(to),
            start: SimTime::from_secs(start),
            end: SimTime::from_secs(start + len),
            rate: rng.gen_range(1..4),
            probability: 1.0,
            kind: ContactKind::Scheduled,
        });
    }
    ContactPlan::new(out, None, Some(nodes as usize)).unwrap()
}

#[test]
fn esp_matches_brute_force_on_random_plans() {
    let (mut found, mut multi) = (0, 0);
    for seed in 0..300 {
        let plan = random_plan(seed, 6, 15);
        let bundle = Bundle::new(
            seed,
            NodeId(0),
            [NodeId(5)],
            1 + seed % 7,
            SimTime::ZERO,
            SimTime::from_secs(1000),
        )
        .unwrap();
        let fast = esp_route(&plan, &bundle, NodeId(5), SimTime::ZERO);
        let slow = brute_force_route(&plan, &bundle, NodeId(5), SimTime::ZERO);
        assert_eq!(fast, slow, "seed {seed}");
        if let Ok(r) = fast {
            found += 1;
            if r.hops.len() > 1 {
                multi += 1;
            }
            validate_route(&plan, bundle.size, NodeId(0), NodeId(5), SimTime::ZERO, &r).unwrap();
        }
    }
    eprintln!("found {found} multi {multi}");
    assert!(found > 100 && multi > 50);
}
