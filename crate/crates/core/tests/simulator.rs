#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use ebc_core::region::region_polygon;
use ebc_core::sim::{run, run_with_trace, Policy, QueueSystem, SimAction, SlotDraw};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_policy(rng: &mut impl Rng) -> Policy {
    let mut probs = [[0.0; 4]; 4];
    for row in probs.iter_mut() {
        let w: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>());
        let total: f64 = w.iter().sum();
        *row = w.map(|x| x / total);
    }
    Policy::new(probs).unwrap()
}

#[test]
fn action_frequencies_follow_the_policy() {
    let j = fig3();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let policy = random_policy(&mut rng);
    let report = run(&j, &policy, 1_000_000, 3).unwrap();
    for shat in 0..4 {
        let n = report.estimate_counts[shat] as f64;
        // Fresh backlogs never run dry, so only COMMON can fall back.
        for a in [SimAction::P1, SimAction::P2, SimAction::Mix] {
            let p = policy.prob(shat, a);
            let got = report.action_counts[shat][a.index()] as f64;
            let sigma = (n * p * (1.0 - p)).sqrt();
            assert!(
                (got - n * p).abs() <= 3.0 * sigma.max(1.0),
                "shat {shat} {a}: {got} vs {}",
                n * p
            );
        }
    }
    let marg = j.estimate_marginal();
    for shat in 0..4 {
        let n = report.slots as f64;
        let p = marg[shat];
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!((report.estimate_counts[shat] as f64 - n * p).abs() <= 3.0 * sigma);
    }
}

#[test]
fn random_policies_stay_inside_the_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..20 {
        let j = if i % 2 == 0 { fig3() } else { random_joint(&mut rng) };
        let poly = region_polygon(&j).unwrap();
        let policy = random_policy(&mut rng);
        let report = run(&j, &policy, 1_000_000, i).unwrap();
        let point = (report.rates[0], report.rates[1]);
        assert!(poly.contains(point, 1e-3), "{point:?} outside {:?}", poly.vertices);
        assert_eq!(report.created[0], report.delivered[0] + report.pending[0]);
        assert_eq!(report.created[1], report.delivered[1] + report.pending[1]);
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let j = fig3();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let policy = random_policy(&mut rng);
    let a = run(&j, &policy, 50_000, 9).unwrap();
    let b = run(&j, &policy, 50_000, 9).unwrap();
    assert_eq!(a, b);
    let c = run(&j, &policy, 50_000, 10).unwrap();
    assert_ne!(a.delivered, c.delivered);

    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    run_with_trace(&j, &policy, 2_000, 9, Some(&mut t1)).unwrap();
    run_with_trace(&j, &policy, 2_000, 9, Some(&mut t2)).unwrap();
    assert_eq!(t1, t2);
    let text = String::from_utf8(t1).unwrap();
    assert!(text.starts_with("slot,s,shat,action,deliveries,qlen\n"));
    assert_eq!(text.lines().count(), 2_001);
}

fn action() -> impl Strategy<Value = SimAction> {
    prop::sample::select(SimAction::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conservation_at_every_slot(
        steps in prop::collection::vec((0usize..4, action()), 1..300),
        fresh in prop::option::of((0u64..20, 0u64..20)),
    ) {
        let mut q = match fresh {
            Some((a, b)) => QueueSystem::with_fresh(a, b),
            None => QueueSystem::backlogged(),
        };
        for (slot, (s, a)) in steps.into_iter().enumerate() {
            let out = q.step(SlotDraw { slot: slot as u64, s, shat: 0 }, a);
            prop_assert!(q.conserved());
            prop_assert!(q.delivered[0] <= q.created[0] && q.delivered[1] <= q.created[1]);
            // A receiver can only decode in a slot where it is connected.
            for k in 1..=2 {
                if (s >> (2 - k)) & 1 == 0 {
                    prop_assert_eq!(out.deliveries[k - 1], 0);
                }
            }
            if let Some((f1, f2)) = fresh {
                prop_assert!(q.created[0] <= f1 && q.created[1] <= f2);
            }
        }
    }
}
