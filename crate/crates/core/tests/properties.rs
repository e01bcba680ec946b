//! Property-based invariants over randomly generated instances.

mod common;

use common::{random_instance, random_policy, InstanceOptions};
use latmove_core::ltv::{bound_tables, partial_compromise_prob};
use latmove_core::matrix::SquareMatrix;
use latmove_core::mc::wilson_interval;
use latmove_core::metrics::{probability_of_interference, stealthiness};
use latmove_core::net_model::{no_interference_prob, PolicyMatrix};
use latmove_core::policy_opt::gibbs_step;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The partial-compromise classes of one stage form a probability
    /// distribution for any parameters.
    #[test]
    fn partial_compromise_mass_is_one(seed in 0u64..10_000, n in 3usize..6) {
        let spec = random_instance(seed, &InstanceOptions { n, single_dmz: false, ensure_direct: false });
        let i = spec.dmz()[0];
        let j0 = spec.target();
        let others: Vec<usize> = (0..n).filter(|&h| h != i && h != j0).collect();
        let mut total = 0.0;
        let mut class = vec![0u8; others.len()];
        'outer: loop {
            let v: Vec<usize> = others.iter().zip(&class).filter(|(_, &c)| c == 0).map(|(&h, _)| h).collect();
            let u: Vec<usize> = others.iter().zip(&class).filter(|(_, &c)| c == 1).map(|(&h, _)| h).collect();
            total += partial_compromise_prob(&spec, i, &v, &u).unwrap();
            for k in 0..=class.len() {
                if k == class.len() {
                    break 'outer;
                }
                class[k] += 1;
                if class[k] < 3 {
                    break;
                }
                class[k] = 0;
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    /// Lower and upper recursions bracket each other at every node and
    /// horizon, and stay inside [0,1].
    #[test]
    fn bounds_are_ordered(seed in 0u64..10_000, n in 3usize..7, delta_k in 0usize..5) {
        let spec = random_instance(seed, &InstanceOptions { n, single_dmz: false, ensure_direct: false });
        let policy = random_policy(&spec, seed ^ 0xabcd);
        let tables = bound_tables(&spec, &policy, delta_k).unwrap();
        for node in (0..n).filter(|&x| x != spec.target()) {
            for d in 0..=delta_k {
                let lo = tables.lower_at(node, d);
                let hi = tables.upper_at(node, d);
                prop_assert!(lo <= hi + 1e-12);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&lo));
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&hi));
            }
        }
    }

    /// Interference probability is a probability for any feasible policy.
    #[test]
    fn poi_stays_in_unit_interval(seed in 0u64..10_000, n in 3usize..8) {
        let spec = random_instance(seed, &InstanceOptions { n, single_dmz: false, ensure_direct: false });
        let policy = random_policy(&spec, seed);
        let poi = probability_of_interference(&spec, &policy);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&poi));
    }

    /// Entropy only depends on the multiset of nonzero masses, not their
    /// positions.
    #[test]
    fn stealthiness_ignores_link_positions(seed in 0u64..10_000) {
        let spec = random_instance(seed, &InstanceOptions { n: 5, single_dmz: false, ensure_direct: false });
        let policy = random_policy(&spec, seed);
        let pairs = spec.feasible_pairs();
        // rotate the masses one feasible slot over
        let mut rotated = SquareMatrix::zeros(5);
        for (k, &(l, w)) in pairs.iter().enumerate() {
            let (l2, w2) = pairs[(k + 1) % pairs.len()];
            rotated.set(l2, w2, policy.get(l, w));
        }
        let rotated = PolicyMatrix::new(&spec, rotated).unwrap();
        prop_assert!((stealthiness(&policy) - stealthiness(&rotated)).abs() < 1e-9);
    }

    /// Adding sources or sinks can only lower the no-interference
    /// probability.
    #[test]
    fn no_interference_monotone_in_sets(seed in 0u64..10_000, n in 3usize..8) {
        let spec = random_instance(seed, &InstanceOptions { n, single_dmz: false, ensure_direct: false });
        let w = spec.target();
        let others: Vec<usize> = (0..n).filter(|&x| x != w).collect();
        let mut prev = 1.0;
        for k in 0..=others.len() {
            let v = &others[..k];
            let p = no_interference_prob(&spec, v, w, v).unwrap();
            prop_assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    /// The Gibbs step returns a simplex point and ignores constant shifts.
    #[test]
    fn gibbs_is_shift_invariant_simplex(seed in 0u64..10_000, alpha in 0.05f64..3.0, shift in -50.0f64..50.0) {
        let spec = random_instance(seed, &InstanceOptions { n: 5, single_dmz: false, ensure_direct: false });
        let pairs = spec.feasible_pairs();
        let mut c = SquareMatrix::zeros(5);
        let mut s = latmove_core::rng::RandomStream::new(seed, latmove_core::rng::StreamPurpose::Identify, 1, 1);
        for &(l, w) in &pairs {
            c.set(l, w, 2.0 * s.next_f64() - 1.0);
        }
        let base = gibbs_step(&c, alpha, &pairs).unwrap();
        prop_assert!((base.sum() - 1.0).abs() < 1e-9);
        let mut shifted = c.clone();
        for &(l, w) in &pairs {
            shifted.set(l, w, shifted.get(l, w) + shift);
        }
        let moved = gibbs_step(&shifted, alpha, &pairs).unwrap();
        prop_assert!(base.max_abs_diff(&moved) < 1e-9);
    }

    /// Wilson intervals contain the point estimate and are ordered.
    #[test]
    fn wilson_contains_point(successes in 0u64..1000, extra in 0u64..1000, level in 0.5f64..0.9999) {
        let trials = successes + extra + 1;
        let (lo, hi) = wilson_interval(successes, trials, level);
        let p = successes as f64 / trials as f64;
        prop_assert!(lo <= p && p <= hi);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }
}
