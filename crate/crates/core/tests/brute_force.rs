//! Full-enumeration oracle for the exact evaluator on tiny networks: every
//! link configuration, honey-link choice, identification coin and
//! compromise coin is enumerated explicitly, with none of the evaluator's
//! analytic marginalization.

mod common;

use std::collections::BTreeMap;

use common::{random_instance, random_policy, zero_poic_policy, InstanceOptions};
use latmove_core::ltv::{ltv_exact_single, DEFAULT_EXACT_CAP};
use latmove_core::net_model::{NetworkSpec, PolicyMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Outcome {
    Detected,
    Target,
    Active(u32),
}

/// Distribution over one stage's outcome from compromised set `mask`, by
/// exhaustive enumeration of the stage randomness.
fn brute_stage(spec: &NetworkSpec, policy: &PolicyMatrix, mask: u32) -> BTreeMap<Outcome, f64> {
    let n = spec.n();
    let j0 = spec.target();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .collect();
    let mut honey_options: Vec<(Option<(usize, usize)>, f64)> = Vec::new();
    let mut total = 0.0;
    for l in 0..n {
        for w in 0..n {
            let g = policy.get(l, w);
            if g > 0.0 {
                honey_options.push((Some((l, w)), g));
                total += g;
            }
        }
    }
    if total < 1.0 {
        honey_options.push((None, 1.0 - total));
    }

    let mut dist = BTreeMap::new();
    // enumerate link configurations
    for bits in 0u64..(1 << pairs.len()) {
        let mut p_links = 1.0;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let b = spec.beta(i, j);
            p_links *= if bits & (1 << k) != 0 { b } else { 1.0 - b };
        }
        if p_links == 0.0 {
            continue;
        }
        let has_link =
            |i: usize, j: usize| bits & (1 << pairs.iter().position(|&p| p == (i, j)).unwrap()) != 0;
        let idle = |w: usize| (0..n).all(|x| x == w || (!has_link(x, w) && !has_link(w, x)));

        let attempts: Vec<(usize, usize)> = (0..n)
            .filter(|&t| mask & (1 << t) == 0)
            .flat_map(|t| (0..n).map(move |s| (s, t)))
            .filter(|&(s, t)| mask & (1 << s) != 0 && has_link(s, t))
            .collect();

        for &(honey, p_honey) in &honey_options {
            // detection branch probabilities
            let p_detect = match honey {
                Some((l, w))
                    if mask & (1 << l) != 0 && mask & (1 << w) == 0 && idle(w) =>
                {
                    1.0 - spec.q(l, w)
                }
                _ => 0.0,
            };
            if p_detect > 0.0 {
                *dist.entry(Outcome::Detected).or_insert(0.0) += p_links * p_honey * p_detect;
            }
            let p_live = p_links * p_honey * (1.0 - p_detect);
            if p_live == 0.0 {
                continue;
            }
            // enumerate compromise coins
            for coins in 0u32..(1 << attempts.len()) {
                let mut p_coins = 1.0;
                let mut next = mask;
                for (k, &(s, t)) in attempts.iter().enumerate() {
                    let l = spec.lambda(s, t);
                    if coins & (1 << k) != 0 {
                        p_coins *= l;
                        next |= 1 << t;
                    } else {
                        p_coins *= 1.0 - l;
                    }
                }
                if p_coins == 0.0 {
                    continue;
                }
                let outcome = if next & (1 << j0) != 0 {
                    Outcome::Target
                } else {
                    Outcome::Active(next)
                };
                *dist.entry(outcome).or_insert(0.0) += p_live * p_coins;
            }
        }
    }
    dist
}

fn brute_ltv(
    spec: &NetworkSpec,
    policy: &PolicyMatrix,
    delta_k: usize,
    initial: usize,
) -> Vec<f64> {
    let mut active: BTreeMap<u32, f64> = BTreeMap::new();
    active.insert(1 << initial, 1.0);
    let mut target = 0.0;
    let mut values = Vec::new();
    for _ in 0..=delta_k {
        let mut next: BTreeMap<u32, f64> = BTreeMap::new();
        for (&mask, &m) in &active {
            for (outcome, p) in brute_stage(spec, policy, mask) {
                match outcome {
                    Outcome::Detected => {}
                    Outcome::Target => target += m * p,
                    Outcome::Active(s) => *next.entry(s).or_insert(0.0) += m * p,
                }
            }
        }
        active = next;
        values.push(target);
    }
    values
}

#[test]
fn exact_evaluator_matches_full_enumeration_on_three_nodes() {
    for seed in 0..12u64 {
        let spec = random_instance(9000 + seed, &InstanceOptions {
            n: 3,
            single_dmz: false,
            ensure_direct: seed % 2 == 0,
        });
        let policy = match seed % 3 {
            0 => PolicyMatrix::uniform(&spec).unwrap(),
            1 => random_policy(&spec, seed),
            _ => zero_poic_policy(&spec),
        };
        for &i in spec.dmz() {
            let brute = brute_ltv(&spec, &policy, 3, i);
            let fast = ltv_exact_single(&spec, &policy, 3, i, DEFAULT_EXACT_CAP).unwrap();
            for d in 0..=3 {
                assert!(
                    (brute[d] - fast.values[d]).abs() < 1e-12,
                    "seed {seed} i {i} d {d}: brute {} vs exact {}",
                    brute[d],
                    fast.values[d]
                );
            }
        }
    }
}

#[test]
fn exact_evaluator_matches_full_enumeration_on_four_nodes() {
    for seed in [0u64, 1, 2] {
        let spec = random_instance(9100 + seed, &InstanceOptions {
            n: 4,
            single_dmz: true,
            ensure_direct: true,
        });
        let policy = random_policy(&spec, seed);
        let i = spec.dmz()[0];
        let brute = brute_ltv(&spec, &policy, 2, i);
        let fast = ltv_exact_single(&spec, &policy, 2, i, DEFAULT_EXACT_CAP).unwrap();
        for d in 0..=2 {
            assert!(
                (brute[d] - fast.values[d]).abs() < 1e-12,
                "seed {seed} d {d}: brute {} vs exact {}",
                brute[d],
                fast.values[d]
            );
        }
    }
}

/// The instances where the diagnostic bound sandwich is known to slip:
/// confirm the exact side against full enumeration, pinning the slip on the
/// recursion semantics rather than the evaluator.
#[test]
fn sandwich_slip_instances_have_correct_exact_values() {
    for seed in [2012u64, 2018, 2054] {
        let n = 3 + ((seed - 2000) as usize % 6);
        if n > 4 {
            continue;
        }
        let spec = random_instance(seed, &InstanceOptions {
            n,
            single_dmz: false,
            ensure_direct: false,
        });
        let policy = zero_poic_policy(&spec);
        for &i in spec.dmz() {
            let brute = brute_ltv(&spec, &policy, 2, i);
            let fast = ltv_exact_single(&spec, &policy, 2, i, DEFAULT_EXACT_CAP).unwrap();
            for d in 0..=2 {
                assert!(
                    (brute[d] - fast.values[d]).abs() < 1e-12,
                    "seed {seed} i {i} d {d}"
                );
            }
        }
    }
}
