use fewclean::structured::{
    binomial_even_probability, binomial_tail_at_least, hoeffding_bound, ramp_chain, ramp_closed_form, stab1_bounds,
    stab1_chain, stab2_bounds, stab2_chain, RoundModel,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

fn model(p: f64) -> RoundModel {
    RoundModel::from_keep_probability(p).unwrap()
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Walks every keep/flip sequence of the stability check directly.
fn stability_paths(p: f64, modulus: usize, initial: &[usize], rounds: usize, accept_below: usize) -> f64 {
    let mut total = 0.0;
    for &c0 in initial {
        for b0 in [0usize, 1] {
            for pattern in 0u64..(1 << rounds) {
                let (mut c, mut b, mut weight) = (c0, b0, 1.0);
                for r in 0..rounds {
                    if pattern >> r & 1 == 1 {
                        b ^= 1;
                        weight *= 1.0 - p;
                    } else {
                        weight *= p;
                    }
                    c = (c + b) % modulus;
                }
                if c < accept_below {
                    total += weight;
                }
            }
        }
    }
    total / (2 * initial.len()) as f64
}

#[test]
fn even_parity_examples() {
    assert_eq!(binomial_even_probability(1, 0.0), 1.0);
    assert!((binomial_even_probability(2, 0.5) - 0.5).abs() < 1e-15);
    assert!((binomial_even_probability(3, 0.25) - 0.5625).abs() < 1e-15);
}

#[test]
fn even_parity_matches_enumeration() {
    for n in 0..=20u64 {
        for i in 0..=10 {
            let p = i as f64 / 10.0;
            // Tally outcomes by their number of ones so the float sum has
            // n + 1 terms instead of 2^n.
            let mut by_ones = vec![0u64; n as usize + 1];
            for pattern in 0u32..(1 << n) {
                by_ones[pattern.count_ones() as usize] += 1;
            }
            let even: f64 = by_ones
                .iter()
                .enumerate()
                .filter(|(ones, _)| ones % 2 == 0)
                .map(|(ones, &count)| count as f64 * p.powi(ones as i32) * (1.0 - p).powi(n as i32 - ones as i32))
                .sum();
            assert!((binomial_even_probability(n, p) - even).abs() < 1e-12, "n={n} p={p}");
        }
    }
}

#[test]
fn hoeffding_examples() {
    assert!((hoeffding_bound(1, 0.5) - (-0.5f64).exp()).abs() < 1e-15);
    for n in [1u64, 5, 40] {
        for d in [0.01, 0.1, 0.3] {
            assert!((hoeffding_bound(2 * n, d) - hoeffding_bound(n, d).powi(2)).abs() < 1e-14);
        }
    }
}

#[test]
fn hoeffding_bounds_a_monte_carlo_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let dist = Binomial::new(1000, 0.5).unwrap();
    let trials = 100_000;
    let hits = (0..trials).filter(|_| dist.sample(&mut rng) >= 550).count();
    let freq = hits as f64 / trials as f64;
    assert!(freq <= hoeffding_bound(1000, 0.05), "{freq}");
}

#[test]
fn binomial_tail_matches_direct_sum() {
    for n in 1..=12u64 {
        for t in 0..=n + 1 {
            for p in [0.0f64, 0.2, 0.5, 0.77, 1.0] {
                let direct: f64 = (t.min(n + 1)..=n)
                    .map(|i| choose(n, i) * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32))
                    .sum();
                assert!(
                    (binomial_tail_at_least(n, t, p) - direct).abs() < 1e-12,
                    "n={n} t={t} p={p}"
                );
            }
        }
    }
}

#[test]
fn ramp_chain_matches_closed_form() {
    for i in 0..=10 {
        let p = i as f64 / 10.0;
        for n in 1..=10 {
            assert!((ramp_chain(model(p), n) - ramp_closed_form(p, n)).abs() < 1e-12);
        }
    }
    assert_eq!(ramp_closed_form(1.0, 7), 1.0);
    assert!((ramp_closed_form(0.5, 3) - 0.5).abs() < 1e-15);
    assert!((ramp_closed_form(0.75, 2) - 0.625).abs() < 1e-15);
}

#[test]
fn stability_one_examples() {
    for n in [1, 2, 8, 64] {
        assert!((stab1_chain(model(1.0), n).unwrap() - 1.0).abs() < 1e-12);
        assert!(stab1_chain(model(0.0), n).unwrap().abs() < 1e-12);
    }
    assert!(stab1_chain(model(0.5), 64).unwrap() < 0.75);
    assert!(stab1_chain(model(0.5), 3).is_err());
}

#[test]
fn stability_chains_match_path_enumeration() {
    for p in [0.5, 0.3, 0.9] {
        for n in [1usize, 2, 4] {
            let initial: Vec<usize> = (0..n).collect();
            let paths = stability_paths(p, 2 * n, &initial, 2 * n, n);
            let chain = stab1_chain(model(p), n as u64).unwrap();
            assert!((paths - chain).abs() < 1e-10, "one-clean p={p} n={n}");
        }
        for n in [1usize, 2] {
            let initial: Vec<usize> = (n..3 * n).collect();
            let paths = stability_paths(p, 8 * n, &initial, 8 * n, 4 * n);
            let chain = stab2_chain(model(p), n as u64).unwrap();
            assert!((paths - chain).abs() < 1e-10, "two-clean p={p} n={n}");
        }
    }
}

#[test]
fn stability_bounds_hold_at_scale() {
    for eps in [0.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0] {
        for p in [0.5 - eps, 0.5 + eps] {
            let b = stab1_bounds(p, 64);
            let v = stab1_chain(model(p), 64).unwrap();
            if b.upper_applicable {
                assert!(v < b.upper, "p={p}");
            }
            assert!(v >= b.lower - 1e-12);
        }
    }
    for n in [16u64, 32, 64, 128] {
        for eps in [0.0, 1.0 / 32.0, 1.0 / 16.0] {
            for p in [0.5 - eps, 0.5 + eps] {
                let b = stab2_bounds(p, n);
                assert!(b.upper_applicable);
                let v = stab2_chain(model(p), n).unwrap();
                assert!(v < b.upper, "n={n} p={p}: {v} vs {}", b.upper);
            }
        }
    }
    for p in [0.9, 0.99, 1.0] {
        for n in [1u64, 4, 16, 64] {
            assert!(stab1_chain(model(p), n).unwrap() >= stab1_bounds(p, n).lower - 1e-12);
            assert!(stab2_chain(model(p), n).unwrap() >= stab2_bounds(p, n).lower - 1e-12);
        }
    }
}

#[test]
fn stability_upper_bound_flags_inapplicable_parameters() {
    // 3 * 64^(-1/3) + 4/8 = 1.25 > 1.
    let b = stab1_bounds(0.5 + 1.0 / 8.0, 64);
    assert!(!b.upper_applicable);
    assert_eq!(b.upper, 1.0);
    assert!(!stab1_bounds(0.5, 32).upper_applicable);
    assert!(!stab2_bounds(0.5, 8).upper_applicable);
    assert!(!stab2_bounds(0.7, 16).upper_applicable);
}

#[test]
fn or_evaluation_extremes() {
    use fewclean::circuit::{Circuit, Gate};
    use fewclean::structured::or_repetition;
    let accept = Circuit::new(2, 0).unwrap();
    let e = or_repetition(&accept, 1, 3).unwrap();
    assert_eq!((e.lower, e.upper), (1.0, 1.0));
    assert!((e.exact - 1.0).abs() < 1e-12);
    let reject = Circuit::from_gates(2, 0, [Gate::x(0)]).unwrap();
    let e = or_repetition(&reject, 1, 3).unwrap();
    assert_eq!((e.lower, e.upper), (0.0, 0.0));
    assert!(e.exact.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn or_evaluation_within_bounds(seed in any::<u64>(), n in 1u64..5) {
        use fewclean::circuit::random::{random_circuit, GateSet};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_circuit(&mut rng, 2, 8, GateSet::WithMacros);
        let e = fewclean::structured::or_repetition(&q, 1, n).unwrap();
        prop_assert!(e.lower - 1e-10 <= e.exact && e.exact <= e.upper + 1e-10, "{:?}", e);
        prop_assert!(e.lower - 1e-10 <= e.unbounded_counter && e.unbounded_counter <= e.upper + 1e-10, "{:?}", e);
    }

    #[test]
    fn stability_values_are_probabilities(p in 0.0f64..=1.0, lg in 0u32..6) {
        let n = 1u64 << lg;
        let one = stab1_chain(model(p), n).unwrap();
        let two = stab2_chain(model(p), n).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&one));
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&two));
        prop_assert!(one >= stab1_bounds(p, n).lower - 1e-12);
        prop_assert!(two >= stab2_bounds(p, n).lower - 1e-12);
    }
}
