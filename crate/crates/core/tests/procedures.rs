use fewclean::circuit::random::{random_circuit, GateSet};
use fewclean::circuit::{Circuit, CleanSpec, Gate};
use fewclean::procedures::pipeline::{pipeline, PipelineSchedule, TwoSidedFront};
use fewclean::procedures::{
    lowering_plan, one_clean_simulation, one_clean_stability, or_repetition, parallel_threshold,
    randomness_amplification, two_clean_stability, Procedure, ProcedureOutput,
};
use fewclean::simulator::{pacc_exact, pacc_exact_auto, pacc_exact_density, pacc_sampled};
use fewclean::structured::{self, RoundModel};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn source(seed: u64, width: usize, gates: usize) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_circuit(&mut rng, width, gates, GateSet::WithMacros)
}

fn pacc(c: &Circuit, k: usize) -> f64 {
    let clean = CleanSpec::new(k, c.width()).unwrap();
    pacc_exact_auto(c, clean).unwrap().value
}

fn pacc_of(out: &ProcedureOutput) -> f64 {
    pacc(&out.circuit, out.clean.k())
}

/// Sources that accept with certainty: the output qubit only ever sees
/// gates that cancel.
fn perfect_sources() -> Vec<(Circuit, usize)> {
    let mut v = vec![(Circuit::new(1, 0).unwrap(), 1), (Circuit::new(2, 0).unwrap(), 1)];
    v.push((
        Circuit::from_gates(2, 0, [Gate::h(1), Gate::cx(1, 0), Gate::t(1), Gate::cx(1, 0)]).unwrap(),
        1,
    ));
    v.push((
        Circuit::from_gates(
            3,
            0,
            [Gate::h(0), Gate::mcx(&[2], 1), Gate::t(0), Gate::tdg(0), Gate::h(0)],
        )
        .unwrap(),
        2,
    ));
    v
}

#[test]
fn widths_and_clean_counts_match_formulas() {
    for w in 1..=3 {
        let q = source(w as u64, w, 6);
        for k in 1..=w {
            for n in [1usize, 2, 4] {
                let mut procs = vec![
                    Procedure::OneCleanSimulation { k },
                    Procedure::OrRepetition { k, n },
                    Procedure::OrRepetition { k, n: n + 1 },
                    Procedure::ParallelThreshold { k, n, fraction: (1, 2) },
                ];
                if k == 1 {
                    procs.extend([
                        Procedure::RandomnessAmplification { n },
                        Procedure::RandomnessAmplification { n: n + 1 },
                        Procedure::OneCleanStability { n },
                        Procedure::TwoCleanStability { n },
                    ]);
                }
                for p in procs {
                    let out = p.build(&q).unwrap();
                    assert_eq!(out.circuit.width(), p.width(w), "{p:?} w={w}");
                    assert_eq!(out.clean.k(), p.clean(), "{p:?} w={w}");
                    out.layout.validate(out.circuit.width()).unwrap();
                }
            }
        }
    }
}

#[test]
fn stability_requires_power_of_two() {
    let q = source(0, 2, 3);
    assert!(one_clean_stability(&q, 3).is_err());
    assert!(two_clean_stability(&q, 6).is_err());
    assert!(parallel_threshold(&q, 1, 3, Ratio::new(1, 2)).is_err());
    assert!(or_repetition(&q, 3, 1).is_err());
}

#[test]
fn perfect_completeness_is_preserved() {
    for (q, k) in perfect_sources() {
        assert!((pacc(&q, k) - 1.0).abs() < 1e-12);
        let ocqs = one_clean_simulation(&q, k).unwrap();
        assert!((pacc_of(&ocqs) - 1.0).abs() < 1e-12);
        assert!((pacc_of(&or_repetition(&q, k, 2).unwrap()) - 1.0).abs() < 1e-10);
        let one = &ocqs.circuit;
        if one.width() <= 3 {
            for out in [
                randomness_amplification(one, 3).unwrap(),
                one_clean_stability(one, 2).unwrap(),
                two_clean_stability(one, 1).unwrap(),
            ] {
                assert!((pacc_of(&out) - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn one_clean_simulation_sandwich() {
    let mut checked = 0;
    for seed in 0..60u64 {
        let w = 1 + (seed as usize % 4);
        let k = 1 + (seed as usize / 4) % w.min(2);
        let q = source(seed, w, 4 + seed as usize % 9);
        let p = pacc(&q, k);
        let out = one_clean_simulation(&q, k).unwrap();
        let got = pacc_of(&out);
        let (lo, hi) = structured::one_clean_simulation_bounds(p, k);
        assert!(
            lo - 1e-10 <= got && got <= hi + 1e-10,
            "seed {seed}: {lo} <= {got} <= {hi}"
        );
        let structured = structured::one_clean_simulation_value(&q, k).unwrap();
        assert!((structured - got).abs() < 1e-10, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 50);
}

#[test]
fn literal_and_simplified_simulation_agree() {
    // The simplified form applies the Hadamard when Q is all-zero and leaves
    // Q unflipped around q; the two differ by relabeling the mixed Q.
    for seed in 0..20u64 {
        let w = 2 + seed as usize % 3;
        let k = 1 + seed as usize % 2;
        let q = source(seed + 100, w, 10);
        let literal = one_clean_simulation(&q, k).unwrap();
        let qr: Vec<usize> = (1..=k).collect();
        let map: Vec<usize> = (1..=w).collect();
        let mut c = Circuit::new(w + 1, 0).unwrap();
        let flip = |c: &mut Circuit| qr.iter().for_each(|&x| c.push(Gate::x(x)).unwrap());
        flip(&mut c);
        c.push(Gate::mch(&qr, 0)).unwrap();
        flip(&mut c);
        c.extend_mapped(&q, &map).unwrap();
        c.push(Gate::cz(0, map[q.output_qubit()])).unwrap();
        c.extend_mapped(&q.inverse(), &map).unwrap();
        flip(&mut c);
        c.push(Gate::mch(&qr, 0)).unwrap();
        flip(&mut c);
        assert!((pacc_of(&literal) - pacc(&c, 1)).abs() < 1e-10, "seed {seed}");
    }
}

#[test]
fn randomness_amplification_formula() {
    let mut checked = 0;
    for seed in 0..36u64 {
        let w = 2 + seed as usize % 2;
        let q = source(seed + 200, w, 8);
        let p = pacc(&q, 1);
        for n in 1..=3 {
            let out = randomness_amplification(&q, n).unwrap();
            assert!(out.circuit.width() <= 10);
            let got = pacc_exact(&out.circuit, out.clean).unwrap().value;
            let expected = structured::ramp_closed_form(p, n as u64);
            assert!((got - expected).abs() < 1e-9, "seed {seed} n {n}: {got} vs {expected}");
        }
        checked += 1;
    }
    assert!(checked >= 30);
}

#[test]
fn one_clean_stability_matches_chain() {
    for seed in 0..8u64 {
        let q = source(seed + 300, 2, 6);
        let p = pacc(&q, 1);
        let model = RoundModel::from_circuit(&q).unwrap();
        for n in [1usize, 2] {
            let out = one_clean_stability(&q, n).unwrap();
            let got = pacc_of(&out);
            let chain = structured::stab1_chain(model, n as u64).unwrap();
            assert!((got - chain).abs() < 1e-9, "seed {seed} n {n}: {got} vs {chain}");
            assert!(got >= p.powi(2 * n as i32 - 1) - 1e-9);
        }
    }
}

#[test]
fn two_clean_stability_matches_chain() {
    let q = Circuit::from_gates(2, 0, [Gate::h(0), Gate::cx(1, 0), Gate::t(0), Gate::h(0)]).unwrap();
    let p = pacc(&q, 1);
    let model = RoundModel::from_circuit(&q).unwrap();
    let out = two_clean_stability(&q, 1).unwrap();
    assert_eq!(out.circuit.width(), 20);
    let chain = structured::stab2_chain(model, 1).unwrap();
    let clean = out.clean;
    let dense = pacc_exact_density(&out.circuit, clean).unwrap().value;
    assert!((dense - chain).abs() < 1e-9, "{dense} vs {chain}");
    assert!(dense >= p.powi(7) - 1e-9);
    let sampled = pacc_sampled(&out.circuit, clean, 10_000, 11).unwrap();
    assert!(
        (sampled.value - chain).abs() <= 3.0 * sampled.half_width_95,
        "{sampled:?} vs {chain}"
    );
}

#[test]
fn or_repetition_sandwich_and_chain() {
    let mut checked = 0;
    for seed in 0..32u64 {
        let q = source(seed + 400, 2, 8);
        let p = pacc(&q, 1);
        let out = or_repetition(&q, 1, 2).unwrap();
        assert_eq!(out.circuit.width(), 10);
        let got = pacc_of(&out);
        let lo = 1.0 - (1.0 - p).powi(2);
        let hi = 1.0 - (1.0 - p).powi(4);
        assert!(
            lo - 1e-10 <= got && got <= hi + 1e-10,
            "seed {seed}: {lo} <= {got} <= {hi}"
        );
        let eval = structured::or_repetition(&q, 1, 2).unwrap();
        assert!((eval.exact - got).abs() < 1e-9, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 30);
}

#[test]
fn or_repetition_counter_wrap_matches_chain() {
    // One round counts up to 2 on a 1-qubit counter, so it can wrap to 0.
    // Three rounds count up to 6 on a 3-qubit counter and cannot.
    for seed in 0..4u64 {
        let q = source(seed + 500, 2, 6);
        for n in [1, 3] {
            let out = or_repetition(&q, 1, n).unwrap();
            let eval = structured::or_repetition(&q, 1, n as u64).unwrap();
            assert!((pacc_of(&out) - eval.exact).abs() < 1e-9, "seed {seed} n {n}");
        }
    }
}

#[test]
fn parallel_threshold_is_a_binomial_tail() {
    for seed in 0..12u64 {
        let q = source(seed + 600, 2, 8);
        let p = pacc(&q, 1);
        let single = parallel_threshold(&q, 1, 1, Ratio::new(1, 2)).unwrap();
        assert!((pacc_of(&single) - p).abs() < 1e-9);
        let half = parallel_threshold(&q, 1, 2, Ratio::new(1, 2)).unwrap();
        assert!((pacc_of(&half) - (1.0 - (1.0 - p).powi(2))).abs() < 1e-9);
        let all = parallel_threshold(&q, 1, 2, Ratio::new(1, 1)).unwrap();
        assert!((pacc_of(&all) - p * p).abs() < 1e-9);
    }
}

#[test]
fn procedure_outputs_lower_with_their_own_ancillas() {
    use fewclean::lowering::{lower, Strategy};
    let q = source(7, 2, 8);
    let out = or_repetition(&q, 1, 2).unwrap();
    let plan = lowering_plan(&out, Strategy::Linear);
    let lowered = lower(&out.circuit, &plan).unwrap();
    assert_eq!(lowered.width(), out.circuit.width());
    assert!(lowered.is_base_only());
    assert!((pacc(&lowered, out.clean.k()) - pacc_of(&out)).abs() < 1e-9);
}

#[test]
fn one_sided_pipelines_keep_perfect_completeness() {
    let q = Circuit::from_gates(2, 0, [Gate::h(1), Gate::cx(1, 0), Gate::cx(1, 0)]).unwrap();
    for schedule in [
        PipelineSchedule::one_sided_one_clean(1, 1),
        PipelineSchedule::one_sided_two_clean(1, 1),
    ] {
        let out = pipeline(&q, 1, &schedule).unwrap();
        assert!((pacc_of(&out.output) - 1.0).abs() < 1e-10);
        for t in &out.trace {
            assert!((t.exact.unwrap() - 1.0).abs() < 1e-10, "{t:?}");
            assert!(t.window.lo > 1.0 - 1e-10);
        }
    }
}

#[test]
fn pipeline_trace_follows_builders() {
    let q = source(3, 2, 8);
    let k = 1;
    let out = pipeline(&q, k, &PipelineSchedule::one_sided_one_clean(2, 1)).unwrap();
    let ocqs = Procedure::OneCleanSimulation { k };
    let w1 = ocqs.width(2);
    let w2 = Procedure::RandomnessAmplification { n: 2 }.width(w1);
    let w3 = Procedure::OneCleanStability { n: 1 }.width(w2);
    let widths: Vec<usize> = out.trace.iter().map(|t| t.width).collect();
    assert_eq!(widths, vec![w1, w2, w3]);
    assert_eq!(out.output.circuit.width(), w3);
    // The stability bound needs n >= 64, so it is flagged.
    assert!(!out.trace[2].preconditions_met);
    let monolithic = pacc_of(&out.output);
    assert!((out.trace[2].exact.unwrap() - monolithic).abs() < 1e-9);
}

#[test]
fn pipeline_windows_contain_structured_values() {
    let front = TwoSidedFront {
        copies: 2,
        fraction: (1, 2),
        amplification_n: 1,
        second_copies: 1,
        second_fraction: (1, 1),
        or_n: 1,
    };
    for seed in 0..6u64 {
        let q = source(seed + 700, 2, 8);
        let mut schedules = vec![
            PipelineSchedule::one_sided_one_clean(3, 1),
            PipelineSchedule::one_sided_two_clean(2, 1),
        ];
        // The two-sided front evaluates an 11-qubit OR stage exactly; two
        // seeds keep the test quick.
        if seed < 2 {
            schedules.push(PipelineSchedule::two_sided_one_clean(front, 2, 1));
            schedules.push(PipelineSchedule::two_sided_two_clean(front, 2, 1));
        }
        for schedule in schedules {
            let out = pipeline(&q, 1, &schedule).unwrap();
            assert_eq!(out.trace.len(), schedule.stages.len());
            for t in &out.trace {
                assert!(t.window.lo <= t.window.hi + 1e-12, "{t:?}");
                if let Some(x) = t.exact {
                    assert!(t.window.contains(x, 1e-9), "seed {seed} {t:?}");
                }
            }
        }
    }
}
