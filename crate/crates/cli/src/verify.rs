//! Verification suites: each case recomputes a claimed identity or bound
//! from scratch and compares it against an independent value.

use std::time::Instant;

use fewclean::circuit::random::{random_circuit, GateSet};
use fewclean::circuit::{Circuit, CleanSpec, Gate, Op};
use fewclean::format::gate_line;
use fewclean::lowering::{build_mch, lower_with_layout, unitary_of, LoweringPlan, Strategy};
use fewclean::procedures::{
    one_clean_simulation, one_clean_stability, or_repetition, randomness_amplification, two_clean_stability,
};
use fewclean::simulator::{
    flip_probability_with, pacc_exact_auto_with, pacc_exact_density_with, pacc_sampled_with, SimConfig,
};
use fewclean::structured::{self, RoundModel};
use fewclean::trest::{decide_trest, hadamard_test_circuit, normalized_trace, TrestInstance, TrestMode, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub const SUITES: &[&str] = &[
    "randomness-amplification",
    "one-clean-simulation",
    "stability",
    "stability-bounds",
    "or-repetition",
    "parity",
    "lowering",
    "hadamard-test",
    "flip-probability",
];

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expected {
    Equality { value: Value },
    Bound { lower: Option<f64>, upper: Option<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct Case {
    pub case_id: String,
    pub anchor: &'static str,
    pub parameters: Value,
    pub expected: Expected,
    pub computed: Value,
    pub pass: bool,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub seed: u64,
    pub overall: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    pub cases: Vec<Case>,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub seed: u64,
    /// Overrides every case's default tolerance.
    pub tolerance: Option<f64>,
    pub timings: bool,
    pub config: SimConfig,
}

struct Outcome {
    expected: Expected,
    computed: Value,
    pass: bool,
    note: Option<String>,
}

fn equality(expected: f64, computed: f64, tol: f64) -> Outcome {
    Outcome {
        expected: Expected::Equality { value: json!(expected) },
        computed: json!(computed),
        pass: (expected - computed).abs() <= tol,
        note: None,
    }
}

fn bound(lower: Option<f64>, upper: Option<f64>, computed: f64, tol: f64) -> Outcome {
    let ok_lo = lower.is_none_or(|l| computed >= l - tol);
    let ok_hi = upper.is_none_or(|u| computed <= u + tol);
    Outcome {
        expected: Expected::Bound { lower, upper },
        computed: json!(computed),
        pass: ok_lo && ok_hi,
        note: None,
    }
}

struct Runner {
    opts: Options,
    cases: Vec<Case>,
}

impl Runner {
    fn tol(&self, default: f64) -> f64 {
        self.opts.tolerance.unwrap_or(default)
    }

    fn case(
        &mut self,
        case_id: String,
        anchor: &'static str,
        parameters: Value,
        tolerance: f64,
        f: impl FnOnce(f64) -> Result<Outcome, String>,
    ) {
        let start = Instant::now();
        let outcome = f(tolerance).unwrap_or_else(|e| Outcome {
            expected: Expected::Equality { value: Value::Null },
            computed: json!({ "error": e }),
            pass: false,
            note: None,
        });
        let runtime_ms = self.opts.timings.then(|| start.elapsed().as_secs_f64() * 1e3);
        self.cases.push(Case {
            case_id,
            anchor,
            parameters,
            expected: outcome.expected,
            computed: outcome.computed,
            pass: outcome.pass,
            tolerance,
            note: outcome.note,
            runtime_ms,
        });
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(stream);
        rng
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn exact(c: &Circuit, k: usize, cfg: &SimConfig) -> Result<f64, String> {
    let clean = CleanSpec::new(k, c.width()).map_err(err)?;
    Ok(pacc_exact_auto_with(c, clean, cfg).map_err(err)?.value)
}

/// A source circuit of `width` qubits drawn from stream `stream`, redrawn
/// until its acceptance probability with `k` clean qubits avoids 0, 1/2 and
/// 1, where most identities hold trivially.
fn source(r: &Runner, stream: u64, width: usize, k: usize) -> Circuit {
    let mut rng = r.rng(stream);
    let cfg = r.opts.config;
    let mut last = None;
    for _ in 0..500 {
        let n = rng.random_range(4..20);
        let q = random_circuit(&mut rng, width, n, GateSet::WithMacros);
        match exact(&q, k, &cfg) {
            Ok(p) if [0.0, 0.5, 1.0].iter().all(|x| (p - x).abs() > 1e-3) => return q,
            _ => last = Some(q),
        }
    }
    last.expect("at least one draw")
}

fn randomness_amplification_suite(r: &mut Runner) {
    let cfg = r.opts.config;
    const ANCHOR: &str = "randomness amplification: p_acc = 1/2 + (2p - 1)^N / 2";
    let tol = r.tol(1e-9);
    for i in 0..30u64 {
        let w = 2 + (i % 2) as usize;
        let q = source(r, 1000 + i, w, 1);
        for n in 1..=3usize {
            r.case(
                format!("ramp-{i}-n{n}"),
                ANCHOR,
                json!({ "source": i, "w": w, "n": n }),
                tol,
                |tol| {
                    let p = exact(&q, 1, &cfg)?;
                    let out = randomness_amplification(&q, n).map_err(err)?;
                    let got = exact(&out.circuit, 1, &cfg)?;
                    Ok(equality(structured::ramp_closed_form(p, n as u64), got, tol))
                },
            );
        }
    }
}

fn one_clean_simulation_suite(r: &mut Runner) {
    let cfg = r.opts.config;
    const ANCHOR: &str = "one-clean simulation: 1 - 2^-k (1 - p^2) <= p_acc <= 1 - 2^-k (1 - p)";
    const PERFECT: &str = "one-clean simulation preserves perfect completeness";
    let tol = r.tol(1e-10);
    for i in 0..50u64 {
        let w = 1 + (i % 4) as usize;
        let k = 1 + (i as usize / 4) % w.min(2);
        let q = source(r, 2000 + i, w, k);
        r.case(
            format!("ocqs-{i}"),
            ANCHOR,
            json!({ "source": i, "w": w, "k": k }),
            tol,
            |tol| {
                let p = exact(&q, k, &cfg)?;
                let out = one_clean_simulation(&q, k).map_err(err)?;
                let got = exact(&out.circuit, 1, &cfg)?;
                let (lo, hi) = structured::one_clean_simulation_bounds(p, k);
                Ok(bound(Some(lo), Some(hi), got, tol))
            },
        );
    }
    let tol = r.tol(1e-12);
    for i in 0..6u64 {
        let w = 1 + (i % 3) as usize;
        let k = 1 + (i as usize / 3) % w;
        let u = source(r, 2100 + i, w, k);
        // u followed by its inverse accepts with certainty.
        let mut q = u.clone();
        q.extend_mapped(&u.inverse(), &(0..w).collect::<Vec<_>>())
            .expect("same width");
        r.case(
            format!("ocqs-perfect-{i}"),
            PERFECT,
            json!({ "source": i, "w": w, "k": k }),
            tol,
            |tol| {
                let p = exact(&q, k, &cfg)?;
                if (p - 1.0).abs() > tol {
                    return Err(format!("source accepts with {p}, not 1"));
                }
                let out = one_clean_simulation(&q, k).map_err(err)?;
                Ok(equality(1.0, exact(&out.circuit, 1, &cfg)?, tol))
            },
        );
    }
}

fn stability_suite(r: &mut Runner) {
    let cfg = r.opts.config;
    const ONE: &str = "one-clean stability check: monolithic circuit equals its counter chain";
    const TWO: &str = "two-clean stability check: monolithic circuit equals its counter chain";
    let tol = r.tol(1e-9);
    for i in 0..4u64 {
        let q = source(r, 3000 + i, 2, 1);
        r.case(
            format!("stab1-{i}-n2"),
            ONE,
            json!({ "source": i, "w": 2, "n": 2 }),
            tol,
            |tol| {
                let out = one_clean_stability(&q, 2).map_err(err)?;
                let got = exact(&out.circuit, 1, &cfg)?;
                let chain = structured::stab1_chain(RoundModel::from_circuit(&q).map_err(err)?, 2).map_err(err)?;
                Ok(equality(chain, got, tol))
            },
        );
    }
    let seed = r.opts.seed;
    for i in 0..2u64 {
        let q = source(r, 3100 + i, 2, 1);
        let params = json!({ "source": i, "w": 2, "n": 1, "samples": 10_000 });
        let chain = || -> Result<f64, String> {
            structured::stab2_chain(RoundModel::from_circuit(&q).map_err(err)?, 1).map_err(err)
        };
        r.case(format!("stab2-{i}-n1-exact"), TWO, params.clone(), tol, |tol| {
            let out = two_clean_stability(&q, 1).map_err(err)?;
            let got = pacc_exact_density_with(&out.circuit, out.clean, &cfg)
                .map_err(err)?
                .value;
            Ok(equality(chain()?, got, tol))
        });
        r.case(format!("stab2-{i}-n1-sampled"), TWO, params, 3.0, |_| {
            let out = two_clean_stability(&q, 1).map_err(err)?;
            let s = pacc_sampled_with(&out.circuit, out.clean, 10_000, seed.wrapping_add(i), &cfg).map_err(err)?;
            let expected = chain()?;
            let mut o = equality(expected, s.value, 3.0 * s.half_width_95);
            o.computed = json!({ "value": s.value, "half_width_95": s.half_width_95 });
            o.note = Some("tolerance is in units of the reported half-width".into());
            Ok(o)
        });
    }
}

fn stability_bounds_suite(r: &mut Runner) {
    const UPPER1: &str = "one-clean stability check: p_acc < 3 N^(-1/3) + 4 eps when 3 N^(-1/3) + 4 eps <= 1";
    const UPPER2: &str = "two-clean stability check: p_acc < 2^(-N/16 + 1) for eps <= 1/16";
    const LOWER: &str = "stability checks: p_acc >= p^(2N-1) (one clean), p^(8N-1) (two clean)";
    let tol = r.tol(0.0);
    let model = |p: f64| RoundModel::from_keep_probability(p).map_err(err);
    for eps in [0.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0] {
        for sign in [-1.0, 1.0] {
            let p = 0.5 + sign * eps;
            r.case(
                format!("stab1-upper-n64-p{p}"),
                UPPER1,
                json!({ "n": 64, "p": p, "eps": eps }),
                tol,
                |tol| {
                    let v = structured::stab1_chain(model(p)?, 64).map_err(err)?;
                    let b = structured::stab1_bounds(p, 64);
                    if !b.upper_applicable {
                        let mut o = bound(None, None, v, tol);
                        o.note = Some("precondition fails; bound not applicable".into());
                        return Ok(o);
                    }
                    let mut o = bound(None, Some(b.upper), v, tol);
                    o.pass = v < b.upper + tol;
                    Ok(o)
                },
            );
        }
    }
    for n in [16u64, 32, 64, 128] {
        for eps in [0.0, 1.0 / 32.0, 1.0 / 16.0] {
            for sign in [-1.0, 1.0] {
                let p = 0.5 + sign * eps;
                r.case(
                    format!("stab2-upper-n{n}-p{p}"),
                    UPPER2,
                    json!({ "n": n, "p": p, "eps": eps }),
                    tol,
                    |tol| {
                        let v = structured::stab2_chain(model(p)?, n).map_err(err)?;
                        let b = structured::stab2_bounds(p, n);
                        let mut o = bound(None, Some(b.upper), v, tol);
                        o.pass = b.upper_applicable && v < b.upper + tol;
                        Ok(o)
                    },
                );
            }
        }
    }
    let tol = r.tol(1e-12);
    for p in [0.9, 0.99, 1.0] {
        for n in [1u64, 4, 16, 64] {
            r.case(format!("stab-lower-n{n}-p{p}"), LOWER, json!({ "n": n, "p": p }), tol, |tol| {
                let one = structured::stab1_chain(model(p)?, n).map_err(err)?;
                let two = structured::stab2_chain(model(p)?, n).map_err(err)?;
                let (b1, b2) = (structured::stab1_bounds(p, n).lower, structured::stab2_bounds(p, n).lower);
                Ok(Outcome {
                    expected: Expected::Bound { lower: Some(b1.min(b2)), upper: None },
                    computed: json!({ "one_clean": one, "one_clean_lower": b1, "two_clean": two, "two_clean_lower": b2 }),
                    pass: one >= b1 - tol && two >= b2 - tol,
                    note: None,
                })
            });
        }
    }
}

fn or_repetition_suite(r: &mut Runner) {
    let cfg = r.opts.config;
    const ANCHOR: &str = "OR-type repetition: 1 - (1 - p)^N <= p_acc <= 1 - (1 - p)^(2N)";
    let tol = r.tol(1e-10);
    for i in 0..30u64 {
        let q = source(r, 5000 + i, 2, 1);
        r.case(
            format!("orrep-{i}-n2"),
            ANCHOR,
            json!({ "source": i, "w": 2, "k": 1, "n": 2 }),
            tol,
            |tol| {
                let p = exact(&q, 1, &cfg)?;
                let out = or_repetition(&q, 1, 2).map_err(err)?;
                let got = exact(&out.circuit, out.clean.k(), &cfg)?;
                Ok(bound(
                    Some(1.0 - (1.0 - p).powi(2)),
                    Some(1.0 - (1.0 - p).powi(4)),
                    got,
                    tol,
                ))
            },
        );
    }
}

fn parity_suite(r: &mut Runner) {
    const ANCHOR: &str = "n independent bits with P[1] = p have even parity with probability 1/2 + (1 - 2p)^n / 2";
    let tol = r.tol(1e-12);
    for n in 0..=20u64 {
        for i in 0..=10 {
            let p = i as f64 / 10.0;
            r.case(
                format!("parity-n{n}-p{p}"),
                ANCHOR,
                json!({ "n": n, "p": p }),
                tol,
                |tol| {
                    let mut by_ones = vec![0u64; n as usize + 1];
                    for pattern in 0u32..(1 << n) {
                        by_ones[pattern.count_ones() as usize] += 1;
                    }
                    let even: f64 = by_ones
                        .iter()
                        .enumerate()
                        .filter(|(ones, _)| ones % 2 == 0)
                        .map(|(ones, &count)| {
                            count as f64 * p.powi(ones as i32) * (1.0 - p).powi((n as usize - ones) as i32)
                        })
                        .sum();
                    Ok(equality(even, structured::binomial_even_probability(n, p), tol))
                },
            );
        }
    }
}

/// Lowers a one-gate circuit and compares unitaries on the full width,
/// borrowed ancillas included, up to global phase.
fn lowering_deviation(gate: Gate, width: usize, strategy: Strategy) -> Result<(f64, usize), String> {
    let c = Circuit::from_gates(width, 0, [gate]).map_err(err)?;
    let lowered = lower_with_layout(&c, &LoweringPlan::with_strategy(strategy)).map_err(err)?;
    if !lowered.circuit.is_base_only() {
        return Err("non-base gate survived lowering".into());
    }
    let reference = c.widened(lowered.circuit.width()).map_err(err)?;
    let u = unitary_of(&reference).map_err(err)?;
    let v = unitary_of(&lowered.circuit).map_err(err)?;
    Ok((u.deviation_up_to_phase(&v), lowered.circuit.width()))
}

fn lowering_suite(r: &mut Runner) {
    const ANCHOR: &str = "macro gates lower exactly to {H, T, CNOT}, restoring borrowed ancillas";
    const COUNT: &str =
        "controlled Hadamard uses two Hadamard gates and sixteen T gates around one multi-controlled NOT";
    let tol = r.tol(1e-9);
    let mut gates: Vec<(String, Gate, usize)> = Vec::new();
    for n in 1..=4usize {
        let c: Vec<usize> = (0..n).collect();
        gates.push((format!("mcx-{n}"), Gate::mcx(&c, n), n + 1));
    }
    for n in 1..=3usize {
        let c: Vec<usize> = (0..n).collect();
        gates.push((format!("mch-{n}"), Gate::mch(&c, n), n + 1));
    }
    for l in 1..=3usize {
        let counter: Vec<usize> = (0..l).collect();
        gates.push((format!("incr-{l}"), Gate::incr(&counter), l));
        gates.push((format!("incrdg-{l}"), Gate::incr_dg(&counter), l));
        let counter: Vec<usize> = (1..=l).collect();
        gates.push((format!("cincr-{l}"), Gate::cincr(0, &counter), l + 1));
        gates.push((
            format!("cincrdg-{l}"),
            Gate::new(Op::IncrDg, vec![0], counter.clone()),
            l + 1,
        ));
        for t in 0..(1u64 << l) {
            gates.push((format!("thr-{l}-t{t}"), Gate::threshold(t, 0, &counter), l + 1));
        }
    }
    for (name, gate, width) in gates {
        for strategy in [Strategy::Linear, Strategy::Split] {
            let sname = match strategy {
                Strategy::Linear => "linear",
                Strategy::Split => "split",
            };
            let g = gate.clone();
            r.case(
                format!("lower-{name}-{sname}"),
                ANCHOR,
                json!({ "gate": gate_line(&gate), "width": width, "strategy": sname }),
                tol,
                |tol| {
                    let (dev, lowered_width) = lowering_deviation(g, width, strategy)?;
                    let mut o = bound(None, Some(0.0), dev, tol);
                    o.computed = json!({ "deviation_up_to_phase": dev, "lowered_width": lowered_width });
                    Ok(o)
                },
            );
        }
    }
    for n in 1..=3usize {
        r.case(format!("mch-count-{n}"), COUNT, json!({ "controls": n }), 0.0, |_| {
            let c = build_mch(n);
            let count = |op: Op, controls: usize| {
                c.gates()
                    .iter()
                    .filter(|g| g.op() == op && g.controls().len() == controls)
                    .count()
            };
            let other = c.len() - count(Op::H, 0) - count(Op::T, 0) - count(Op::X, n);
            let computed =
                json!({ "h": count(Op::H, 0), "t": count(Op::T, 0), "mcx": count(Op::X, n), "other": other });
            let expected = json!({ "h": 2, "t": 16, "mcx": 1, "other": 0 });
            Ok(Outcome {
                pass: computed == expected,
                expected: Expected::Equality { value: expected },
                computed,
                note: None,
            })
        });
    }
}

fn hadamard_test_suite(r: &mut Runner) {
    let cfg = r.opts.config;
    const ANCHOR: &str = "Hadamard test: p_acc = 1/2 + Re tr U / 2^(n+1)";
    const MODES: &str = "trace estimation: oracle and one-clean-qubit decisions agree inside the promise";
    let tol = r.tol(1e-9);
    for i in 0..50u64 {
        let mut rng = r.rng(8000 + i);
        let w = rng.random_range(1..=4);
        let n = rng.random_range(0..14);
        let u = random_circuit(&mut rng, w, n, GateSet::WithMacros);
        r.case(format!("hadamard-{i}"), ANCHOR, json!({ "u": i, "n": w }), tol, |tol| {
            let h = hadamard_test_circuit(&u).map_err(err)?;
            let p = exact(&h.circuit, 1, &cfg)?;
            let t = normalized_trace(&u).map_err(err)?;
            Ok(equality(0.5 + 0.5 * t.re, p, tol))
        });
        r.case(
            format!("trest-modes-{i}"),
            MODES,
            json!({ "u": i, "n": w }),
            tol,
            |_| {
                let mut verdicts = Vec::new();
                let mut pass = true;
                for (a, b) in [(0.9, 0.1), (0.5, -0.5), (0.2, -0.2), (-0.3, -0.9)] {
                    let inst = TrestInstance::new(u.clone(), a, b).map_err(err)?;
                    let oracle = decide_trest(&inst, TrestMode::Oracle).map_err(err)?;
                    if oracle.verdict == Verdict::OutsidePromise {
                        continue;
                    }
                    let dqc1 = decide_trest(&inst, TrestMode::Dqc1Exact).map_err(err)?;
                    pass &= oracle.verdict == dqc1.verdict;
                    verdicts.push(json!({ "a": a, "b": b, "oracle": oracle.verdict, "dqc1_exact": dqc1.verdict }));
                }
                Ok(Outcome {
                    expected: Expected::Equality {
                        value: json!("oracle verdict == dqc1_exact verdict"),
                    },
                    computed: json!(verdicts),
                    pass,
                    note: None,
                })
            },
        );
    }
}

fn flip_probability_suite(r: &mut Runner) {
    let cfg = r.opts.config;
    const ANCHOR: &str = "the output bit is kept with probability p_acc whatever its initial value";
    let tol = r.tol(1e-10);
    for i in 0..50u64 {
        let mut rng = r.rng(9000 + i);
        let w = rng.random_range(1..=4);
        let n = rng.random_range(0..16);
        let q = random_circuit(&mut rng, w, n, GateSet::WithMacros);
        r.case(
            format!("flip-{i}"),
            ANCHOR,
            json!({ "source": i, "w": w }),
            tol,
            |tol| {
                let p = exact(&q, 1, &cfg)?;
                let f0 = flip_probability_with(&q, false, &cfg).map_err(err)?;
                let f1 = flip_probability_with(&q, true, &cfg).map_err(err)?;
                Ok(Outcome {
                    expected: Expected::Equality { value: json!(1.0 - p) },
                    computed: json!({ "flip_from_0": f0, "flip_from_1": f1 }),
                    pass: (f0 - (1.0 - p)).abs() <= tol && (f1 - (1.0 - p)).abs() <= tol,
                    note: None,
                })
            },
        );
    }
}

fn run_one(r: &mut Runner, suite: &str) -> bool {
    match suite {
        "randomness-amplification" => randomness_amplification_suite(r),
        "one-clean-simulation" => one_clean_simulation_suite(r),
        "stability" => stability_suite(r),
        "stability-bounds" => stability_bounds_suite(r),
        "or-repetition" => or_repetition_suite(r),
        "parity" => parity_suite(r),
        "lowering" => lowering_suite(r),
        "hadamard-test" => hadamard_test_suite(r),
        "flip-probability" => flip_probability_suite(r),
        _ => return false,
    }
    true
}

/// Runs a named suite, or every suite for `"all"`. Returns `None` for an
/// unknown name.
pub fn run(suite: &str, opts: Options) -> Option<Report> {
    let mut r = Runner {
        opts,
        cases: Vec::new(),
    };
    if suite == "all" {
        for s in SUITES {
            run_one(&mut r, s);
        }
    } else if !run_one(&mut r, suite) {
        return None;
    }
    let timestamp_unix = opts.timings.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    Some(Report {
        schema: 1,
        suite: suite.to_string(),
        seed: opts.seed,
        overall: r.cases.iter().all(|c| c.pass),
        timestamp_unix,
        cases: r.cases,
    })
}
