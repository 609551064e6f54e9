//! Trace estimation: deciding whether the real part of `tr U / 2^n` is at
//! least `a` or at most `b`, directly from the unitary or through a
//! one-clean-qubit Hadamard test.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, CleanSpec, RegisterLayout};
use crate::procedures::ProcedureOutput;
use crate::simulator::{self, SimError};

/// Widest `u` whose trace is computed column by column.
pub const TRACE_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrestError {
    #[error("thresholds must satisfy -1 <= b < a <= 1, got a={a}, b={b}")]
    InvalidThresholds { a: f64, b: f64 },
    #[error("circuit width {width} exceeds the trace cap {cap}")]
    TooWide { width: usize, cap: usize },
    #[error("sampled mode needs a positive sample count")]
    NoSamples,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrestInstance {
    pub u: Circuit,
    pub a: f64,
    pub b: f64,
}

impl TrestInstance {
    pub fn new(u: Circuit, a: f64, b: f64) -> Result<TrestInstance, TrestError> {
        if !(-1.0 <= b && b < a && a <= 1.0) {
            return Err(TrestError::InvalidThresholds { a, b });
        }
        Ok(TrestInstance { u, a, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    OutsidePromise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrestMode {
    Oracle,
    Dqc1Exact,
    Dqc1Sampled { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrestDecision {
    pub verdict: Verdict,
    /// Estimate of `Re tr U / 2^n`.
    pub estimate: f64,
    /// 95% half-width of the estimate; 0 for exact modes.
    pub half_width_95: f64,
}

/// `tr U / 2^n`, summing the diagonal one basis column at a time.
pub fn normalized_trace(u: &Circuit) -> Result<C64, TrestError> {
    let w = u.width();
    if w > TRACE_CAP {
        return Err(TrestError::TooWide {
            width: w,
            cap: TRACE_CAP,
        });
    }
    let dim = 1usize << w;
    let diag: Vec<C64> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut state = vec![C64::new(0.0, 0.0); dim];
            state[j] = C64::new(1.0, 0.0);
            simulator::apply_in_place(u, &mut state).map(|_| state[j])
        })
        .collect::<Result<_, _>>()?;
    let sum: C64 = diag.iter().sum();
    Ok(sum / dim as f64)
}

/// One-clean-qubit Hadamard test of `u`: the control is qubit 0 and `u`
/// acts on qubits `1..=n`. Accepts with probability
/// `1/2 + Re tr U / 2^(n+1)`.
pub fn hadamard_test_circuit(u: &Circuit) -> Result<ProcedureOutput, TrestError> {
    let n = u.width();
    let mut c = Circuit::new(n + 1, 0)?;
    c.push(crate::circuit::Gate::h(0))?;
    let shift: Vec<usize> = (1..=n).collect();
    for g in u.gates() {
        c.push(g.remap(&shift).controlled_by(&[0]))?;
    }
    c.push(crate::circuit::Gate::h(0))?;
    let mut layout = RegisterLayout::new();
    layout.alloc("control", 1);
    layout.alloc("u", n);
    Ok(ProcedureOutput {
        clean: CleanSpec::new(1, n + 1)?,
        circuit: c,
        layout,
    })
}

/// Slack for comparing a trace recovered from an acceptance probability
/// against the thresholds.
const EXACT_SLACK: f64 = 1e-9;

fn classify(x: f64, a: f64, b: f64, slack: f64) -> Verdict {
    if x >= a - slack {
        Verdict::Yes
    } else if x <= b + slack {
        Verdict::No
    } else {
        Verdict::OutsidePromise
    }
}

pub fn decide_trest(instance: &TrestInstance, mode: TrestMode) -> Result<TrestDecision, TrestError> {
    let TrestInstance { u, a, b } = instance;
    let (a, b) = (*a, *b);
    if !(-1.0 <= b && b < a && a <= 1.0) {
        return Err(TrestError::InvalidThresholds { a, b });
    }
    match mode {
        TrestMode::Oracle => {
            let t = normalized_trace(u)?.re;
            Ok(TrestDecision {
                verdict: classify(t, a, b, 0.0),
                estimate: t,
                half_width_95: 0.0,
            })
        }
        TrestMode::Dqc1Exact => {
            let h = hadamard_test_circuit(u)?;
            let p = simulator::pacc_exact_auto(&h.circuit, h.clean)?.value;
            let t = 2.0 * p - 1.0;
            Ok(TrestDecision {
                verdict: classify(t, a, b, EXACT_SLACK),
                estimate: t,
                half_width_95: 0.0,
            })
        }
        TrestMode::Dqc1Sampled { samples, seed } => {
            if samples == 0 {
                return Err(TrestError::NoSamples);
            }
            let h = hadamard_test_circuit(u)?;
            let r = simulator::pacc_sampled(&h.circuit, h.clean, samples, seed)?;
            let t = 2.0 * r.value - 1.0;
            let hw = 2.0 * r.half_width_95;
            let (lo, hi) = (t - hw, t + hw);
            let verdict = if (lo <= b && hi >= a) || (lo > b && hi < a) {
                Verdict::OutsidePromise
            } else if t >= (a + b) / 2.0 {
                Verdict::Yes
            } else {
                Verdict::No
            };
            Ok(TrestDecision {
                verdict,
                estimate: t,
                half_width_95: hw,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn single(g: Gate) -> Circuit {
        Circuit::from_gates(1, 0, vec![g]).unwrap()
    }

    #[test]
    fn traces_of_small_gates() {
        let id = Circuit::new(3, 0).unwrap();
        assert!((normalized_trace(&id).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(normalized_trace(&single(Gate::z(0))).unwrap().norm() < 1e-12);
        let t = normalized_trace(&single(Gate::t(0))).unwrap();
        let expected = (C64::new(1.0, 0.0) + C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)) / 2.0;
        assert!((t - expected).norm() < 1e-12);
        assert!((t.re - 0.853_553_390_593_273_8).abs() < 1e-12);
    }

    #[test]
    fn hadamard_test_extremes() {
        let h = hadamard_test_circuit(&Circuit::new(2, 0).unwrap()).unwrap();
        assert_eq!(h.circuit.width(), 3);
        assert!((simulator::pacc_exact(&h.circuit, h.clean).unwrap().value - 1.0).abs() < 1e-12);
        let h = hadamard_test_circuit(&single(Gate::z(0))).unwrap();
        assert!((simulator::pacc_exact(&h.circuit, h.clean).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decisions_on_examples() {
        let id = TrestInstance::new(Circuit::new(2, 0).unwrap(), 0.9, 0.1).unwrap();
        let z = TrestInstance::new(single(Gate::z(0)), 0.9, 0.1).unwrap();
        let t = TrestInstance::new(single(Gate::t(0)), 0.8, 0.2).unwrap();
        for mode in [
            TrestMode::Oracle,
            TrestMode::Dqc1Exact,
            TrestMode::Dqc1Sampled { samples: 2000, seed: 1 },
        ] {
            assert_eq!(decide_trest(&id, mode).unwrap().verdict, Verdict::Yes);
            assert_eq!(decide_trest(&z, mode).unwrap().verdict, Verdict::No);
        }
        assert_eq!(decide_trest(&t, TrestMode::Oracle).unwrap().verdict, Verdict::Yes);
        assert_eq!(decide_trest(&t, TrestMode::Dqc1Exact).unwrap().verdict, Verdict::Yes);
    }

    #[test]
    fn thresholds_validated() {
        let c = Circuit::new(1, 0).unwrap();
        assert!(TrestInstance::new(c.clone(), 0.1, 0.1).is_err());
        assert!(TrestInstance::new(c.clone(), 1.5, 0.0).is_err());
        assert!(TrestInstance::new(c, 0.5, -1.0).is_ok());
    }
}
