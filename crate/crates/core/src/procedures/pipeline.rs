//! Staged compositions of the procedures, with a per-stage trace of widths,
//! clean counts, predicted acceptance windows and (when affordable) exact
//! acceptance values from the structured evaluators.
//!
//! Window propagation starts from the source's acceptance probability and
//! pushes an interval `[lo, hi]` through each stage's bounds:
//!
//! | stage | window |
//! |---|---|
//! | one-clean simulation (`k`) | `[1 - 2^-k (1 - lo^2), 1 - 2^-k (1 - hi)]` |
//! | randomness amplification (`n`) | image of `[lo, hi]` under `1/2 + (2p - 1)^n / 2` |
//! | one-clean stability (`n`) | `[lo^(2n-1), 3 n^(-1/3) + 4 eps]` |
//! | two-clean stability (`n`) | `[lo^(8n-1), 2^(-n/16 + 1)]` |
//! | OR-type repetition (`n`) | `[1 - (1 - lo)^n, 1 - (1 - hi)^(2n)]` |
//! | parallel threshold (`n`, `t`) | binomial tails at `lo` and `hi` |
//!
//! Stability upper bounds are replaced by 1 when their preconditions fail,
//! and the stage is flagged.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CleanSpec};
use crate::simulator::{self, SimError};
use crate::structured::{self, RoundModel, StructuredError};

use super::{
    one_clean_simulation, one_clean_stability, or_repetition, parallel_threshold, randomness_amplification,
    threshold_count, two_clean_stability, ProcedureError, ProcedureOutput,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("stage {stage} ({name}): {source}")]
    Stage {
        stage: usize,
        name: &'static str,
        source: ProcedureError,
    },
    #[error("schedule does not match its kind: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    OneCleanSimulation,
    RandomnessAmplification { n: usize },
    OneCleanStability { n: usize },
    TwoCleanStability { n: usize },
    OrRepetition { n: usize },
    ParallelThreshold { n: usize, fraction: (u64, u64) },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::OneCleanSimulation => "one_clean_simulation",
            Stage::RandomnessAmplification { .. } => "randomness_amplification",
            Stage::OneCleanStability { .. } => "one_clean_stability",
            Stage::TwoCleanStability { .. } => "two_clean_stability",
            Stage::OrRepetition { .. } => "or_repetition",
            Stage::ParallelThreshold { .. } => "parallel_threshold",
        }
    }
}

/// Which error-reduction composition a schedule realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    /// Perfect completeness, two clean qubits: simulation, amplification,
    /// two-clean stability check.
    OneSidedTwoClean,
    /// Perfect completeness, one clean qubit: simulation, amplification,
    /// one-clean stability check.
    OneSidedOneClean,
    /// Two-sided error, two clean qubits: gap amplification to a one-clean
    /// computation, then near-perfect completeness via OR-type repetition,
    /// then the one-sided two-clean composition.
    TwoSidedTwoClean,
    /// As [`PipelineKind::TwoSidedTwoClean`] ending in the one-clean check.
    TwoSidedOneClean,
}

/// Stage parameters of the two-sided front end: a parallel threshold
/// repetition, one-clean simulation and amplification giving a one-clean
/// computation with a constant gap, then a second parallel threshold and an
/// OR-type repetition giving near-perfect completeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoSidedFront {
    pub copies: usize,
    pub fraction: (u64, u64),
    pub amplification_n: usize,
    pub second_copies: usize,
    pub second_fraction: (u64, u64),
    pub or_n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSchedule {
    pub kind: PipelineKind,
    pub stages: Vec<Stage>,
}

impl PipelineSchedule {
    pub fn one_sided_two_clean(ramp_n: usize, stab_n: usize) -> PipelineSchedule {
        PipelineSchedule {
            kind: PipelineKind::OneSidedTwoClean,
            stages: vec![
                Stage::OneCleanSimulation,
                Stage::RandomnessAmplification { n: ramp_n },
                Stage::TwoCleanStability { n: stab_n },
            ],
        }
    }

    pub fn one_sided_one_clean(ramp_n: usize, stab_n: usize) -> PipelineSchedule {
        PipelineSchedule {
            kind: PipelineKind::OneSidedOneClean,
            stages: vec![
                Stage::OneCleanSimulation,
                Stage::RandomnessAmplification { n: ramp_n },
                Stage::OneCleanStability { n: stab_n },
            ],
        }
    }

    fn front(f: &TwoSidedFront) -> Vec<Stage> {
        vec![
            Stage::ParallelThreshold {
                n: f.copies,
                fraction: f.fraction,
            },
            Stage::OneCleanSimulation,
            Stage::RandomnessAmplification { n: f.amplification_n },
            Stage::ParallelThreshold {
                n: f.second_copies,
                fraction: f.second_fraction,
            },
            Stage::OrRepetition { n: f.or_n },
        ]
    }

    pub fn two_sided_two_clean(front: TwoSidedFront, ramp_n: usize, stab_n: usize) -> PipelineSchedule {
        let mut stages = Self::front(&front);
        stages.extend(Self::one_sided_two_clean(ramp_n, stab_n).stages);
        PipelineSchedule {
            kind: PipelineKind::TwoSidedTwoClean,
            stages,
        }
    }

    pub fn two_sided_one_clean(front: TwoSidedFront, ramp_n: usize, stab_n: usize) -> PipelineSchedule {
        let mut stages = Self::front(&front);
        stages.extend(Self::one_sided_one_clean(ramp_n, stab_n).stages);
        PipelineSchedule {
            kind: PipelineKind::TwoSidedOneClean,
            stages,
        }
    }

    /// Checks that the stage sequence has the shape its kind requires.
    pub fn validate(&self) -> Result<(), PipelineError> {
        use Stage::*;
        let tail_ok = |tail: &[Stage], two_clean: bool| {
            matches!(tail, [OneCleanSimulation, RandomnessAmplification { .. }, last]
                if matches!((last, two_clean), (TwoCleanStability { .. }, true) | (OneCleanStability { .. }, false)))
        };
        let front_ok = |front: &[Stage]| {
            matches!(
                front,
                [
                    ParallelThreshold { .. },
                    OneCleanSimulation,
                    RandomnessAmplification { .. },
                    ParallelThreshold { .. },
                    OrRepetition { .. }
                ]
            )
        };
        let ok = match self.kind {
            PipelineKind::OneSidedTwoClean => tail_ok(&self.stages, true),
            PipelineKind::OneSidedOneClean => tail_ok(&self.stages, false),
            PipelineKind::TwoSidedTwoClean => {
                self.stages.len() == 8 && front_ok(&self.stages[..5]) && tail_ok(&self.stages[5..], true)
            }
            PipelineKind::TwoSidedOneClean => {
                self.stages.len() == 8 && front_ok(&self.stages[..5]) && tail_ok(&self.stages[5..], false)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(PipelineError::InvalidSchedule(format!(
                "{:?} cannot be {:?}",
                self.stages.iter().map(Stage::name).collect::<Vec<_>>(),
                self.kind
            )))
        }
    }
}

/// Stage parameters as chosen in the error-reduction proofs, for callers who
/// want the full-scale numbers. They are usually far too large to build.
pub mod proof_parameters {
    /// `(3/2) ln 2`.
    pub const ALPHA: f64 = 1.5 * std::f64::consts::LN_2;

    fn ceil_log2(x: f64) -> u32 {
        x.log2().ceil().max(0.0) as u32
    }

    /// Perfect completeness, two clean qubits, soundness gap `1 - s >= 1/q`,
    /// target error `2^-p`: amplification `n >= alpha 2^k q`, stability
    /// parameter `2^(ceil(log(p + 1)) + 4)`.
    pub fn one_sided_two_clean(k: u32, q: u64, p: u64) -> (u64, u64) {
        let r = 2f64.powi(k as i32) * q as f64;
        let ramp = (ALPHA * r).ceil() as u64;
        let stab = 1u64 << (ceil_log2(p as f64 + 1.0) + 4);
        (ramp, stab)
    }

    /// Perfect completeness, one clean qubit, target soundness `1/p`:
    /// amplification `r1 r2` with `r1 = 2^k q`, `r2 = p + 1`; stability
    /// parameter `2^(ceil(3 log(6p)))`.
    pub fn one_sided_one_clean(k: u32, q: u64, p: u64) -> (u64, u64) {
        let r1 = (1u64 << k) * q;
        let r2 = p + 1;
        let stab = 1u64 << ceil_log2((6.0 * p as f64).powi(3));
        (r1 * r2, stab)
    }

    /// Smallest power of two `n` with `exp(-2 (gap/2)^2 n) <= tail`.
    pub fn threshold_copies(gap: f64, tail: f64) -> u64 {
        let delta = gap / 2.0;
        let needed = (-(tail.ln()) / (2.0 * delta * delta)).ceil().max(1.0) as u64;
        needed.next_power_of_two()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn point(p: f64) -> Window {
        Window { lo: p, hi: p }
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub name: String,
    pub parameters: String,
    pub width: usize,
    pub clean: usize,
    /// Acceptance window predicted from the previous stage's window.
    pub window: Window,
    /// Acceptance probability from the structured evaluators, when the
    /// circuit involved is small enough.
    pub exact: Option<f64>,
    /// False when a bound's preconditions do not hold at these parameters;
    /// the window then falls back to the trivial bound on that side.
    pub preconditions_met: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub output: ProcedureOutput,
    /// Source acceptance probability when it could be computed.
    pub source_pacc: Option<f64>,
    pub trace: Vec<StageTrace>,
}

/// Largest input width for which per-stage structured evaluation runs
/// dense state vectors of the previous stage's circuit.
const DENSE_STAGE_WIDTH: usize = 12;

fn ramp_window(w: Window, n: u64) -> Window {
    let f = |p: f64| structured::ramp_closed_form(p, n);
    let mut lo = f(w.lo).min(f(w.hi));
    let mut hi = f(w.lo).max(f(w.hi));
    if w.lo <= 0.5 && 0.5 <= w.hi {
        lo = lo.min(0.5);
        hi = hi.max(0.5);
    }
    Window { lo, hi }
}

fn bias(w: Window) -> f64 {
    (w.lo - 0.5).abs().max((w.hi - 0.5).abs())
}

fn exact_pacc(circuit: &Circuit, k: usize) -> Option<f64> {
    let clean = CleanSpec::new(k, circuit.width()).ok()?;
    simulator::pacc_exact_auto(circuit, clean).ok().map(|r| r.value)
}

fn round_model(circuit: &Circuit, p: f64) -> Result<RoundModel, StructuredError> {
    if circuit.width() <= DENSE_STAGE_WIDTH {
        RoundModel::from_circuit(circuit)
    } else {
        // Outputs of the simulation and amplification stages flip their
        // output symmetrically, so the keep probability is p_acc itself.
        RoundModel::from_keep_probability(p)
    }
}

/// Builds the staged composition and its trace.
pub fn pipeline(q: &Circuit, k: usize, schedule: &PipelineSchedule) -> Result<PipelineOutput, PipelineError> {
    schedule.validate()?;
    let source_pacc = exact_pacc(q, k);
    let mut window = source_pacc.map_or(Window { lo: 0.0, hi: 1.0 }, Window::point);
    let mut value = source_pacc;
    let mut current = ProcedureOutput {
        circuit: q.clone(),
        clean: CleanSpec::new(k, q.width()).map_err(|e| PipelineError::Stage {
            stage: 0,
            name: "source",
            source: e.into(),
        })?,
        layout: {
            let mut l = crate::circuit::RegisterLayout::new();
            l.alloc("source", q.width());
            l
        },
    };
    let mut trace = Vec::with_capacity(schedule.stages.len());

    for (i, stage) in schedule.stages.iter().enumerate() {
        let input = &current.circuit;
        let k_in = current.clean.k();
        let wrap = |e: ProcedureError| PipelineError::Stage {
            stage: i + 1,
            name: stage.name(),
            source: e,
        };
        let mut preconditions_met = true;
        let mut note = None;
        let (built, parameters, next_window, next_value) = match *stage {
            Stage::OneCleanSimulation => {
                let built = one_clean_simulation(input, k_in).map_err(wrap)?;
                let (lo, _) = structured::one_clean_simulation_bounds(window.lo, k_in);
                let (_, hi) = structured::one_clean_simulation_bounds(window.hi, k_in);
                let exact = if input.width() <= DENSE_STAGE_WIDTH {
                    Some(structured::one_clean_simulation_value(input, k_in)?)
                } else {
                    None
                };
                (built, format!("k={k_in}"), Window { lo, hi }, exact)
            }
            Stage::RandomnessAmplification { n } => {
                let built = randomness_amplification(input, n).map_err(wrap)?;
                let exact = match value {
                    Some(p) => Some(structured::ramp_chain(round_model(input, p)?, n as u64)),
                    None => None,
                };
                (built, format!("n={n}"), ramp_window(window, n as u64), exact)
            }
            Stage::OneCleanStability { n } => {
                let built = one_clean_stability(input, n).map_err(wrap)?;
                let eps = bias(window);
                let upper = 3.0 * (n as f64).powf(-1.0 / 3.0) + 4.0 * eps;
                let applicable = n >= 64 && eps <= 0.125 && upper <= 1.0;
                if !applicable {
                    preconditions_met = false;
                    note = Some(format!(
                        "upper bound needs n >= 64, bias <= 1/8 and 3n^(-1/3) + 4 bias <= 1 (n={n}, bias={eps:.4})"
                    ));
                }
                let w = Window {
                    lo: window.lo.powi((2 * n - 1) as i32),
                    hi: if applicable { upper } else { 1.0 },
                };
                let exact = match value {
                    Some(p) => Some(structured::stab1_chain(round_model(input, p)?, n as u64)?),
                    None => None,
                };
                (built, format!("n={n}"), w, exact)
            }
            Stage::TwoCleanStability { n } => {
                let built = two_clean_stability(input, n).map_err(wrap)?;
                let eps = bias(window);
                let upper = 2f64.powf(-(n as f64) / 16.0 + 1.0);
                let applicable = n >= 16 && eps <= 0.0625 && upper <= 1.0;
                if !applicable {
                    preconditions_met = false;
                    note = Some(format!(
                        "upper bound needs n >= 16 and bias <= 1/16 (n={n}, bias={eps:.4})"
                    ));
                }
                let w = Window {
                    lo: window.lo.powi((8 * n - 1) as i32),
                    hi: if applicable { upper } else { 1.0 },
                };
                let exact = match value {
                    Some(p) => Some(structured::stab2_chain(round_model(input, p)?, n as u64)?),
                    None => None,
                };
                (built, format!("n={n}"), w, exact)
            }
            Stage::OrRepetition { n } => {
                let built = or_repetition(input, k_in, n).map_err(wrap)?;
                let ni = n as i32;
                let w = Window {
                    lo: 1.0 - (1.0 - window.lo).powi(ni),
                    hi: 1.0 - (1.0 - window.hi).powi(2 * ni),
                };
                let exact = if input.width() <= DENSE_STAGE_WIDTH {
                    Some(structured::or_repetition(input, k_in, n as u64)?.exact)
                } else {
                    None
                };
                (built, format!("n={n}"), w, exact)
            }
            Stage::ParallelThreshold { n, fraction } => {
                if fraction.1 == 0 {
                    return Err(wrap(ProcedureError::InvalidParameter("zero denominator".into())));
                }
                let ratio = Ratio::new(fraction.0, fraction.1);
                let built = parallel_threshold(input, k_in, n, ratio).map_err(wrap)?;
                let t = threshold_count(ratio, n);
                let tail = |p: f64| structured::parallel_threshold_value(p, n as u64, t);
                let w = Window {
                    lo: tail(window.lo),
                    hi: tail(window.hi),
                };
                let exact = value.map(tail);
                (built, format!("n={n}, t={t}"), w, exact)
            }
        };
        trace.push(StageTrace {
            name: stage.name().to_string(),
            parameters,
            width: built.circuit.width(),
            clean: built.clean.k(),
            window: next_window,
            exact: next_value,
            preconditions_met,
            note,
        });
        window = next_window;
        value = next_value;
        current = built;
    }
    Ok(PipelineOutput {
        output: current,
        source_pacc,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_wrong_shapes() {
        let mut s = PipelineSchedule::one_sided_two_clean(2, 1);
        assert!(s.validate().is_ok());
        s.kind = PipelineKind::OneSidedOneClean;
        assert!(s.validate().is_err());
        let front = TwoSidedFront {
            copies: 2,
            fraction: (1, 2),
            amplification_n: 2,
            second_copies: 1,
            second_fraction: (1, 2),
            or_n: 1,
        };
        assert!(PipelineSchedule::two_sided_one_clean(front, 1, 1).validate().is_ok());
    }

    #[test]
    fn proof_parameters_small_cases() {
        let (ramp, stab) = proof_parameters::one_sided_two_clean(1, 2, 1);
        assert_eq!(ramp, (proof_parameters::ALPHA * 4.0).ceil() as u64);
        assert_eq!(stab, 32);
        let (ramp, stab) = proof_parameters::one_sided_one_clean(1, 2, 1);
        assert_eq!(ramp, 8);
        // (6 * 1)^3 = 216 -> 256
        assert_eq!(stab, 256);
        // ln 16 / (2 * 0.25^2) = 22.2 -> 32
        assert_eq!(proof_parameters::threshold_copies(0.5, 1.0 / 16.0), 32);
    }

    #[test]
    fn ramp_window_covers_half() {
        let w = ramp_window(Window { lo: 0.2, hi: 0.9 }, 2);
        assert!((w.lo - 0.5).abs() < 1e-12);
        assert!(w.hi >= 0.5 + 0.5 * 0.36 - 1e-12);
    }
}
