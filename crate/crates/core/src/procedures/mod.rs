//! Circuit builders for the clean-qubit reduction procedures.
//!
//! Every builder takes a circuit `q` (with its own output qubit) and returns
//! a new circuit plus its clean-qubit count and register layout. Clean
//! registers always come first, so a [`CleanSpec`] of `k` marks exactly the
//! registers that start in `|0>`.
//!
//! Rounds that need fresh randomness get their own mixed registers; a CNOT
//! from a qubit onto a fresh mixed qubit measures it in the computational
//! basis as far as the rest of the circuit is concerned.

pub mod pipeline;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, CleanSpec, Gate, RegisterLayout};
use crate::lowering::{AncillaPool, LoweringPlan, Strategy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcedureError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("output qubit {output} of the input circuit must be its clean qubit 0")]
    OutputNotClean { output: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcedureOutput {
    pub circuit: Circuit,
    pub clean: CleanSpec,
    pub layout: RegisterLayout,
}

fn invalid(msg: impl Into<String>) -> ProcedureError {
    ProcedureError::InvalidParameter(msg.into())
}

fn log2_exact(n: usize, what: &str) -> Result<usize, ProcedureError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid(format!("{what} must be a power of two, got {n}")));
    }
    Ok(n.trailing_zeros() as usize)
}

fn check_clean(q: &Circuit, k: usize) -> Result<(), ProcedureError> {
    CleanSpec::new(k, q.width())?;
    Ok(())
}

fn require_output_zero(q: &Circuit) -> Result<(), ProcedureError> {
    if q.output_qubit() != 0 {
        return Err(ProcedureError::OutputNotClean {
            output: q.output_qubit(),
        });
    }
    Ok(())
}

/// Where `q`'s qubits go in one round: the first `k` onto `clean`, the rest
/// onto consecutive qubits from `rest`.
fn round_map(width: usize, clean: &[usize], rest: usize) -> Vec<usize> {
    (0..width)
        .map(|i| {
            if i < clean.len() {
                clean[i]
            } else {
                rest + i - clean.len()
            }
        })
        .collect()
}

/// Lowering plan whose borrowed ancillas come from the output's mixed
/// qubits, leaving the clean registers untouched.
pub fn lowering_plan(output: &ProcedureOutput, strategy: Strategy) -> LoweringPlan {
    LoweringPlan {
        pool: AncillaPool::Registers((output.clean.k()..output.circuit.width()).collect()),
        strategy,
    }
}

fn finish(circuit: Circuit, k: usize, layout: RegisterLayout) -> Result<ProcedureOutput, ProcedureError> {
    layout.validate(circuit.width())?;
    Ok(ProcedureOutput {
        clean: CleanSpec::new(k, circuit.width())?,
        circuit,
        layout,
    })
}

/// Simulates a `k`-clean circuit with one clean qubit `O`.
///
/// Width `w + 1`. The clean qubits of `q` become the mixed register `Q`.
/// `O` gets a Hadamard exactly when `Q` is `|1^k>` (mapped to `|0^k>` by the
/// surrounding `X` layer), then `q`, a `CZ` from `O` onto `q`'s output, and
/// `q^dagger` are applied, and the controlled Hadamard is undone.
pub fn one_clean_simulation(q: &Circuit, k: usize) -> Result<ProcedureOutput, ProcedureError> {
    check_clean(q, k)?;
    let w = q.width();
    let mut layout = RegisterLayout::new();
    let o = layout.alloc("O", 1).start;
    let qr = layout.alloc("Q", k);
    let rr = layout.alloc("R", w - k);
    let q_reg: Vec<usize> = qr.clone().collect();
    let map = round_map(w, &q_reg, rr.start);
    let out = map[q.output_qubit()];

    let mut c = Circuit::new(w + 1, o)?;
    c.push(Gate::mch(&q_reg, o))?;
    for &x in &q_reg {
        c.push(Gate::x(x))?;
    }
    c.extend_mapped(q, &map)?;
    c.push(Gate::cz(o, out))?;
    c.extend_mapped(&q.inverse(), &map)?;
    for &x in &q_reg {
        c.push(Gate::x(x))?;
    }
    c.push(Gate::mch(&q_reg, o))?;
    finish(c, 1, layout)
}

/// Randomness amplification of a one-clean circuit over `n` rounds.
///
/// Width `n w + 1`: `O`, then `R_1..R_n` (`w - 1` each), then `X_1..X_n`.
/// Each round applies `q` with its output on `O` and CNOTs `O` onto `X_j`;
/// the last CNOT is omitted because nothing follows it.
pub fn randomness_amplification(q: &Circuit, n: usize) -> Result<ProcedureOutput, ProcedureError> {
    require_output_zero(q)?;
    if n == 0 {
        return Err(invalid("round count must be positive"));
    }
    let w = q.width();
    let mut layout = RegisterLayout::new();
    let o = layout.alloc("O", 1).start;
    let r_starts: Vec<usize> = (1..=n).map(|j| layout.alloc(format!("R{j}"), w - 1).start).collect();
    let x_regs: Vec<usize> = (1..=n).map(|j| layout.alloc(format!("X{j}"), 1).start).collect();

    let mut c = Circuit::new(n * w + 1, o)?;
    for j in 0..n {
        c.extend_mapped(q, &round_map(w, &[o], r_starts[j]))?;
        if j + 1 < n {
            c.push(Gate::cx(o, x_regs[j]))?;
        }
    }
    finish(c, 1, layout)
}

/// Shared body of the stability checks: `rounds` rounds of `q` on `Q` with
/// fresh `R_j`, a CNOT from `Q` onto fresh `X_j`, and a `Q`-controlled
/// increment of the counter `C`.
fn stability(
    q: &Circuit,
    counter_len: usize,
    clean: usize,
    rounds: usize,
    pre_increments: usize,
) -> Result<ProcedureOutput, ProcedureError> {
    require_output_zero(q)?;
    let w = q.width();
    let mut layout = RegisterLayout::new();
    let cr: Vec<usize> = layout.alloc("C", counter_len).collect();
    let qq = layout.alloc("Q", 1).start;
    let r_starts: Vec<usize> = (1..=rounds)
        .map(|j| layout.alloc(format!("R{j}"), w - 1).start)
        .collect();
    let x_regs: Vec<usize> = (1..=rounds).map(|j| layout.alloc(format!("X{j}"), 1).start).collect();
    let width = layout.total();

    let mut c = Circuit::new(width, cr[0])?;
    for _ in 0..pre_increments {
        c.push(Gate::incr(&cr))?;
    }
    for j in 0..rounds {
        c.extend_mapped(q, &round_map(w, &[qq], r_starts[j]))?;
        c.push(Gate::cx(qq, x_regs[j]))?;
        c.push(Gate::cincr(qq, &cr))?;
    }
    finish(c, clean, layout)
}

/// One-clean stability check with parameter `n` (a power of two).
///
/// Counter `C` of `log2 n + 1` qubits (only its top qubit clean), mixed `Q`,
/// `2n` rounds; accepts when the counter's top qubit ends in `|0>`.
/// Width `log2 n + 1 + 1 + 2n (w - 1) + 2n`.
pub fn one_clean_stability(q: &Circuit, n: usize) -> Result<ProcedureOutput, ProcedureError> {
    let l = log2_exact(n, "stability parameter")? + 1;
    stability(q, l, 1, 2 * n, 0)
}

/// Two-clean stability check with parameter `n` (a power of two).
///
/// Counter of `log2 n + 3` qubits with its top two clean, moved into
/// `n..3n` by `n` increments before `8n` rounds; accepts when the counter
/// ends below `4n`.
pub fn two_clean_stability(q: &Circuit, n: usize) -> Result<ProcedureOutput, ProcedureError> {
    let l = log2_exact(n, "stability parameter")? + 3;
    stability(q, l, 2, 8 * n, n)
}

/// Counter length `ceil(log2 n) + 1` of the OR-type repetition.
pub fn or_counter_len(n: usize) -> usize {
    (usize::BITS - (n.max(1) - 1).leading_zeros()) as usize + 1
}

/// OR-type repetition of a `k`-clean circuit over `n` rounds.
///
/// Layout `O`, `C` (`ceil(log2 n) + 1`), `Q` (`k`), all clean, then per
/// round `R_j` (`w - k`), `X_j` (1) and `Y_j` (`k`). A round runs `q`,
/// records its output on `X_j`, counts an accepting output, runs
/// `q^dagger`, records `Q` on `Y_j`, and counts when `Q` failed to return
/// to `|0^k>`. The circuit rejects exactly when the counter ends at 0.
pub fn or_repetition(q: &Circuit, k: usize, n: usize) -> Result<ProcedureOutput, ProcedureError> {
    check_clean(q, k)?;
    if n == 0 {
        return Err(invalid("round count must be positive"));
    }
    let w = q.width();
    let l = or_counter_len(n);
    let mut layout = RegisterLayout::new();
    let o = layout.alloc("O", 1).start;
    let cr: Vec<usize> = layout.alloc("C", l).collect();
    let qr: Vec<usize> = layout.alloc("Q", k).collect();
    let r_starts: Vec<usize> = (1..=n).map(|j| layout.alloc(format!("R{j}"), w - k).start).collect();
    let x_regs: Vec<usize> = (1..=n).map(|j| layout.alloc(format!("X{j}"), 1).start).collect();
    let y_regs: Vec<usize> = (1..=n).map(|j| layout.alloc(format!("Y{j}"), k).start).collect();
    let width = layout.total();

    let mut c = Circuit::new(width, o)?;
    let q_inv = q.inverse();
    for j in 0..n {
        let map = round_map(w, &qr, r_starts[j]);
        let out = map[q.output_qubit()];
        c.extend_mapped(q, &map)?;
        c.push(Gate::cx(out, x_regs[j]))?;
        c.push(Gate::x(out))?;
        c.push(Gate::cincr(out, &cr))?;
        c.push(Gate::x(out))?;
        c.extend_mapped(&q_inv, &map)?;
        for (i, &qi) in qr.iter().enumerate() {
            c.push(Gate::cx(qi, y_regs[j] + i))?;
        }
        // Count unless Q is back at |0^k>: increment, then undo it when all
        // of Q reads 0.
        c.push(Gate::incr(&cr))?;
        for &qi in &qr {
            c.push(Gate::x(qi))?;
        }
        c.push(Gate::new(crate::circuit::Op::IncrDg, qr.clone(), cr.clone()))?;
        for &qi in &qr {
            c.push(Gate::x(qi))?;
        }
    }
    for &ci in &cr {
        c.push(Gate::x(ci))?;
    }
    c.push(Gate::mcx(&cr, o))?;
    for &ci in &cr {
        c.push(Gate::x(ci))?;
    }
    finish(c, 1 + l + k, layout)
}

/// `ceil(fraction * n)`.
pub fn threshold_count(fraction: Ratio<u64>, n: usize) -> u64 {
    (fraction * Ratio::from_integer(n as u64)).ceil().to_integer()
}

/// Parallel threshold repetition: `n` (a power of two) independent copies
/// of a `k`-clean circuit, accepted when at least `ceil(fraction * n)` copies
/// accept.
///
/// Layout: flag `O`, counter `C` (`log2 n + 1`), the clean parts of the `n`
/// copies, then their mixed parts. Each accepting copy increments `C`; a
/// threshold gate flips `O` when the count reaches the target and a final
/// `X` makes `|0>` mean "enough copies accepted".
pub fn parallel_threshold(
    q: &Circuit,
    k: usize,
    n: usize,
    fraction: Ratio<u64>,
) -> Result<ProcedureOutput, ProcedureError> {
    check_clean(q, k)?;
    let lg = log2_exact(n, "copy count")?;
    if fraction <= Ratio::from_integer(0) || fraction > Ratio::from_integer(1) {
        return Err(invalid(format!("threshold fraction {fraction} outside (0, 1]")));
    }
    let w = q.width();
    let l = lg + 1;
    let mut layout = RegisterLayout::new();
    let o = layout.alloc("O", 1).start;
    let cr: Vec<usize> = layout.alloc("C", l).collect();
    let q_regs: Vec<Vec<usize>> = (1..=n).map(|j| layout.alloc(format!("Q{j}"), k).collect()).collect();
    let r_starts: Vec<usize> = (1..=n).map(|j| layout.alloc(format!("R{j}"), w - k).start).collect();
    let width = layout.total();

    let mut c = Circuit::new(width, o)?;
    for j in 0..n {
        let map = round_map(w, &q_regs[j], r_starts[j]);
        let out = map[q.output_qubit()];
        c.extend_mapped(q, &map)?;
        c.push(Gate::x(out))?;
        c.push(Gate::cincr(out, &cr))?;
        c.push(Gate::x(out))?;
    }
    c.push(Gate::threshold(threshold_count(fraction, n), o, &cr))?;
    c.push(Gate::x(o))?;
    finish(c, n * k + l + 1, layout)
}

/// A procedure with its parameters, for callers that pick one at run time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "snake_case")]
pub enum Procedure {
    OneCleanSimulation { k: usize },
    RandomnessAmplification { n: usize },
    OneCleanStability { n: usize },
    TwoCleanStability { n: usize },
    OrRepetition { k: usize, n: usize },
    ParallelThreshold { k: usize, n: usize, fraction: (u64, u64) },
}

impl Procedure {
    pub fn build(&self, q: &Circuit) -> Result<ProcedureOutput, ProcedureError> {
        match *self {
            Procedure::OneCleanSimulation { k } => one_clean_simulation(q, k),
            Procedure::RandomnessAmplification { n } => randomness_amplification(q, n),
            Procedure::OneCleanStability { n } => one_clean_stability(q, n),
            Procedure::TwoCleanStability { n } => two_clean_stability(q, n),
            Procedure::OrRepetition { k, n } => or_repetition(q, k, n),
            Procedure::ParallelThreshold { k, n, fraction } => {
                if fraction.1 == 0 {
                    return Err(invalid("threshold fraction has zero denominator"));
                }
                parallel_threshold(q, k, n, Ratio::new(fraction.0, fraction.1))
            }
        }
    }

    /// Output width for an input of width `w`, without building anything.
    pub fn width(&self, w: usize) -> usize {
        let log2 = |n: usize| n.trailing_zeros() as usize;
        match *self {
            Procedure::OneCleanSimulation { .. } => w + 1,
            Procedure::RandomnessAmplification { n } => n * w + 1,
            Procedure::OneCleanStability { n } => log2(n) + 1 + 1 + 2 * n * (w - 1) + 2 * n,
            Procedure::TwoCleanStability { n } => log2(n) + 3 + 1 + 8 * n * (w - 1) + 8 * n,
            Procedure::OrRepetition { k, n } => 1 + or_counter_len(n) + k + n * (w - k) + n + n * k,
            Procedure::ParallelThreshold { n, .. } => 1 + log2(n) + 1 + n * w,
        }
    }

    /// Clean-qubit count of the output.
    pub fn clean(&self) -> usize {
        match *self {
            Procedure::OneCleanSimulation { .. }
            | Procedure::RandomnessAmplification { .. }
            | Procedure::OneCleanStability { .. } => 1,
            Procedure::TwoCleanStability { .. } => 2,
            Procedure::OrRepetition { k, n } => 1 + or_counter_len(n) + k,
            Procedure::ParallelThreshold { k, n, .. } => n * k + n.trailing_zeros() as usize + 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(width: usize) -> Circuit {
        Circuit::from_gates(width, 0, [Gate::h(0), Gate::cx(0, width - 1)]).unwrap()
    }

    #[test]
    fn widths_match_formulas() {
        let procs = [
            Procedure::OneCleanSimulation { k: 2 },
            Procedure::RandomnessAmplification { n: 3 },
            Procedure::OneCleanStability { n: 4 },
            Procedure::TwoCleanStability { n: 2 },
            Procedure::OrRepetition { k: 2, n: 3 },
            Procedure::ParallelThreshold {
                k: 2,
                n: 4,
                fraction: (1, 2),
            },
        ];
        for p in procs {
            let out = p.build(&q(3)).unwrap();
            assert_eq!(out.circuit.width(), p.width(3), "{p:?}");
            assert_eq!(out.clean.k(), p.clean(), "{p:?}");
        }
    }

    #[test]
    fn ramp_single_round_has_no_cnot() {
        let out = randomness_amplification(&q(2), 1).unwrap();
        assert_eq!(out.circuit.width(), 3);
        assert_eq!(out.circuit.len(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(one_clean_stability(&q(2), 3).is_err());
        assert!(two_clean_stability(&q(2), 0).is_err());
        assert!(randomness_amplification(&q(2), 0).is_err());
        let shifted = q(2).with_output(1).unwrap();
        assert_eq!(
            randomness_amplification(&shifted, 2),
            Err(ProcedureError::OutputNotClean { output: 1 })
        );
        assert!(parallel_threshold(&q(2), 1, 2, Ratio::new(0, 1)).is_err());
        assert!(parallel_threshold(&q(2), 1, 3, Ratio::new(1, 2)).is_err());
        assert!(one_clean_simulation(&q(2), 3).is_err());
    }

    #[test]
    fn threshold_count_rounds_up() {
        assert_eq!(threshold_count(Ratio::new(1, 2), 4), 2);
        assert_eq!(threshold_count(Ratio::new(3, 5), 4), 3);
        assert_eq!(threshold_count(Ratio::new(1, 1), 1), 1);
    }
}
