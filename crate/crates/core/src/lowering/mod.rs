//! Lowering of macro gates to the base gate set `{H, T, CNOT}`.
//!
//! Multi-controlled gates borrow ancillas: qubits in an arbitrary, possibly
//! mixed, state that are returned to that state afterwards. Which qubits may
//! be borrowed is set by an [`AncillaPool`].
//!
//! Controlled `T`/`T†`, and `S`/`S†` with two or more controls, have no exact
//! realisation over `{H, T, CNOT}` (their determinants are not reachable), so
//! lowering reports them as [`LoweringError::NotExactlyLowerable`]; the
//! simulator handles them natively.

pub mod decompose;
pub mod unitary;

use std::ops::Range;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, Op, RegisterLayout};

pub use decompose::{build_incr, build_mch, build_threshold};
pub use unitary::{unitary_of, unitary_of_with_cap, CMatrix, UnitaryError};

use decompose::{
    expand_single, incr_sequence, mch_sequence, mcx_ancillas_needed, mcx_linear, mcx_split, threshold_sequence,
    toffoli_network,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoweringError {
    #[error("gate {gate_index} ({gate}) needs {needed} borrowed ancilla(s), {available} available")]
    InsufficientAncillas {
        gate_index: usize,
        gate: String,
        needed: usize,
        available: usize,
    },
    #[error("ancilla pool qubit {qubit} is an operand of gate {gate_index} ({gate})")]
    PoolOverlap {
        gate_index: usize,
        gate: String,
        qubit: usize,
    },
    #[error("ancilla pool qubit {qubit} out of range for width {width}")]
    PoolOutOfRange { qubit: usize, width: usize },
    #[error("gate {gate_index} ({gate}) has no exact decomposition over H, T, CNOT")]
    NotExactlyLowerable { gate_index: usize, gate: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// `n - 2` borrowed ancillas for an `n`-control NOT.
    #[default]
    Linear,
    /// One borrowed ancilla for any number of controls, at roughly twice the
    /// Toffoli count.
    Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AncillaPool {
    /// Every qubit the gate does not act on. If that is too few and
    /// `allow_extension` is set, fresh qubits are appended to the circuit.
    Idle { allow_extension: bool },
    /// The listed qubits, minus those the gate being lowered acts on.
    Registers(Vec<usize>),
    /// The listed qubits; overlapping the operands of a gate that needs
    /// ancillas is an error.
    Strict(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoweringPlan {
    pub pool: AncillaPool,
    pub strategy: Strategy,
}

impl Default for LoweringPlan {
    fn default() -> Self {
        LoweringPlan {
            pool: AncillaPool::Idle { allow_extension: true },
            strategy: Strategy::Linear,
        }
    }
}

impl LoweringPlan {
    pub fn with_strategy(strategy: Strategy) -> LoweringPlan {
        LoweringPlan {
            strategy,
            ..LoweringPlan::default()
        }
    }
}

/// A lowered circuit plus the qubits appended as borrowed ancillas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lowered {
    pub circuit: Circuit,
    pub borrowed: Range<usize>,
}

impl Lowered {
    /// Layout with the original qubits as `main` and appended ones as
    /// `borrowed`.
    pub fn layout(&self) -> RegisterLayout {
        let mut l = RegisterLayout::new();
        l.alloc("main", self.borrowed.start);
        l.alloc("borrowed", self.borrowed.len());
        l
    }
}

/// Largest number of controls on any multi-controlled NOT in the expansion
/// of `gate`.
fn max_mcx_controls(gate: &Gate) -> usize {
    let c = gate.controls().len();
    match gate.op() {
        Op::X | Op::Z | Op::H => c,
        Op::S | Op::Sdg | Op::T | Op::Tdg => c.min(1),
        Op::Incr | Op::IncrDg => c + gate.targets().len() - 1,
        Op::Threshold(_) => c + gate.targets().len() - 1,
    }
}

/// Borrowed ancillas needed to lower `gate` under `strategy`.
pub fn ancillas_needed(gate: &Gate, strategy: Strategy) -> usize {
    mcx_ancillas_needed(max_mcx_controls(gate), strategy)
}

fn exactly_lowerable(gate: &Gate) -> bool {
    let c = gate.controls().len();
    match gate.op() {
        Op::T | Op::Tdg => c == 0,
        Op::S | Op::Sdg => c <= 1,
        _ => true,
    }
}

/// Lowers every gate to `{H, T, CNOT}` with the given plan.
pub fn lower(circuit: &Circuit, plan: &LoweringPlan) -> Result<Circuit, LoweringError> {
    lower_with_layout(circuit, plan).map(|l| l.circuit)
}

pub fn lower_with_layout(circuit: &Circuit, plan: &LoweringPlan) -> Result<Lowered, LoweringError> {
    let w = circuit.width();
    let describe = |g: &Gate| g.to_string();

    for (i, g) in circuit.gates().iter().enumerate() {
        if !exactly_lowerable(g) {
            return Err(LoweringError::NotExactlyLowerable {
                gate_index: i,
                gate: describe(g),
            });
        }
    }
    if let AncillaPool::Registers(pool) | AncillaPool::Strict(pool) = &plan.pool {
        if let Some(&q) = pool.iter().find(|&&q| q >= w) {
            return Err(LoweringError::PoolOutOfRange { qubit: q, width: w });
        }
    }

    let mut extension = 0;
    if let AncillaPool::Idle { allow_extension } = plan.pool {
        for (i, g) in circuit.gates().iter().enumerate() {
            let needed = ancillas_needed(g, plan.strategy);
            let available = w - g.arity();
            if needed > available {
                if !allow_extension {
                    return Err(LoweringError::InsufficientAncillas {
                        gate_index: i,
                        gate: describe(g),
                        needed,
                        available,
                    });
                }
                extension = extension.max(needed - available);
            }
        }
    }
    let new_w = w + extension;

    let mut out = Circuit::new(new_w, circuit.output_qubit())?;
    let mut buf = Vec::new();
    for (i, g) in circuit.gates().iter().enumerate() {
        let needed = ancillas_needed(g, plan.strategy);
        let pool: Vec<usize> = if needed == 0 {
            Vec::new()
        } else {
            let operands: Vec<usize> = g.qubits().collect();
            match &plan.pool {
                AncillaPool::Idle { .. } => (0..new_w).filter(|q| !operands.contains(q)).collect(),
                AncillaPool::Registers(p) => p.iter().copied().filter(|q| !operands.contains(q)).collect(),
                AncillaPool::Strict(p) => {
                    if let Some(&q) = p.iter().find(|q| operands.contains(q)) {
                        return Err(LoweringError::PoolOverlap {
                            gate_index: i,
                            gate: describe(g),
                            qubit: q,
                        });
                    }
                    p.clone()
                }
            }
        };
        if pool.len() < needed {
            return Err(LoweringError::InsufficientAncillas {
                gate_index: i,
                gate: describe(g),
                needed,
                available: pool.len(),
            });
        }
        buf.clear();
        lower_gate(g, &pool, plan.strategy, &mut buf);
        for h in buf.drain(..) {
            out.push(h)?;
        }
    }
    Ok(Lowered {
        circuit: out,
        borrowed: w..new_w,
    })
}

/// Expands one exactly-lowerable gate into base gates. `pool` holds enough
/// qubits disjoint from the gate's operands.
fn lower_gate(gate: &Gate, pool: &[usize], strategy: Strategy, out: &mut Vec<Gate>) {
    let controls = gate.controls();
    let targets = gate.targets();
    let recurse = |gates: Vec<Gate>, out: &mut Vec<Gate>| {
        for g in &gates {
            lower_gate(g, pool, strategy, out);
        }
    };
    match (gate.op(), controls.len()) {
        (Op::H, 0) | (Op::T, 0) | (Op::X, 1) => out.push(gate.clone()),
        (Op::Tdg | Op::S | Op::Sdg | Op::Z | Op::X, 0) => out.extend(expand_single(gate)),
        (Op::X, _) => {
            let t = targets[0];
            let toffolis = match strategy {
                Strategy::Linear => mcx_linear(controls, t, pool),
                Strategy::Split => {
                    if controls.len() <= 2 {
                        mcx_linear(controls, t, &[])
                    } else {
                        mcx_split(controls, t, pool[0])
                    }
                }
            };
            for tf in toffolis {
                recurse(toffoli_network(tf), out);
            }
        }
        (Op::Z, _) => {
            let t = targets[0];
            out.push(Gate::h(t));
            lower_gate(&Gate::mcx(controls, t), pool, strategy, out);
            out.push(Gate::h(t));
        }
        (Op::H, _) => recurse(mch_sequence(controls, targets[0]), out),
        (Op::S, 1) => {
            let (c, t) = (controls[0], targets[0]);
            recurse(
                vec![Gate::t(c), Gate::t(t), Gate::cx(c, t), Gate::tdg(t), Gate::cx(c, t)],
                out,
            );
        }
        (Op::Sdg, 1) => {
            let (c, t) = (controls[0], targets[0]);
            recurse(
                vec![Gate::tdg(c), Gate::tdg(t), Gate::cx(c, t), Gate::t(t), Gate::cx(c, t)],
                out,
            );
        }
        (Op::Incr, _) => recurse(incr_sequence(targets, controls, false), out),
        (Op::IncrDg, _) => recurse(incr_sequence(targets, controls, true), out),
        (Op::Threshold(t), _) => recurse(threshold_sequence(t, targets[0], &targets[1..], controls), out),
        _ => unreachable!("checked by exactly_lowerable"),
    }
}
