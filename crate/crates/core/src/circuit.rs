//! Circuit intermediate representation.
//!
//! A [`Circuit`] is a width, a time-ordered list of [`Gate`]s and a designated
//! output qubit. Every gate is a base operation applied to one or more target
//! qubits, optionally conditioned on a list of control qubits, so `CX` is `X`
//! with one control, `MCH` is `H` with several, and `CINCR` is `INCR` with one.
//!
//! Qubit indices are 0-based. Counter registers list their most significant
//! bit first. Measuring the output qubit in `|0>` means accept.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("circuit width must be at least 1")]
    ZeroWidth,
    #[error("qubit {qubit} out of range for width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("qubit {0} appears more than once in one gate")]
    DuplicateQubit(usize),
    #[error("`{op}` expects {expected} target qubit(s), got {got}")]
    TargetArity {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("threshold {t} out of range for a {len}-qubit counter")]
    ThresholdOutOfRange { t: u64, len: usize },
    #[error("clean-qubit count {k} invalid for width {width}")]
    InvalidClean { k: usize, width: usize },
    #[error("register layout does not partition [0, {width}): {reason}")]
    BadLayout { width: usize, reason: String },
    #[error("qubit map has length {got}, expected {expected}")]
    MapLength { expected: usize, got: usize },
}

/// The operation a gate applies to its targets when all controls are `|1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    H,
    T,
    Tdg,
    S,
    Sdg,
    X,
    Z,
    /// `|j> -> |j+1 mod 2^l>` over the target counter.
    Incr,
    /// `|j> -> |j-1 mod 2^l>` over the target counter.
    IncrDg,
    /// `|b>|j> -> |b xor [j >= t]>|j>`; first target is the flag.
    Threshold(u64),
}

impl Op {
    pub fn adjoint(self) -> Op {
        match self {
            Op::T => Op::Tdg,
            Op::Tdg => Op::T,
            Op::S => Op::Sdg,
            Op::Sdg => Op::S,
            Op::Incr => Op::IncrDg,
            Op::IncrDg => Op::Incr,
            other => other,
        }
    }

    pub fn is_single_qubit(self) -> bool {
        !matches!(self, Op::Incr | Op::IncrDg | Op::Threshold(_))
    }

    /// Diagonal in the computational basis: only contributes a phase when the
    /// target is `|1>`.
    pub fn is_diagonal(self) -> bool {
        matches!(self, Op::T | Op::Tdg | Op::S | Op::Sdg | Op::Z)
    }

    /// Maps computational-basis states to computational-basis states.
    pub fn is_permutation(self) -> bool {
        matches!(self, Op::X | Op::Incr | Op::IncrDg | Op::Threshold(_))
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::H => "h",
            Op::T => "t",
            Op::Tdg => "tdg",
            Op::S => "s",
            Op::Sdg => "sdg",
            Op::X => "x",
            Op::Z => "z",
            Op::Incr => "incr",
            Op::IncrDg => "incrdg",
            Op::Threshold(_) => "thr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    op: Op,
    controls: Vec<usize>,
    targets: Vec<usize>,
}

impl Gate {
    /// Builds a gate without validating it; [`Circuit::push`] validates.
    pub fn new(op: Op, controls: Vec<usize>, targets: Vec<usize>) -> Gate {
        Gate { op, controls, targets }
    }

    fn single(op: Op, q: usize) -> Gate {
        Gate::new(op, Vec::new(), vec![q])
    }

    pub fn h(q: usize) -> Gate {
        Gate::single(Op::H, q)
    }
    pub fn t(q: usize) -> Gate {
        Gate::single(Op::T, q)
    }
    pub fn tdg(q: usize) -> Gate {
        Gate::single(Op::Tdg, q)
    }
    pub fn s(q: usize) -> Gate {
        Gate::single(Op::S, q)
    }
    pub fn sdg(q: usize) -> Gate {
        Gate::single(Op::Sdg, q)
    }
    pub fn x(q: usize) -> Gate {
        Gate::single(Op::X, q)
    }
    pub fn z(q: usize) -> Gate {
        Gate::single(Op::Z, q)
    }
    pub fn cx(control: usize, target: usize) -> Gate {
        Gate::new(Op::X, vec![control], vec![target])
    }
    pub fn cz(a: usize, b: usize) -> Gate {
        Gate::new(Op::Z, vec![a], vec![b])
    }
    pub fn mcx(controls: &[usize], target: usize) -> Gate {
        Gate::new(Op::X, controls.to_vec(), vec![target])
    }
    pub fn mch(controls: &[usize], target: usize) -> Gate {
        Gate::new(Op::H, controls.to_vec(), vec![target])
    }
    pub fn incr(counter: &[usize]) -> Gate {
        Gate::new(Op::Incr, Vec::new(), counter.to_vec())
    }
    pub fn incr_dg(counter: &[usize]) -> Gate {
        Gate::new(Op::IncrDg, Vec::new(), counter.to_vec())
    }
    pub fn cincr(control: usize, counter: &[usize]) -> Gate {
        Gate::new(Op::Incr, vec![control], counter.to_vec())
    }
    pub fn threshold(t: u64, flag: usize, counter: &[usize]) -> Gate {
        let mut targets = Vec::with_capacity(counter.len() + 1);
        targets.push(flag);
        targets.extend_from_slice(counter);
        Gate::new(Op::Threshold(t), Vec::new(), targets)
    }

    pub fn op(&self) -> Op {
        self.op
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Controls first, then targets.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.controls.iter().chain(self.targets.iter()).copied()
    }

    pub fn arity(&self) -> usize {
        self.controls.len() + self.targets.len()
    }

    pub fn adjoint(&self) -> Gate {
        Gate::new(self.op.adjoint(), self.controls.clone(), self.targets.clone())
    }

    /// The same gate conditioned on additional controls, placed before the
    /// existing ones.
    pub fn controlled_by(&self, extra: &[usize]) -> Gate {
        let mut controls = extra.to_vec();
        controls.extend_from_slice(&self.controls);
        Gate::new(self.op, controls, self.targets.clone())
    }

    /// Relabels every qubit `q` as `map[q]`.
    pub fn remap(&self, map: &[usize]) -> Gate {
        Gate::new(
            self.op,
            self.controls.iter().map(|&q| map[q]).collect(),
            self.targets.iter().map(|&q| map[q]).collect(),
        )
    }

    /// Structural checks plus range checks against `width`.
    pub fn validate(&self, width: usize) -> Result<(), CircuitError> {
        for q in self.qubits() {
            if q >= width {
                return Err(CircuitError::QubitOutOfRange { qubit: q, width });
            }
        }
        let mut seen: Vec<usize> = self.qubits().collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(CircuitError::DuplicateQubit(w[0]));
        }
        let got = self.targets.len();
        match self.op {
            op if op.is_single_qubit() => {
                if got != 1 {
                    return Err(CircuitError::TargetArity {
                        op: op.mnemonic(),
                        expected: "exactly 1",
                        got,
                    });
                }
            }
            Op::Incr | Op::IncrDg => {
                if got == 0 {
                    return Err(CircuitError::TargetArity {
                        op: self.op.mnemonic(),
                        expected: "at least 1",
                        got,
                    });
                }
            }
            Op::Threshold(t) => {
                if got < 2 {
                    return Err(CircuitError::TargetArity {
                        op: "thr",
                        expected: "a flag plus at least 1 counter",
                        got,
                    });
                }
                let len = got - 1;
                if len < 64 && t >= (1u64 << len) {
                    return Err(CircuitError::ThresholdOutOfRange { t, len });
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// True for the gate set the lowering pass targets: `H`, `T` and `CNOT`.
    pub fn is_base(&self) -> bool {
        matches!((self.op, self.controls.len()), (Op::H, 0) | (Op::T, 0) | (Op::X, 1))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.op.mnemonic())?;
        if let Op::Threshold(t) = self.op {
            write!(f, "[{t}]")?;
        }
        if !self.controls.is_empty() {
            write!(f, " ctrl{:?}", self.controls)?;
        }
        write!(f, " {:?}", self.targets)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
    output_qubit: usize,
}

impl Circuit {
    pub fn new(width: usize, output_qubit: usize) -> Result<Circuit, CircuitError> {
        if width == 0 {
            return Err(CircuitError::ZeroWidth);
        }
        if output_qubit >= width {
            return Err(CircuitError::QubitOutOfRange {
                qubit: output_qubit,
                width,
            });
        }
        Ok(Circuit {
            width,
            gates: Vec::new(),
            output_qubit,
        })
    }

    /// Builds a circuit from a gate list, validating every gate.
    pub fn from_gates(
        width: usize,
        output_qubit: usize,
        gates: impl IntoIterator<Item = Gate>,
    ) -> Result<Circuit, CircuitError> {
        let mut c = Circuit::new(width, output_qubit)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output_qubit(&self) -> usize {
        self.output_qubit
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Returns a new circuit with `gate` appended; `self` is left untouched.
    pub fn appended(&self, gate: Gate) -> Result<Circuit, CircuitError> {
        let mut c = self.clone();
        c.push(gate)?;
        Ok(c)
    }

    pub fn with_output(mut self, output_qubit: usize) -> Result<Circuit, CircuitError> {
        if output_qubit >= self.width {
            return Err(CircuitError::QubitOutOfRange {
                qubit: output_qubit,
                width: self.width,
            });
        }
        self.output_qubit = output_qubit;
        Ok(self)
    }

    /// Same gates over a wider register; new qubits are idle.
    pub fn widened(&self, width: usize) -> Result<Circuit, CircuitError> {
        if width < self.width {
            return Err(CircuitError::QubitOutOfRange {
                qubit: self.width - 1,
                width,
            });
        }
        Ok(Circuit {
            width,
            gates: self.gates.clone(),
            output_qubit: self.output_qubit,
        })
    }

    /// Appends every gate of `other`, relabelling its qubit `i` as `map[i]`.
    pub fn extend_mapped(&mut self, other: &Circuit, map: &[usize]) -> Result<(), CircuitError> {
        if map.len() != other.width {
            return Err(CircuitError::MapLength {
                expected: other.width,
                got: map.len(),
            });
        }
        self.gates.reserve(other.gates.len());
        for g in &other.gates {
            self.push(g.remap(map))?;
        }
        Ok(())
    }

    /// Gates in reverse order, each replaced by its adjoint.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            width: self.width,
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
            output_qubit: self.output_qubit,
        }
    }

    pub fn is_base_only(&self) -> bool {
        self.gates.iter().all(Gate::is_base)
    }

    /// For each qubit, the index of the last gate that touches it.
    pub fn last_uses(&self) -> Vec<Option<usize>> {
        let mut last = vec![None; self.width];
        for (i, g) in self.gates.iter().enumerate() {
            for q in g.qubits() {
                last[q] = Some(i);
            }
        }
        last
    }
}

/// The number `k` of initially clean qubits: qubits `0..k` start in `|0>`,
/// the rest start totally mixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanSpec {
    k: usize,
}

impl CleanSpec {
    pub fn new(k: usize, width: usize) -> Result<CleanSpec, CircuitError> {
        if k == 0 || k > width {
            return Err(CircuitError::InvalidClean { k, width });
        }
        Ok(CleanSpec { k })
    }

    pub fn k(self) -> usize {
        self.k
    }

    pub fn check(self, width: usize) -> Result<(), CircuitError> {
        CleanSpec::new(self.k, width).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Register {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }

    pub fn qubit(&self, i: usize) -> usize {
        assert!(i < self.len, "register {} has {} qubits", self.name, self.len);
        self.start + i
    }
}

/// Named contiguous qubit ranges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    entries: Vec<Register>,
}

impl RegisterLayout {
    pub fn new() -> RegisterLayout {
        RegisterLayout::default()
    }

    /// Allocates `len` qubits directly after the last register and returns
    /// the range. Zero-length registers are not recorded.
    pub fn alloc(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let start = self.total();
        if len > 0 {
            self.entries.push(Register {
                name: name.into(),
                start,
                len,
            });
        }
        start..start + len
    }

    /// Records an explicit range; overlap is detected by [`Self::validate`].
    pub fn insert(&mut self, name: impl Into<String>, start: usize, len: usize) {
        self.entries.push(Register {
            name: name.into(),
            start,
            len,
        });
    }

    pub fn entries(&self) -> &[Register] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Register> {
        self.entries.iter().find(|r| r.name == name)
    }

    /// One past the highest qubit covered.
    pub fn total(&self) -> usize {
        self.entries.iter().map(|r| r.start + r.len).max().unwrap_or(0)
    }

    /// Checks that the registers are disjoint and cover `[0, width)`.
    pub fn validate(&self, width: usize) -> Result<(), CircuitError> {
        let bad = |reason: String| CircuitError::BadLayout { width, reason };
        let mut sorted: Vec<&Register> = self.entries.iter().collect();
        sorted.sort_by_key(|r| r.start);
        let mut next = 0;
        for r in sorted {
            if r.len == 0 {
                return Err(bad(format!("register {} is empty", r.name)));
            }
            if r.start < next {
                return Err(bad(format!("register {} overlaps its predecessor", r.name)));
            }
            if r.start > next {
                return Err(bad(format!("qubits {next}..{} are unassigned", r.start)));
            }
            next = r.start + r.len;
        }
        if next != width {
            return Err(bad(format!("layout covers {next} qubits")));
        }
        Ok(())
    }
}

/// Seeded random circuits for tests and verification suites.
pub mod random {
    use rand::Rng;

    use super::{Circuit, Gate};

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum GateSet {
        /// `H`, `T`, `CNOT` only.
        Base,
        /// Single-qubit Clifford+T gates plus `CX` and `CZ`.
        CliffordT,
        /// [`GateSet::CliffordT`] plus multi-controlled `X` and `H`.
        WithMacros,
    }

    /// `n_gates` gates drawn uniformly from `set` over `width` qubits, output 0.
    pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, width: usize, n_gates: usize, set: GateSet) -> Circuit {
        let mut c = Circuit::new(width, 0).expect("width >= 1");
        for _ in 0..n_gates {
            c.push(random_gate(rng, width, set)).expect("generated gate is valid");
        }
        c
    }

    pub fn random_gate<R: Rng + ?Sized>(rng: &mut R, width: usize, set: GateSet) -> Gate {
        let kinds: u32 = match set {
            GateSet::Base => 3,
            GateSet::CliffordT => 9,
            GateSet::WithMacros => 11,
        };
        loop {
            let kind = rng.random_range(0..kinds);
            let q = rng.random_range(0..width);
            let multi = matches!(kind, 2 | 8 | 9 | 10);
            if multi && width < 2 {
                continue;
            }
            let other = |rng: &mut R| loop {
                let p = rng.random_range(0..width);
                if p != q {
                    break p;
                }
            };
            let g = match (set, kind) {
                (_, 0) => Gate::h(q),
                (_, 1) => Gate::t(q),
                (_, 2) => Gate::cx(other(rng), q),
                (_, 3) => Gate::tdg(q),
                (_, 4) => Gate::s(q),
                (_, 5) => Gate::sdg(q),
                (_, 6) => Gate::x(q),
                (_, 7) => Gate::z(q),
                (_, 8) => Gate::cz(other(rng), q),
                (_, 9) | (_, 10) => {
                    let n_ctrl = rng.random_range(1..width);
                    let mut pool: Vec<usize> = (0..width).filter(|&p| p != q).collect();
                    let mut controls = Vec::with_capacity(n_ctrl);
                    for _ in 0..n_ctrl {
                        let i = rng.random_range(0..pool.len());
                        controls.push(pool.swap_remove(i));
                    }
                    if kind == 9 {
                        Gate::mcx(&controls, q)
                    } else {
                        Gate::mch(&controls, q)
                    }
                }
                _ => unreachable!(),
            };
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_circuit_boundaries() {
        let c = Circuit::new(1, 0).unwrap();
        assert_eq!(c.width(), 1);
        assert!(c.is_empty());
        assert_eq!(Circuit::new(5, 0).unwrap().width(), 5);
        assert_eq!(
            Circuit::new(3, 3),
            Err(CircuitError::QubitOutOfRange { qubit: 3, width: 3 })
        );
        assert_eq!(Circuit::new(0, 0), Err(CircuitError::ZeroWidth));
    }

    #[test]
    fn append_checks_indices() {
        let c = Circuit::new(1, 0).unwrap();
        let c1 = c.appended(Gate::h(0)).unwrap();
        assert_eq!(c1.len(), 1);
        assert!(c.is_empty());

        let c2 = Circuit::new(2, 0).unwrap();
        assert_eq!(
            c2.appended(Gate::new(Op::X, vec![0], vec![0])),
            Err(CircuitError::DuplicateQubit(0))
        );
        let c4 = Circuit::new(4, 0).unwrap();
        assert_eq!(c4.appended(Gate::mcx(&[0, 1, 2], 3)).unwrap().len(), 1);
        assert!(matches!(
            c2.appended(Gate::cx(0, 2)),
            Err(CircuitError::QubitOutOfRange { qubit: 2, .. })
        ));
    }

    #[test]
    fn append_preserves_prefix() {
        let mut c = Circuit::new(3, 0).unwrap();
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cx(0, 1)).unwrap();
        let before = c.gates().to_vec();
        let c2 = c.appended(Gate::t(2)).unwrap();
        assert_eq!(&c2.gates()[..2], &before[..]);
    }

    #[test]
    fn gate_shape_invariants() {
        assert!(matches!(
            Gate::new(Op::H, vec![], vec![0, 1]).validate(2),
            Err(CircuitError::TargetArity { .. })
        ));
        assert!(matches!(
            Gate::new(Op::Incr, vec![], vec![]).validate(2),
            Err(CircuitError::TargetArity { .. })
        ));
        assert!(matches!(
            Gate::threshold(4, 0, &[1, 2]).validate(3),
            Err(CircuitError::ThresholdOutOfRange { t: 4, len: 2 })
        ));
        assert!(Gate::threshold(3, 0, &[1, 2]).validate(3).is_ok());
        assert!(Gate::threshold(0, 0, &[1]).validate(2).is_ok());
    }

    #[test]
    fn inverse_reverses_and_adjoints() {
        let c = Circuit::from_gates(1, 0, [Gate::h(0), Gate::t(0)]).unwrap();
        let inv = c.inverse();
        assert_eq!(inv.gates(), &[Gate::tdg(0), Gate::h(0)]);
        assert!(Circuit::new(2, 0).unwrap().inverse().is_empty());

        let c = Circuit::from_gates(3, 0, [Gate::incr(&[0, 1]), Gate::cincr(2, &[0, 1])]).unwrap();
        let inv = c.inverse();
        assert_eq!(inv.gates()[0].op(), Op::IncrDg);
        assert_eq!(inv.gates()[0].controls(), &[2]);
        assert_eq!(inv.gates()[1], Gate::incr_dg(&[0, 1]));
        assert_eq!(inv.inverse(), c);
    }

    #[test]
    fn clean_spec_range() {
        assert!(CleanSpec::new(1, 1).is_ok());
        assert!(CleanSpec::new(0, 3).is_err());
        assert!(CleanSpec::new(4, 3).is_err());
    }

    #[test]
    fn layout_partition() {
        let mut l = RegisterLayout::new();
        assert_eq!(l.alloc("O", 1), 0..1);
        assert_eq!(l.alloc("Q", 2), 1..3);
        assert_eq!(l.alloc("empty", 0), 3..3);
        assert!(l.validate(3).is_ok());
        assert!(l.validate(4).is_err());
        l.insert("dup", 2, 1);
        assert!(l.validate(3).is_err());

        let mut gap = RegisterLayout::new();
        gap.insert("a", 0, 1);
        gap.insert("b", 2, 1);
        assert!(gap.validate(3).is_err());
    }

    #[test]
    fn extend_mapped_relabels() {
        let inner = Circuit::from_gates(2, 0, [Gate::cx(0, 1)]).unwrap();
        let mut outer = Circuit::new(4, 0).unwrap();
        outer.extend_mapped(&inner, &[3, 1]).unwrap();
        assert_eq!(outer.gates(), &[Gate::cx(3, 1)]);
        assert!(outer.extend_mapped(&inner, &[0]).is_err());
    }

    #[test]
    fn last_uses_track_final_gate() {
        let c = Circuit::from_gates(3, 0, [Gate::h(0), Gate::cx(0, 1), Gate::t(0)]).unwrap();
        assert_eq!(c.last_uses(), vec![Some(2), Some(1), None]);
    }
}
