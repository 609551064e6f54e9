//! Exact acceptance probability from a density matrix over the live qubits.
//!
//! A qubit enters the matrix on first use (clean ones as `|0><0|`, or their
//! current classical value; mixed ones as `I/2`) and is traced out after its
//! last gate. The cost depends on how many qubits are live at once rather
//! than on the width, which suits circuits that keep drawing fresh mixed
//! registers.

use num_complex::Complex64 as C64;

use crate::circuit::{Circuit, Gate, Op};

use super::kernel;
use super::SimError;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Classical(bool),
    Mixed,
    Live(u32),
    Gone,
}

struct Density {
    /// `rho[(row << n) | col]` over `n` live qubits.
    rho: Vec<C64>,
    scratch: Vec<C64>,
    n: u32,
    slots: Vec<Slot>,
    at: Vec<usize>,
}

fn conj_op(op: Op) -> Op {
    match op {
        Op::T => Op::Tdg,
        Op::Tdg => Op::T,
        Op::S => Op::Sdg,
        Op::Sdg => Op::S,
        other => other,
    }
}

impl Density {
    fn mask(&self, q: usize) -> usize {
        match self.slots[q] {
            Slot::Live(p) => 1usize << p,
            _ => unreachable!("qubit is not live"),
        }
    }

    fn activate(&mut self, q: usize, max_live: usize) -> Result<(), SimError> {
        let (diag_zero, diag_one) = match self.slots[q] {
            Slot::Live(_) => return Ok(()),
            Slot::Classical(false) => (1.0, 0.0),
            Slot::Classical(true) => (0.0, 1.0),
            Slot::Mixed => (0.5, 0.5),
            Slot::Gone => unreachable!("retired qubit reused"),
        };
        let n = self.n as usize;
        if n + 1 > max_live {
            return Err(SimError::TooManyQubits {
                needed: n + 1,
                max: max_live,
            });
        }
        let old_dim = 1usize << n;
        let new_dim = old_dim << 1;
        let mut next = vec![C64::new(0.0, 0.0); new_dim * new_dim];
        for r in 0..old_dim {
            for c in 0..old_dim {
                let v = self.rho[(r << n) | c];
                if diag_zero != 0.0 {
                    next[(r << (n + 1)) | c] = v * diag_zero;
                }
                if diag_one != 0.0 {
                    next[((r | old_dim) << (n + 1)) | c | old_dim] = v * diag_one;
                }
            }
        }
        self.rho = next;
        self.slots[q] = Slot::Live(self.n);
        self.at.push(q);
        self.n += 1;
        Ok(())
    }

    fn retire(&mut self, q: usize) {
        let p = match self.slots[q] {
            Slot::Live(p) => p as usize,
            _ => return,
        };
        let n = self.n as usize;
        let m = 1usize << p;
        let low = m - 1;
        let new_dim = 1usize << (n - 1);
        let expand = |x: usize, b: usize| ((x & !low) << 1) | (b << p) | (x & low);
        let mut next = vec![C64::new(0.0, 0.0); new_dim * new_dim];
        for r in 0..new_dim {
            for c in 0..new_dim {
                let a = self.rho[(expand(r, 0) << n) | expand(c, 0)];
                let b = self.rho[(expand(r, 1) << n) | expand(c, 1)];
                next[(r << (n - 1)) | c] = a + b;
            }
        }
        self.rho = next;
        self.at.remove(p);
        for &other in &self.at[p..] {
            if let Slot::Live(pp) = &mut self.slots[other] {
                *pp -= 1;
            }
        }
        self.slots[q] = Slot::Gone;
        self.n -= 1;
    }

    fn prob_zero(&self, q: usize) -> f64 {
        match self.slots[q] {
            Slot::Classical(b) => {
                if b {
                    0.0
                } else {
                    1.0
                }
            }
            Slot::Mixed => 0.5,
            Slot::Live(p) => {
                let n = self.n as usize;
                let m = 1usize << p;
                (0..1usize << n)
                    .filter(|i| i & m == 0)
                    .map(|i| self.rho[(i << n) | i].re)
                    .sum()
            }
            Slot::Gone => unreachable!("output qubit retired"),
        }
    }

    /// Applies `op` as `rho -> U rho U^dagger`.
    fn apply(&mut self, op: Op, ctrl: usize, targets: &[usize]) {
        let n = self.n;
        let row_targets: Vec<usize> = targets.iter().map(|t| t << n).collect();
        kernel::apply(&mut self.rho, &mut self.scratch, op, ctrl << n, &row_targets);
        kernel::apply(&mut self.rho, &mut self.scratch, conj_op(op), ctrl, targets);
    }

    fn apply_phase(&mut self, mask: usize, op: Op) {
        let n = self.n;
        kernel::apply_phase(&mut self.rho, mask << n, kernel::phase_of(op));
        kernel::apply_phase(&mut self.rho, mask, kernel::phase_of(conj_op(op)));
    }
}

fn step(d: &mut Density, gate: &Gate, max_live: usize) -> Result<(), SimError> {
    let mut ctrl = 0usize;
    for &c in gate.controls() {
        match d.slots[c] {
            Slot::Classical(false) => return Ok(()),
            Slot::Classical(true) => {}
            Slot::Mixed => {
                d.activate(c, max_live)?;
                ctrl |= d.mask(c);
            }
            Slot::Live(p) => ctrl |= 1usize << p,
            Slot::Gone => unreachable!(),
        }
    }
    let op = gate.op();
    let targets = gate.targets();
    if op.is_diagonal() {
        let t = targets[0];
        let mask = match d.slots[t] {
            Slot::Classical(false) => return Ok(()),
            Slot::Classical(true) => ctrl,
            _ => {
                d.activate(t, max_live)?;
                ctrl | d.mask(t)
            }
        };
        if mask != 0 {
            d.apply_phase(mask, op);
        }
        return Ok(());
    }
    let all_classical = targets.iter().all(|&t| matches!(d.slots[t], Slot::Classical(_)));
    if ctrl == 0 && all_classical && op.is_permutation() {
        let masks: Vec<usize> = (0..targets.len()).map(|k| 1usize << k).collect();
        let i = targets.iter().enumerate().fold(0usize, |acc, (k, &t)| {
            acc | ((matches!(d.slots[t], Slot::Classical(true)) as usize) << k)
        });
        let j = kernel::permute_index(op, i, &masks);
        for (k, &t) in targets.iter().enumerate() {
            d.slots[t] = Slot::Classical((j >> k) & 1 == 1);
        }
        return Ok(());
    }
    for &t in targets {
        d.activate(t, max_live)?;
    }
    let masks: Vec<usize> = targets.iter().map(|&t| d.mask(t)).collect();
    d.apply(op, ctrl, &masks);
    Ok(())
}

/// Exact `p_acc` with the first `k` qubits clean and at most `max_live`
/// qubits held in the density matrix at once.
pub(crate) fn pacc(circuit: &Circuit, k: usize, max_live: usize) -> Result<f64, SimError> {
    let w = circuit.width();
    let out = circuit.output_qubit();
    let last = circuit.last_uses();
    let mut d = Density {
        rho: vec![C64::new(1.0, 0.0)],
        scratch: Vec::new(),
        n: 0,
        slots: (0..w)
            .map(|q| if q < k { Slot::Classical(false) } else { Slot::Mixed })
            .collect(),
        at: Vec::new(),
    };
    for (gi, g) in circuit.gates().iter().enumerate() {
        step(&mut d, g, max_live)?;
        for q in g.qubits() {
            if q != out && last[q] == Some(gi) {
                d.retire(q);
            }
        }
    }
    Ok(d.prob_zero(out))
}
