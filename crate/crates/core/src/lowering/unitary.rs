//! Dense unitaries of small circuits, built column by column from textbook
//! gate matrices. Used to check decompositions up to global phase.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, Op};

/// Default cap on the width accepted by [`unitary_of`].
pub const DEFAULT_UNITARY_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitaryError {
    #[error("width {width} exceeds the dense-unitary cap of {cap} qubits")]
    TooWide { width: usize, cap: usize },
}

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> CMatrix {
        CMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> CMatrix {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> CMatrix {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        CMatrix {
            dim,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entrywise deviation `|a_ij - b_ij|`.
    pub fn max_deviation(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation after removing the best global phase,
    /// aligned on the largest-magnitude entry of `self`.
    pub fn deviation_up_to_phase(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let (idx, _) =
            self.data.iter().enumerate().fold(
                (0, -1.0),
                |best, (i, v)| if v.norm() > best.1 { (i, v.norm()) } else { best },
            );
        let a = self.data[idx];
        let b = other.data[idx];
        if b.norm() < 1e-12 {
            return f64::INFINITY;
        }
        let phase = (a / b) / (a / b).norm();
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - phase * y).norm())
            .fold(0.0, f64::max)
    }

    pub fn equal_up_to_phase(&self, other: &CMatrix, tol: f64) -> bool {
        self.deviation_up_to_phase(other) <= tol
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn phase(eighths: i32) -> C64 {
    C64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * eighths as f64)
}

/// Matrix of `op` on its targets alone, first target most significant.
pub fn op_matrix(op: Op, n_targets: usize) -> CMatrix {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let diag = |d: C64| CMatrix::from_rows(vec![vec![one, zero], vec![zero, d]]);
    match op {
        Op::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            CMatrix::from_rows(vec![vec![h, h], vec![h, -h]])
        }
        Op::X => CMatrix::from_rows(vec![vec![zero, one], vec![one, zero]]),
        Op::T => diag(phase(1)),
        Op::Tdg => diag(phase(-1)),
        Op::S => diag(phase(2)),
        Op::Sdg => diag(phase(-2)),
        Op::Z => diag(phase(4)),
        Op::Incr | Op::IncrDg | Op::Threshold(_) => {
            let dim = 1usize << n_targets;
            let mut m = CMatrix::zeros(dim);
            for j in 0..dim {
                let image = match op {
                    Op::Incr => (j + 1) % dim,
                    Op::IncrDg => (j + dim - 1) % dim,
                    Op::Threshold(t) => {
                        let counter_dim = dim / 2;
                        let flag = j / counter_dim;
                        let value = j % counter_dim;
                        let flip = (value as u64 >= t) as usize;
                        ((flag ^ flip) * counter_dim) + value
                    }
                    _ => unreachable!(),
                };
                m.set(image, j, one);
            }
            m
        }
    }
}

/// Matrix of the full gate on its operands, controls first.
pub fn gate_local_matrix(gate: &Gate) -> CMatrix {
    let inner = op_matrix(gate.op(), gate.targets().len());
    let n_ctrl = gate.controls().len();
    let dim = inner.dim() << n_ctrl;
    let mut m = CMatrix::identity(dim);
    let offset = dim - inner.dim();
    for i in 0..inner.dim() {
        for j in 0..inner.dim() {
            m.set(offset + i, offset + j, inner.get(i, j));
        }
    }
    m
}

/// Applies `local` on the listed qubits of a width-`width` state vector,
/// restricted to indices where every qubit in `controls` is 1.
/// Qubit 0 is the most significant bit of the index.
pub fn apply_local(state: &mut [C64], width: usize, controls: &[usize], qubits: &[usize], local: &CMatrix) {
    let bit = |q: usize| 1usize << (width - 1 - q);
    let ctrl: usize = controls.iter().map(|&q| bit(q)).sum();
    let m = qubits.len();
    if m == 1 {
        let t = bit(qubits[0]);
        let (a, b, cc, d) = (local.get(0, 0), local.get(0, 1), local.get(1, 0), local.get(1, 1));
        for base in 0..state.len() {
            if base & t != 0 || base & ctrl != ctrl {
                continue;
            }
            let (x, y) = (state[base], state[base | t]);
            state[base] = a * x + b * y;
            state[base | t] = cc * x + d * y;
        }
        return;
    }
    let masks: Vec<usize> = qubits.iter().map(|&q| bit(q)).collect();
    let all: usize = masks.iter().sum();
    let sub = 1usize << m;
    let offsets: Vec<usize> = (0..sub)
        .map(|i| (0..m).filter(|&b| i & (1 << (m - 1 - b)) != 0).map(|b| masks[b]).sum())
        .collect();
    let mut gathered = vec![c(0.0, 0.0); sub];
    for base in 0..state.len() {
        if base & all != 0 || base & ctrl != ctrl {
            continue;
        }
        for (i, off) in offsets.iter().enumerate() {
            gathered[i] = state[base | off];
        }
        for (i, off) in offsets.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for (j, g) in gathered.iter().enumerate() {
                acc += local.get(i, j) * g;
            }
            state[base | off] = acc;
        }
    }
}

pub fn unitary_of(circuit: &Circuit) -> Result<CMatrix, UnitaryError> {
    unitary_of_with_cap(circuit, DEFAULT_UNITARY_CAP)
}

pub fn unitary_of_with_cap(circuit: &Circuit, cap: usize) -> Result<CMatrix, UnitaryError> {
    let w = circuit.width();
    if w > cap {
        return Err(UnitaryError::TooWide { width: w, cap });
    }
    let dim = 1usize << w;
    let locals: Vec<(&Gate, CMatrix)> = circuit
        .gates()
        .iter()
        .map(|g| (g, op_matrix(g.op(), g.targets().len())))
        .collect();
    let mut u = CMatrix::zeros(dim);
    let mut col = vec![c(0.0, 0.0); dim];
    for j in 0..dim {
        col.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        col[j] = c(1.0, 0.0);
        for (g, m) in &locals {
            apply_local(&mut col, w, g.controls(), g.targets(), m);
        }
        for (i, v) in col.iter().enumerate() {
            u.set(i, j, *v);
        }
    }
    Ok(u)
}
