//! In-place gate kernels on state vectors addressed by bit masks.
//!
//! Callers translate qubits to masks; the kernels neither know nor care
//! whether bit positions follow the circuit order.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64 as C64;

use crate::circuit::Op;

pub(crate) fn phase_of(op: Op) -> C64 {
    let eighths = match op {
        Op::T => 1,
        Op::Tdg => -1,
        Op::S => 2,
        Op::Sdg => -2,
        Op::Z => 4,
        _ => unreachable!("not a diagonal gate"),
    };
    C64::from_polar(1.0, FRAC_PI_4 * eighths as f64)
}

fn read_counter(i: usize, masks: &[usize]) -> u64 {
    masks.iter().fold(0u64, |v, &m| (v << 1) | ((i & m != 0) as u64))
}

fn write_counter(i: usize, masks: &[usize], v: u64) -> usize {
    let l = masks.len();
    let mut j = i;
    for (k, &m) in masks.iter().enumerate() {
        if (v >> (l - 1 - k)) & 1 == 1 {
            j |= m;
        } else {
            j &= !m;
        }
    }
    j
}

/// Image of basis index `i` under a permutation op acting on `targets`.
pub(crate) fn permute_index(op: Op, i: usize, targets: &[usize]) -> usize {
    match op {
        Op::X => i ^ targets[0],
        Op::Incr | Op::IncrDg => {
            let l = targets.len() as u32;
            let modulus = 1u64.checked_shl(l).unwrap_or(0);
            let v = read_counter(i, targets);
            let next = if op == Op::Incr {
                v.wrapping_add(1)
            } else {
                v.wrapping_sub(1)
            };
            let next = if modulus == 0 { next } else { next & (modulus - 1) };
            write_counter(i, targets, next)
        }
        Op::Threshold(t) => {
            let v = read_counter(i, &targets[1..]);
            if v >= t {
                i ^ targets[0]
            } else {
                i
            }
        }
        _ => unreachable!("not a permutation"),
    }
}

/// Applies `op` to the amplitudes whose `ctrl` bits are all set.
/// `targets` are single-bit masks, first target most significant.
pub(crate) fn apply(state: &mut [C64], scratch: &mut Vec<C64>, op: Op, ctrl: usize, targets: &[usize]) {
    match op {
        Op::H => {
            let t = targets[0];
            let h = FRAC_1_SQRT_2;
            for i in 0..state.len() {
                if i & t == 0 && i & ctrl == ctrl {
                    let (a, b) = (state[i], state[i | t]);
                    state[i] = (a + b) * h;
                    state[i | t] = (a - b) * h;
                }
            }
        }
        Op::X => {
            let t = targets[0];
            for i in 0..state.len() {
                if i & t == 0 && i & ctrl == ctrl {
                    state.swap(i, i | t);
                }
            }
        }
        Op::T | Op::Tdg | Op::S | Op::Sdg | Op::Z => {
            let d = phase_of(op);
            let m = ctrl | targets[0];
            for (i, a) in state.iter_mut().enumerate() {
                if i & m == m {
                    *a *= d;
                }
            }
        }
        Op::Incr | Op::IncrDg | Op::Threshold(_) => {
            scratch.clear();
            scratch.extend_from_slice(state);
            for (i, &a) in scratch.iter().enumerate() {
                let j = if i & ctrl == ctrl {
                    permute_index(op, i, targets)
                } else {
                    i
                };
                state[j] = a;
            }
        }
    }
}

/// Multiplies by `phase` every amplitude whose `mask` bits are all set.
pub(crate) fn apply_phase(state: &mut [C64], mask: usize, phase: C64) {
    for (i, a) in state.iter_mut().enumerate() {
        if i & mask == mask {
            *a *= phase;
        }
    }
}
