//! Gate-level decompositions of the macro gates.
//!
//! Each function returns a time-ordered gate list whose product equals the
//! macro exactly (global phase included). The lists may still contain macro
//! gates; [`super::lower`] expands them recursively.

use crate::circuit::{Circuit, Gate, Op};

use super::Strategy;

/// A doubly controlled NOT `(control, control, target)`.
pub type Toffoli = (usize, usize, usize);

/// Seven-T Toffoli network over `H`, `T`, `T†` and `CNOT`.
pub fn toffoli_network((a, b, c): Toffoli) -> Vec<Gate> {
    vec![
        Gate::h(c),
        Gate::cx(b, c),
        Gate::tdg(c),
        Gate::cx(a, c),
        Gate::t(c),
        Gate::cx(b, c),
        Gate::tdg(c),
        Gate::cx(a, c),
        Gate::t(b),
        Gate::t(c),
        Gate::h(c),
        Gate::cx(a, b),
        Gate::t(a),
        Gate::tdg(b),
        Gate::cx(a, b),
    ]
}

/// Borrowed ancillas an `n`-control NOT needs under `strategy`.
pub fn mcx_ancillas_needed(n: usize, strategy: Strategy) -> usize {
    match (n, strategy) {
        (0..=2, _) => 0,
        (_, Strategy::Linear) => n - 2,
        (_, Strategy::Split) => 1,
    }
}

/// `n`-control NOT as Toffolis using `n - 2` borrowed ancillas, whose states
/// are restored. Requires `controls.len() >= 2`.
pub fn mcx_linear(controls: &[usize], target: usize, ancillas: &[usize]) -> Vec<Toffoli> {
    let n = controls.len();
    assert!(n >= 2, "ladder needs at least two controls");
    if n == 2 {
        return vec![(controls[0], controls[1], target)];
    }
    assert!(ancillas.len() >= n - 2, "ladder needs {} ancillas", n - 2);
    // 1-based helpers matching the usual presentation: x_1..x_n, a_1..a_{n-2},
    // with a_{n-1} standing for the target.
    let x = |i: usize| controls[i - 1];
    let a = |i: usize| if i == n - 1 { target } else { ancillas[i - 1] };
    let step = |i: usize| (x(i), a(i - 2), a(i - 1));

    let mut out = Vec::with_capacity(4 * n - 8);
    for i in (3..=n).rev() {
        out.push(step(i));
    }
    out.push((x(1), x(2), a(1)));
    for i in 3..=n {
        out.push(step(i));
    }
    for i in (3..n).rev() {
        out.push(step(i));
    }
    out.push((x(1), x(2), a(1)));
    for i in 3..n {
        out.push(step(i));
    }
    out
}

/// `n`-control NOT with a single borrowed ancilla: the controls are split in
/// two halves, and each half's ladder borrows the other half's qubits.
pub fn mcx_split(controls: &[usize], target: usize, ancilla: usize) -> Vec<Toffoli> {
    let n = controls.len();
    if n <= 2 {
        return mcx_linear(controls, target, &[]);
    }
    let m1 = n.div_ceil(2);
    let (left, right) = controls.split_at(m1);
    let mut right_and_anc = right.to_vec();
    right_and_anc.push(ancilla);
    let mut right_and_target = right.to_vec();
    right_and_target.push(target);

    let g1 = mcx_linear(&right_and_anc, target, left);
    let g2 = mcx_linear(left, ancilla, &right_and_target);
    let mut out = Vec::with_capacity(2 * (g1.len() + g2.len()));
    out.extend_from_slice(&g1);
    out.extend_from_slice(&g2);
    out.extend_from_slice(&g1);
    out.extend_from_slice(&g2);
    out
}

/// Controlled-H: `S, H, T, MCX, T†, H, S†` on the target.
pub fn mch_sequence(controls: &[usize], target: usize) -> Vec<Gate> {
    vec![
        Gate::s(target),
        Gate::h(target),
        Gate::t(target),
        Gate::mcx(controls, target),
        Gate::tdg(target),
        Gate::h(target),
        Gate::sdg(target),
    ]
}

/// Increment (or decrement) of an MSB-first counter as a cascade of
/// multi-controlled NOTs, each also conditioned on `controls`.
pub fn incr_sequence(counter: &[usize], controls: &[usize], adjoint: bool) -> Vec<Gate> {
    let mut out: Vec<Gate> = (0..counter.len())
        .map(|i| {
            let mut ctrl = controls.to_vec();
            ctrl.extend_from_slice(&counter[i + 1..]);
            Gate::new(Op::X, ctrl, vec![counter[i]])
        })
        .collect();
    if adjoint {
        out.reverse();
    }
    out
}

/// Threshold test as increments: `2^l - t` increments of the counter with the
/// flag attached as a new most significant bit, then `t` increments of the
/// counter alone.
pub fn threshold_sequence(t: u64, flag: usize, counter: &[usize], controls: &[usize]) -> Vec<Gate> {
    let l = counter.len();
    assert!(l < 63, "counter too long");
    let modulus = 1u64 << l;
    assert!(t < modulus, "threshold out of range");
    let mut wide = vec![flag];
    wide.extend_from_slice(counter);
    let with_flag = Gate::new(Op::Incr, controls.to_vec(), wide);
    let plain = Gate::new(Op::Incr, controls.to_vec(), counter.to_vec());
    let mut out = Vec::with_capacity(modulus as usize);
    out.extend(std::iter::repeat_n(with_flag, (modulus - t) as usize));
    out.extend(std::iter::repeat_n(plain, t as usize));
    out
}

/// `Λ^n(H)` over `n + 1` qubits: controls `0..n`, target `n`. The result holds
/// two `H`, sixteen `T` and one multi-controlled `X`; pass it through
/// [`super::lower`] for a base-gate circuit.
pub fn build_mch(n_controls: usize) -> Circuit {
    let controls: Vec<usize> = (0..n_controls).collect();
    let target = n_controls;
    let mut c = Circuit::new(n_controls + 1, target).expect("width >= 1");
    for g in mch_sequence(&controls, target) {
        for h in expand_single(&g) {
            c.push(h).expect("valid gate");
        }
    }
    c
}

/// `INCR_{2^l}` (or its inverse) over `l` qubits, MSB first, as `X`, `CX` and
/// multi-controlled `X` gates.
pub fn build_incr(l: usize, adjoint: bool) -> Circuit {
    let counter: Vec<usize> = (0..l).collect();
    Circuit::from_gates(l, 0, incr_sequence(&counter, &[], adjoint)).expect("valid gates")
}

/// `THRESHOLD_t` over `l + 1` qubits: flag at 0, counter at `1..=l`, as a
/// sequence of increment gates.
pub fn build_threshold(t: u64, l: usize) -> Circuit {
    let counter: Vec<usize> = (1..=l).collect();
    Circuit::from_gates(l + 1, 0, threshold_sequence(t, 0, &counter, &[])).expect("valid gates")
}

/// Uncontrolled single-qubit gates as powers of `T` (and `H` for `X`).
pub(crate) fn expand_single(g: &Gate) -> Vec<Gate> {
    if !g.controls().is_empty() {
        return vec![g.clone()];
    }
    let q = g.targets()[0];
    let ts = |n: usize| vec![Gate::t(q); n];
    match g.op() {
        Op::Tdg => ts(7),
        Op::S => ts(2),
        Op::Sdg => ts(6),
        Op::Z => ts(4),
        Op::X => {
            let mut v = vec![Gate::h(q)];
            v.extend(ts(4));
            v.push(Gate::h(q));
            v
        }
        _ => vec![g.clone()],
    }
}
