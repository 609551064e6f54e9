//! Acceptance probabilities of the repetition procedures computed from their
//! round structure instead of from the monolithic circuit.
//!
//! Fresh totally mixed registers enter every round, and a CNOT onto a fresh
//! mixed qubit dephases its control in the computational basis, so each
//! procedure reduces to a small classical Markov chain driven by quantities
//! of the single-round circuit.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::simulator::{self, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructuredError {
    #[error("output flip probabilities differ: {flip0} from |0>, {flip1} from |1>")]
    FlipAsymmetry { flip0: f64, flip1: f64 },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

fn check_probability(p: f64) -> Result<f64, StructuredError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(StructuredError::InvalidProbability(p))
    }
}

/// Probability that `n` independent bits, each 1 with probability `p`, have
/// even parity: `1/2 + (1 - 2p)^n / 2`.
pub fn binomial_even_probability(n: u64, p: f64) -> f64 {
    0.5 + 0.5 * (1.0 - 2.0 * p).powi(n as i32)
}

/// Hoeffding tail `exp(-2 delta^2 n)` for the mean of `n` bounded samples.
pub fn hoeffding_bound(n: u64, delta: f64) -> f64 {
    (-2.0 * delta * delta * n as f64).exp()
}

/// `P[Binomial(n, p) >= t]`, summed over the tail with a running term.
pub fn binomial_tail_at_least(n: u64, t: u64, p: f64) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if t > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    // log of C(n, t) p^t (1-p)^(n-t)
    let ln_choose = ln_gamma(n as f64 + 1.0) - ln_gamma(t as f64 + 1.0) - ln_gamma((n - t) as f64 + 1.0);
    let mut term = (ln_choose + t as f64 * p.ln() + (n - t) as f64 * (1.0 - p).ln()).exp();
    let ratio = p / (1.0 - p);
    let mut sum = 0.0;
    for i in t..=n {
        sum += term;
        term *= (n - i) as f64 / (i + 1) as f64 * ratio;
    }
    sum.min(1.0)
}

/// Lanczos approximation of `ln Gamma(x)` for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// One round of a one-clean-qubit circuit viewed as a classical channel on
/// its output bit: the bit is kept with probability `p` and flipped with
/// probability `1 - p`, whatever its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundModel {
    p: f64,
}

impl RoundModel {
    /// Tolerance on the difference between the two flip probabilities.
    pub const SYMMETRY_TOL: f64 = 1e-10;

    pub fn from_keep_probability(p: f64) -> Result<RoundModel, StructuredError> {
        Ok(RoundModel {
            p: check_probability(p)?,
        })
    }

    /// Builds the model from the circuit after checking that the output
    /// flips with the same probability from `|0>` and from `|1>`.
    pub fn from_circuit(q: &Circuit) -> Result<RoundModel, StructuredError> {
        let flip0 = simulator::flip_probability(q, false)?;
        let flip1 = simulator::flip_probability(q, true)?;
        if (flip0 - flip1).abs() > Self::SYMMETRY_TOL {
            return Err(StructuredError::FlipAsymmetry { flip0, flip1 });
        }
        RoundModel::from_keep_probability(1.0 - flip0)
    }

    pub fn keep_probability(&self) -> f64 {
        self.p
    }
}

/// Closed form for randomness amplification over `n` rounds:
/// `1/2 + (2p - 1)^n / 2`.
pub fn ramp_closed_form(p: f64, n: u64) -> f64 {
    0.5 + 0.5 * (2.0 * p - 1.0).powi(n as i32)
}

/// Randomness amplification as a two-state chain on the output bit, which
/// starts at 0 and is accepted at 0.
pub fn ramp_chain(model: RoundModel, n: u64) -> f64 {
    let p = model.p;
    let (mut zero, mut one) = (1.0, 0.0);
    for _ in 0..n {
        (zero, one) = (p * zero + (1.0 - p) * one, (1.0 - p) * zero + p * one);
    }
    zero
}

/// Parameters of a stability chain: counter modulus, initial counter
/// distribution, number of rounds, and acceptance threshold.
struct StabilityChain {
    modulus: usize,
    initial: Vec<f64>,
    rounds: usize,
    accept_below: usize,
}

impl StabilityChain {
    /// State `(bit, counter)`: the bit starts uniform; each round keeps it
    /// with probability `p` and the counter increments when the bit after
    /// the round is 1. Accepts when the final counter is below the threshold.
    fn run(&self, p: f64) -> f64 {
        let m = self.modulus;
        let mut dist = vec![[0.0f64; 2]; m];
        for (c, &w) in self.initial.iter().enumerate() {
            dist[c] = [0.5 * w, 0.5 * w];
        }
        let mut next = vec![[0.0f64; 2]; m];
        for _ in 0..self.rounds {
            next.iter_mut().for_each(|e| *e = [0.0, 0.0]);
            for c in 0..m {
                let [z, o] = dist[c];
                let to_zero = p * z + (1.0 - p) * o;
                let to_one = (1.0 - p) * z + p * o;
                next[c][0] += to_zero;
                next[(c + 1) % m][1] += to_one;
            }
            std::mem::swap(&mut dist, &mut next);
        }
        dist[..self.accept_below].iter().map(|[z, o]| z + o).sum()
    }
}

fn check_power_of_two(n: u64, what: &str) -> Result<(), StructuredError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(StructuredError::InvalidParameter(format!(
            "{what} must be a power of two, got {n}"
        )));
    }
    Ok(())
}

/// One-clean stability check: counter modulo `2n` starting uniform on
/// `0..n`, `2n` rounds, accepted when the counter ends below `n`.
pub fn stab1_chain(model: RoundModel, n: u64) -> Result<f64, StructuredError> {
    check_power_of_two(n, "round parameter")?;
    let n = n as usize;
    let mut initial = vec![0.0; 2 * n];
    initial[..n].iter_mut().for_each(|w| *w = 1.0 / n as f64);
    Ok(StabilityChain {
        modulus: 2 * n,
        initial,
        rounds: 2 * n,
        accept_below: n,
    }
    .run(model.p))
}

/// Two-clean stability check: counter modulo `8n` starting uniform on
/// `n..3n`, `8n` rounds, accepted when the counter ends below `4n`.
pub fn stab2_chain(model: RoundModel, n: u64) -> Result<f64, StructuredError> {
    check_power_of_two(n, "round parameter")?;
    let n = n as usize;
    let mut initial = vec![0.0; 8 * n];
    initial[n..3 * n].iter_mut().for_each(|w| *w = 1.0 / (2 * n) as f64);
    Ok(StabilityChain {
        modulus: 8 * n,
        initial,
        rounds: 8 * n,
        accept_below: 4 * n,
    }
    .run(model.p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabBounds {
    /// `p^(rounds - 1)`, valid for every `p`.
    pub lower: f64,
    /// Upper bound for `p` near 1/2 from the bias parameter `|p - 1/2|`.
    pub upper: f64,
    /// Whether the preconditions of the upper bound hold; when they do not,
    /// `upper` is reported as 1.
    pub upper_applicable: bool,
}

/// Bounds for the one-clean check: lower `p^(2n-1)`; upper
/// `3 n^(-1/3) + 4 eps` when `n >= 64`, `eps <= 1/8` and the bound is at
/// most 1.
pub fn stab1_bounds(p: f64, n: u64) -> StabBounds {
    let eps = (p - 0.5).abs();
    let upper = 3.0 * (n as f64).powf(-1.0 / 3.0) + 4.0 * eps;
    let applicable = n >= 64 && eps <= 0.125 + 1e-15 && upper <= 1.0;
    StabBounds {
        lower: p.powi((2 * n - 1) as i32),
        upper: if applicable { upper } else { 1.0 },
        upper_applicable: applicable,
    }
}

/// Bounds for the two-clean check: lower `p^(8n-1)`; upper `2^(-n/16 + 1)`
/// when `n >= 16` and `eps <= 1/16`.
pub fn stab2_bounds(p: f64, n: u64) -> StabBounds {
    let eps = (p - 0.5).abs();
    let upper = 2f64.powf(-(n as f64) / 16.0 + 1.0);
    let applicable = n >= 16 && eps <= 0.0625 + 1e-15 && upper <= 1.0;
    StabBounds {
        lower: p.powi((8 * n - 1) as i32),
        upper: if applicable { upper } else { 1.0 },
        upper_applicable: applicable,
    }
}

/// Basis state `|s>|r>` of `q`'s width, `s` on the first `k` qubits.
fn basis_vector(width: usize, k: usize, s: usize, r: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); 1 << width];
    v[(s << (width - k)) | r] = C64::new(1.0, 0.0);
    v
}

fn check_small(q: &Circuit, k: usize) -> Result<(), StructuredError> {
    if k == 0 || k > q.width() {
        return Err(CircuitError::InvalidClean { k, width: q.width() }.into());
    }
    let cap = 20;
    if q.width() > cap {
        return Err(SimError::TooManyQubits {
            needed: q.width(),
            max: cap,
        }
        .into());
    }
    Ok(())
}

/// For each mixed string `r`: `Q^dagger Pi_a Q |s>|r>`, where `Pi_a`
/// projects the output on `|a>`. Calls `visit(r, a, vector)`.
fn for_each_return(
    q: &Circuit,
    q_inv: &Circuit,
    k: usize,
    s: usize,
    mut visit: impl FnMut(bool, &[C64]),
) -> Result<(), StructuredError> {
    let w = q.width();
    for r in 0..(1usize << (w - k)) {
        let after = simulator::apply_statevector(q, &basis_vector(w, k, s, r))?;
        for a in [false, true] {
            let mut proj = after.clone();
            simulator::project_qubit(&mut proj, w, q.output_qubit(), a);
            simulator::apply_in_place(q_inv, &mut proj)?;
            visit(a, &proj);
        }
    }
    Ok(())
}

/// Squared norm of the part of `v` whose first `k` qubits read `s`.
fn prefix_weight(v: &[C64], width: usize, k: usize, s: usize) -> f64 {
    let shift = width - k;
    v.iter()
        .enumerate()
        .filter(|(i, _)| i >> shift == s)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Acceptance of the one-clean simulation of `(q, k)`:
/// `(1 - 2^-k) + 2^-k * avg_r || Delta_0 Q^dagger Pi_0 Q |0^k>|r> ||^2`,
/// with `Delta_0` projecting the first `k` qubits on `|0^k>`.
pub fn one_clean_simulation_value(q: &Circuit, k: usize) -> Result<f64, StructuredError> {
    check_small(q, k)?;
    let w = q.width();
    let q_inv = q.inverse();
    let mut total = 0.0;
    for_each_return(q, &q_inv, k, 0, |a, v| {
        if !a {
            total += prefix_weight(v, w, k, 0);
        }
    })?;
    let avg = total / (1usize << (w - k)) as f64;
    let scale = 0.5f64.powi(k as i32);
    Ok((1.0 - scale) + scale * avg)
}

/// Bounds `1 - 2^-k (1 - p^2) <= p_acc <= 1 - 2^-k (1 - p)` for the
/// one-clean simulation of a `k`-clean circuit accepted with probability
/// `p`.
pub fn one_clean_simulation_bounds(p: f64, k: usize) -> (f64, f64) {
    let scale = 0.5f64.powi(k as i32);
    (1.0 - scale * (1.0 - p * p), 1.0 - scale * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrEvaluation {
    /// `1 - (1 - p)^n`.
    pub lower: f64,
    /// `1 - (1 - p)^(2n)`.
    pub upper: f64,
    /// Probability of staying in the initialised state without counting in
    /// one round.
    pub zero_stay: f64,
    /// `1 - zero_stay^n`: acceptance if the counter could not wrap.
    pub unbounded_counter: f64,
    /// Acceptance with the counter modulo `2^l`, `l = ceil(log2 n) + 1`.
    pub exact: f64,
}

/// Per-round transition of the OR-type repetition: from basis state `s` of
/// the `k` clean qubits to `(s', increment)` with its probability.
fn or_transitions(q: &Circuit, k: usize) -> Result<Vec<Vec<[f64; 3]>>, StructuredError> {
    let w = q.width();
    let q_inv = q.inverse();
    let dim = 1usize << k;
    let norm = 1.0 / (1usize << (w - k)) as f64;
    let mut table = vec![vec![[0.0; 3]; dim]; dim];
    for (s, row) in table.iter_mut().enumerate() {
        for_each_return(q, &q_inv, k, s, |a, v| {
            for (s2, cell) in row.iter_mut().enumerate() {
                let weight = prefix_weight(v, w, k, s2);
                let inc = (!a) as usize + (s2 != 0) as usize;
                cell[inc] += weight * norm;
            }
        })?;
    }
    Ok(table)
}

/// OR-type repetition of `(q, k)` over `n` rounds, as a chain on the clean
/// register's basis state and the counter.
pub fn or_repetition(q: &Circuit, k: usize, n: u64) -> Result<OrEvaluation, StructuredError> {
    check_small(q, k)?;
    if n == 0 {
        return Err(StructuredError::InvalidParameter("round count must be positive".into()));
    }
    let p = simulator::pacc_exact(q, crate::circuit::CleanSpec::new(k, q.width())?)?.value;
    let table = or_transitions(q, k)?;
    let dim = 1usize << k;
    let modulus = 1usize << crate::procedures::or_counter_len(n as usize);
    let mut dist = vec![vec![0.0f64; modulus]; dim];
    dist[0][0] = 1.0;
    let mut next = vec![vec![0.0f64; modulus]; dim];
    for _ in 0..n {
        next.iter_mut().for_each(|row| row.iter_mut().for_each(|x| *x = 0.0));
        for s in 0..dim {
            for c in 0..modulus {
                let mass = dist[s][c];
                if mass == 0.0 {
                    continue;
                }
                for s2 in 0..dim {
                    for (inc, &pr) in table[s][s2].iter().enumerate() {
                        if pr != 0.0 {
                            next[s2][(c + inc) % modulus] += mass * pr;
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    let reject: f64 = dist.iter().map(|row| row[0]).sum();
    let zero_stay = table[0][0][0];
    let n_i = n as i32;
    Ok(OrEvaluation {
        lower: 1.0 - (1.0 - p).powi(n_i),
        upper: 1.0 - (1.0 - p).powi(2 * n_i),
        zero_stay,
        unbounded_counter: 1.0 - zero_stay.powi(n_i),
        exact: 1.0 - reject,
    })
}

/// Acceptance of the parallel threshold repetition: at least `t` of `n`
/// independent copies accept.
pub fn parallel_threshold_value(p: f64, n: u64, t: u64) -> f64 {
    binomial_tail_at_least(n, t, p)
}
