//! Acceptance probabilities of circuits whose first `k` qubits start clean
//! and whose remaining qubits start totally mixed.
//!
//! The mixed input is a uniform mixture of computational-basis states, so
//! `p_acc` is the average over basis strings `r` of the probability of reading
//! `|0>` on the output qubit. [`pacc_exact`] enumerates every `r`;
//! [`pacc_sampled`] draws `r` at random and also samples measurements of
//! qubits that are finished, which keeps the live state small.

mod density;
mod engine;
pub(crate) mod kernel;
pub mod reference;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, CleanSpec};

use engine::Engine;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("a state of {needed} qubits exceeds the simulation budget of {max}")]
    TooManyQubits { needed: usize, max: usize },
    #[error("2^{mixed} mixed-qubit assignments exceed the enumeration budget of 2^{max}")]
    TooManyMixed { mixed: usize, max: usize },
    #[error("state vector has length {got}, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Largest number of qubits held in superposition at once.
    pub max_active_qubits: usize,
    /// Largest `log2` of the number of basis strings enumerated.
    pub max_enumeration_log2: usize,
    /// Largest number of qubits held in the live density matrix.
    pub max_density_qubits: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_active_qubits: 24,
            max_enumeration_log2: 20,
            max_density_qubits: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub value: f64,
    pub method: Method,
    pub samples: Option<u64>,
    /// Half-width of the normal-approximation 95% interval; 0 when exact.
    pub half_width_95: f64,
    pub seed: Option<u64>,
}

fn bits_of(width: usize, fixed: &[(usize, bool)], free: &[usize], r: u64) -> Vec<bool> {
    let mut bits = vec![false; width];
    for &(q, b) in fixed {
        bits[q] = b;
    }
    let n = free.len();
    for (i, &q) in free.iter().enumerate() {
        bits[q] = (r >> (n - 1 - i)) & 1 == 1;
    }
    bits
}

/// Average of `f` over all `2^n` strings, summed in a fixed order.
fn enumerate_average<F>(n: usize, f: F) -> Result<f64, SimError>
where
    F: Fn(u64) -> Result<f64, SimError> + Sync,
{
    let count = 1u64 << n;
    let values: Vec<f64> = (0..count).into_par_iter().map(&f).collect::<Result<_, _>>()?;
    Ok(values.iter().sum::<f64>() / count as f64)
}

pub fn pacc_exact(circuit: &Circuit, clean: CleanSpec) -> Result<AcceptanceReport, SimError> {
    pacc_exact_with(circuit, clean, &SimConfig::default())
}

pub fn pacc_exact_with(circuit: &Circuit, clean: CleanSpec, config: &SimConfig) -> Result<AcceptanceReport, SimError> {
    clean.check(circuit.width())?;
    let w = circuit.width();
    let mixed = w - clean.k();
    if mixed > config.max_enumeration_log2 {
        return Err(SimError::TooManyMixed {
            mixed,
            max: config.max_enumeration_log2,
        });
    }
    let engine = Engine::new(circuit, config.max_active_qubits);
    let free: Vec<usize> = (clean.k()..w).collect();
    let value = enumerate_average(mixed, |r| {
        engine.run(&bits_of(w, &[], &free, r), None::<&mut ChaCha8Rng>)
    })?;
    Ok(AcceptanceReport {
        value,
        method: Method::Exact,
        samples: None,
        half_width_95: 0.0,
        seed: None,
    })
}

/// Exact `p_acc` by evolving a density matrix over the live qubits only.
/// Prefer this to [`pacc_exact`] for wide circuits whose gates touch few
/// qubits at a time.
pub fn pacc_exact_density(circuit: &Circuit, clean: CleanSpec) -> Result<AcceptanceReport, SimError> {
    pacc_exact_density_with(circuit, clean, &SimConfig::default())
}

pub fn pacc_exact_density_with(
    circuit: &Circuit,
    clean: CleanSpec,
    config: &SimConfig,
) -> Result<AcceptanceReport, SimError> {
    clean.check(circuit.width())?;
    let value = density::pacc(circuit, clean.k(), config.max_density_qubits)?;
    Ok(AcceptanceReport {
        value,
        method: Method::Exact,
        samples: None,
        half_width_95: 0.0,
        seed: None,
    })
}

/// Exact `p_acc` by whichever engine fits: the live-qubit density matrix
/// first, then basis enumeration.
pub fn pacc_exact_auto(circuit: &Circuit, clean: CleanSpec) -> Result<AcceptanceReport, SimError> {
    pacc_exact_auto_with(circuit, clean, &SimConfig::default())
}

pub fn pacc_exact_auto_with(
    circuit: &Circuit,
    clean: CleanSpec,
    config: &SimConfig,
) -> Result<AcceptanceReport, SimError> {
    pacc_exact_density_with(circuit, clean, config).or_else(|_| pacc_exact_with(circuit, clean, config))
}

/// Per-sample RNG: one ChaCha8 stream per sample index, so results do not
/// depend on thread scheduling.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn pacc_sampled(
    circuit: &Circuit,
    clean: CleanSpec,
    samples: u64,
    seed: u64,
) -> Result<AcceptanceReport, SimError> {
    pacc_sampled_with(circuit, clean, samples, seed, &SimConfig::default())
}

pub fn pacc_sampled_with(
    circuit: &Circuit,
    clean: CleanSpec,
    samples: u64,
    seed: u64,
    config: &SimConfig,
) -> Result<AcceptanceReport, SimError> {
    clean.check(circuit.width())?;
    if samples == 0 {
        return Err(SimError::NoSamples);
    }
    let w = circuit.width();
    let k = clean.k();
    let engine = Engine::new(circuit, config.max_active_qubits);
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut bits = vec![false; w];
            for b in bits.iter_mut().skip(k) {
                *b = rng.random::<bool>();
            }
            engine.run(&bits, Some(&mut rng))
        })
        .collect::<Result<_, _>>()?;
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if samples > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(AcceptanceReport {
        value: mean,
        method: Method::Sampled,
        samples: Some(samples),
        half_width_95: 1.96 * (var / n).sqrt(),
        seed: Some(seed),
    })
}

/// Probability that the output qubit reads `1 - initial_bit` when it starts
/// in `|initial_bit>` and every other qubit starts totally mixed.
pub fn flip_probability(circuit: &Circuit, initial_bit: bool) -> Result<f64, SimError> {
    flip_probability_with(circuit, initial_bit, &SimConfig::default())
}

pub fn flip_probability_with(circuit: &Circuit, initial_bit: bool, config: &SimConfig) -> Result<f64, SimError> {
    let w = circuit.width();
    let out = circuit.output_qubit();
    let mixed = w - 1;
    if mixed > config.max_enumeration_log2 {
        return Err(SimError::TooManyMixed {
            mixed,
            max: config.max_enumeration_log2,
        });
    }
    let engine = Engine::new(circuit, config.max_active_qubits);
    let free: Vec<usize> = (0..w).filter(|&q| q != out).collect();
    let stay_zero = enumerate_average(mixed, |r| {
        engine.run(&bits_of(w, &[(out, initial_bit)], &free, r), None::<&mut ChaCha8Rng>)
    })?;
    Ok(if initial_bit { stay_zero } else { 1.0 - stay_zero })
}

/// Index of the computational-basis state with the given bits, qubit 0 most
/// significant.
pub fn basis_index(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Applies every gate of `circuit` to a dense state vector of length
/// `2^width`, qubit 0 most significant.
pub fn apply_statevector(circuit: &Circuit, state: &[C64]) -> Result<Vec<C64>, SimError> {
    let mut out = state.to_vec();
    apply_in_place(circuit, &mut out)?;
    Ok(out)
}

pub fn apply_in_place(circuit: &Circuit, state: &mut [C64]) -> Result<(), SimError> {
    let w = circuit.width();
    let max = SimConfig::default().max_active_qubits;
    if w > max {
        return Err(SimError::TooManyQubits { needed: w, max });
    }
    if state.len() != 1usize << w {
        return Err(SimError::StateLength {
            expected: 1usize << w,
            got: state.len(),
        });
    }
    let bit = |q: usize| 1usize << (w - 1 - q);
    let mut scratch = Vec::new();
    for g in circuit.gates() {
        let ctrl: usize = g.controls().iter().map(|&q| bit(q)).sum();
        let masks: Vec<usize> = g.targets().iter().map(|&q| bit(q)).collect();
        kernel::apply(state, &mut scratch, g.op(), ctrl, &masks);
    }
    Ok(())
}

/// Zeroes every amplitude whose `qubit` differs from `value`.
pub fn project_qubit(state: &mut [C64], width: usize, qubit: usize, value: bool) {
    let m = 1usize << (width - 1 - qubit);
    for (i, a) in state.iter_mut().enumerate() {
        if (i & m != 0) != value {
            *a = C64::new(0.0, 0.0);
        }
    }
}

pub fn norm_sqr(state: &[C64]) -> f64 {
    state.iter().map(|a| a.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn clean(k: usize, w: usize) -> CleanSpec {
        CleanSpec::new(k, w).unwrap()
    }

    #[test]
    fn empty_circuit_accepts() {
        let c = Circuit::new(3, 0).unwrap();
        let r = pacc_exact(&c, clean(1, 3)).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.method, Method::Exact);
        assert_eq!(r.half_width_95, 0.0);
    }

    #[test]
    fn hadamard_on_clean_output_is_half() {
        let c = Circuit::from_gates(2, 0, [Gate::h(0)]).unwrap();
        assert!((pacc_exact(&c, clean(1, 2)).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn x_rejects_everything() {
        let c = Circuit::from_gates(3, 0, [Gate::x(0)]).unwrap();
        assert_eq!(pacc_exact(&c, clean(1, 3)).unwrap().value, 0.0);
    }

    #[test]
    fn sampled_identity_is_one() {
        let c = Circuit::new(4, 0).unwrap();
        let r = pacc_sampled(&c, clean(2, 4), 100, 42).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.half_width_95, 0.0);
        assert_eq!(r.samples, Some(100));
        assert_eq!(pacc_sampled(&c, clean(2, 4), 0, 1), Err(SimError::NoSamples));
    }

    #[test]
    fn sampled_is_reproducible() {
        let c = Circuit::from_gates(3, 0, [Gate::h(1), Gate::cx(1, 0), Gate::cx(2, 0)]).unwrap();
        let a = pacc_sampled(&c, clean(1, 3), 500, 9).unwrap();
        let b = pacc_sampled(&c, clean(1, 3), 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_checks() {
        let c = Circuit::new(25, 0).unwrap();
        assert!(matches!(
            pacc_exact(&c, clean(1, 25)),
            Err(SimError::TooManyMixed { mixed: 24, .. })
        ));
        let wide = Circuit::new(25, 0).unwrap();
        let state = vec![C64::new(0.0, 0.0); 4];
        assert!(matches!(
            apply_statevector(&wide, &state),
            Err(SimError::TooManyQubits { .. })
        ));
        let small = Circuit::new(2, 0).unwrap();
        assert!(matches!(
            apply_statevector(&small, &state[..3]),
            Err(SimError::StateLength { .. })
        ));
        let tight = SimConfig {
            max_active_qubits: 1,
            ..SimConfig::default()
        };
        let two = Circuit::from_gates(2, 0, [Gate::h(0), Gate::cx(0, 1)]).unwrap();
        assert!(matches!(
            pacc_exact_with(&two, clean(2, 2), &tight),
            Err(SimError::TooManyQubits { needed: 2, max: 1 })
        ));
    }

    #[test]
    fn flip_probability_of_x_and_identity() {
        let x = Circuit::from_gates(2, 0, [Gate::x(0)]).unwrap();
        assert_eq!(flip_probability(&x, false).unwrap(), 1.0);
        assert_eq!(flip_probability(&x, true).unwrap(), 1.0);
        let id = Circuit::new(2, 0).unwrap();
        assert_eq!(flip_probability(&id, false).unwrap(), 0.0);
        let cx = Circuit::from_gates(2, 0, [Gate::cx(1, 0)]).unwrap();
        assert!((flip_probability(&cx, false).unwrap() - 0.5).abs() < 1e-12);
    }
}
