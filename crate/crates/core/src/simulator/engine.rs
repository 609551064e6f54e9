//! Run one computational-basis input through a circuit while keeping only
//! the qubits that are in superposition in the state vector.
//!
//! Qubits start out classical. A qubit joins the state vector the first time
//! a gate could put it in superposition, and gates whose controls are
//! classically 0 are skipped. When an RNG is supplied, qubits other than the
//! output are measured and dropped after their last gate; measuring a qubit
//! nothing touches again leaves the output statistics unchanged, so
//! averaging over the outcomes is unbiased.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::circuit::{Circuit, Gate};

use super::kernel;
use super::SimError;

pub(crate) struct Engine<'c> {
    circuit: &'c Circuit,
    last_use: Vec<Option<usize>>,
    max_active: usize,
}

struct Live {
    amps: Vec<C64>,
    scratch: Vec<C64>,
    pos: Vec<Option<u32>>,
    at: Vec<usize>,
    classical: Vec<bool>,
}

impl Live {
    fn new(initial: &[bool]) -> Live {
        Live {
            amps: vec![C64::new(1.0, 0.0)],
            scratch: Vec::new(),
            pos: vec![None; initial.len()],
            at: Vec::new(),
            classical: initial.to_vec(),
        }
    }

    fn mask(&self, q: usize) -> usize {
        1usize << self.pos[q].expect("qubit is active")
    }

    fn activate(&mut self, q: usize, max_active: usize) -> Result<(), SimError> {
        if self.pos[q].is_some() {
            return Ok(());
        }
        let p = self.at.len();
        if p + 1 > max_active {
            return Err(SimError::TooManyQubits {
                needed: p + 1,
                max: max_active,
            });
        }
        let n = self.amps.len();
        let zero = C64::new(0.0, 0.0);
        if self.classical[q] {
            self.amps.splice(0..0, std::iter::repeat_n(zero, n));
        } else {
            self.amps.resize(2 * n, zero);
        }
        self.pos[q] = Some(p as u32);
        self.at.push(q);
        Ok(())
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn prob_zero(&self, q: usize) -> f64 {
        match self.pos[q] {
            None => {
                if self.classical[q] {
                    0.0
                } else {
                    1.0
                }
            }
            Some(p) => {
                let m = 1usize << p;
                let zero: f64 = self
                    .amps
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i & m == 0)
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                zero / self.norm_sqr()
            }
        }
    }

    /// Measures `q` using the uniform draw `u` and removes it from the state.
    fn retire(&mut self, q: usize, u: f64) {
        let p = self.pos[q].expect("qubit is active") as usize;
        let m = 1usize << p;
        let total = self.norm_sqr();
        let one: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let mut outcome = u * total < one;
        let kept = if outcome { one } else { total - one };
        if kept <= 0.0 {
            outcome = !outcome;
        }
        let kept = if outcome { one } else { total - one };
        let scale = 1.0 / kept.sqrt();
        let low = m - 1;
        let half = self.amps.len() / 2;
        let bit = if outcome { m } else { 0 };
        for n in 0..half {
            let old = ((n & !low) << 1) | bit | (n & low);
            self.amps[n] = self.amps[old] * scale;
        }
        self.amps.truncate(half);
        self.at.remove(p);
        for &other in &self.at[p..] {
            if let Some(pp) = self.pos[other].as_mut() {
                *pp -= 1;
            }
        }
        self.pos[q] = None;
        self.classical[q] = outcome;
    }
}

impl<'c> Engine<'c> {
    pub(crate) fn new(circuit: &'c Circuit, max_active: usize) -> Engine<'c> {
        Engine {
            circuit,
            last_use: circuit.last_uses(),
            max_active,
        }
    }

    fn step(&self, live: &mut Live, gate: &Gate) -> Result<(), SimError> {
        let mut ctrl = 0usize;
        for &c in gate.controls() {
            match live.pos[c] {
                Some(p) => ctrl |= 1usize << p,
                None => {
                    if !live.classical[c] {
                        return Ok(());
                    }
                }
            }
        }
        let op = gate.op();
        let targets = gate.targets();
        if op.is_diagonal() {
            let t = targets[0];
            let mask = match live.pos[t] {
                Some(p) => ctrl | (1usize << p),
                None if live.classical[t] => ctrl,
                None => return Ok(()),
            };
            // With no active qubit involved the phase is global.
            if mask != 0 {
                kernel::apply_phase(&mut live.amps, mask, kernel::phase_of(op));
            }
            return Ok(());
        }
        let any_active = targets.iter().any(|&t| live.pos[t].is_some());
        if ctrl == 0 && !any_active && op.is_permutation() {
            let masks: Vec<usize> = (0..targets.len()).map(|k| 1usize << k).collect();
            let i = targets
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &t)| acc | ((live.classical[t] as usize) << k));
            let j = kernel::permute_index(op, i, &masks);
            for (k, &t) in targets.iter().enumerate() {
                live.classical[t] = (j >> k) & 1 == 1;
            }
            return Ok(());
        }
        for &t in targets {
            live.activate(t, self.max_active)?;
        }
        let masks: Vec<usize> = targets.iter().map(|&t| live.mask(t)).collect();
        kernel::apply(&mut live.amps, &mut live.scratch, op, ctrl, &masks);
        Ok(())
    }

    /// Probability of reading `|0>` on the output qubit for the basis input
    /// `initial`. With `rng`, finished qubits are measured and dropped.
    pub(crate) fn run<R: Rng + ?Sized>(&self, initial: &[bool], mut rng: Option<&mut R>) -> Result<f64, SimError> {
        debug_assert_eq!(initial.len(), self.circuit.width());
        let out = self.circuit.output_qubit();
        let mut live = Live::new(initial);
        for (gi, g) in self.circuit.gates().iter().enumerate() {
            self.step(&mut live, g)?;
            if let Some(r) = rng.as_deref_mut() {
                for q in g.qubits() {
                    if q != out && self.last_use[q] == Some(gi) && live.pos[q].is_some() {
                        let u: f64 = r.random();
                        live.retire(q, u);
                    }
                }
            }
        }
        Ok(live.prob_zero(out))
    }
}
