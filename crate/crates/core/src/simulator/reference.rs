//! Slow reference computations for cross-checking the simulator on small
//! circuits. They share no code with the gate kernels.

use num_complex::Complex64 as C64;

use crate::circuit::{Circuit, CleanSpec};
use crate::lowering::unitary::{unitary_of, CMatrix, UnitaryError};

/// `tr(Pi_0 U rho U^dagger)` with `rho = |0^k><0^k| (x) I / 2^(w-k)`, by dense
/// matrix products. Intended for widths up to about 6.
pub fn pacc_density_matrix(circuit: &Circuit, clean: CleanSpec) -> Result<f64, UnitaryError> {
    let w = circuit.width();
    let u = unitary_of(circuit)?;
    let dim = 1usize << w;
    let mixed_dim = 1usize << (w - clean.k());
    let mut rho = CMatrix::zeros(dim);
    // Clean qubits are the most significant bits, so |0^k> (x) |r> has index r.
    for r in 0..mixed_dim {
        rho.set(r, r, C64::new(1.0 / mixed_dim as f64, 0.0));
    }
    let evolved = u.mul(&rho).mul(&u.adjoint());
    let out_mask = 1usize << (w - 1 - circuit.output_qubit());
    Ok((0..dim)
        .filter(|i| i & out_mask == 0)
        .map(|i| evolved.get(i, i).re)
        .sum())
}

/// Normalised trace `tr(U) / 2^n` from the dense unitary.
pub fn normalized_trace_dense(circuit: &Circuit) -> Result<C64, UnitaryError> {
    let u = unitary_of(circuit)?;
    Ok(u.trace() / u.dim() as f64)
}
