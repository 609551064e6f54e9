//! Toolkit for computations with few clean qubits.

pub mod circuit;
pub mod format;
pub mod lowering;
pub mod procedures;
pub mod simulator;
pub mod structured;
pub mod trest;
