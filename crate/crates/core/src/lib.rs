//! Grand-canonical thermodynamic formalism on finite-alphabet shift spaces.
//!
//! The crate builds the grand-canonical Ruelle operator
//! `L_{β,μ} f(x) = Σ_N e^{βμN} Σ_j e^{-β A_N(jx)} f(jx)` from a family of
//! potentials `(A_N)`, represents it as a finite IFS with weights on depth-k
//! cylinder functions, and computes its leading spectral data together with
//! the pressure, entropy and derivative identities attached to it.
//!
//! Module map:
//!
//! * [`symbolic`]: words, the shift-space metric, cylinder functions and measures.
//! * [`potentials`]: potential families, admissibility checks, the grand potential
//!   and both IFS weight constructions.
//! * [`transfer`]: sparse transfer matrices, power iteration, partition sums.
//! * [`thermo`]: pressures, holonomic measures, variational entropy, sweeps.
//! * [`grandstats`]: scalar grand-canonical statistics and finite MaxEnt.
//! * [`dense`]: small dense Perron solver used by the Markov reductions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod grandstats;
pub mod numeric;
pub mod potentials;
pub mod symbolic;
pub mod thermo;
pub mod transfer;

pub use error::{Error, Result};
pub use potentials::{PotentialFamily, WeightSystem};
pub use symbolic::{CylinderFunction, CylinderMeasure, Word};
pub use transfer::{SolverConfig, SpectralSolution, TransferMatrix};
