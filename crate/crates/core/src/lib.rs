//! Parent and uncle Hamiltonians for the GHZ matrix-product state and the
//! toric-code PEPS: tensors, local kernels, matrix-free Hamiltonians, Krylov
//! spectra and the explicit low-energy states used to probe them.

pub mod error;
pub mod gallery;
pub mod gf2;
pub mod hamiltonian;
pub mod kernel;
pub mod lattice;
pub mod pattern;
pub mod spectra;
pub mod state;
pub mod tensor;

pub use error::{CoreError, Result};
pub use lattice::{Boundary, Edge, EdgeDir, LatticeSpec, Leg};
pub use pattern::{closure_states, pattern_state, PatternBoundary, PatternSpec};
pub use state::SparseState;
pub use tensor::{ghz_mps, perturb_mps, toric_tensor, MpsClosure, MpsTensor, PepsTensor, PerturbationSpec, SiteKind};
