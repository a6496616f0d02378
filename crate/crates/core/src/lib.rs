//! Detection of initial system-environment correlations from the reduced
//! dynamics of the system alone.
//!
//! The crate builds global unitaries that expose a correlation through the
//! trace distance of reduced states, decides when the full distinguishability
//! can be transferred to the system, and checks the related detection
//! inequalities, Hamiltonian sweeps and process-tomography failure modes.

pub mod channel;
pub mod dynamics;
pub mod error;
pub mod evolution;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod protocols;
pub mod random;
pub mod tolerance;
pub mod tomography;
pub mod witness;

pub use channel::{apply_kraus, apply_kraus_local, KrausMap};
pub use error::{Error, Result};
pub use evolution::{expm_hermitian, Propagator};
pub use operator::{
    apply_unitary, trace_distance, DensityOperator, HermitianOperator, Space, SpaceDims,
    UnitaryOperator,
};
pub use tolerance::{Tolerances, DETECTION_THRESHOLD};
