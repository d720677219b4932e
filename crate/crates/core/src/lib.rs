//! Quantum-trajectory simulation of a monitored free-fermion ladder.
//!
//! Two coupled tight-binding chains (the *system*, chain 0, and the
//! *ancilla*, chain 1) evolve under a quadratic Hamiltonian interleaved with
//! random projective measurements of the local occupation numbers. Both
//! channels preserve Gaussianity, so the full state of one trajectory is its
//! `2L x 2L` correlation matrix `D_ij = <c_i^dag c_j>`.
//!
//! The crate is `no_std` (with `alloc`) and free of IO. It provides
//!
//! * [`model`]: parameters, Bloch Hamiltonian and the one-cycle propagator,
//! * [`engine`]: the correlation-matrix state with its unitary and
//!   measurement updates,
//! * [`negativity`]: fermionic logarithmic negativity from the reduced
//!   correlation matrix (partial time reversal),
//! * [`oracle`]: a brute-force Fock-space simulator used to check the above,
//! * [`trajectory`]: single trajectories and ensemble reduction,
//! * [`analysis`]: logarithmic fits, extrapolation, susceptibility and
//!   finite-size-scaling collapse.
//!
//! Composite mode index: `2 * site + chain`, site-major.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod engine;
mod error;
pub mod linalg;
pub mod model;
pub mod negativity;
pub mod oracle;
pub mod rng;
pub mod trajectory;

pub use engine::{CorrelationMatrix, Filling, MeasurementRecord, Outcome};
pub use error::{Error, Result};
pub use model::{Geometry, ModelParams, Propagator};
pub use negativity::{Bipartition, NegativitySpectra};
pub use rng::RngStream;
pub use trajectory::{EnsembleResult, RecordPolicy, TrajectoryResult};
