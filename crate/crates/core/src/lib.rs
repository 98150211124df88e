//! Power-minimizing transmission design for a reconfigurable intelligent
//! surface (RIS) whose elements either reflect or harvest energy, serving a
//! cooperative ambient backscatter link.
//!
//! The solver alternates two blocks:
//!
//! * [`txbf`]: transmit beamforming through a semidefinite relaxation and an
//!   exact rank-one reduction.
//! * [`admm`]: element mode assignment and reflect phases through a
//!   consensus ADMM with closed-form updates.
//!
//! [`bcd`] drives the alternation, [`model`] evaluates the physical
//! quantities, [`channel`] synthesizes fading instances, and [`oracle`] holds
//! brute-force references used for verification.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod bcd;
pub mod channel;
pub mod error;
pub mod io;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod txbf;
pub mod units;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex column vector.
pub type CVector = DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;

pub use admm::{AdmmConfig, AdmmOutcome, AdmmState, AdmmWarmStart, LiftedVectors, Rho};
pub use bcd::{solve_p, Solution, SolveConfig, SolveStatus, SolveTrace};
pub use channel::{generate_channels, ChannelSet, FadingConfig, Geometry};
pub use model::{Design, FeasibilityReport, SystemParams};
pub use numerics::{HermitianMatrix, SdpProblem, SdpSolution, SdpStatus};
