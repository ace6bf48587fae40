//! Bayesian Cramér-Rao bound (BCRB) analysis and transceiver design for MIMO
//! radar built from phase-shifter based polarization-reconfigurable antennas
//! (PRAs).
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] – quadrature, Hermitian top eigenpair, Kronecker product.
//! * [`model`] – array steering, polarforming, depolarization, the
//!   Gaussian-mixture angle prior and the prior-averaged scene matrices.
//! * [`bcrb`] – Fisher information blocks and the BCRB for the target angle.
//! * [`optimizer`] – alternating optimization of the transmit covariance and
//!   the transmit/receive phase shifts.
//! * [`benchmarks`] – the reference polarization schemes.
//! * [`oracles`] – brute-force and Monte Carlo cross-checks.
//! * [`cli`] – experiment configuration and CSV-producing commands.

pub mod benchmarks;
pub mod bcrb;
pub mod cli;
mod error;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod oracles;

pub use error::{Error, Result};

pub use bcrb::{bcrb_theta, bfim, o_matrix, objective, q_matrix, Bfim};

pub use model::{Design, PrecomputedScene, PriorModel, SceneConfig};
pub use numerics::{CMatrix, QuadratureRule};
pub use benchmarks::{SchemeId, SchemeResult};
pub use optimizer::{run_ao, AoSettings, OptResult};
