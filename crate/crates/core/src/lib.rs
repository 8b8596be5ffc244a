//! Simulation, estimation, and resource-planning engine for a combined
//! entanglement-purification / fidelity-estimation protocol on Bell-diagonal
//! states.
//!
//! The protocol consumes four identical noisy Bell pairs per circuit run,
//! performs bilateral parity checks at three measurement locations, and
//! post-selects a purified output pair. The same parity statistics double as
//! a fidelity estimator, so purification and certification share shots.
//!
//! Module map:
//! * [`states`] — Bell-diagonal states, Werner family, noise parameter.
//! * [`circuit`] — exact dense simulation of the 8-qubit circuit with
//!   depolarizing gate noise, plus a Pauli-frame sampler and the multilinear
//!   tensor cache that makes repeated evaluation cheap.
//! * [`purify`] — closed-form recursive purification and λ thresholds.
//! * [`estimate`] — inversion of parity proportions back to the state.
//! * [`stats`] — delta-method uncertainty: shot covariance, σ₁ curves,
//!   confidence intervals.
//! * [`plan`] — resource planning: Bell pairs to certify a fidelity, and
//!   full purify-and-certify pipeline costs.
//! * [`mc`] — Monte Carlo sweep harness with deterministic CSV output.
//! * [`cli`] — command-line front end and the protocol driver.

pub mod circuit;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod mc;
pub mod plan;
pub mod purify;
pub mod states;
pub mod stats;

pub use circuit::{build_circuit, CircuitModel, MeasurementTally};
pub use error::{Error, Result};
pub use estimate::{ParityProportions, ReconstructionResult};
pub use plan::ResourcePlan;
pub use purify::Trajectory;
pub use states::{BellDiagonalState, NoiseModel};
pub use stats::{ShotCovariance, SigmaCurve};
