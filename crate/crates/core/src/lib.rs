//! Item response theory machinery for evaluating models on benchmarks.
//!
//! A 2PL model is calibrated on a response matrix of previously evaluated
//! models ([`calibration`]). New models are then scored in latent ability
//! space ([`ability`]) on items chosen adaptively by Fisher information
//! ([`session`]), and the quality of the resulting training curves is
//! measured with [`metrics`]. [`simulation`] and [`experiment`] provide a
//! synthetic world with known ground truth for comparing strategies.

pub mod ability;
pub mod calibration;
pub mod error;
pub mod experiment;
pub mod io;
pub mod irt;
pub mod metrics;
pub mod par;
pub mod seed;
pub mod session;
pub mod simulation;

pub use ability::{estimate_ability, AbilityEstimate, Method, Prior};
pub use calibration::{fit_2pl, validate_matrix, CalibratedBank, CalibrationConfig, ResponseMatrix};
pub use error::{Error, Result};
pub use irt::{Ability, ItemParams, Response};
pub use par::Execution;
pub use session::{run_session, EvalSession, ResponseOracle, SessionConfig, StopReason, Strategy};
