//! Adaptive prescribed-time stabilization of strict-feedback systems with
//! unknown input gain and appended dynamics.
//!
//! - [`timewarp`]: the map `tau = a(t)` and the forcing functions `gamma1`, `gamma2`.
//! - [`lyapunov`]: coupled Lyapunov certificates, their verifier, and `kappa`.
//! - [`plant`]: the known-structure interface seen by the controller and the
//!   assumption checker.
//! - [`controller`]: the control law and the dynamics of `r`, `theta_hat`, `theta1_hat`.

pub mod controller;
pub mod lyapunov;
pub mod plant;
pub mod timewarp;

pub use controller::{ControlOutput, ControllerConfig, ControllerError, ControllerState, GateShape, Safeguards};
pub use lyapunov::{example_certificate, kappa, CertReport, GainBasis, LyapunovCertificate};
pub use plant::{KnownStructure, PlantDynamics, Sample};
pub use timewarp::{ForcingConfig, TimeWarp, Warp, WarpError};
