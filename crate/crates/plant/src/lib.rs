//! Concrete plants and their ground-truth constants.
//!
//! The controller only ever sees these plants through
//! [`ptstab_core::KnownStructure`]. The uncertain parameters and the
//! constants derived from them are exposed through [`GroundTruth`], which is
//! meant for monitors and tests.

mod chain;
mod example;

pub use chain::IntegratorChain;
pub use example::ExamplePlant;

/// Unknown constants appearing in the analysis of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthConstants {
    /// `theta` in the bounds on the uncertain terms.
    pub theta: f64,
    /// `phi_n0`, the size of the non-vanishing disturbance.
    pub phi_n0: f64,
    /// Lower bound on the input gain.
    pub h_lower: f64,
}

impl TruthConstants {
    /// `theta* = 1 + theta + theta^2`.
    pub fn theta_star(&self) -> f64 {
        1.0 + self.theta + self.theta * self.theta
    }

    /// `theta1* = max(1/h, phi_n0/h)`.
    pub fn theta1_star(&self) -> f64 {
        (1.0 / self.h_lower).max(self.phi_n0 / self.h_lower)
    }
}

/// Access to the constants a controller is not allowed to know.
pub trait GroundTruth {
    fn true_disturbance_constants(&self) -> TruthConstants;
}
