use ptstab_core::{KnownStructure, PlantDynamics};

use crate::{GroundTruth, TruthConstants};

/// `x_i' = x_{i+1}`, `x_n' = u`, with no uncertain terms and no appended
/// dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorChain {
    n: usize,
}

impl IntegratorChain {
    /// Panics if `n < 2`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "integrator chain needs n >= 2, got {n}");
        Self { n }
    }
}

impl KnownStructure for IntegratorChain {
    fn order(&self) -> usize {
        self.n
    }

    fn appended_order(&self) -> usize {
        0
    }

    fn phi_upper(&self, _i: usize, _x: &[f64], _t: f64) -> f64 {
        1.0
    }

    fn sigma(&self) -> f64 {
        1.0
    }

    fn gamma(&self, _x1: f64) -> f64 {
        0.0
    }

    fn gamma_derivative(&self, _x1: f64) -> f64 {
        0.0
    }

    fn phi_bound(&self, _i: usize, _j: usize, _x: &[f64], _t: f64) -> f64 {
        0.0
    }

    fn eps(&self, _i: usize, _j: usize) -> f64 {
        0.0
    }

    fn eps_tilde(&self, _i: usize) -> f64 {
        0.0
    }

    fn phi12_upper(&self, _x1: f64) -> f64 {
        1.0
    }

    fn phi12_upper_derivative(&self, _x1: f64) -> f64 {
        0.0
    }

    fn phi12_lower_ratio(&self, _x1: f64) -> f64 {
        1.0
    }

    fn rho_upper(&self, _i: usize) -> f64 {
        1.0
    }
}

impl PlantDynamics for IntegratorChain {
    fn rhs_x(&self, x: &[f64], _z: &[f64], u: f64, _t: f64, out: &mut [f64]) {
        let n = self.n;
        out[..n - 1].copy_from_slice(&x[1..n]);
        out[n - 1] = u;
    }

    fn rhs_z(&self, _x: &[f64], _z: &[f64], _u: f64, _t: f64, _out: &mut [f64]) {}
}

impl GroundTruth for IntegratorChain {
    fn true_disturbance_constants(&self) -> TruthConstants {
        TruthConstants {
            theta: 0.0,
            phi_n0: 0.0,
            h_lower: 1.0,
        }
    }
}
