use ptstab_core::{KnownStructure, PlantDynamics};

use crate::{GroundTruth, TruthConstants};

/// The benchmark system with `n = 3` nominal states and two appended states:
///
/// ```text
/// x1' = (1 + x1^2) x2
/// x2' = (1 + x1^4) x3 + ta cos(x2 z1) x2 + tb [1 + cos(t u)] e^x1 x1^2 sin(z2)
/// x3' = h u + tc x1^2 cos(x3 z1) x2 + td (1 + x1^2)
/// z1' = -100 z1 + z2
/// z2' = -100 z2 + x3^2 + u
/// ```
///
/// with `h = 1 + sin(t) cos(z2) / 2 + x1^4 (1 + e^-|z1|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExamplePlant {
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_c: f64,
    pub theta_d: f64,
    /// Scaling of `Gamma(x1) = c_beta max(e^x1 |x1|, 1 + x1^2)`.
    pub c_beta: f64,
    /// Claimed lower bound on the upper-diagonal couplings. The true bound
    /// is 1; larger values exist to exercise the assumption checker.
    pub sigma: f64,
}

impl Default for ExamplePlant {
    fn default() -> Self {
        Self {
            theta_a: 2.0,
            theta_b: 2.0,
            theta_c: 2.0,
            theta_d: 2.0,
            c_beta: 1e-4,
            sigma: 1.0,
        }
    }
}

impl ExamplePlant {
    /// Uncertain input gain `h(z, x, u, t)`.
    pub fn input_gain(&self, x: &[f64], z: &[f64], t: f64) -> f64 {
        let x1_4 = x[0].powi(4);
        1.0 + 0.5 * t.sin() * z[1].cos() + x1_4 * (1.0 + (-z[0].abs()).exp())
    }

    /// System matrix of the appended dynamics, which are linear in `z`.
    pub fn appended_matrix() -> [[f64; 2]; 2] {
        [[-100.0, 1.0], [0.0, -100.0]]
    }
}

impl KnownStructure for ExamplePlant {
    fn order(&self) -> usize {
        3
    }

    fn appended_order(&self) -> usize {
        2
    }

    fn phi_upper(&self, i: usize, x: &[f64], _t: f64) -> f64 {
        match i {
            1 => 1.0 + x[0] * x[0],
            2 => 1.0 + x[0].powi(4),
            _ => panic!("phi_upper index {i} out of range for n = 3"),
        }
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn gamma(&self, x1: f64) -> f64 {
        self.c_beta * (x1.exp() * x1.abs()).max(1.0 + x1 * x1)
    }

    fn gamma_derivative(&self, x1: f64) -> f64 {
        let a = x1.exp() * x1.abs();
        let b = 1.0 + x1 * x1;
        if a > b {
            // d/dx (e^x |x|) = e^x (|x| + sign x)
            self.c_beta * x1.exp() * (x1.abs() + x1.signum())
        } else {
            self.c_beta * 2.0 * x1
        }
    }

    fn phi_bound(&self, i: usize, j: usize, _x: &[f64], _t: f64) -> f64 {
        match (i, j) {
            (2, 1) | (2, 2) | (3, 2) => 1.0,
            (1, 1) | (3, 1) | (3, 3) => 0.0,
            _ => panic!("phi_bound index ({i}, {j}) out of range for n = 3"),
        }
    }

    fn eps(&self, i: usize, j: usize) -> f64 {
        // suprema of the ratio bounds; every denominator is at least 1
        self.phi_bound(i, j, &[0.0; 3], 0.0)
    }

    fn eps_tilde(&self, i: usize) -> f64 {
        match i {
            2 | 3 => 1.0,
            _ => panic!("eps_tilde index {i} out of range for n = 3"),
        }
    }

    fn phi12_upper(&self, _x1: f64) -> f64 {
        1.5
    }

    fn phi12_upper_derivative(&self, _x1: f64) -> f64 {
        0.0
    }

    fn phi12_lower_ratio(&self, x1: f64) -> f64 {
        let s = x1 * x1;
        (1.0 + s) / (1.0 + s * s)
    }

    fn rho_upper(&self, _i: usize) -> f64 {
        1.0
    }
}

impl PlantDynamics for ExamplePlant {
    fn rhs_x(&self, x: &[f64], z: &[f64], u: f64, t: f64, out: &mut [f64]) {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let (z1, z2) = (z[0], z[1]);
        let x1_2 = x1 * x1;
        out[0] = (1.0 + x1_2) * x2;
        out[1] = (1.0 + x1_2 * x1_2) * x3
            + self.theta_a * (x2 * z1).cos() * x2
            + self.theta_b * (1.0 + (t * u).cos()) * x1.exp() * x1_2 * z2.sin();
        out[2] = self.input_gain(x, z, t) * u
            + self.theta_c * x1_2 * (x3 * z1).cos() * x2
            + self.theta_d * (1.0 + x1_2);
    }

    fn rhs_z(&self, x: &[f64], z: &[f64], u: f64, _t: f64, out: &mut [f64]) {
        out[0] = -100.0 * z[0] + z[1];
        out[1] = -100.0 * z[1] + x[2] * x[2] + u;
    }
}

impl GroundTruth for ExamplePlant {
    fn true_disturbance_constants(&self) -> TruthConstants {
        TruthConstants {
            theta: self.theta_a.max(2.0 * self.theta_b).max(self.theta_c) / self.c_beta,
            phi_n0: self.theta_d / self.c_beta,
            h_lower: 0.5,
        }
    }
}
