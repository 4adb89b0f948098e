#![allow(dead_code)]

use nalgebra::DMatrix;
use ptstab_core::{ControllerConfig, ForcingConfig, GainBasis, GateShape, LyapunovCertificate, TimeWarp};
use ptstab_plant::IntegratorChain;
use ptstab_sim::SimConfig;

/// Second-order chain with a scalar certificate `P = 1`, `k = 5`:
/// `2 P (-k) = -10 <= -nu`, and `P D + D P = 1`.
pub fn chain_certificate() -> LyapunovCertificate {
    LyapunovCertificate::new(2, DMatrix::from_element(1, 1, 1.0), vec![5.0], GainBasis::Constant, 10.0, 1.0, 1.0)
        .unwrap()
}

/// A loop whose gains stay moderate: the warp ends at twice the target
/// time, so `alpha` never exceeds `4 a0` on the horizon.
pub fn chain_controller() -> ControllerConfig {
    ControllerConfig {
        cert: chain_certificate(),
        warp: TimeWarp::new(1.0, 2.0, 0.25).unwrap(),
        forcing: ForcingConfig::new(0.01, 0.5, 1e-4, 1e-4).unwrap(),
        zeta0: 0.1,
        zeta_floor: 0.1,
        c_theta: 1e-2,
        c_theta1: 1e-2,
        epsilon_r: 0.1,
        sign_smoothing: 0.0,
        gate: GateShape::LinearRamp,
    }
}

pub fn chain_sim(x0: Vec<f64>) -> SimConfig {
    SimConfig::with_defaults(&chain_controller().warp, x0, vec![]).unwrap()
}

pub fn chain() -> IntegratorChain {
    IntegratorChain::new(2)
}
