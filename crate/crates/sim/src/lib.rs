//! Fixed-step simulation of the closed loop in warped time.
//!
//! The plant is integrated in `tau = a(t)`, where `dt = dtau / alpha(tau)`,
//! together with the controller states `r`, `theta_hat`, `theta1_hat`. The
//! recorded trajectory is then checked against the properties the stability
//! analysis guarantees: monotone controller states, the floors `r, theta_hat
//! >= alpha`, a non-increasing `V_bar`, and eventual exponential decay of `V`.

mod export;
mod integrate;
mod monitor;

pub use export::{csv_header, write_csv};
pub use integrate::{run, SimConfig, SimError, SimState, Simulator, StepInfo};
pub use monitor::{lyapunov_monitors, lyapunov_values, MonitorReport, FLOOR_REL_TOL};

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub tau: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub eta: Vec<f64>,
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
    pub r: f64,
    pub theta_hat: f64,
    pub theta1_hat: f64,
    pub v: f64,
    pub v_bar: f64,
    pub alpha: f64,
}

impl Sample {
    pub fn x_norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Counts of steps in which a safeguard changed the nominal law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SafeguardActivity {
    pub dead_zone_steps: usize,
    pub r_cap_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub n_z: usize,
    pub samples: Vec<Sample>,
    /// Integration step in `tau` (the last step may be shorter).
    pub d_tau: f64,
    pub record_stride: usize,
    pub steps: usize,
    pub safeguards: SafeguardActivity,
    /// Free-form `key=value` lines describing the run.
    pub metadata: Vec<(String, String)>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    /// `|x|` at time `t`, interpolated linearly between recorded samples.
    /// `None` if `t` lies outside the recorded range.
    pub fn x_norm_at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let k = s.partition_point(|p| p.t < t);
        if s[k].t == t || k == 0 {
            return Some(s[k].x_norm());
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.t) / (b.t - a.t);
        Some((1.0 - w) * a.x_norm() + w * b.x_norm())
    }
}
