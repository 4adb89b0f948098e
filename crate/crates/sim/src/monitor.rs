use std::fmt;

use ptstab_core::{ControllerConfig, Warp};
use ptstab_plant::TruthConstants;

use crate::{Sample, Trajectory};

/// Relative slack allowed on `r >= alpha` and `theta_hat >= alpha`.
pub const FLOOR_REL_TOL: f64 = 1e-9;

/// `V = x1^2 / 2 + r eta^T P eta` and
/// `V_bar = V + (theta_hat - alpha - theta*)^2 / (2 c_theta) + h (theta1_hat - theta1*)^2 / (2 c_theta1)`.
pub fn lyapunov_values<W: Warp>(ctrl: &ControllerConfig<W>, truth: &TruthConstants, s: &Sample) -> (f64, f64) {
    let p = ctrl.cert.p();
    let mut quad = 0.0;
    for (i, ei) in s.eta.iter().enumerate() {
        for (j, ej) in s.eta.iter().enumerate() {
            quad += ei * p[(i, j)] * ej;
        }
    }
    let v = 0.5 * s.x[0] * s.x[0] + s.r * quad;
    let a = s.theta_hat - s.alpha - truth.theta_star();
    let b = s.theta1_hat - truth.theta1_star();
    let v_bar = v + a * a / (2.0 * ctrl.c_theta) + truth.h_lower * b * b / (2.0 * ctrl.c_theta1);
    (v, v_bar)
}

/// Verdicts of the trajectory monitors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub samples: usize,
    /// Largest decrease of `r`, `theta_hat` or `theta1_hat` between samples.
    pub worst_state_decrease: f64,
    pub states_monotone: bool,
    /// Largest relative deficit `(alpha - r) / alpha`; negative when `r` stays above.
    pub floor_deficit_r: f64,
    pub floor_deficit_theta_hat: f64,
    pub floors_hold: bool,
    /// Allowed increment of `V_bar` between consecutive samples.
    pub tol_mono: f64,
    pub vbar_worst_increment: f64,
    pub vbar_worst_index: Option<usize>,
    pub vbar_monotone: bool,
    pub kappa: f64,
    pub tol_decay: f64,
    /// Earliest `tau` after which `dV/dtau <= -kappa V + tol` at every sample.
    pub tau0: Option<f64>,
    /// Largest `dV/dtau + kappa V` over the whole run.
    pub decay_worst_excess: f64,
    pub sup_u: f64,
    pub sup_z: f64,
    pub final_x_norm: f64,
    pub check_time: f64,
    pub x_norm_at_check: Option<f64>,
    pub pass: bool,
}

/// Evaluates the monitors on recorded `V`, `V_bar` and controller states.
///
/// Tolerances: `tol_mono = (1e-6 V_bar(0) + 10 d_tau^2)` per integration step,
/// scaled by the record stride; the decay test uses the same form with `V(0)`.
pub fn lyapunov_monitors(traj: &Trajectory, kappa: f64, check_time: f64) -> MonitorReport {
    let s = &traj.samples;
    let stride = traj.record_stride as f64;
    let h2 = traj.d_tau * traj.d_tau;
    let (v0, vbar0) = s.first().map_or((0.0, 0.0), |p| (p.v, p.v_bar));
    let tol_mono = stride * (1e-6 * vbar0.abs() + 10.0 * h2);
    let tol_decay = 1e-6 * v0.abs() + 10.0 * h2;

    let mut worst_dec: f64 = 0.0;
    let mut worst_inc = f64::NEG_INFINITY;
    let mut worst_idx = None;
    for (k, w) in s.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        for d in [a.r - b.r, a.theta_hat - b.theta_hat, a.theta1_hat - b.theta1_hat] {
            worst_dec = worst_dec.max(d);
        }
        let inc = b.v_bar - a.v_bar;
        if inc > worst_inc || inc.is_nan() {
            worst_inc = if inc.is_nan() { f64::INFINITY } else { inc };
            worst_idx = Some(k + 1);
        }
    }
    if s.len() < 2 {
        worst_inc = 0.0;
    }

    let mut def_r = f64::NEG_INFINITY;
    let mut def_th = f64::NEG_INFINITY;
    for p in s {
        def_r = def_r.max((p.alpha - p.r) / p.alpha);
        def_th = def_th.max((p.alpha - p.theta_hat) / p.alpha);
    }

    // central differences at interior samples; tau0 is the first sample from
    // which the decay inequality never fails again
    let mut tau0 = s.first().map(|p| p.tau);
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 1..s.len().saturating_sub(1) {
        let dv = (s[k + 1].v - s[k - 1].v) / (s[k + 1].tau - s[k - 1].tau);
        let excess = dv + kappa * s[k].v;
        worst_excess = worst_excess.max(if excess.is_nan() { f64::INFINITY } else { excess });
        if !(excess <= tol_decay) {
            tau0 = if k + 1 < s.len() - 1 { Some(s[k + 1].tau) } else { None };
        }
    }
    if s.len() < 3 {
        worst_excess = 0.0;
    }

    let sup_u = s.iter().map(|p| p.u.abs()).fold(0.0, f64::max);
    let sup_z = s
        .iter()
        .flat_map(|p| p.z.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let final_x_norm = s.last().map_or(0.0, |p| p.x_norm());
    let x_norm_at_check = traj.x_norm_at(check_time);

    let states_monotone = worst_dec <= 0.0;
    let floors_hold = def_r <= FLOOR_REL_TOL && def_th <= FLOOR_REL_TOL;
    let vbar_monotone = worst_inc <= tol_mono;
    let pass = states_monotone
        && floors_hold
        && vbar_monotone
        && tau0.is_some()
        && sup_u.is_finite()
        && sup_z.is_finite()
        && final_x_norm.is_finite();

    MonitorReport {
        samples: s.len(),
        worst_state_decrease: worst_dec,
        states_monotone,
        floor_deficit_r: def_r,
        floor_deficit_theta_hat: def_th,
        floors_hold,
        tol_mono,
        vbar_worst_increment: worst_inc,
        vbar_worst_index: if vbar_monotone { None } else { worst_idx },
        vbar_monotone,
        kappa,
        tol_decay,
        tau0,
        decay_worst_excess: worst_excess,
        sup_u,
        sup_z,
        final_x_norm,
        check_time,
        x_norm_at_check,
        pass,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("none".to_string(), |x| format!("{x:.17e}"))
}

impl MonitorReport {
    /// Machine-readable `key=value` lines.
    pub fn to_kv(&self) -> String {
        let lines = [
            ("samples", self.samples.to_string()),
            ("states_monotone", self.states_monotone.to_string()),
            ("worst_state_decrease", format!("{:.17e}", self.worst_state_decrease)),
            ("floors_hold", self.floors_hold.to_string()),
            ("floor_deficit_r", format!("{:.17e}", self.floor_deficit_r)),
            ("floor_deficit_theta_hat", format!("{:.17e}", self.floor_deficit_theta_hat)),
            ("vbar_monotone", self.vbar_monotone.to_string()),
            ("vbar_worst_increment", format!("{:.17e}", self.vbar_worst_increment)),
            (
                "vbar_worst_index",
                self.vbar_worst_index.map_or("none".to_string(), |i| i.to_string()),
            ),
            ("tol_mono", format!("{:.17e}", self.tol_mono)),
            ("kappa", format!("{:.17e}", self.kappa)),
            ("tol_decay", format!("{:.17e}", self.tol_decay)),
            ("tau0", opt(self.tau0)),
            ("decay_worst_excess", format!("{:.17e}", self.decay_worst_excess)),
            ("sup_u", format!("{:.17e}", self.sup_u)),
            ("sup_z", format!("{:.17e}", self.sup_z)),
            ("final_x_norm", format!("{:.17e}", self.final_x_norm)),
            ("check_time", format!("{:.17e}", self.check_time)),
            ("x_norm_at_check", opt(self.x_norm_at_check)),
            ("pass", self.pass.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

impl fmt::Display for MonitorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "monitors over {} samples", self.samples)?;
        writeln!(
            f,
            "  monotone r, theta_hat, theta1_hat  {}  (worst decrease {:.3e})",
            mark(self.states_monotone),
            self.worst_state_decrease
        )?;
        writeln!(
            f,
            "  floors r, theta_hat >= alpha       {}  (worst deficits {:.3e}, {:.3e})",
            mark(self.floors_hold),
            self.floor_deficit_r,
            self.floor_deficit_theta_hat
        )?;
        writeln!(
            f,
            "  V_bar non-increasing               {}  (worst increment {:.3e}, tol {:.3e})",
            mark(self.vbar_monotone),
            self.vbar_worst_increment,
            self.tol_mono
        )?;
        writeln!(
            f,
            "  dV/dtau <= -kappa V after tau0     {}  (tau0 {}, kappa {:.6})",
            mark(self.tau0.is_some()),
            self.tau0.map_or("none".to_string(), |v| format!("{v:.6}")),
            self.kappa
        )?;
        writeln!(
            f,
            "  sup|u| {:.3e}  sup|z| {:.3e}  final |x| {:.3e}  |x(t={})| {}",
            self.sup_u,
            self.sup_z,
            self.final_x_norm,
            self.check_time,
            self.x_norm_at_check.map_or("n/a".to_string(), |v| format!("{v:.3e}"))
        )?;
        write!(f, "overall: {}", mark(self.pass))
    }
}
