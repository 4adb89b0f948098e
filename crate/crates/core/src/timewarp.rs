//! Time-scale transformation `tau = a(t)` mapping `[0, T_eff)` onto `[0, inf)`.
//!
//! The shipped warp is `a(t) = a0 t / (1 - t/T_eff)`, for which the rate
//! expressed in warped time is `alpha(tau) = a0 (1 + tau/(a0 T_eff))^2`.
//! Other admissible warps plug in through the [`Warp`] trait; they must
//! supply their own `alpha` and its derivative.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    #[error("time {t} outside the warp domain [0, {t_effective})")]
    TimeDomain { t: f64, t_effective: f64 },
    #[error("warped time {tau} is negative")]
    WarpedDomain { tau: f64 },
    #[error("invalid time warp: {0}")]
    Invalid(String),
}

/// An admissible time-scale transformation.
///
/// Implementations must satisfy `warp(0) = 0`, be strictly increasing on
/// `[0, terminal_time())`, and have `alpha(tau) >= a0() > 0`.
pub trait Warp: Send + Sync + std::fmt::Debug {
    fn warp(&self, t: f64) -> Result<f64, WarpError>;
    fn unwarp(&self, tau: f64) -> Result<f64, WarpError>;
    /// `da/dt` expressed in warped time. Requires `tau >= 0`.
    fn alpha(&self, tau: f64) -> f64;
    /// `d alpha / d tau`. Requires `tau >= 0`.
    fn alpha_prime(&self, tau: f64) -> f64;
    /// Lower bound on `alpha`.
    fn a0(&self) -> f64;
    /// The time at which the warp diverges.
    fn terminal_time(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWarp {
    t_prescribed: f64,
    t_effective: f64,
    a0: f64,
}

impl TimeWarp {
    pub fn new(t_prescribed: f64, t_effective: f64, a0: f64) -> Result<Self, WarpError> {
        let mut problems = Vec::new();
        if !(t_prescribed.is_finite() && t_prescribed > 0.0) {
            problems.push(format!("T_prescribed must be positive, got {t_prescribed}"));
        }
        if !(t_effective.is_finite() && t_effective >= t_prescribed) {
            problems.push(format!(
                "T_effective must satisfy T_effective >= T_prescribed, got {t_effective} < {t_prescribed}"
            ));
        }
        if !(a0.is_finite() && a0 > 0.0) {
            problems.push(format!("a0 must be positive, got {a0}"));
        }
        if problems.is_empty() {
            Ok(Self {
                t_prescribed,
                t_effective,
                a0,
            })
        } else {
            Err(WarpError::Invalid(problems.join("; ")))
        }
    }

    pub fn t_prescribed(&self) -> f64 {
        self.t_prescribed
    }

    pub fn t_effective(&self) -> f64 {
        self.t_effective
    }

    fn check_time(&self, t: f64) -> Result<(), WarpError> {
        if (0.0..self.t_effective).contains(&t) {
            Ok(())
        } else {
            Err(WarpError::TimeDomain {
                t,
                t_effective: self.t_effective,
            })
        }
    }
}

impl Warp for TimeWarp {
    fn warp(&self, t: f64) -> Result<f64, WarpError> {
        self.check_time(t)?;
        Ok(self.a0 * t / (1.0 - t / self.t_effective))
    }

    fn unwarp(&self, tau: f64) -> Result<f64, WarpError> {
        if !(tau >= 0.0) {
            return Err(WarpError::WarpedDomain { tau });
        }
        if tau.is_infinite() {
            return Ok(self.t_effective);
        }
        Ok(tau * self.t_effective / (self.a0 * self.t_effective + tau))
    }

    fn alpha(&self, tau: f64) -> f64 {
        debug_assert!(tau >= 0.0);
        let s = 1.0 + tau / (self.a0 * self.t_effective);
        self.a0 * s * s
    }

    fn alpha_prime(&self, tau: f64) -> f64 {
        debug_assert!(tau >= 0.0);
        (2.0 / self.t_effective) * (1.0 + tau / (self.a0 * self.t_effective))
    }

    fn a0(&self) -> f64 {
        self.a0
    }

    fn terminal_time(&self) -> f64 {
        self.t_effective
    }
}

/// Constants of the temporal forcing functions `gamma1`, `gamma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingConfig {
    pub c_gamma1: f64,
    pub c_tilde_gamma1: f64,
    pub c_gamma2: f64,
    pub c_tilde_gamma2: f64,
}

impl ForcingConfig {
    /// Validated constructor: `c_gamma1, c_gamma2 > 0`, the tilde constants `>= 0`.
    pub fn new(
        c_gamma1: f64,
        c_tilde_gamma1: f64,
        c_gamma2: f64,
        c_tilde_gamma2: f64,
    ) -> Result<Self, Vec<String>> {
        let f = Self {
            c_gamma1,
            c_tilde_gamma1,
            c_gamma2,
            c_tilde_gamma2,
        };
        let problems = f.violations();
        if problems.is_empty() {
            Ok(f)
        } else {
            Err(problems)
        }
    }

    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("c_gamma1", self.c_gamma1), ("c_gamma2", self.c_gamma2)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("c_tilde_gamma1", self.c_tilde_gamma1),
            ("c_tilde_gamma2", self.c_tilde_gamma2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        out
    }

    /// `1 / gamma1` given the current rate `alpha(tau)`.
    pub fn inv_gamma1_from_alpha(&self, alpha: f64) -> f64 {
        self.c_gamma1 * alpha + self.c_tilde_gamma1
    }

    /// `gamma2 / gamma1` given the current rate `alpha(tau)`.
    pub fn gamma2_over_gamma1_from_alpha(&self, alpha: f64) -> f64 {
        self.c_gamma2 * alpha + self.c_tilde_gamma2
    }
}

pub fn gamma1<W: Warp + ?Sized>(w: &W, f: &ForcingConfig, t: f64) -> Result<f64, WarpError> {
    let tau = w.warp(t)?;
    Ok(1.0 / f.inv_gamma1_from_alpha(w.alpha(tau)))
}

pub fn gamma2<W: Warp + ?Sized>(w: &W, f: &ForcingConfig, t: f64) -> Result<f64, WarpError> {
    let tau = w.warp(t)?;
    let alpha = w.alpha(tau);
    Ok(f.gamma2_over_gamma1_from_alpha(alpha) / f.inv_gamma1_from_alpha(alpha))
}

/// Result of sampling a warp against the admissibility conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub starts_at_zero: bool,
    pub strictly_increasing: bool,
    pub alpha_above_a0: bool,
    /// Worst relative mismatch between `alpha(warp(t))` and a central
    /// finite difference of `warp`.
    pub worst_rate_mismatch: f64,
    /// Worst relative mismatch between `alpha_prime` and a central finite
    /// difference of `alpha`.
    pub worst_alpha_prime_mismatch: f64,
}

impl AdmissibilityReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.starts_at_zero
            && self.strictly_increasing
            && self.alpha_above_a0
            && self.worst_rate_mismatch <= rel_tol
            && self.worst_alpha_prime_mismatch <= rel_tol
    }
}

/// Samples a plug-in warp on `points` times in `[0, fraction * T)` and
/// cross-checks its rate functions by finite differences.
pub fn check_admissible<W: Warp + ?Sized>(w: &W, points: usize, fraction: f64) -> AdmissibilityReport {
    let t_end = w.terminal_time() * fraction;
    let h_t = 1e-7 * w.terminal_time();
    let mut report = AdmissibilityReport {
        starts_at_zero: w.warp(0.0).map(|v| v == 0.0).unwrap_or(false),
        strictly_increasing: true,
        alpha_above_a0: true,
        worst_rate_mismatch: 0.0,
        worst_alpha_prime_mismatch: 0.0,
    };
    let mut prev = f64::NEG_INFINITY;
    for k in 0..points {
        let t = t_end * k as f64 / points as f64;
        let Ok(tau) = w.warp(t) else {
            report.strictly_increasing = false;
            continue;
        };
        if tau <= prev {
            report.strictly_increasing = false;
        }
        prev = tau;
        let alpha = w.alpha(tau);
        if alpha < w.a0() {
            report.alpha_above_a0 = false;
        }
        if t >= h_t {
            if let (Ok(hi), Ok(lo)) = (w.warp(t + h_t), w.warp(t - h_t)) {
                let fd = (hi - lo) / (2.0 * h_t);
                report.worst_rate_mismatch = report.worst_rate_mismatch.max((fd - alpha).abs() / alpha);
            }
        }
        let h_tau = 1e-6 * (1.0 + tau);
        if tau >= h_tau {
            let fd = (w.alpha(tau + h_tau) - w.alpha(tau - h_tau)) / (2.0 * h_tau);
            let ap = w.alpha_prime(tau);
            report.worst_alpha_prime_mismatch =
                report.worst_alpha_prime_mismatch.max((fd - ap).abs() / ap.abs().max(1e-300));
        }
    }
    report
}
