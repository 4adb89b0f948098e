//! The adaptive prescribed-time control law.
//!
//! The controller has three internal states: the high-gain scaling
//! parameter `r` and the adaptation parameters `theta_hat`, `theta1_hat`.
//! Every function here reads the plant only through [`KnownStructure`].
//!
//! Rates are returned with respect to warped time `tau`.

use thiserror::Error;

use crate::lyapunov::LyapunovCertificate;
use crate::plant::KnownStructure;
use crate::timewarp::{ForcingConfig, TimeWarp, Warp, WarpError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("non-finite value {value} in {term}")]
    NonFinite { term: &'static str, value: f64 },
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid controller state: {0}")]
    State(String),
}

fn finite(term: &'static str, value: f64) -> Result<f64, ControllerError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ControllerError::NonFinite { term, value })
    }
}

/// Interpolation used by the gate `lambda(s)` on `(-eps_r, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateShape {
    /// `1 + s / eps_r`.
    #[default]
    LinearRamp,
    /// `3 v^2 - 2 v^3` with `v = 1 + s / eps_r`.
    Smoothstep,
}

#[derive(Debug, Clone)]
pub struct ControllerConfig<W: Warp = TimeWarp> {
    pub cert: LyapunovCertificate,
    pub warp: W,
    pub forcing: ForcingConfig,
    pub zeta0: f64,
    pub zeta_floor: f64,
    pub c_theta: f64,
    pub c_theta1: f64,
    pub epsilon_r: f64,
    /// Width of the saturating ramp replacing the sign function in `u2`;
    /// 0 keeps the exact sign.
    pub sign_smoothing: f64,
    pub gate: GateShape,
}

impl<W: Warp> ControllerConfig<W> {
    /// Lists every violated constraint on the constants.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.forcing.violations();
        for (name, v) in [
            ("zeta0", self.zeta0),
            ("zeta_floor", self.zeta_floor),
            ("c_theta", self.c_theta),
            ("c_theta1", self.c_theta1),
            ("epsilon_r", self.epsilon_r),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sign_smoothing.is_finite() && self.sign_smoothing >= 0.0) {
            out.push(format!(
                "sign_smoothing must be non-negative, got {}",
                self.sign_smoothing
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

/// `r`, `theta_hat`, `theta1_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub r: f64,
    pub theta_hat: f64,
    pub theta1_hat: f64,
}

impl ControllerState {
    /// Checks the initialization constraints `r, theta_hat >= max{1, alpha(0)}`
    /// and `theta1_hat >= 0`.
    pub fn initial<W: Warp + ?Sized>(
        warp: &W,
        r: f64,
        theta_hat: f64,
        theta1_hat: f64,
    ) -> Result<Self, ControllerError> {
        let floor = warp.alpha(0.0).max(1.0);
        let mut problems = Vec::new();
        if !(r >= floor) {
            problems.push(format!("r0 = {r} must be >= max(1, alpha(0)) = {floor}"));
        }
        if !(theta_hat >= floor) {
            problems.push(format!("theta_hat0 = {theta_hat} must be >= max(1, alpha(0)) = {floor}"));
        }
        if !(theta1_hat >= 0.0 && theta1_hat.is_finite()) {
            problems.push(format!("theta1_hat0 = {theta1_hat} must be >= 0"));
        }
        if problems.is_empty() {
            Ok(Self {
                r,
                theta_hat,
                theta1_hat,
            })
        } else {
            Err(ControllerError::State(problems.join("; ")))
        }
    }
}

/// `eta = [eta_2 .. eta_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    pub eta: Vec<f64>,
}

impl ScaledState {
    pub fn norm_sq(&self) -> f64 {
        self.eta.iter().map(|e| e * e).sum()
    }

    /// Inverse of [`scaled_eta`]: `x_2 = r eta_2 - zeta`, `x_i = r^{i-1} eta_i`.
    pub fn reconstruct(&self, x1: f64, r: f64, zeta: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.eta.len() + 1);
        x.push(x1);
        let mut rp = r;
        for (k, e) in self.eta.iter().enumerate() {
            if k == 0 {
                x.push(r * e - zeta);
            } else {
                x.push(rp * e);
            }
            rp *= r;
        }
        x
    }
}

pub fn q1<W: Warp, P: KnownStructure + ?Sized>(cfg: &ControllerConfig<W>, plant: &P, x1: f64) -> f64 {
    plant.phi12_upper(x1) / cfg.cert.nu_c() + 2.0 * cfg.zeta0
}

pub fn q2<P: KnownStructure + ?Sized>(plant: &P, x1: f64) -> f64 {
    plant.gamma(x1) * plant.eps(1, 1)
}

/// `zeta1 = 4 max{zeta_floor, q1 + q2}`.
pub fn zeta1<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    x1: f64,
) -> Result<f64, ControllerError> {
    let q = finite("q1 + q2", q1(cfg, plant, x1) + q2(plant, x1))?;
    Ok(4.0 * cfg.zeta_floor.max(q))
}

/// Derivative of [`zeta1`] on its active branch; zero while the floor is active.
pub fn zeta1_prime<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    x1: f64,
) -> Result<f64, ControllerError> {
    let q = q1(cfg, plant, x1) + q2(plant, x1);
    if q <= cfg.zeta_floor {
        return Ok(0.0);
    }
    let dq = plant.phi12_upper_derivative(x1) / cfg.cert.nu_c()
        + plant.gamma_derivative(x1) * plant.eps(1, 1);
    finite("zeta1'", 4.0 * dq)
}

/// `w1(x1, theta_hat, theta_hat_dot / phi_(1,2))`.
pub fn w1<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    x1: f64,
    theta_hat: f64,
    ratio: f64,
) -> Result<f64, ControllerError> {
    let lmax = cfg.cert.lambda_max();
    let z1 = zeta1(cfg, plant, x1)?;
    let slope = zeta1_prime(cfg, plant, x1)? * x1 + z1;
    let th2 = theta_hat * theta_hat;
    let value = 2.0 * theta_hat * lmax * slope.abs()
        + (2.0 / cfg.zeta0) * lmax * lmax * ratio * ratio * z1 * z1
        + (4.0 / cfg.zeta0) * lmax * lmax * z1 * z1 * th2 * th2 * slope * slope;
    finite("w1", value)
}

/// `w2(x1, theta_hat)`.
pub fn w2<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    x1: f64,
    theta_hat: f64,
) -> Result<f64, ControllerError> {
    let n = plant.order();
    let lmax = cfg.cert.lambda_max();
    let g = plant.gamma(x1);
    let p12 = plant.phi12_upper(x1);
    let z1 = zeta1(cfg, plant, x1)?;
    let slope = zeta1_prime(cfg, plant, x1)? * x1 + z1;

    let eps_col1 = (2..=n).map(|i| plant.eps(i, 1).powi(2)).sum::<f64>().sqrt();
    let eps_tilde = (2..=n).map(|i| plant.eps_tilde(i).powi(2)).sum::<f64>().sqrt();
    let eps_block = (2..=n)
        .flat_map(|i| (2..=i).map(move |j| (i, j)))
        .map(|(i, j)| plant.eps(i, j).powi(2))
        .sum::<f64>()
        .sqrt();
    let e11 = plant.eps(1, 1);

    let value = 2.0 * lmax * lmax * g * g / cfg.zeta0
        * (p12 * eps_col1 + theta_hat * theta_hat * z1 * z1 * eps_tilde)
        + 2.0 * g * lmax * eps_block
        + (4.0 / cfg.zeta0) * e11 * e11 * p12 * g * g * lmax * lmax * slope * slope * theta_hat * theta_hat;
    finite("w2", value)
}

/// `eta_2 = (x_2 + zeta) / r`, `eta_i = x_i / r^{i-1}` for `i >= 3`.
pub fn scaled_eta(x: &[f64], st: &ControllerState, zeta: f64) -> ScaledState {
    let r = st.r;
    let mut eta = Vec::with_capacity(x.len().saturating_sub(1));
    let mut rp = r;
    for (k, &xi) in x.iter().enumerate().skip(1) {
        if k == 1 {
            eta.push((xi + zeta) / r);
        } else {
            eta.push(xi / rp);
        }
        rp *= r;
    }
    ScaledState { eta }
}

/// `zeta(x1, theta_hat) = theta_hat x1 zeta1(x1)`.
pub fn zeta<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    x1: f64,
    theta_hat: f64,
) -> Result<f64, ControllerError> {
    Ok(theta_hat * x1 * zeta1(cfg, plant, x1)?)
}

/// `R = max{1, (4/nu) [w1 phi12_upper + theta_hat w2]}`.
pub fn big_r<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    x1: f64,
    theta_hat: f64,
    ratio: f64,
) -> Result<f64, ControllerError> {
    let a = w1(cfg, plant, x1, theta_hat, ratio)?;
    let b = w2(cfg, plant, x1, theta_hat)?;
    let value = (4.0 / cfg.cert.nu_c()) * (a * plant.phi12_upper(x1) + theta_hat * b);
    Ok(finite("R", value)?.max(1.0))
}

/// `Omega = r / (nu_lower a0) [w1 phi_(1,2) + theta_hat w2 phi_(2,3)]`.
pub fn omega<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    r: f64,
    x: &[f64],
    t: f64,
    theta_hat: f64,
    ratio: f64,
) -> Result<f64, ControllerError> {
    let a = w1(cfg, plant, x[0], theta_hat, ratio)?;
    let b = w2(cfg, plant, x[0], theta_hat)?;
    let value = r / (cfg.cert.nu_lower() * cfg.warp.a0())
        * (a * plant.phi_upper(1, x, t) + theta_hat * b * plant.phi23(x, t));
    finite("Omega", value)
}

/// Gate `lambda(s)`: 1 for `s >= 0`, 0 for `s <= -eps_r`.
pub fn gate_lambda<W: Warp>(cfg: &ControllerConfig<W>, s: f64) -> f64 {
    if s >= 0.0 {
        return 1.0;
    }
    if s <= -cfg.epsilon_r {
        return 0.0;
    }
    let v = 1.0 + s / cfg.epsilon_r;
    match cfg.gate {
        GateShape::LinearRamp => v,
        GateShape::Smoothstep => v * v * (3.0 - 2.0 * v),
    }
}

/// `chi = phi_(1,2) q2 x1^2 + r w2 phi_(2,3) |eta|^2`.
pub fn chi<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    r: f64,
    x: &[f64],
    t: f64,
    theta_hat: f64,
    eta: &ScaledState,
) -> Result<f64, ControllerError> {
    let x1 = x[0];
    let value = plant.phi_upper(1, x, t) * q2(plant, x1) * x1 * x1
        + r * w2(cfg, plant, x1, theta_hat)? * plant.phi23(x, t) * eta.norm_sq();
    finite("chi", value)
}

/// Last entry of `eta^T P`, i.e. `eta^T P B`.
pub fn eta_p_b(cert: &LyapunovCertificate, eta: &ScaledState) -> f64 {
    let p = cert.p();
    let last = p.ncols() - 1;
    eta.eta.iter().enumerate().map(|(i, e)| e * p[(i, last)]).sum()
}

/// `K eta`.
pub fn k_eta(gains: &[f64], eta: &ScaledState) -> f64 {
    gains.iter().zip(&eta.eta).map(|(k, e)| k * e).sum()
}

/// `chi1 = 2 r^2 |eta^T P B K eta| + 2 |eta^T P B| Gamma / r^{n-2}`.
pub fn chi1(
    cert: &LyapunovCertificate,
    r: f64,
    eta: &ScaledState,
    gains: &[f64],
    gamma: f64,
    n: usize,
) -> Result<f64, ControllerError> {
    let pb = eta_p_b(cert, eta);
    let value = 2.0 * r * r * (pb * k_eta(gains, eta)).abs() + 2.0 * pb.abs() * gamma / r.powi(n as i32 - 2);
    finite("chi1", value)
}

/// Exact sign (`S(0) = 1`) or, with `width > 0`, the odd ramp `d / max(|d|, width)`.
pub fn sign_fn(delta: f64, width: f64) -> f64 {
    if width > 0.0 {
        delta / delta.abs().max(width)
    } else if delta >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn check_tau(tau: f64) -> Result<(), ControllerError> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(WarpError::WarpedDomain { tau }.into())
    }
}

/// `u1 = -(r^n / gamma1) K eta`.
pub fn u1<W: Warp>(
    cfg: &ControllerConfig<W>,
    st: &ControllerState,
    eta: &ScaledState,
    gains: &[f64],
    tau: f64,
) -> Result<f64, ControllerError> {
    check_tau(tau)?;
    let n = eta.eta.len() + 1;
    let inv_g1 = cfg.forcing.inv_gamma1_from_alpha(cfg.warp.alpha(tau));
    finite("u1", -st.r.powi(n as i32) * inv_g1 * k_eta(gains, eta))
}

/// `u2 = -S(eta^T P B) { |K eta| r^n [1/gamma1 + th1] + Gamma [gamma2/gamma1 + th1] }`.
pub fn u2<W: Warp>(
    cfg: &ControllerConfig<W>,
    st: &ControllerState,
    eta: &ScaledState,
    gains: &[f64],
    gamma: f64,
    tau: f64,
) -> Result<f64, ControllerError> {
    check_tau(tau)?;
    let n = eta.eta.len() + 1;
    let alpha = cfg.warp.alpha(tau);
    let inv_g1 = cfg.forcing.inv_gamma1_from_alpha(alpha);
    let g2_over_g1 = cfg.forcing.gamma2_over_gamma1_from_alpha(alpha);
    let magnitude = k_eta(gains, eta).abs() * st.r.powi(n as i32) * (inv_g1 + st.theta1_hat)
        + gamma * (g2_over_g1 + st.theta1_hat);
    let s = sign_fn(eta_p_b(&cfg.cert, eta), cfg.sign_smoothing);
    finite("u2", -s * magnitude)
}

/// `tau`-derivatives of the controller states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub dr: f64,
    pub dtheta_hat: f64,
    pub dtheta1_hat: f64,
}

/// Numerical safeguards applied on top of the nominal law.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Safeguards {
    /// `u2` is switched off while `|x|` is below this threshold (0 = off).
    pub dead_zone: f64,
    /// Saturation level for the gain functions `R` and `Omega` driving `r`.
    pub r_cap: Option<f64>,
}

/// Everything computed by one evaluation of the control law.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
    pub eta: ScaledState,
    pub zeta: f64,
    pub rates: Rates,
    pub big_r: f64,
    pub omega: f64,
    pub gate: f64,
    pub chi: f64,
    pub chi1: f64,
    pub dead_zone_active: bool,
    pub r_cap_active: bool,
}

/// Evaluates the control input and the controller rates at `(x, tau)`.
///
/// Order: `dtheta_hat/dtau` from `chi`, then `theta_hat_dot = alpha dtheta_hat/dtau`,
/// then the ratio feeding `w1`, `R` and `Omega`, then `dr/dtau`, then
/// `dtheta1_hat/dtau`.
pub fn evaluate<W: Warp, P: KnownStructure + ?Sized>(
    cfg: &ControllerConfig<W>,
    plant: &P,
    st: &ControllerState,
    x: &[f64],
    tau: f64,
    guard: &Safeguards,
) -> Result<ControlOutput, ControllerError> {
    let n = plant.order();
    if x.len() != n || cfg.cert.order() != n {
        return Err(ControllerError::Dimension(format!(
            "plant order {n}, certificate order {}, state length {}",
            cfg.cert.order(),
            x.len()
        )));
    }
    check_tau(tau)?;
    let t = cfg.warp.unwarp(tau)?;
    let alpha = cfg.warp.alpha(tau);
    let alpha_prime = cfg.warp.alpha_prime(tau);
    let x1 = x[0];

    let zeta = finite("zeta", zeta(cfg, plant, x1, st.theta_hat)?)?;
    let eta = scaled_eta(x, st, zeta);
    let phi23 = plant.phi23(x, t);
    let gains = cfg.cert.gains(phi23);
    let gamma = finite("Gamma", plant.gamma(x1))?;

    let chi = chi(cfg, plant, st.r, x, t, st.theta_hat, &eta)?;
    let dtheta_hat = finite("dtheta_hat", alpha_prime + cfg.c_theta * chi / alpha)?;
    let ratio = finite("theta_hat_dot / phi12", alpha * dtheta_hat / plant.phi_upper(1, x, t))?;

    let mut big_r = big_r(cfg, plant, x1, st.theta_hat, ratio)?;
    let mut omega = omega(cfg, plant, st.r, x, t, st.theta_hat, ratio)?;
    let mut r_cap_active = false;
    if let Some(cap) = guard.r_cap {
        if big_r > cap {
            big_r = cap;
            r_cap_active = true;
        }
        if omega > cap {
            omega = cap;
            r_cap_active = true;
        }
    }
    let gate = gate_lambda(cfg, big_r + alpha - st.r);
    let dr = finite("dr", gate * (omega + alpha_prime))?;

    let chi1 = chi1(&cfg.cert, st.r, &eta, &gains, gamma, n)?;
    let dtheta1_hat = finite("dtheta1_hat", cfg.c_theta1 * chi1 / alpha)?;

    let u1 = u1(cfg, st, &eta, &gains, tau)?;
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dead_zone_active = guard.dead_zone > 0.0 && x_norm < guard.dead_zone;
    let u2 = if dead_zone_active {
        0.0
    } else {
        u2(cfg, st, &eta, &gains, gamma, tau)?
    };

    Ok(ControlOutput {
        u: u1 + u2,
        u1,
        u2,
        eta,
        zeta,
        rates: Rates {
            dr,
            dtheta_hat,
            dtheta1_hat,
        },
        big_r,
        omega,
        gate,
        chi,
        chi1,
        dead_zone_active,
        r_cap_active,
    })
}
