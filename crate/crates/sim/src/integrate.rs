use ptstab_core::controller::{self, ControlOutput, ControllerError, ControllerState, Safeguards};
use ptstab_core::{kappa, ControllerConfig, PlantDynamics, TimeWarp, Warp, WarpError};
use ptstab_plant::GroundTruth;
use thiserror::Error;

use crate::monitor::{lyapunov_monitors, lyapunov_values, MonitorReport, FLOOR_REL_TOL};
use crate::{SafeguardActivity, Sample, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("controller failed at tau = {tau}: {source}")]
    Controller { tau: f64, source: ControllerError },
    #[error("{component} became non-finite ({value}) at tau = {tau}")]
    NonFinite { component: String, value: f64, tau: f64 },
    #[error("{which} fell below alpha by a relative {deficit:e} at tau = {tau}")]
    Floor { which: &'static str, deficit: f64, tau: f64 },
    #[error(transparent)]
    Warp(#[from] WarpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Fixed step in `tau`.
    pub d_tau: f64,
    /// Integration horizon in `tau`.
    pub tau_max: f64,
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub r0: f64,
    pub theta_hat0: f64,
    pub theta1_hat0: f64,
    pub guard: Safeguards,
    /// Record every `record_stride`-th step (the final state is always recorded).
    pub record_stride: usize,
    /// Apply `u = 0` to the plant while still integrating the controller states.
    pub force_zero_input: bool,
    /// Time `t` at which `|x|` is reported.
    pub check_time: f64,
}

impl SimConfig {
    /// Defaults for a plant of the given dimensions: `d_tau = 1e-4`, horizon
    /// `warp(T (1 - 1e-6))`, `|x|` reported at `0.975 T`, no safeguards.
    pub fn with_defaults(warp: &TimeWarp, x0: Vec<f64>, z0: Vec<f64>) -> Result<Self, WarpError> {
        let t = warp.t_prescribed();
        Ok(Self {
            d_tau: 1e-4,
            tau_max: warp.warp(t * (1.0 - 1e-6))?,
            x0,
            z0,
            r0: 1.0,
            theta_hat0: 1.0,
            theta1_hat0: 0.0,
            guard: Safeguards::default(),
            record_stride: 1,
            force_zero_input: false,
            check_time: 0.975 * t,
        })
    }

    pub fn violations<W: Warp + ?Sized>(&self, warp: &W, n: usize, n_z: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.d_tau.is_finite() && self.d_tau > 0.0) {
            out.push(format!("d_tau must be positive, got {}", self.d_tau));
        }
        if !(self.tau_max.is_finite() && self.tau_max >= 0.0) {
            out.push(format!("tau_max must be finite and non-negative, got {}", self.tau_max));
        }
        if self.x0.len() != n {
            out.push(format!("x0 has {} entries, plant order is {n}", self.x0.len()));
        }
        if self.z0.len() != n_z {
            out.push(format!("z0 has {} entries, appended order is {n_z}", self.z0.len()));
        }
        if self.x0.iter().chain(&self.z0).any(|v| !v.is_finite()) {
            out.push("initial state must be finite".to_string());
        }
        if self.record_stride == 0 {
            out.push("record_stride must be >= 1".to_string());
        }
        if !(self.guard.dead_zone.is_finite() && self.guard.dead_zone >= 0.0) {
            out.push(format!("dead_zone must be non-negative, got {}", self.guard.dead_zone));
        }
        if let Some(cap) = self.guard.r_cap {
            if !(cap.is_finite() && cap >= 1.0) {
                out.push(format!("r_cap must be >= 1, got {cap}"));
            }
        }
        if let Err(ControllerError::State(msg)) =
            ControllerState::initial(warp, self.r0, self.theta_hat0, self.theta1_hat0)
        {
            out.push(msg);
        }
        out
    }
}

/// Plant state plus controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub ctrl: ControllerState,
}

impl SimState {
    fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.x.len() + self.z.len() + 3);
        y.extend_from_slice(&self.x);
        y.extend_from_slice(&self.z);
        y.extend_from_slice(&[self.ctrl.r, self.ctrl.theta_hat, self.ctrl.theta1_hat]);
        y
    }

    fn from_flat(y: &[f64], n: usize, n_z: usize) -> Self {
        let m = n + n_z;
        Self {
            x: y[..n].to_vec(),
            z: y[n..m].to_vec(),
            ctrl: ControllerState {
                r: y[m],
                theta_hat: y[m + 1],
                theta1_hat: y[m + 2],
            },
        }
    }
}

/// Output of one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// The control law evaluated at the start of the step.
    pub start: ControlOutput,
    pub dead_zone_active: bool,
    pub r_cap_active: bool,
}

/// The coupled plant/controller vector field in `tau`.
pub struct Simulator<'a, P: ?Sized, W: Warp = TimeWarp> {
    pub plant: &'a P,
    pub ctrl: &'a ControllerConfig<W>,
    pub guard: Safeguards,
    pub force_zero_input: bool,
}

impl<'a, P: PlantDynamics + ?Sized, W: Warp> Simulator<'a, P, W> {
    pub fn new(plant: &'a P, ctrl: &'a ControllerConfig<W>, cfg: &SimConfig) -> Self {
        Self {
            plant,
            ctrl,
            guard: cfg.guard,
            force_zero_input: cfg.force_zero_input,
        }
    }

    /// Evaluates the control law at `(y, tau)` and writes `dy/dtau`.
    pub fn derivative(&self, tau: f64, y: &[f64], dy: &mut [f64]) -> Result<ControlOutput, SimError> {
        let n = self.plant.order();
        let m = n + self.plant.appended_order();
        let st = ControllerState {
            r: y[m],
            theta_hat: y[m + 1],
            theta1_hat: y[m + 2],
        };
        let (x, z) = (&y[..n], &y[n..m]);
        let out = controller::evaluate(self.ctrl, self.plant, &st, x, tau, &self.guard)
            .map_err(|source| SimError::Controller { tau, source })?;
        let u = if self.force_zero_input { 0.0 } else { out.u };
        let t = self.ctrl.warp.unwarp(tau)?;
        let alpha = self.ctrl.warp.alpha(tau);
        self.plant.rhs_x(x, z, u, t, &mut dy[..n]);
        self.plant.rhs_z(x, z, u, t, &mut dy[n..m]);
        for v in &mut dy[..m] {
            *v /= alpha;
        }
        dy[m] = out.rates.dr;
        dy[m + 1] = out.rates.dtheta_hat;
        dy[m + 2] = out.rates.dtheta1_hat;
        Ok(out)
    }

    /// One classical Runge-Kutta step from `tau` to `tau + h`, with the
    /// control recomputed at every stage, followed by the floor clamp.
    pub fn step(&self, state: &SimState, tau: f64, h: f64) -> Result<(SimState, StepInfo), SimError> {
        let n = self.plant.order();
        let n_z = self.plant.appended_order();
        let y = state.to_flat();
        let dim = y.len();
        let mut k = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        let mut tmp = vec![0.0; dim];

        let start = self.derivative(tau, &y, &mut k[0])?;
        let mut dead = start.dead_zone_active;
        let mut capped = start.r_cap_active;
        for (stage, c) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..dim {
                tmp[i] = y[i] + c * h * k[stage - 1][i];
            }
            let mut d = vec![0.0; dim];
            let out = self.derivative(tau + c * h, &tmp, &mut d)?;
            k[stage] = d;
            dead |= out.dead_zone_active;
            capped |= out.r_cap_active;
        }
        let mut next = y.clone();
        for i in 0..dim {
            next[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }

        let tau_next = tau + h;
        check_finite(&next, n, n_z, tau_next)?;
        let alpha = self.ctrl.warp.alpha(tau_next);
        let m = n + n_z;
        for (idx, which) in [(m, "r"), (m + 1, "theta_hat")] {
            if next[idx] < alpha {
                let deficit = (alpha - next[idx]) / alpha;
                if deficit > FLOOR_REL_TOL {
                    return Err(SimError::Floor {
                        which,
                        deficit,
                        tau: tau_next,
                    });
                }
                next[idx] = alpha;
            }
        }
        Ok((
            SimState::from_flat(&next, n, n_z),
            StepInfo {
                start,
                dead_zone_active: dead,
                r_cap_active: capped,
            },
        ))
    }
}

fn check_finite(y: &[f64], n: usize, n_z: usize, tau: f64) -> Result<(), SimError> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        let component = if i < n {
            format!("x{}", i + 1)
        } else if i < n + n_z {
            format!("z{}", i - n + 1)
        } else {
            ["r", "theta_hat", "theta1_hat"][i - n - n_z].to_string()
        };
        return Err(SimError::NonFinite {
            component,
            value: y[i],
            tau,
        });
    }
    Ok(())
}

fn record<P, W>(
    ctrl: &ControllerConfig<W>,
    plant: &P,
    state: &SimState,
    tau: f64,
    out: &ControlOutput,
) -> Result<Sample, SimError>
where
    P: GroundTruth + ?Sized,
    W: Warp,
{
    let mut s = Sample {
        t: ctrl.warp.unwarp(tau)?,
        tau,
        x: state.x.clone(),
        z: state.z.clone(),
        eta: out.eta.eta.clone(),
        u: out.u,
        u1: out.u1,
        u2: out.u2,
        r: state.ctrl.r,
        theta_hat: state.ctrl.theta_hat,
        theta1_hat: state.ctrl.theta1_hat,
        v: 0.0,
        v_bar: 0.0,
        alpha: ctrl.warp.alpha(tau),
    };
    let (v, v_bar) = lyapunov_values(ctrl, &plant.true_disturbance_constants(), &s);
    s.v = v;
    s.v_bar = v_bar;
    Ok(s)
}

/// Integrates from `tau = 0` to `cfg.tau_max` and evaluates the monitors.
pub fn run<P, W>(
    cfg: &SimConfig,
    plant: &P,
    ctrl: &ControllerConfig<W>,
) -> Result<(Trajectory, MonitorReport), SimError>
where
    P: PlantDynamics + GroundTruth + ?Sized,
    W: Warp,
{
    let n = plant.order();
    let n_z = plant.appended_order();
    let mut problems = cfg.violations(&ctrl.warp, n, n_z);
    problems.extend(ctrl.violations());
    if !problems.is_empty() {
        return Err(SimError::Config(problems));
    }

    let sim = Simulator::new(plant, ctrl, cfg);
    let mut state = SimState {
        x: cfg.x0.clone(),
        z: cfg.z0.clone(),
        ctrl: ControllerState {
            r: cfg.r0,
            theta_hat: cfg.theta_hat0,
            theta1_hat: cfg.theta1_hat0,
        },
    };
    let steps = if cfg.tau_max == 0.0 {
        0
    } else {
        (cfg.tau_max / cfg.d_tau - 1e-9).ceil() as usize
    };

    let mut samples = Vec::with_capacity(steps / cfg.record_stride + 2);
    let mut activity = SafeguardActivity::default();
    for k in 0..steps {
        let tau = k as f64 * cfg.d_tau;
        let h = if k + 1 == steps { cfg.tau_max - tau } else { cfg.d_tau };
        let (next, info) = sim.step(&state, tau, h)?;
        if k % cfg.record_stride == 0 {
            samples.push(record(ctrl, plant, &state, tau, &info.start)?);
        }
        activity.dead_zone_steps += info.dead_zone_active as usize;
        activity.r_cap_steps += info.r_cap_active as usize;
        state = next;
    }
    let mut scratch = vec![0.0; n + n_z + 3];
    let last = sim.derivative(cfg.tau_max, &state.to_flat(), &mut scratch)?;
    samples.push(record(ctrl, plant, &state, cfg.tau_max, &last)?);

    let metadata = vec![
        ("d_tau".to_string(), format!("{:e}", cfg.d_tau)),
        ("tau_max".to_string(), format!("{:.17e}", cfg.tau_max)),
        ("record_stride".to_string(), cfg.record_stride.to_string()),
        ("dead_zone".to_string(), format!("{:e}", cfg.guard.dead_zone)),
        (
            "r_cap".to_string(),
            cfg.guard.r_cap.map_or("off".to_string(), |c| format!("{c:e}")),
        ),
        (
            "sign_smoothing".to_string(),
            if ctrl.sign_smoothing > 0.0 {
                format!("{:e} (smoothed sign, deviates from the exact law)", ctrl.sign_smoothing)
            } else {
                "0 (exact sign)".to_string()
            },
        ),
        ("gate".to_string(), format!("{:?}", ctrl.gate)),
        ("force_zero_input".to_string(), cfg.force_zero_input.to_string()),
    ];
    let traj = Trajectory {
        n,
        n_z,
        samples,
        d_tau: cfg.d_tau,
        record_stride: cfg.record_stride,
        steps,
        safeguards: activity,
        metadata,
    };
    let kappa = kappa(&ctrl.cert, ctrl.zeta0, plant.sigma());
    let report = lyapunov_monitors(&traj, kappa, cfg.check_time);
    Ok((traj, report))
}
