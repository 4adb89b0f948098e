//! Plant abstraction for strict-feedback systems with appended dynamics.
//!
//! Indices follow the usual 1-based convention of the system equations:
//! `phi_upper(i, ..)` is the coupling from `x_{i+1}` into `x_i`, valid for
//! `1 <= i <= n-1`, and `phi_bound(i, j, ..)` is defined for `1 <= j <= i <= n`.
//!
//! [`KnownStructure`] is everything the controller may read. Uncertain
//! parameters, the true input gain and the disturbance constants are not
//! reachable through it.

use std::fmt;

/// Known functions and constants of the plant.
pub trait KnownStructure: Send + Sync {
    /// Nominal order `n` (dimension of `x`).
    fn order(&self) -> usize;
    /// Order of the unmeasured appended state `z`.
    fn appended_order(&self) -> usize;
    /// Upper-diagonal coupling `phi_{(i,i+1)}(x, t)`.
    fn phi_upper(&self, i: usize, x: &[f64], t: f64) -> f64;
    /// Lower bound `sigma` on every upper-diagonal coupling.
    fn sigma(&self) -> f64;
    /// The state-dependent bound scaling `Gamma(x1)`.
    fn gamma(&self, x1: f64) -> f64;
    fn gamma_derivative(&self, x1: f64) -> f64;
    /// Bound function `phi_{(i,j)}(x, t)`.
    fn phi_bound(&self, i: usize, j: usize, x: &[f64], t: f64) -> f64;
    /// `epsilon_{(i,j)}`.
    fn eps(&self, i: usize, j: usize) -> f64;
    /// `epsilon~_{(i,2)}` for `2 <= i <= n`.
    fn eps_tilde(&self, i: usize) -> f64;
    /// Upper bound on `phi_{(1,2)} / phi_{(2,3)}`.
    fn phi12_upper(&self, x1: f64) -> f64;
    fn phi12_upper_derivative(&self, x1: f64) -> f64;
    /// Lower bound on `phi_{(1,2)} / phi_{(2,3)}`.
    fn phi12_lower_ratio(&self, x1: f64) -> f64;
    /// Cascading dominance constant `rho_i`, used for `3 <= i <= n-1`.
    fn rho_upper(&self, i: usize) -> f64;

    /// `phi_{(2,3)}`, taken as 1 for second-order plants where it does not exist.
    fn phi23(&self, x: &[f64], t: f64) -> f64 {
        if self.order() >= 3 {
            self.phi_upper(2, x, t)
        } else {
            1.0
        }
    }
}

/// A simulatable plant: known structure plus the (uncertain) right-hand side.
pub trait PlantDynamics: KnownStructure {
    /// `dx/dt`, written into `out` (length `n`).
    fn rhs_x(&self, x: &[f64], z: &[f64], u: f64, t: f64, out: &mut [f64]);
    /// `dz/dt`, written into `out` (length `n_z`).
    fn rhs_z(&self, x: &[f64], z: &[f64], u: f64, t: f64, out: &mut [f64]);
}

/// One sample point `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub t: f64,
}

/// Uniform tensor grid over `[lo, hi]^dim` with `points` per axis, all at time `t`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize, dim: usize, t: f64) -> Vec<Sample> {
    assert!(points >= 1);
    let axis: Vec<f64> = if points == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    };
    let total = points.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; dim];
            for xi in x.iter_mut() {
                *xi = axis[idx % points];
                idx /= points;
            }
            Sample { x, t }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    /// Smallest observed slack (negative means violated).
    pub worst_margin: f64,
    /// Where the worst margin occurred.
    pub worst_sample: Option<Sample>,
    pub vacuous: bool,
}

impl AssumptionCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst_margin: f64::INFINITY,
            worst_sample: None,
            vacuous: true,
        }
    }

    fn record(&mut self, margin: f64, s: &Sample) {
        self.vacuous = false;
        // NaN margins count as violations
        if margin.is_nan() || margin < self.worst_margin {
            self.worst_margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
            self.worst_sample = Some(s.clone());
        }
    }

    pub fn passed(&self) -> bool {
        self.vacuous || self.worst_margin >= 0.0
    }
}

/// Sampled margins for A1, A4, A5 and the ratio bounds on the `phi_{(i,j)}`.
/// Results are sampled, not proven.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    pub lower_bound_a1: AssumptionCheck,
    pub cascading_a4: AssumptionCheck,
    pub ratio_sandwich_lower_a5: AssumptionCheck,
    pub ratio_sandwich_upper_a5: AssumptionCheck,
    pub eps_ratio_bounds: AssumptionCheck,
}

impl AssumptionReport {
    pub fn checks(&self) -> [&AssumptionCheck; 5] {
        [
            &self.lower_bound_a1,
            &self.cascading_a4,
            &self.ratio_sandwich_lower_a5,
            &self.ratio_sandwich_upper_a5,
            &self.eps_ratio_bounds,
        ]
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed())
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assumption check over {} samples (sampled, not proven)", self.samples)?;
        for c in self.checks() {
            if c.vacuous {
                writeln!(f, "  {:<28} vacuously satisfied", c.name)?;
            } else {
                let at = c
                    .worst_sample
                    .as_ref()
                    .map(|s| format!("{:?} t={}", s.x, s.t))
                    .unwrap_or_default();
                writeln!(
                    f,
                    "  {:<28} {}  worst margin {:.6e} at {}",
                    c.name,
                    if c.passed() { "pass" } else { "FAIL" },
                    c.worst_margin,
                    at
                )?;
            }
        }
        write!(f, "overall: {}", if self.all_passed() { "pass" } else { "FAIL" })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssumptionError {
    #[error("sample grid is empty")]
    EmptyGrid,
    #[error("sample has dimension {got}, plant order is {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Checks the structural assumptions at every grid sample.
pub fn check_assumptions<P: KnownStructure + ?Sized>(
    plant: &P,
    grid: &[Sample],
) -> Result<AssumptionReport, AssumptionError> {
    if grid.is_empty() {
        return Err(AssumptionError::EmptyGrid);
    }
    let n = plant.order();
    let mut a1 = AssumptionCheck::new("A1 lower bound");
    let mut a4 = AssumptionCheck::new("A4 cascading dominance");
    let mut a5_lo = AssumptionCheck::new("A5 ratio lower");
    let mut a5_hi = AssumptionCheck::new("A5 ratio upper");
    let mut eps = AssumptionCheck::new("A2 epsilon ratio bounds");

    for s in grid {
        if s.x.len() != n {
            return Err(AssumptionError::Dimension {
                expected: n,
                got: s.x.len(),
            });
        }
        let (x, t) = (s.x.as_slice(), s.t);
        let sigma = plant.sigma();
        for i in 1..n {
            a1.record(plant.phi_upper(i, x, t) - sigma, s);
        }
        for i in 3..n {
            let m = plant.phi_upper(i, x, t) - plant.rho_upper(i) * plant.phi_upper(i - 1, x, t);
            a4.record(m, s);
        }
        if n >= 2 {
            let ratio = plant.phi_upper(1, x, t) / plant.phi23(x, t);
            a5_lo.record(ratio - plant.phi12_lower_ratio(x[0]), s);
            a5_hi.record(plant.phi12_upper(x[0]) - ratio, s);
        }

        let p12 = plant.phi_upper(1, x, t);
        let p23 = plant.phi23(x, t);
        for i in 1..=n {
            eps.record(plant.eps(i, 1) - plant.phi_bound(i, 1, x, t) / p12, s);
        }
        for i in 2..=n {
            let m = plant.eps_tilde(i) - plant.phi_bound(i, 2, x, t) / (p12 * p23).sqrt();
            eps.record(m, s);
        }
        // the double sum in w2 runs to i = n, so check the last row as well
        for i in 2..=n {
            for j in 2..=i {
                eps.record(plant.eps(i, j) - plant.phi_bound(i, j, x, t) / p23, s);
            }
        }
    }

    Ok(AssumptionReport {
        samples: grid.len(),
        lower_bound_a1: a1,
        cascading_a4: a4,
        ratio_sandwich_lower_a5: a5_lo,
        ratio_sandwich_upper_a5: a5_hi,
        eps_ratio_bounds: eps,
    })
}
