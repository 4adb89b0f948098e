//! Coupled Lyapunov certificates for the scaled closed loop.
//!
//! A certificate is a constant symmetric positive-definite `P` of size
//! `(n-1)`, a gain row `K = [k_2 .. k_n]`, and constants `nu`, `nu_lower`,
//! `nu_upper` such that
//!
//! ```text
//! P A + A^T P <= -nu phi_(2,3) I
//! nu_lower I  <= P D + D P <= nu_upper I,   D = diag(1, .., n-1) - I/2
//! ```
//!
//! where `A` carries the upper-diagonal couplings on its superdiagonal and
//! `-K` on its last row. The first inequality depends on the state and is
//! only checked on samples.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::plant::{KnownStructure, Sample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid certificate: {0}")]
    Invalid(String),
    #[error("non-finite coupling value {value} for {what} at sample {index}")]
    NonFinite {
        what: String,
        value: f64,
        index: usize,
    },
    #[error("no samples to verify")]
    NoSamples,
}

/// How each gain `k_i(x, t)` depends on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainBasis {
    /// `k_i` is a constant.
    Constant,
    /// `k_i(x, t) = c_i * phi_(2,3)(x, t)`.
    Phi23,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    n: usize,
    p: DMatrix<f64>,
    gain_coeffs: Vec<f64>,
    gain_basis: GainBasis,
    nu_c: f64,
    nu_lower: f64,
    nu_upper: f64,
    lambda_max: f64,
}

impl LyapunovCertificate {
    /// Validates shape, symmetry, positive definiteness and the ordering of
    /// the constants. The matrix inequalities are checked by [`verify_certificate`].
    pub fn new(
        n: usize,
        p: DMatrix<f64>,
        gain_coeffs: Vec<f64>,
        gain_basis: GainBasis,
        nu_c: f64,
        nu_lower: f64,
        nu_upper: f64,
    ) -> Result<Self, CertificateError> {
        if n < 2 {
            return Err(CertificateError::Invalid(format!("order must be >= 2, got {n}")));
        }
        let m = n - 1;
        if p.nrows() != m || p.ncols() != m {
            return Err(CertificateError::Dimension(format!(
                "P must be {m}x{m}, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if gain_coeffs.len() != m {
            return Err(CertificateError::Dimension(format!(
                "gain row must have {m} entries, got {}",
                gain_coeffs.len()
            )));
        }
        let mut problems = Vec::new();
        if p.iter().any(|v| !v.is_finite()) || gain_coeffs.iter().any(|v| !v.is_finite()) {
            problems.push("entries must be finite".to_string());
        }
        let scale = p.norm().max(f64::MIN_POSITIVE);
        if (&p - p.transpose()).norm() > 1e-12 * scale {
            problems.push("P is not symmetric".to_string());
        }
        let eig = p.clone().symmetric_eigenvalues();
        if problems.is_empty() && eig.min() <= 0.0 {
            problems.push(format!("P is not positive definite (min eigenvalue {})", eig.min()));
        }
        if !(nu_c > 0.0) {
            problems.push(format!("nu_c must be positive, got {nu_c}"));
        }
        if !(nu_lower > 0.0) {
            problems.push(format!("nu_lower must be positive, got {nu_lower}"));
        }
        if !(nu_upper >= nu_lower) {
            problems.push(format!("nu_upper ({nu_upper}) must be >= nu_lower ({nu_lower})"));
        }
        if !problems.is_empty() {
            return Err(CertificateError::Invalid(problems.join("; ")));
        }
        Ok(Self {
            n,
            lambda_max: eig.max(),
            p,
            gain_coeffs,
            gain_basis,
            nu_c,
            nu_lower,
            nu_upper,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn gain_coeffs(&self) -> &[f64] {
        &self.gain_coeffs
    }

    pub fn gain_basis(&self) -> GainBasis {
        self.gain_basis
    }

    pub fn nu_c(&self) -> f64 {
        self.nu_c
    }

    pub fn nu_lower(&self) -> f64 {
        self.nu_lower
    }

    pub fn nu_upper(&self) -> f64 {
        self.nu_upper
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Evaluates `[k_2, .., k_n]` given `phi_(2,3)(x, t)`.
    pub fn gains(&self, phi23: f64) -> Vec<f64> {
        let scale = match self.gain_basis {
            GainBasis::Constant => 1.0,
            GainBasis::Phi23 => phi23,
        };
        self.gain_coeffs.iter().map(|c| c * scale).collect()
    }

    /// Returns a copy with different gain coefficients (same basis).
    pub fn with_gain_coeffs(&self, coeffs: Vec<f64>) -> Result<Self, CertificateError> {
        Self::new(
            self.n,
            self.p.clone(),
            coeffs,
            self.gain_basis,
            self.nu_c,
            self.nu_lower,
            self.nu_upper,
        )
    }

    /// `D~ = diag(1, .., n-1) - I/2`.
    pub fn d_tilde(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_fn(self.n - 1, |i, _| i as f64 + 0.5))
    }

    /// Extreme eigenvalues of `P D~ + D~ P`.
    pub fn second_inequality_eigs(&self) -> (f64, f64) {
        let d = self.d_tilde();
        let m = &self.p * &d + &d * &self.p;
        let eig = m.symmetric_eigenvalues();
        (eig.min(), eig.max())
    }
}

/// The third-order certificate
/// `P = a [[3, 1], [1, 1]]`, `k_2 = 5 phi_(2,3)`, `k_3 = 4 phi_(2,3)`,
/// with `nu = 1.675 a`, `nu_lower = a`, `nu_upper = 5 a`.
pub fn example_certificate(a_tilde_c: f64) -> Result<LyapunovCertificate, CertificateError> {
    if !(a_tilde_c > 0.0 && a_tilde_c.is_finite()) {
        return Err(CertificateError::Invalid(format!(
            "scale must be positive, got {a_tilde_c}"
        )));
    }
    let p = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 1.0]) * a_tilde_c;
    LyapunovCertificate::new(
        3,
        p,
        vec![5.0, 4.0],
        GainBasis::Phi23,
        1.675 * a_tilde_c,
        a_tilde_c,
        5.0 * a_tilde_c,
    )
}

/// Builds `A_c` from the couplings `phi_(i+1,i+2)`, `i = 1..n-2`, and the
/// gain values `k_2..k_n`.
pub fn build_ac(
    cert: &LyapunovCertificate,
    upper_couplings: &[f64],
    gains: &[f64],
) -> Result<DMatrix<f64>, CertificateError> {
    let m = cert.n - 1;
    if upper_couplings.len() != m - 1 || gains.len() != m {
        return Err(CertificateError::Dimension(format!(
            "expected {} couplings and {} gains, got {} and {}",
            m - 1,
            m,
            upper_couplings.len(),
            gains.len()
        )));
    }
    let mut a = DMatrix::zeros(m, m);
    for (i, &phi) in upper_couplings.iter().enumerate() {
        a[(i, i + 1)] = phi;
    }
    for (j, &k) in gains.iter().enumerate() {
        a[(m - 1, j)] = -k;
    }
    Ok(a)
}

/// Decay rate `min{3 zeta0 sigma / 2, nu sigma / (2 lambda_max(P))}`.
pub fn kappa(cert: &LyapunovCertificate, zeta0: f64, sigma: f64) -> f64 {
    let first = 1.5 * zeta0 * sigma;
    let second = cert.nu_c * sigma / (2.0 * cert.lambda_max);
    first.min(second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub sampled_points: usize,
    /// Largest eigenvalue of `P A + A^T P + nu phi_(2,3) I` over all samples.
    pub worst_margin_first_ineq: f64,
    pub worst_sample_index: usize,
    pub second_ineq_eigs: (f64, f64),
    pub nu_lower: f64,
    pub nu_upper: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CertReport {
    /// Key-value record, one `key=value` pair per line.
    pub fn to_kv(&self) -> String {
        format!(
            "sampled_points={}\nworst_margin_first_ineq={:.17e}\nworst_sample_index={}\n\
             second_ineq_min_eig={:.17e}\nsecond_ineq_max_eig={:.17e}\nnu_lower={:.17e}\n\
             nu_upper={:.17e}\ntolerance={:.17e}\npass={}\n",
            self.sampled_points,
            self.worst_margin_first_ineq,
            self.worst_sample_index,
            self.second_ineq_eigs.0,
            self.second_ineq_eigs.1,
            self.nu_lower,
            self.nu_upper,
            self.tolerance,
            self.pass
        )
    }
}

impl fmt::Display for CertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate check ({} sampled points, sampled not proven)", self.sampled_points)?;
        writeln!(
            f,
            "  P A + A^T P <= -nu phi23 I : worst max-eig {:+.6e} (sample #{}), tol {:.1e}",
            self.worst_margin_first_ineq, self.worst_sample_index, self.tolerance
        )?;
        writeln!(
            f,
            "  spec(P D + D P) in [{:.6e}, {:.6e}] vs bounds [{:.6e}, {:.6e}]",
            self.second_ineq_eigs.0, self.second_ineq_eigs.1, self.nu_lower, self.nu_upper
        )?;
        write!(f, "  result: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

/// Evaluates both coupled inequalities: the first at every sample, the
/// second once (it is state independent).
pub fn verify_certificate<P: KnownStructure + ?Sized>(
    cert: &LyapunovCertificate,
    plant: &P,
    samples: &[Sample],
) -> Result<CertReport, CertificateError> {
    if samples.is_empty() {
        return Err(CertificateError::NoSamples);
    }
    let n = cert.n;
    if plant.order() != n {
        return Err(CertificateError::Dimension(format!(
            "certificate order {n} but plant order {}",
            plant.order()
        )));
    }
    let m = n - 1;
    let tolerance = 1e-9 * cert.p.norm();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_idx = 0;
    let mut couplings = vec![0.0; m - 1];
    for (idx, s) in samples.iter().enumerate() {
        if s.x.len() != n {
            return Err(CertificateError::Dimension(format!(
                "sample {idx} has dimension {}, expected {n}",
                s.x.len()
            )));
        }
        for (i, c) in couplings.iter_mut().enumerate() {
            *c = plant.phi_upper(i + 2, &s.x, s.t);
            if !c.is_finite() {
                return Err(CertificateError::NonFinite {
                    what: format!("phi_({},{})", i + 2, i + 3),
                    value: *c,
                    index: idx,
                });
            }
        }
        let phi23 = plant.phi23(&s.x, s.t);
        if !phi23.is_finite() {
            return Err(CertificateError::NonFinite {
                what: "phi_(2,3)".into(),
                value: phi23,
                index: idx,
            });
        }
        let a = build_ac(cert, &couplings, &cert.gains(phi23))?;
        let mut lhs = &cert.p * &a + a.transpose() * &cert.p;
        for i in 0..m {
            lhs[(i, i)] += cert.nu_c * phi23;
        }
        let top = lhs.symmetric_eigenvalues().max();
        if top > worst {
            worst = top;
            worst_idx = idx;
        }
    }
    let second = cert.second_inequality_eigs();
    let pass = worst <= tolerance
        && second.0 >= cert.nu_lower - tolerance
        && second.1 <= cert.nu_upper + tolerance;
    Ok(CertReport {
        sampled_points: samples.len(),
        worst_margin_first_ineq: worst,
        worst_sample_index: worst_idx,
        second_ineq_eigs: second,
        nu_lower: cert.nu_lower,
        nu_upper: cert.nu_upper,
        tolerance,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed-form extreme eigenvalues of a symmetric 2x2 matrix, used as an
    /// independent check on the library eigen solver.
    fn eig2(a: f64, b: f64, d: f64) -> (f64, f64) {
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - rad, mean + rad)
    }

    #[test]
    fn example_certificate_constants() {
        let c = example_certificate(0.05).unwrap();
        assert_relative_eq!(c.p()[(0, 0)], 0.15, max_relative = 1e-15);
        assert_relative_eq!(c.p()[(0, 1)], 0.05, max_relative = 1e-15);
        assert_relative_eq!(c.p()[(1, 1)], 0.05, max_relative = 1e-15);
        assert_relative_eq!(c.nu_c(), 0.08375, max_relative = 1e-15);
        assert_relative_eq!(c.nu_lower(), 0.05, max_relative = 1e-15);
        assert_relative_eq!(c.nu_upper(), 0.25, max_relative = 1e-15);
        assert!(example_certificate(0.0).is_err());
        assert!(example_certificate(-1.0).is_err());
    }

    #[test]
    fn unit_certificate_second_inequality_is_tight() {
        let c = example_certificate(1.0).unwrap();
        // P D + D P = [[3, 2], [2, 3]]
        let d = c.d_tilde();
        let m = c.p() * &d + &d * c.p();
        assert_relative_eq!(m[(0, 0)], 3.0, max_relative = 1e-15);
        assert_relative_eq!(m[(0, 1)], 2.0, max_relative = 1e-15);
        assert_relative_eq!(m[(1, 1)], 3.0, max_relative = 1e-15);
        let (lo, hi) = c.second_inequality_eigs();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 5.0, max_relative = 1e-12);
        assert_eq!(eig2(3.0, 2.0, 3.0), (1.0, 5.0));
    }

    #[test]
    fn unit_certificate_first_inequality() {
        let c = example_certificate(1.0).unwrap();
        let a = build_ac(&c, &[1.0], &c.gains(1.0)).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -5.0, -4.0]));
        let lyap = c.p() * &a + a.transpose() * c.p();
        assert_eq!(lyap, DMatrix::from_row_slice(2, 2, &[-10.0, -6.0, -6.0, -6.0]));
        let expected = -8.0 + 2.0 * 10f64.sqrt();
        assert_relative_eq!(eig2(-10.0, -6.0, -6.0).1, expected, max_relative = 1e-15);
        assert_relative_eq!(lyap.symmetric_eigenvalues().max(), expected, max_relative = 1e-12);
        assert!((expected + 1.675).abs() < 1e-3);
    }

    #[test]
    fn build_ac_shapes() {
        let c2 = LyapunovCertificate::new(
            2,
            DMatrix::from_element(1, 1, 1.0),
            vec![3.0],
            GainBasis::Constant,
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(build_ac(&c2, &[], &[3.0]).unwrap(), DMatrix::from_element(1, 1, -3.0));

        let c4 = LyapunovCertificate::new(
            4,
            DMatrix::identity(3, 3),
            vec![1.0, 2.0, 3.0],
            GainBasis::Constant,
            1.0,
            1.0,
            5.0,
        )
        .unwrap();
        let (p, q) = (0.7, 1.9);
        let a = build_ac(&c4, &[p, q], &[1.0, 2.0, 3.0]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, p, 0.0, 0.0, 0.0, q, -1.0, -2.0, -3.0]);
        assert_eq!(a, expected);
        assert!(matches!(build_ac(&c4, &[p], &[1.0, 2.0, 3.0]), Err(CertificateError::Dimension(_))));
        assert!(matches!(build_ac(&c4, &[p, q], &[1.0]), Err(CertificateError::Dimension(_))));
    }

    #[test]
    fn kappa_sec5() {
        let c = example_certificate(0.05).unwrap();
        let lmax = 0.05 * (2.0 + 2f64.sqrt());
        assert_relative_eq!(eig2(0.15, 0.05, 0.05).1, lmax, max_relative = 1e-14);
        assert_relative_eq!(c.lambda_max(), lmax, max_relative = 1e-12);
        let k = kappa(&c, 0.25, 1.0);
        assert_relative_eq!(k, 0.08375 / (2.0 * lmax), max_relative = 1e-12);
        assert!((k - 0.245297).abs() < 1e-5);
        assert_relative_eq!(kappa(&c, 1e9, 1.0), 0.08375 / (2.0 * lmax), max_relative = 1e-12);
        assert_relative_eq!(kappa(&c, 0.25, 2.0), 2.0 * k, max_relative = 1e-14);
        // first term wins for small zeta0
        assert_relative_eq!(kappa(&c, 0.01, 1.0), 0.015, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_certificates() {
        let nonsym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(LyapunovCertificate::new(3, nonsym, vec![1.0, 1.0], GainBasis::Constant, 1.0, 1.0, 1.0).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(LyapunovCertificate::new(3, indefinite, vec![1.0, 1.0], GainBasis::Constant, 1.0, 1.0, 1.0).is_err());
        let id = DMatrix::identity(2, 2);
        assert!(LyapunovCertificate::new(3, id.clone(), vec![1.0], GainBasis::Constant, 1.0, 1.0, 1.0).is_err());
        assert!(LyapunovCertificate::new(3, id.clone(), vec![1.0, 1.0], GainBasis::Constant, 1.0, 2.0, 1.0).is_err());
        assert!(LyapunovCertificate::new(3, id.clone(), vec![1.0, 1.0], GainBasis::Constant, 0.0, 1.0, 1.0).is_err());
        assert!(LyapunovCertificate::new(1, id, vec![], GainBasis::Constant, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn report_kv_and_text() {
        let r = CertReport {
            sampled_points: 3,
            worst_margin_first_ineq: -1.0,
            worst_sample_index: 2,
            second_ineq_eigs: (1.0, 5.0),
            nu_lower: 1.0,
            nu_upper: 5.0,
            tolerance: 1e-9,
            pass: true,
        };
        let kv = r.to_kv();
        assert!(kv.contains("sampled_points=3\n"));
        assert!(kv.contains("pass=true\n"));
        assert!(r.to_string().contains("result: pass"));
    }
}
