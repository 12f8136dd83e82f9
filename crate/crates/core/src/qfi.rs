//! Quantum Fisher information of pure and mixed states, closed forms for the
//! ideal, bound-state and Markovian regimes, and the Cramer-Rao precision.

use std::io::Write;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockstate::{n_of_alpha, EcsBranches, FockVector, TwoModeDensity};
pub use crate::special::lambert_w;

/// Eigenvalue pairs with `lambda_i + lambda_j` at or below this are skipped.
pub const EPS_RANK: f64 = 1e-10;
const NEGATIVE_TOL: f64 = -1e-8;

/// `4 [<psi'|psi'> - |<psi'|psi>|^2]`.
pub fn qfi_pure(psi: &FockVector, dpsi: &FockVector) -> Result<f64> {
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(norm));
    }
    let overlap = dpsi.inner(psi)?;
    Ok((4.0 * (dpsi.norm_sqr() - overlap.norm_sqr())).max(0.0))
}

/// `sum_{ij} 2 |<i|rho'|j>|^2 / (lambda_i + lambda_j)` in the eigenbasis of `rho`.
fn spectral_sum(rho: DMatrix<Complex64>, d_rho: &DMatrix<Complex64>, eps_rank: f64) -> Result<f64> {
    let eig = SymmetricEigen::new(rho);
    let lambda = &eig.eigenvalues;
    if let Some(&min) = lambda.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < NEGATIVE_TOL {
            return Err(Error::NegativeEigenvalue(min));
        }
    }
    let u = &eig.eigenvectors;
    let m = u.adjoint() * d_rho * u;
    let n = lambda.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let denom = lambda[i] + lambda[j];
            if denom > eps_rank {
                sum += 2.0 * m[(i, j)].norm_sqr() / denom;
            }
        }
    }
    Ok(sum)
}

/// Mixed-state QFI of a dense density matrix carrying its gamma-derivative.
pub fn qfi_mixed(rho: &TwoModeDensity) -> Result<f64> {
    qfi_mixed_with(rho, EPS_RANK)
}

pub fn qfi_mixed_with(rho: &TwoModeDensity, eps_rank: f64) -> Result<f64> {
    let d = rho.d_gamma().ok_or(Error::MissingDerivative)?;
    spectral_sum(rho.matrix().clone(), d, eps_rank)
}

/// Coefficient-space Gram-Schmidt: columns `q` with `q^H G q = 1`, dependent vectors dropped.
fn orthonormal_columns(gram: &Matrix3<Complex64>) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(3, 3, |i, j| gram[(i, j)]);
    let inner = |x: &DMatrix<Complex64>, y: &DMatrix<Complex64>| (x.adjoint() * &g * y)[(0, 0)];
    let mut cols: Vec<DMatrix<Complex64>> = Vec::new();
    for i in 0..3 {
        let scale = gram[(i, i)].re;
        if !(scale > 0.0) {
            continue;
        }
        let mut v = DMatrix::from_fn(3, 1, |r, _| if r == i { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        for _ in 0..2 {
            for q in &cols {
                let p = inner(q, &v);
                v -= q * p;
            }
        }
        let norm = inner(&v, &v).re;
        if norm > 1e-13 * scale {
            cols.push(v / Complex64::from(norm.sqrt()));
        }
    }
    let mut out = DMatrix::from_element(3, cols.len(), Complex64::new(0.0, 0.0));
    for (k, q) in cols.iter().enumerate() {
        out.set_column(k, &q.column(0));
    }
    out
}

/// Mixed-state QFI from the analytic three-vector representation.
pub fn qfi_mixed_compact(state: &EcsBranches) -> Result<f64> {
    qfi_mixed_compact_with(state, EPS_RANK)
}

pub fn qfi_mixed_compact_with(state: &EcsBranches, eps_rank: f64) -> Result<f64> {
    let dp = state.derivative_coefficients().ok_or(Error::MissingDerivative)?;
    let gram = state.gram();
    let q = orthonormal_columns(&gram);
    let g = DMatrix::from_fn(3, 3, |i, j| gram[(i, j)]);
    let m = &g * &q;
    let to_dense = |p: &Matrix3<Complex64>| DMatrix::from_fn(3, 3, |i, j| p[(i, j)]);
    let rho = m.adjoint() * to_dense(&state.coefficients()) * &m;
    let d_rho = m.adjoint() * to_dense(&dp) * &m;
    let rho = (&rho + rho.adjoint()) * Complex64::from(0.5);
    spectral_sum(rho, &d_rho, eps_rank)
}

fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and nonnegative",
        });
    }
    Ok(())
}

/// `2 N t^2 [1 + W(N e^{-N})] + N^2 t^2`.
pub fn qfi_ideal(n_avg: f64, t: f64) -> Result<f64> {
    check_nonnegative("N", n_avg)?;
    check_nonnegative("t", t)?;
    let w = lambert_w(n_avg * (-n_avg).exp())?;
    Ok(2.0 * n_avg * t * t * (1.0 + w) + n_avg * n_avg * t * t)
}

/// `2t^2 Z^4 N + 2t^2 Z^6 N W(N e^{-N}) + e^{-|alpha|^2 (1 - Z^2)} t^2 Z^6 N^2`.
pub fn qfi_asymptotic(n_avg: f64, alpha: f64, t: f64, z: f64) -> Result<f64> {
    check_nonnegative("N", n_avg)?;
    check_nonnegative("t", t)?;
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "Z",
            value: z,
            reason: "residue must lie in (0, 1]",
        });
    }
    let expected = n_of_alpha(alpha);
    if !((expected - n_avg).abs() <= 1e-8 * n_avg.max(1.0)) {
        return Err(Error::InconsistentPhotonNumber {
            alpha,
            n_avg,
            expected,
        });
    }
    let w = lambert_w(n_avg * (-n_avg).exp())?;
    let (t2, z2) = (t * t, z * z);
    let z4 = z2 * z2;
    let z6 = z4 * z2;
    let coherence = (-alpha * alpha * (1.0 - z2)).exp();
    Ok(2.0 * t2 * z4 * n_avg + 2.0 * t2 * z6 * n_avg * w + coherence * t2 * z6 * n_avg * n_avg)
}

/// `2 N t^2 e^{-2 kappa t}`.
pub fn qfi_markovian(n_avg: f64, t: f64, kappa: f64) -> f64 {
    2.0 * n_avg * t * t * (-2.0 * kappa * t).exp()
}

/// `(t_opt, min dgamma) = (1/kappa, e kappa / sqrt(2N))`.
pub fn markovian_optimum(n_avg: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa,
            reason: "decay rate must be positive",
        });
    }
    if !(n_avg > 0.0) {
        return Err(Error::InvalidParameter {
            name: "N",
            value: n_avg,
            reason: "average photon number must be positive",
        });
    }
    Ok((1.0 / kappa, std::f64::consts::E * kappa / (2.0 * n_avg).sqrt()))
}

/// `1 / sqrt(mu F_Q)`; infinite when `F_Q = 0`.
pub fn precision(f_q: f64, mu: u32) -> Result<f64> {
    if mu == 0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: 0.0,
            reason: "at least one repetition is required",
        });
    }
    if !(f_q >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "F_Q",
            value: f_q,
            reason: "Fisher information cannot be negative",
        });
    }
    if f_q == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (mu as f64 * f_q).sqrt())
}

/// Time-scaled reference precisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Benchmarks {
    /// `1 / (sqrt(N) t)`
    pub snl: f64,
    /// `1 / (N t)`
    pub weak_hl: f64,
    /// `1 / (N^{3/4} t)`
    pub zeno: f64,
}

pub fn benchmark_limits(n_avg: f64, t: f64) -> Benchmarks {
    Benchmarks {
        snl: 1.0 / (n_avg.sqrt() * t),
        weak_hl: 1.0 / (n_avg * t),
        zeno: 1.0 / (n_avg.powf(0.75) * t),
    }
}

/// QFI and precision along a sweep variable, with benchmark curves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSeries {
    pub variable: String,
    pub mu: u32,
    pub values: Vec<f64>,
    pub f_q: Vec<f64>,
    pub delta_gamma: Vec<f64>,
    pub benchmarks: Vec<Benchmarks>,
}

impl PrecisionSeries {
    pub fn new(variable: impl Into<String>, mu: u32) -> Self {
        Self {
            variable: variable.into(),
            mu,
            ..Default::default()
        }
    }

    /// Appends a point; `n_avg` and `t` set the benchmarks.
    pub fn push(&mut self, value: f64, f_q: f64, n_avg: f64, t: f64) -> Result<()> {
        let dg = precision(f_q, self.mu)?;
        self.values.push(value);
        self.f_q.push(f_q);
        self.delta_gamma.push(dg);
        self.benchmarks.push(benchmark_limits(n_avg, t));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Columns `variable, f_q, delta_gamma, snl, weak_hl, zeno`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# mu = {}", self.mu)?;
        writeln!(out, "{},f_q,delta_gamma,snl,weak_hl,zeno", self.variable)?;
        for i in 0..self.len() {
            let b = &self.benchmarks[i];
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.values[i], self.f_q[i], self.delta_gamma[i], b.snl, b.weak_hl, b.zeno
            )?;
        }
        Ok(())
    }
}
