//! Truncated two-mode Fock space: coherent states, the entangled coherent
//! state, and the dissipative two-branch density matrix with its gamma-derivative.
//!
//! The density matrix at time `t` is
//! `rho = N^2 { |a><a| + D (|a><b| + |b><a|) + |b><b| }` with
//! `|a> = |alpha e^{-i omega0 t}, 0>`, `|b> = |0, c alpha>` and
//! `D = exp[-(|alpha|^2/2)(1 - |c|^2)]`.
//! Two representations are provided: dense matrices over the `(n1, n2)` basis
//! ([`TwoModeDensity`]) and the analytic three-vector form ([`EcsBranches`]),
//! which stays exact at photon numbers far beyond any dense cutoff.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::lambert_w;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const NORM_TOL: f64 = 1e-9;
const TRACE_TOL: f64 = 1e-6;

/// Smallest per-mode cutoff `ceil(|alpha|^2 + 10|alpha| + 20)`.
pub fn default_cutoff(alpha_abs: f64) -> usize {
    (alpha_abs * alpha_abs + 10.0 * alpha_abs + 20.0).ceil() as usize
}

fn check_cutoff(alpha_abs: f64, cutoff: usize) -> Result<()> {
    let suggested = default_cutoff(alpha_abs);
    if cutoff < suggested {
        return Err(Error::CutoffTooSmall {
            cutoff,
            alpha: alpha_abs,
            suggested,
        });
    }
    Ok(())
}

/// `N = |alpha|^2 / (1 + e^{-|alpha|^2})`.
pub fn n_of_alpha(alpha: f64) -> f64 {
    let x = alpha * alpha;
    x / (1.0 + (-x).exp())
}

/// Inverse of [`n_of_alpha`] on `alpha > 0`.
///
/// `x = |alpha|^2` solves `x - N = N e^{-x}`, i.e. `x = N + W(N e^{-N})`.
pub fn alpha_of_n(n_avg: f64) -> Result<f64> {
    if !(n_avg > 0.0 && n_avg.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "N",
            value: n_avg,
            reason: "average photon number must be positive",
        });
    }
    Ok((n_avg + lambert_w(n_avg * (-n_avg).exp())?).sqrt())
}

/// `N_alpha^2 = 1 / [2(1 + e^{-|alpha|^2})]`.
pub fn ecs_normalization_sq(alpha: f64) -> f64 {
    0.5 / (1.0 + (-alpha * alpha).exp())
}

/// State vector over one mode (`n = 0..=cutoff`) or two modes (row-major `(n1, n2)`).
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    cutoff: usize,
    modes: usize,
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn zeros(cutoff: usize, modes: usize) -> Self {
        assert!(modes == 1 || modes == 2, "one or two modes");
        let len = (cutoff + 1).pow(modes as u32);
        Self {
            cutoff,
            modes,
            amplitudes: vec![ZERO; len],
        }
    }

    pub fn vacuum(cutoff: usize, modes: usize) -> Self {
        let mut v = Self::zeros(cutoff, modes);
        v.amplitudes[0] = ONE;
        v
    }

    pub fn from_amplitudes(cutoff: usize, modes: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = Self::zeros(cutoff, modes);
        if amplitudes.len() != v.amplitudes.len() {
            return Err(Error::Mismatch(format!(
                "expected {} amplitudes, got {}",
                v.amplitudes.len(),
                amplitudes.len()
            )));
        }
        Ok(Self { amplitudes, ..v })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn index(&self, n1: usize, n2: usize) -> usize {
        debug_assert!(self.modes == 2 && n1 <= self.cutoff && n2 <= self.cutoff);
        n1 * (self.cutoff + 1) + n2
    }

    pub fn get(&self, n1: usize, n2: usize) -> Complex64 {
        self.amplitudes[self.index(n1, n2)]
    }

    /// `|u> (x) |v>` of two single-mode vectors.
    pub fn tensor(first: &FockVector, second: &FockVector) -> Result<Self> {
        if first.modes != 1 || second.modes != 1 || first.cutoff != second.cutoff {
            return Err(Error::Mismatch("tensor needs single-mode vectors with equal cutoff".into()));
        }
        let mut out = Self::zeros(first.cutoff, 2);
        let width = first.cutoff + 1;
        for (n1, a) in first.amplitudes.iter().enumerate() {
            for (n2, b) in second.amplitudes.iter().enumerate() {
                out.amplitudes[n1 * width + n2] = a * b;
            }
        }
        Ok(out)
    }

    fn check_shape(&self, other: &FockVector) -> Result<()> {
        if self.cutoff != other.cutoff || self.modes != other.modes {
            return Err(Error::Mismatch("fock vectors have different shapes".into()));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        self.check_shape(other)?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            ..self.clone()
        }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &FockVector) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + factor * b)
                .collect(),
            ..self.clone()
        })
    }

    fn photon_counts(&self) -> impl Iterator<Item = usize> + '_ {
        let width = self.cutoff + 1;
        let modes = self.modes;
        (0..self.dim()).map(move |i| if modes == 1 { i } else { i / width + i % width })
    }

    /// Total photon-number expectation `<n1 + n2>` (unnormalized).
    pub fn photon_number(&self) -> f64 {
        self.photon_counts()
            .zip(&self.amplitudes)
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    /// `a^dagger` on a single mode; the top level is truncated.
    pub fn raised(&self) -> Self {
        assert_eq!(self.modes, 1);
        let mut out = Self::zeros(self.cutoff, 1);
        for n in 1..=self.cutoff {
            out.amplitudes[n] = self.amplitudes[n - 1] * (n as f64).sqrt();
        }
        out
    }
}

/// Single-mode coherent state `e^{-|alpha|^2/2} sum alpha^n/sqrt(n!) |n>`.
pub fn coherent_vector(alpha: Complex64, cutoff: usize) -> Result<FockVector> {
    let r = alpha.norm();
    check_cutoff(r, cutoff)?;
    let mut v = FockVector::zeros(cutoff, 1);
    if r == 0.0 {
        v.amplitudes[0] = ONE;
        return Ok(v);
    }
    let (ln_r, phase) = (r.ln(), alpha.arg());
    let mut log_mag = -0.5 * r * r;
    for n in 0..=cutoff {
        if n > 0 {
            log_mag += ln_r - 0.5 * (n as f64).ln();
        }
        v.amplitudes[n] = Complex64::from_polar(log_mag.exp(), n as f64 * phase);
    }
    Ok(v)
}

/// `d/dgamma |u(gamma)> = (u' a^dagger - Re(conj(u) u')) |u>`.
pub fn coherent_derivative(u: Complex64, du: Complex64, cutoff: usize) -> Result<FockVector> {
    let ket = coherent_vector(u, cutoff)?;
    let r = (u.conj() * du).re;
    ket.raised().scaled(du).axpy(Complex64::new(-r, 0.0), &ket)
}

/// `|alpha e^{-i omega0 t}, 0>` and `|0, c alpha>`.
fn branches(alpha: f64, c: Complex64, omega0_t: f64, cutoff: usize) -> Result<(FockVector, FockVector)> {
    let vac = FockVector::vacuum(cutoff, 1);
    let first = coherent_vector(Complex64::from_polar(alpha, -omega0_t), cutoff)?;
    let second = coherent_vector(c * alpha, cutoff)?;
    Ok((FockVector::tensor(&first, &vac)?, FockVector::tensor(&vac, &second)?))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "coherent amplitude must be positive",
        });
    }
    Ok(())
}

fn check_c(c: Complex64) -> Result<()> {
    if !(c.norm() <= 1.0 + NORM_TOL) {
        return Err(Error::InvalidParameter {
            name: "|c|",
            value: c.norm(),
            reason: "probe amplitude cannot exceed 1",
        });
    }
    Ok(())
}

/// `N_alpha (|alpha e^{-i omega0 t}, 0> + |0, c alpha>)` for a unitary phase `|c| = 1`.
pub fn ecs_evolved(alpha: f64, c: Complex64, omega0_t: f64, cutoff: usize) -> Result<FockVector> {
    check_alpha(alpha)?;
    if (c.norm() - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(c.norm_sqr()));
    }
    let (a, b) = branches(alpha, c, omega0_t, cutoff)?;
    Ok(a.axpy(ONE, &b)?.scaled(ecs_normalization_sq(alpha).sqrt().into()))
}

/// `|ECS> = N_alpha (|alpha, 0> + |0, alpha>)`.
pub fn ecs_input(alpha: f64, cutoff: usize) -> Result<FockVector> {
    ecs_evolved(alpha, ONE, 0.0, cutoff)
}

/// Gamma-derivative of [`ecs_evolved`]: only the second branch depends on gamma.
pub fn ecs_evolved_derivative(alpha: f64, c: Complex64, dc_dgamma: Complex64, cutoff: usize) -> Result<FockVector> {
    check_alpha(alpha)?;
    let vac = FockVector::vacuum(cutoff, 1);
    let d = coherent_derivative(c * alpha, dc_dgamma * alpha, cutoff)?;
    Ok(FockVector::tensor(&vac, &d)?.scaled(ecs_normalization_sq(alpha).sqrt().into()))
}

/// Dense density matrix over the `(n1, n2)` basis with optional gamma-derivative.
#[derive(Debug, Clone)]
pub struct TwoModeDensity {
    cutoff: usize,
    matrix: DMatrix<Complex64>,
    d_gamma: Option<DMatrix<Complex64>>,
}

/// `sum_k w_k |x_k><y_k|`.
fn outer_sum(terms: &[(Complex64, &FockVector, &FockVector)]) -> DMatrix<Complex64> {
    let dim = terms[0].1.dim();
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for &(w, x, y) in terms {
        let xs: Vec<(usize, Complex64)> = x
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .map(|(i, a)| (i, a * w))
            .collect();
        for (j, yj) in y.amplitudes.iter().enumerate() {
            if *yj == ZERO {
                continue;
            }
            let yc = yj.conj();
            for &(i, xi) in &xs {
                m[(i, j)] += xi * yc;
            }
        }
    }
    m
}

impl TwoModeDensity {
    pub fn new(cutoff: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = (cutoff + 1) * (cutoff + 1);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Mismatch(format!("density matrix must be {dim}x{dim}")));
        }
        Ok(Self {
            cutoff,
            matrix,
            d_gamma: None,
        })
    }

    pub fn with_derivative(mut self, d_gamma: DMatrix<Complex64>) -> Result<Self> {
        if d_gamma.shape() != self.matrix.shape() {
            return Err(Error::Mismatch("derivative shape differs from density matrix".into()));
        }
        self.d_gamma = Some(d_gamma);
        Ok(self)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn d_gamma(&self) -> Option<&DMatrix<Complex64>> {
        self.d_gamma.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest `|m_ij - conj(m_ji)|`.
    pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `Tr[rho (n1 + n2)]`.
    pub fn photon_number(&self) -> f64 {
        let width = self.cutoff + 1;
        (0..self.dim())
            .map(|i| (i / width + i % width) as f64 * self.matrix[(i, i)].re)
            .sum()
    }

    /// Checks Hermiticity (1e-12), unit trace (1e-9) and traceless Hermitian derivative.
    pub fn validate(&self) -> Result<()> {
        let herm = Self::hermiticity_defect(&self.matrix);
        if herm > 1e-12 {
            return Err(Error::Mismatch(format!("density matrix not Hermitian ({herm:e})")));
        }
        if (self.trace() - 1.0).abs() > NORM_TOL {
            return Err(Error::Trace(self.trace()));
        }
        if let Some(d) = &self.d_gamma {
            let herm = Self::hermiticity_defect(d);
            if herm > 1e-12 {
                return Err(Error::Mismatch(format!("derivative not Hermitian ({herm:e})")));
            }
            if d.trace().norm() > NORM_TOL {
                return Err(Error::Trace(d.trace().re));
            }
        }
        Ok(())
    }
}

/// Dense `rho(t)` for given `c(t)` and mode-1 phase `omega0 t`.
pub fn rho_of_t(alpha: f64, c: Complex64, omega0_t: f64, cutoff: usize) -> Result<TwoModeDensity> {
    check_alpha(alpha)?;
    check_c(c)?;
    let (a, b) = branches(alpha, c, omega0_t, cutoff)?;
    let n2 = ecs_normalization_sq(alpha);
    let d = coherence_factor(alpha, c);
    let rho = outer_sum(&[
        (n2.into(), &a, &a),
        ((n2 * d).into(), &a, &b),
        ((n2 * d).into(), &b, &a),
        (n2.into(), &b, &b),
    ]);
    let out = TwoModeDensity::new(cutoff, rho)?;
    if (out.trace() - 1.0).abs() > TRACE_TOL {
        return Err(Error::Trace(out.trace()));
    }
    Ok(out)
}

/// Dense `d rho / d gamma` by the chain rule through `|0, c alpha>` and the coherence factor.
pub fn rho_derivative(
    alpha: f64,
    c: Complex64,
    dc_dgamma: Complex64,
    omega0_t: f64,
    cutoff: usize,
) -> Result<DMatrix<Complex64>> {
    check_alpha(alpha)?;
    check_c(c)?;
    let (a, b) = branches(alpha, c, omega0_t, cutoff)?;
    let vac = FockVector::vacuum(cutoff, 1);
    let db = FockVector::tensor(&vac, &coherent_derivative(c * alpha, dc_dgamma * alpha, cutoff)?)?;
    let n2 = ecs_normalization_sq(alpha);
    let d = coherence_factor(alpha, c);
    let dd = d * alpha * alpha * (c.conj() * dc_dgamma).re;
    Ok(outer_sum(&[
        ((n2 * dd).into(), &a, &b),
        ((n2 * dd).into(), &b, &a),
        ((n2 * d).into(), &a, &db),
        ((n2 * d).into(), &db, &a),
        (n2.into(), &db, &b),
        (n2.into(), &b, &db),
    ]))
}

/// [`rho_of_t`] with the derivative attached.
pub fn rho_with_derivative(
    alpha: f64,
    c: Complex64,
    dc_dgamma: Complex64,
    omega0_t: f64,
    cutoff: usize,
) -> Result<TwoModeDensity> {
    rho_of_t(alpha, c, omega0_t, cutoff)?.with_derivative(rho_derivative(alpha, c, dc_dgamma, omega0_t, cutoff)?)
}

/// `exp[-(|alpha|^2/2)(1 - |c|^2)]`.
pub fn coherence_factor(alpha: f64, c: Complex64) -> f64 {
    (-0.5 * alpha * alpha * (1.0 - c.norm_sqr())).exp()
}

/// Analytic form of `rho(t)` and `d rho/d gamma` on the span of
/// `|a>`, `|b>` and `|b~> = u'(a^dagger - conj(u))|b>` (mode 2, `u = c alpha`).
///
/// Operators are stored as coefficient matrices `P` with `rho = sum P_ij |e_i><e_j|`,
/// overlaps as the Gram matrix `G_ij = <e_i|e_j>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcsBranches {
    alpha: f64,
    c: Complex64,
    dc_dgamma: Option<Complex64>,
    omega0_t: f64,
}

impl EcsBranches {
    pub fn new(alpha: f64, c: Complex64, omega0_t: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_c(c)?;
        Ok(Self {
            alpha,
            c,
            dc_dgamma: None,
            omega0_t,
        })
    }

    pub fn with_derivative(mut self, dc_dgamma: Complex64) -> Self {
        self.dc_dgamma = Some(dc_dgamma);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> Complex64 {
        self.c
    }

    pub fn dc_dgamma(&self) -> Option<Complex64> {
        self.dc_dgamma
    }

    pub fn omega0_t(&self) -> f64 {
        self.omega0_t
    }

    pub fn n_avg(&self) -> f64 {
        n_of_alpha(self.alpha)
    }

    fn u(&self) -> Complex64 {
        self.c * self.alpha
    }

    fn du(&self) -> Complex64 {
        self.dc_dgamma.unwrap_or(ZERO) * self.alpha
    }

    /// `<a|b>`, real and positive.
    fn branch_overlap(&self) -> f64 {
        (-0.5 * self.alpha * self.alpha * (1.0 + self.c.norm_sqr())).exp()
    }

    pub fn gram(&self) -> Matrix3<Complex64> {
        let e = self.branch_overlap();
        let (u, du) = (self.u(), self.du());
        let ab_t = -du * u.conj() * e;
        Matrix3::new(
            ONE,
            e.into(),
            ab_t,
            e.into(),
            ONE,
            ZERO,
            ab_t.conj(),
            ZERO,
            du.norm_sqr().into(),
        )
    }

    pub fn coefficients(&self) -> Matrix3<Complex64> {
        let n2 = ecs_normalization_sq(self.alpha);
        let d = coherence_factor(self.alpha, self.c);
        Matrix3::new(
            n2.into(),
            (n2 * d).into(),
            ZERO,
            (n2 * d).into(),
            n2.into(),
            ZERO,
            ZERO,
            ZERO,
            ZERO,
        )
    }

    /// Coefficients of `d rho/d gamma`; `None` without a derivative.
    pub fn derivative_coefficients(&self) -> Option<Matrix3<Complex64>> {
        let dc = self.dc_dgamma?;
        let n2 = ecs_normalization_sq(self.alpha);
        let d = coherence_factor(self.alpha, self.c);
        let dd = d * self.alpha * self.alpha * (self.c.conj() * dc).re;
        let (u, du) = (self.u(), self.du());
        // b' = b~ + beta b with beta = u' conj(u) - Re(conj(u) u'); Re(beta) = 0
        let beta = du * u.conj() - (u.conj() * du).re;
        let ab = Complex64::from(dd) + beta.conj() * d;
        let ad = Complex64::from(d);
        Some(
            Matrix3::new(ZERO, ab, ad, ab.conj(), ZERO, ONE, ad, ONE, ZERO) * Complex64::from(n2),
        )
    }

    /// `Tr[rho (n1 + n2)] = N (1 + |c|^2) / 2`.
    pub fn photon_number(&self) -> f64 {
        let x = self.alpha * self.alpha;
        ecs_normalization_sq(self.alpha) * x * (1.0 + self.c.norm_sqr())
    }

    pub fn trace(&self) -> f64 {
        (self.coefficients() * self.gram()).trace().re
    }

    /// `Tr rho^2 = tr(P G P G)`.
    pub fn purity(&self) -> f64 {
        let pg = self.coefficients() * self.gram();
        (pg * pg).trace().re
    }

    /// Expands the basis into dense vectors `(|a>, |b>, |b~>)`.
    pub fn basis_vectors(&self, cutoff: usize) -> Result<[FockVector; 3]> {
        let (a, b) = branches(self.alpha, self.c, self.omega0_t, cutoff)?;
        let vac = FockVector::vacuum(cutoff, 1);
        let mode2 = coherent_vector(self.u(), cutoff)?;
        let tilde = mode2.raised().axpy(-self.u().conj(), &mode2)?.scaled(self.du());
        Ok([a, b, FockVector::tensor(&vac, &tilde)?])
    }

    /// Dense counterpart built by [`rho_of_t`] and [`rho_derivative`].
    pub fn to_dense(&self, cutoff: usize) -> Result<TwoModeDensity> {
        match self.dc_dgamma {
            Some(dc) => rho_with_derivative(self.alpha, self.c, dc, self.omega0_t, cutoff),
            None => rho_of_t(self.alpha, self.c, self.omega0_t, cutoff),
        }
    }
}
