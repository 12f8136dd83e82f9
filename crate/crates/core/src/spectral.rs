//! Ohmic-family bath spectral density and the bath integrals built from it.
//!
//! Frequencies are in units of the probe frequency `omega0` and times in units
//! of `1/omega0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_complex_to_infinity, Tolerance};
use crate::special::{e1_scaled, gamma};

/// `J(w) = eta * w * (w / omega_c)^(s - 1) * exp(-w / omega_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    s: f64,
    eta: f64,
    omega_c: f64,
}

/// Probe frequency and the encoded parameter; the nonlinearity order is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    omega0: f64,
    gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovRates {
    pub kappa: f64,
    pub delta: f64,
}

fn quad_tol() -> Tolerance {
    Tolerance::new(1e-12, 1e-13)
}

impl SpectralDensity {
    pub fn new(s: f64, eta: f64, omega_c: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter {
                name: "s",
                value: s,
                reason: "Ohmicity exponent must be positive",
            });
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "coupling constant must be non-negative",
            });
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega_c",
                value: omega_c,
                reason: "cutoff frequency must be positive",
            });
        }
        Ok(Self { s, eta, omega_c })
    }

    /// Ohmic (`s = 1`) bath.
    pub fn ohmic(eta: f64, omega_c: f64) -> Result<Self> {
        Self::new(1.0, eta, omega_c)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn is_ohmic(&self) -> bool {
        self.s == 1.0
    }

    pub fn with_omega_c(&self, omega_c: f64) -> Result<Self> {
        Self::new(self.s, self.eta, omega_c)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(self.s, eta, self.omega_c)
    }

    pub fn evaluate(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain {
                operation: "spectral density",
                value: omega,
                reason: "frequency must be non-negative",
            });
        }
        Ok(self.j(omega))
    }

    #[inline]
    pub(crate) fn j(&self, omega: f64) -> f64 {
        if omega <= 0.0 || self.eta == 0.0 {
            return 0.0;
        }
        let x = omega / self.omega_c;
        self.eta * self.omega_c * x.powf(self.s) * (-x).exp()
    }

    /// Location of the single interior maximum of `J`.
    pub fn peak_frequency(&self) -> f64 {
        self.s * self.omega_c
    }

    /// `int_0^inf J(w)/w dw = eta * omega_c * Gamma(s)`.
    pub fn inverse_moment(&self) -> f64 {
        self.eta * self.omega_c * gamma(self.s)
    }

    // Integration is split at W; beyond it a mapped semi-infinite rule takes over.
    fn split_point(&self, extra: f64) -> f64 {
        (50.0 * self.omega_c * self.s.max(1.0)).max(50.0 * extra)
    }

    /// Bath correlation function `f(t) = int_0^inf J(w) e^{-iwt} dw`, closed form.
    pub fn correlation(&self, t: f64) -> Complex64 {
        let prefactor = self.eta * gamma(self.s + 1.0) * self.omega_c * self.omega_c;
        Complex64::new(1.0, self.omega_c * t).powf(-(self.s + 1.0)) * prefactor
    }

    /// Same integral as [`Self::correlation`] by adaptive quadrature.
    pub fn correlation_quadrature(&self, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(Error::Domain {
                operation: "correlation function",
                value: t,
                reason: "time must be non-negative",
            });
        }
        let integrand = |w: f64| Complex64::new(0.0, -w * t).exp() * self.j(w);
        let w = self.split_point(1.0);
        let tol = Tolerance::new(1e-13 * self.eta.max(1e-300) * self.omega_c, 1e-13);
        let body = integrate(integrand, 0.0, w, &[self.peak_frequency()], tol)?;
        let tail = integrate_complex_to_infinity(integrand, w, self.omega_c, tol)?;
        Ok(body + tail)
    }

    fn check_negative(operation: &'static str, varpi: f64) -> Result<()> {
        if !(varpi < 0.0) {
            return Err(Error::Domain {
                operation,
                value: varpi,
                reason: "frequency must lie below the band edge (< 0)",
            });
        }
        Ok(())
    }

    /// `int_0^inf J(w)/(w - varpi) dw` for `varpi < 0`.
    pub fn dispersion_integral(&self, varpi: f64) -> Result<f64> {
        Self::check_negative("dispersion integral", varpi)?;
        match self.dispersion_integral_closed(varpi) {
            Some(v) if -varpi <= self.omega_c => Ok(v),
            _ => self.dispersion_integral_quadrature(varpi),
        }
    }

    /// Ohmic closed form `eta [omega_c + varpi e^{-varpi/omega_c} E1(-varpi/omega_c)]`.
    pub fn dispersion_integral_closed(&self, varpi: f64) -> Option<f64> {
        if !self.is_ohmic() || !(varpi < 0.0) {
            return None;
        }
        let a = -varpi;
        Some(self.eta * (self.omega_c - a * e1_scaled(a / self.omega_c)))
    }

    pub fn dispersion_integral_quadrature(&self, varpi: f64) -> Result<f64> {
        Self::check_negative("dispersion integral", varpi)?;
        let integrand = |w: f64| Complex64::new(self.j(w) / (w - varpi), 0.0);
        self.integrate_positive(integrand, -varpi)
    }

    /// `int_0^inf J(w)/(varpi - w)^2 dw` for `varpi < 0`.
    pub fn residue_integral(&self, varpi: f64) -> Result<f64> {
        Self::check_negative("residue integral", varpi)?;
        match self.residue_integral_closed(varpi) {
            Some(v) if -varpi <= self.omega_c => Ok(v),
            _ => self.residue_integral_quadrature(varpi),
        }
    }

    /// Ohmic closed form `eta [(1 + a/omega_c) e^{a/omega_c} E1(a/omega_c) - 1]`, `a = -varpi`.
    pub fn residue_integral_closed(&self, varpi: f64) -> Option<f64> {
        if !self.is_ohmic() || !(varpi < 0.0) {
            return None;
        }
        let x = -varpi / self.omega_c;
        Some(self.eta * ((1.0 + x) * e1_scaled(x) - 1.0))
    }

    pub fn residue_integral_quadrature(&self, varpi: f64) -> Result<f64> {
        Self::check_negative("residue integral", varpi)?;
        let integrand = |w: f64| {
            let d = w - varpi;
            Complex64::new(self.j(w) / (d * d), 0.0)
        };
        self.integrate_positive(integrand, -varpi)
    }

    fn integrate_positive<F: Fn(f64) -> Complex64 + Copy>(&self, f: F, feature: f64) -> Result<f64> {
        let w = self.split_point(feature);
        let breaks = [feature, self.omega_c, self.peak_frequency()];
        let body = integrate(f, 0.0, w, &breaks, quad_tol())?;
        let tail = integrate_complex_to_infinity(f, w, self.omega_c, quad_tol())?;
        Ok((body + tail).re)
    }

    /// Markovian decay rate `kappa = pi J(omega0 + gamma)` and Lamb shift
    /// `Delta = P int_0^inf J(w)/(w - omega0 - gamma) dw`.
    pub fn markov_rates(&self, probe: &ProbeConfig) -> Result<MarkovRates> {
        let x0 = probe.frequency();
        let j0 = self.j(x0);
        let kappa = std::f64::consts::PI * j0;
        if self.eta == 0.0 {
            return Ok(MarkovRates { kappa, delta: 0.0 });
        }
        // Subtract J(x0) on the window symmetric about x0, where its PV vanishes.
        let sym = |w: f64| Complex64::new((self.j(w) - j0) / (w - x0), 0.0);
        let near = integrate(sym, 0.0, x0, &[], quad_tol())? + integrate(sym, x0, 2.0 * x0, &[], quad_tol())?;
        let far_fn = |w: f64| Complex64::new(self.j(w) / (w - x0), 0.0);
        let w = self.split_point(x0).max(4.0 * x0);
        let far = integrate(far_fn, 2.0 * x0, w, &[self.omega_c, self.peak_frequency()], quad_tol())?
            + integrate_complex_to_infinity(far_fn, w, self.omega_c, quad_tol())?;
        Ok(MarkovRates {
            kappa,
            delta: (near + far).re,
        })
    }
}

impl ProbeConfig {
    pub fn new(omega0: f64, gamma: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega0",
                value: omega0,
                reason: "probe frequency must be positive",
            });
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "estimated parameter must be finite and non-negative",
            });
        }
        Ok(Self { omega0, gamma })
    }

    /// Probe in natural units (`omega0 = 1`).
    pub fn with_gamma(gamma: f64) -> Result<Self> {
        Self::new(1.0, gamma)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Bare frequency `omega0 + gamma` of the encoded mode.
    pub fn frequency(&self) -> f64 {
        self.omega0 + self.gamma
    }

    pub fn shifted(&self, d_gamma: f64) -> Result<Self> {
        Self::new(self.omega0, self.gamma + d_gamma)
    }
}
