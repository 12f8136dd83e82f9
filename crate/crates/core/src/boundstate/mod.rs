//! Isolated single-excitation eigenfrequency (bound state) below the bath band.
//!
//! The pole condition is `y(varpi) = varpi` with
//! `y(varpi) = omega0 + gamma - int_0^inf J(w)/(w - varpi) dw`. On `varpi < 0`
//! the function `g(varpi) = y(varpi) - varpi` is strictly decreasing, so a root
//! exists there iff `g(0-) < 0`, and it is unique.

pub mod discrete;

pub use discrete::{discretized_spectrum, DiscreteBath, SecularRoot, SpectrumSlice};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::brent;
use crate::spectral::{ProbeConfig, SpectralDensity};

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub varpi_b: f64,
    /// Residue `Z = [1 + int J/(varpi_b - w)^2]^{-1}`.
    pub z: f64,
    /// `|y(varpi_b) - varpi_b|` at the returned root.
    pub residual: f64,
}

/// `y(0) = omega0 + gamma - int J(w)/w dw`; negative means a bound state forms.
pub fn threshold_margin(sd: &SpectralDensity, probe: &ProbeConfig) -> f64 {
    probe.frequency() - sd.inverse_moment()
}

pub fn bound_state_exists(sd: &SpectralDensity, probe: &ProbeConfig) -> bool {
    sd.eta() > 0.0 && threshold_margin(sd, probe) <= 0.0
}

/// Ohmic cutoff above which a bound state exists for fixed `eta`, `s`.
pub fn threshold_omega_c(s: f64, eta: f64, probe: &ProbeConfig) -> f64 {
    probe.frequency() / (eta * crate::special::gamma(s))
}

/// `g(varpi) = y(varpi) - varpi`.
pub fn pole_function(sd: &SpectralDensity, probe: &ProbeConfig, varpi: f64) -> Result<f64> {
    Ok(probe.frequency() - sd.dispersion_integral(varpi)? - varpi)
}

const BRACKET_TOP: f64 = -1e-12;

/// Bracket `[lo, BRACKET_TOP]` of the unique sign change of `g` on `varpi < 0`.
pub fn bracket(sd: &SpectralDensity, probe: &ProbeConfig) -> Result<(f64, f64)> {
    let margin = threshold_margin(sd, probe);
    if !bound_state_exists(sd, probe) || margin == 0.0 {
        return Err(Error::NoBoundState { margin });
    }
    if pole_function(sd, probe, BRACKET_TOP)? >= 0.0 {
        return Err(Error::Bracket("bound state lies within 1e-12 of the band edge"));
    }
    let mut lo = -probe.omega0();
    for _ in 0..200 {
        if pole_function(sd, probe, lo)? > 0.0 {
            return Ok((lo, BRACKET_TOP));
        }
        lo *= 2.0;
    }
    Err(Error::Bracket("bound-state lower bracket"))
}

pub fn find_bound_state(sd: &SpectralDensity, probe: &ProbeConfig, tol: f64) -> Result<BoundState> {
    let (lo, hi) = bracket(sd, probe)?;
    let g = |v: f64| pole_function(sd, probe, v).unwrap_or(f64::NAN);
    let mut varpi = brent(g, lo, hi, 1e-15 * lo.abs(), 500)?;
    let mut residual = g(varpi).abs();
    // Newton polish; g' = -1 - residue_integral
    for _ in 0..3 {
        if residual < 0.1 * tol {
            break;
        }
        let slope = -1.0 - sd.residue_integral(varpi)?;
        let next = varpi - g(varpi) / slope;
        if next >= 0.0 {
            break;
        }
        let r = g(next).abs();
        if r < residual {
            varpi = next;
            residual = r;
        } else {
            break;
        }
    }
    if !(residual < tol) {
        return Err(Error::Bracket("bound-state residual above tolerance"));
    }
    let z = 1.0 / (1.0 + sd.residue_integral(varpi)?);
    Ok(BoundState {
        varpi_b: varpi,
        z,
        residual,
    })
}

/// Ohmic closed form `Z = [(omega0+gamma-eta*omega_c)/varpi_b + (varpi_b-omega0-gamma)/omega_c]^{-1}`.
pub fn ohmic_residue_closed_form(sd: &SpectralDensity, probe: &ProbeConfig, varpi_b: f64) -> Option<f64> {
    if !sd.is_ohmic() {
        return None;
    }
    let x0 = probe.frequency();
    let wc = sd.omega_c();
    Some(1.0 / ((x0 - sd.eta() * wc) / varpi_b + (varpi_b - x0) / wc))
}

/// Central difference `d varpi_b / d gamma`; equals `Z` analytically.
pub fn dz_dgamma_check(sd: &SpectralDensity, probe: &ProbeConfig, delta: f64) -> Result<f64> {
    let up = find_bound_state(sd, &probe.shifted(delta)?, DEFAULT_TOL)?;
    let down = find_bound_state(sd, &probe.shifted(-delta)?, DEFAULT_TOL)?;
    Ok((up.varpi_b - down.varpi_b) / (2.0 * delta))
}

/// Central difference of `Z` itself with respect to `gamma`.
pub fn residue_gamma_derivative(sd: &SpectralDensity, probe: &ProbeConfig, delta: f64) -> Result<f64> {
    let up = find_bound_state(sd, &probe.shifted(delta)?, DEFAULT_TOL)?;
    let down = find_bound_state(sd, &probe.shifted(-delta)?, DEFAULT_TOL)?;
    Ok((up.z - down.z) / (2.0 * delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn probe() -> ProbeConfig {
        ProbeConfig::with_gamma(PI).unwrap()
    }

    #[test]
    fn threshold_for_reference_parameters() {
        let p = probe();
        let wc_star = threshold_omega_c(1.0, 0.02, &p);
        assert!((wc_star - (1.0 + PI) / 0.02).abs() < 1e-10);
        assert!((wc_star - 207.079_632_679_489_66).abs() < 1e-9);
        assert!(!bound_state_exists(&SpectralDensity::ohmic(0.02, 200.0).unwrap(), &p));
        assert!(bound_state_exists(&SpectralDensity::ohmic(0.02, 250.0).unwrap(), &p));
        for g in [0.0, 1.0, 10.0] {
            let q = ProbeConfig::with_gamma(g).unwrap();
            assert!(!bound_state_exists(&SpectralDensity::ohmic(0.0, 1e6).unwrap(), &q));
        }
    }

    #[test]
    fn non_ohmic_criterion_uses_gamma_of_s() {
        // int J/w = eta wc Gamma(s)
        let p = ProbeConfig::with_gamma(0.5).unwrap();
        let s = 0.5;
        let wc_star = threshold_omega_c(s, 0.1, &p);
        let below = SpectralDensity::new(s, 0.1, 0.99 * wc_star).unwrap();
        let above = SpectralDensity::new(s, 0.1, 1.01 * wc_star).unwrap();
        assert!(!bound_state_exists(&below, &p));
        assert!(bound_state_exists(&above, &p));
        let bs = find_bound_state(&above, &p, DEFAULT_TOL).unwrap();
        assert!(bs.varpi_b < 0.0 && bs.z > 0.0 && bs.z <= 1.0);
    }

    #[test]
    fn root_residual_and_closed_form_residue() {
        let sd = SpectralDensity::ohmic(0.02, 300.0).unwrap();
        let bs = find_bound_state(&sd, &probe(), DEFAULT_TOL).unwrap();
        assert!(bs.residual < 1e-10);
        assert!(pole_function(&sd, &probe(), bs.varpi_b).unwrap().abs() < 1e-10);
        let closed = ohmic_residue_closed_form(&sd, &probe(), bs.varpi_b).unwrap();
        assert!(((closed - bs.z) / closed).abs() < 1e-8);
        let quad = 1.0 / (1.0 + sd.residue_integral_quadrature(bs.varpi_b).unwrap());
        assert!(((closed - quad) / closed).abs() < 1e-8);
    }

    #[test]
    fn missing_bound_state_is_an_error() {
        let sd = SpectralDensity::ohmic(0.02, 200.0).unwrap();
        assert!(matches!(
            find_bound_state(&sd, &probe(), DEFAULT_TOL),
            Err(Error::NoBoundState { .. })
        ));
        assert!(dz_dgamma_check(&sd, &probe(), 1e-4).is_err());
    }

    #[test]
    fn bracket_contains_single_monotone_sign_change() {
        for wc in [210.0, 400.0, 5000.0] {
            let sd = SpectralDensity::ohmic(0.02, wc).unwrap();
            let (lo, hi) = bracket(&sd, &probe()).unwrap();
            let g: Vec<f64> = (0..=200)
                .map(|i| pole_function(&sd, &probe(), lo + (hi - lo) * i as f64 / 200.0).unwrap())
                .collect();
            assert!(g[0] > 0.0 && g[200] < 0.0);
            assert!(g.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn residue_grows_with_cutoff_from_threshold() {
        let p = probe();
        let wc_star = threshold_omega_c(1.0, 0.02, &p);
        let mut last = 0.0;
        for rel in [1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.5, 1.0, 4.0] {
            let sd = SpectralDensity::ohmic(0.02, wc_star * (1.0 + rel)).unwrap();
            let bs = find_bound_state(&sd, &p, DEFAULT_TOL).unwrap();
            assert!(bs.z > last, "rel={rel} z={}", bs.z);
            last = bs.z;
        }
    }

    #[test]
    fn gamma_derivative_of_root_is_residue() {
        let sd = SpectralDensity::ohmic(0.02, 300.0).unwrap();
        let bs = find_bound_state(&sd, &probe(), DEFAULT_TOL).unwrap();
        let fd = dz_dgamma_check(&sd, &probe(), 1e-4).unwrap();
        assert!(((fd - bs.z) / bs.z).abs() < 1e-5);
    }

    #[test]
    fn gamma_derivative_stencil_is_second_order() {
        // Large stencils so truncation dominates rounding.
        let sd = SpectralDensity::ohmic(0.02, 260.0).unwrap();
        let z = find_bound_state(&sd, &probe(), DEFAULT_TOL).unwrap().z;
        let e1 = (dz_dgamma_check(&sd, &probe(), 0.2).unwrap() - z).abs();
        let e2 = (dz_dgamma_check(&sd, &probe(), 0.1).unwrap() - z).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.3, "ratio={ratio}");
    }
}
