//! Discretized bath in the single-excitation subspace.
//!
//! The Hamiltonian is an arrowhead matrix: probe frequency on the first diagonal
//! entry, mode frequencies `w_k` on the rest, couplings `g_k = sqrt(J(w_k) dw)`
//! on the first row and column. Its eigenvalues solve the secular equation
//! `E - (omega0 + gamma) = sum_k g_k^2 / (E - w_k)`, one root per gap between
//! consecutive mode frequencies plus one below and one above the band.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{ProbeConfig, SpectralDensity};

#[derive(Debug, Clone)]
pub struct DiscreteBath {
    probe_frequency: f64,
    modes: Vec<f64>,
    couplings: Vec<f64>,
}

/// Eigenvalue stored as an offset from the nearest pole, which keeps
/// `E - w_k` accurate for roots squeezed against a pole.
#[derive(Debug, Clone, Copy)]
pub struct SecularRoot {
    origin: f64,
    tau: f64,
    /// Weight of the eigenvector on the probe mode, `|x|^2`.
    pub probe_weight: f64,
}

impl SecularRoot {
    pub fn energy(&self) -> f64 {
        self.origin + self.tau
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSlice {
    pub omega_c: f64,
    pub eigenfrequencies: Vec<f64>,
    pub discretization_count: usize,
}

impl SpectrumSlice {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# omega_c = {:.17e}", self.omega_c)?;
        writeln!(out, "# discretization_count = {}", self.discretization_count)?;
        writeln!(out, "index,eigenfrequency")?;
        for (i, e) in self.eigenfrequencies.iter().enumerate() {
            writeln!(out, "{i},{e:.16e}")?;
        }
        Ok(())
    }
}

/// Default band `[1e-4 omega0, 8 omega_c]`.
pub fn default_band(sd: &SpectralDensity, probe: &ProbeConfig) -> (f64, f64) {
    (1e-4 * probe.omega0(), 8.0 * sd.omega_c())
}

impl DiscreteBath {
    /// Midpoint grid of `m` modes on `band`.
    pub fn new(sd: &SpectralDensity, probe: &ProbeConfig, m: usize, band: (f64, f64)) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m as f64,
                reason: "need at least two bath modes",
            });
        }
        let (lo, hi) = band;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "band",
                value: lo,
                reason: "band must be an interval inside (0, inf)",
            });
        }
        let dw = (hi - lo) / m as f64;
        let modes: Vec<f64> = (0..m).map(|k| lo + (k as f64 + 0.5) * dw).collect();
        let couplings = modes.iter().map(|&w| (sd.j(w) * dw).sqrt()).collect();
        Ok(Self {
            probe_frequency: probe.frequency(),
            modes,
            couplings,
        })
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn dimension(&self) -> usize {
        self.modes.len() + 1
    }

    pub fn dense_hamiltonian(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut h = DMatrix::zeros(n, n);
        h[(0, 0)] = self.probe_frequency;
        for (k, (&w, &g)) in self.modes.iter().zip(&self.couplings).enumerate() {
            h[(k + 1, k + 1)] = w;
            h[(0, k + 1)] = g;
            h[(k + 1, 0)] = g;
        }
        h
    }

    /// All eigenvalues with their probe weights, ascending.
    pub fn secular_roots(&self) -> Vec<SecularRoot> {
        let scale = self
            .probe_frequency
            .abs()
            .max(self.modes.iter().fold(0.0f64, |a, &w| a.max(w.abs())));
        let cut = f64::EPSILON * scale;
        let mut poles = Vec::with_capacity(self.modes.len());
        let mut weights = Vec::with_capacity(self.modes.len());
        let mut roots = Vec::with_capacity(self.dimension());
        for (&w, &g) in self.modes.iter().zip(&self.couplings) {
            if g.abs() > cut {
                poles.push(w);
                weights.push(g * g);
            } else {
                // decoupled mode: exact eigenvalue with no probe weight
                roots.push(SecularRoot {
                    origin: w,
                    tau: 0.0,
                    probe_weight: 0.0,
                });
            }
        }
        if poles.is_empty() {
            roots.push(SecularRoot {
                origin: self.probe_frequency,
                tau: 0.0,
                probe_weight: 1.0,
            });
        } else {
            let solver = Secular {
                d0: self.probe_frequency,
                poles: &poles,
                weights: &weights,
            };
            let n = poles.len();
            let found: Vec<SecularRoot> = (0..=n).into_par_iter().map(|i| solver.root(i)).collect();
            roots.extend(found);
        }
        roots.sort_by(|a, b| a.energy().total_cmp(&b.energy()));
        roots
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.secular_roots().iter().map(SecularRoot::energy).collect()
    }

    /// Probe amplitude `<probe| e^{-iHt} |probe>` from the eigen-expansion.
    pub fn probe_amplitude(roots: &[SecularRoot], t: f64) -> Complex64 {
        roots
            .iter()
            .map(|r| Complex64::from_polar(r.probe_weight, -r.energy() * t))
            .sum()
    }
}

struct Secular<'a> {
    d0: f64,
    poles: &'a [f64],
    weights: &'a [f64],
}

impl Secular<'_> {
    // h(origin + tau) and its derivative
    fn eval(&self, origin: f64, tau: f64) -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for (&p, &w) in self.poles.iter().zip(self.weights) {
            let d = (origin - p) + tau;
            let q = w / d;
            s += q;
            ds += q / d;
        }
        (origin + tau - self.d0 - s, 1.0 + ds)
    }

    fn probe_weight(&self, origin: f64, tau: f64) -> f64 {
        let ds: f64 = self
            .poles
            .iter()
            .zip(self.weights)
            .map(|(&p, &w)| {
                let d = (origin - p) + tau;
                w / (d * d)
            })
            .sum();
        1.0 / (1.0 + ds)
    }

    /// Root in the `i`-th interval: `(-inf, p0)`, `(p0, p1)`, ..., `(p_{n-1}, inf)`.
    fn root(&self, i: usize) -> SecularRoot {
        let n = self.poles.len();
        let total: f64 = self.weights.iter().sum();
        let pad = total.sqrt() + 1.0;
        let (origin, mut lo, mut hi) = if i == 0 {
            let p0 = self.poles[0];
            (p0, self.d0.min(p0) - pad - p0, 0.0)
        } else if i == n {
            let p = self.poles[n - 1];
            (p, 0.0, self.d0.max(p) + pad - p)
        } else {
            let (a, b) = (self.poles[i - 1], self.poles[i]);
            let half = 0.5 * (b - a);
            if self.eval(a, half).0 > 0.0 {
                (a, 0.0, half)
            } else {
                (b, -half, 0.0)
            }
        };
        // safeguarded Newton on the increasing function h
        let mut tau = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (h, dh) = self.eval(origin, tau);
            if h == 0.0 {
                break;
            }
            if h > 0.0 {
                hi = tau;
            } else {
                lo = tau;
            }
            let newton = tau - h / dh;
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if next == tau || (hi - lo) <= 4.0 * f64::EPSILON * tau.abs().max(f64::MIN_POSITIVE) {
                tau = next;
                break;
            }
            tau = next;
        }
        SecularRoot {
            origin,
            tau,
            probe_weight: self.probe_weight(origin, tau),
        }
    }
}

pub fn discretized_spectrum(
    sd: &SpectralDensity,
    probe: &ProbeConfig,
    m: usize,
    band: (f64, f64),
) -> Result<SpectrumSlice> {
    let bath = DiscreteBath::new(sd, probe, m, band)?;
    Ok(SpectrumSlice {
        omega_c: sd.omega_c(),
        eigenfrequencies: bath.eigenvalues(),
        discretization_count: m,
    })
}
