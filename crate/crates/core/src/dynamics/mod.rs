//! Exact probe amplitude `c(t)` from the memory-kernel equation
//! `c' + i(omega0 + gamma) c + int_0^t f(t - tau) c(tau) dtau = 0`, `c(0) = 1`,
//! together with its gamma-sensitivity, plus the Markovian and bound-state
//! closed forms.
//!
//! The equation is integrated for `w(t) = e^{i(omega0+gamma)t} c(t)`, whose
//! kernel `f(t) e^{i(omega0+gamma)t}` is still a convolution kernel. The bare
//! phase is then exact and only the memory part carries discretization error.
//! Time stepping is implicit trapezoidal with trapezoidal memory quadrature
//! (second order); the memory sum uses the FFT-blocked causal convolution.

mod convolution;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundstate::BoundState;
use crate::error::{Error, Result};
use crate::spectral::{ProbeConfig, SpectralDensity};
use convolution::{Causal, Link};

pub const MAX_STEPS: f64 = 1e7;
const INSTABILITY_LIMIT: f64 = 1.0 + 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Markovian,
    Asymptotic,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Markovian => "markovian",
            Method::Asymptotic => "asymptotic",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Samples of `c(t)` (and optionally `dc/dgamma`) on a uniform grid starting at 0.
///
/// `c` keeps the full `e^{-i(omega0+gamma)t}` phase of the encoded mode.
#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub c: Vec<Complex64>,
    pub dc_dgamma: Option<Vec<Complex64>>,
    pub method: Method,
    spectral: SpectralDensity,
    probe: ProbeConfig,
}

/// `min(0.02/omega_c, 0.02/(omega0+gamma))`.
pub fn default_dt(sd: &SpectralDensity, probe: &ProbeConfig) -> f64 {
    (0.02 / sd.omega_c()).min(0.02 / probe.frequency())
}

fn grid(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            reason: "end time must be positive",
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "time step must be positive",
        });
    }
    let ratio = t_end / dt;
    if ratio > MAX_STEPS {
        return Err(Error::TooManySteps(ratio));
    }
    // dt is an upper bound; the grid lands on t_end exactly
    let steps = (ratio - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, t_end / steps as f64))
}

struct Kernels {
    rotated: Vec<Complex64>,
    sensitivity: Vec<Complex64>,
}

fn kernels(sd: &SpectralDensity, probe: &ProbeConfig, len: usize, dt: f64, with_sensitivity: bool) -> Kernels {
    let omega = probe.frequency();
    let rotated: Vec<Complex64> = (0..len)
        .map(|m| {
            let t = m as f64 * dt;
            sd.correlation(t) * Complex64::from_polar(1.0, omega * t)
        })
        .collect();
    let sensitivity = if with_sensitivity {
        rotated
            .iter()
            .enumerate()
            .map(|(m, f)| f * Complex64::new(0.0, m as f64 * dt))
            .collect()
    } else {
        Vec::new()
    };
    Kernels { rotated, sensitivity }
}

/// Rotating-frame recursion. `prefilled_w` switches off the `w` lane and reuses
/// given samples; `sensitivity` adds the `dw/dgamma` lane.
fn integrate(
    sd: &SpectralDensity,
    probe: &ProbeConfig,
    steps: usize,
    dt: f64,
    prefilled_w: Option<Vec<Complex64>>,
    sensitivity: bool,
) -> Result<(Vec<Complex64>, Option<Vec<Complex64>>)> {
    let n = steps + 1;
    let padded = Causal::padded_len(n);
    let ker = kernels(sd, probe, padded, dt, sensitivity);
    let f0 = ker.rotated[0];
    let h = dt;
    let denom = Complex64::new(1.0, 0.0) + f0 * (0.25 * h * h);

    let solve_w = prefilled_w.is_none();
    let zero = Complex64::new(0.0, 0.0);
    let mut links = Vec::new();
    if solve_w {
        links.push(Link { kernel: 0, source: 0 });
    }
    if sensitivity {
        links.push(Link { kernel: 0, source: 1 });
        links.push(Link { kernel: 1, source: 0 });
    }
    let kernel_set = if sensitivity {
        vec![ker.rotated, ker.sensitivity]
    } else {
        vec![ker.rotated]
    };
    let mut lanes = vec![prefilled_w.unwrap_or_else(|| vec![zero; n])];
    if sensitivity {
        lanes.push(vec![zero; n]);
    }

    let mut memory_w = zero;
    let mut memory_v = zero;
    let offset = usize::from(solve_w);
    let f_rot = &kernel_set[0];
    let f_sens = kernel_set.get(1);
    Causal::new(n, &kernel_set, &links).run(&mut lanes, |k, conv, lanes| {
        if k == 0 {
            if solve_w {
                lanes[0][0] = Complex64::new(1.0, 0.0);
            }
            if sensitivity {
                lanes[1][0] = zero;
                memory_v = zero;
            }
            memory_w = zero;
            return Ok(());
        }
        let w0 = lanes[0][0];
        if solve_w {
            let history = (conv[0] - f_rot[k] * w0 * 0.5) * h;
            let w = (lanes[0][k - 1] - (memory_w + history) * (0.5 * h)) / denom;
            if w.norm() > INSTABILITY_LIMIT {
                return Err(Error::Unstable {
                    time: k as f64 * h,
                    modulus: w.norm(),
                });
            }
            lanes[0][k] = w;
            memory_w = history + f0 * w * (0.5 * h);
        }
        if let Some(f_sens) = f_sens {
            let history_v = conv[offset] * h; // v_0 = 0
            let forcing = (conv[offset + 1] - f_sens[k] * w0 * 0.5) * h;
            let v = (lanes[1][k - 1] - (memory_v + history_v + forcing) * (0.5 * h)) / denom;
            lanes[1][k] = v;
            memory_v = history_v + forcing + f0 * v * (0.5 * h);
        }
        Ok(())
    })?;
    let v = if sensitivity { lanes.pop() } else { None };
    let w = lanes.pop().expect("w lane");
    Ok((w, v))
}

impl AmplitudeTrajectory {
    fn from_rotating(
        sd: &SpectralDensity,
        probe: &ProbeConfig,
        dt: f64,
        w: &[Complex64],
        v: Option<&[Complex64]>,
    ) -> Self {
        let omega = probe.frequency();
        let times: Vec<f64> = (0..w.len()).map(|k| k as f64 * dt).collect();
        let phase: Vec<Complex64> = times.iter().map(|&t| Complex64::from_polar(1.0, -omega * t)).collect();
        let c = w.iter().zip(&phase).map(|(w, p)| w * p).collect();
        let dc = v.map(|v| {
            v.iter()
                .zip(w)
                .zip(&phase)
                .zip(&times)
                .map(|(((v, w), p), &t)| (v - Complex64::new(0.0, t) * w) * p)
                .collect()
        });
        Self {
            dt,
            times,
            c,
            dc_dgamma: dc,
            method: Method::Exact,
            spectral: *sd,
            probe: *probe,
        }
    }

    pub fn spectral(&self) -> &SpectralDensity {
        &self.spectral
    }

    pub fn probe(&self) -> &ProbeConfig {
        &self.probe
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Linear interpolation of `(c, dc/dgamma)` at time `t` inside the grid.
    pub fn sample(&self, t: f64) -> Result<(Complex64, Option<Complex64>)> {
        if !(t >= 0.0 && t <= self.t_end() * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                operation: "trajectory sample",
                value: t,
                reason: "time outside the solved grid",
            });
        }
        let x = (t / self.dt).min((self.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.len().saturating_sub(2));
        let frac = x - i as f64;
        let lerp = |v: &[Complex64]| {
            if self.len() == 1 {
                v[0]
            } else {
                v[i] * (1.0 - frac) + v[i + 1] * frac
            }
        };
        Ok((lerp(&self.c), self.dc_dgamma.as_deref().map(lerp)))
    }

    /// Columns `t, re_c, im_c, abs_c, re_dc, im_dc`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# method = {}, s = {}, eta = {}, omega_c = {}, omega0 = {}, gamma = {}, dt = {:e}",
            self.method,
            self.spectral.s(),
            self.spectral.eta(),
            self.spectral.omega_c(),
            self.probe.omega0(),
            self.probe.gamma(),
            self.dt
        )?;
        writeln!(out, "t,re_c,im_c,abs_c,re_dc_dgamma,im_dc_dgamma")?;
        for (k, (&t, c)) in self.times.iter().zip(&self.c).enumerate() {
            let dc = self.dc_dgamma.as_ref().map(|d| d[k]);
            let (dre, dim) = dc.map(|d| (d.re, d.im)).unwrap_or((f64::NAN, f64::NAN));
            writeln!(
                out,
                "{t:.16e},{:.16e},{:.16e},{:.16e},{dre:.16e},{dim:.16e}",
                c.re,
                c.im,
                c.norm()
            )?;
        }
        Ok(())
    }
}

/// Exact `c(t)` on `[0, t_end]` with step at most `dt`.
pub fn solve_c(sd: &SpectralDensity, probe: &ProbeConfig, t_end: f64, dt: f64) -> Result<AmplitudeTrajectory> {
    let (steps, h) = grid(t_end, dt)?;
    let (w, _) = integrate(sd, probe, steps, h, None, false)?;
    Ok(AmplitudeTrajectory::from_rotating(sd, probe, h, &w, None))
}

/// `c(t)` and `dc/dgamma` in a single pass.
pub fn solve_c_with_sensitivity(
    sd: &SpectralDensity,
    probe: &ProbeConfig,
    t_end: f64,
    dt: f64,
) -> Result<AmplitudeTrajectory> {
    let (steps, h) = grid(t_end, dt)?;
    let (w, v) = integrate(sd, probe, steps, h, None, true)?;
    Ok(AmplitudeTrajectory::from_rotating(sd, probe, h, &w, v.as_deref()))
}

/// Solves the gamma-derivative equation
/// `d' + i c + i(omega0+gamma) d + int f(t-tau) d(tau) dtau = 0`, `d(0) = 0`,
/// driven by an existing exact trajectory.
pub fn solve_sensitivity(
    sd: &SpectralDensity,
    probe: &ProbeConfig,
    trajectory: &AmplitudeTrajectory,
) -> Result<AmplitudeTrajectory> {
    if trajectory.method != Method::Exact {
        return Err(Error::Mismatch("sensitivity needs an exact trajectory".into()));
    }
    if trajectory.spectral != *sd || trajectory.probe != *probe {
        return Err(Error::Mismatch("trajectory was solved with different parameters".into()));
    }
    let n = trajectory.len();
    let uniform = n >= 2
        && trajectory.c.len() == n
        && trajectory
            .times
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - k as f64 * trajectory.dt).abs() <= 1e-9 * trajectory.dt.max(t));
    if !uniform {
        return Err(Error::Mismatch("trajectory grid is not the uniform solver grid".into()));
    }
    let omega = probe.frequency();
    let w: Vec<Complex64> = trajectory
        .c
        .iter()
        .zip(&trajectory.times)
        .map(|(c, &t)| c * Complex64::from_polar(1.0, omega * t))
        .collect();
    let (w, v) = integrate(sd, probe, n - 1, trajectory.dt, Some(w), true)?;
    Ok(AmplitudeTrajectory::from_rotating(sd, probe, trajectory.dt, &w, v.as_deref()))
}

/// `exp{-[kappa + i(omega0 + gamma + Delta)] t}`.
pub fn markovian_c(sd: &SpectralDensity, probe: &ProbeConfig, t: f64) -> Result<Complex64> {
    let rates = sd.markov_rates(probe)?;
    Ok(markovian_from_rates(rates.kappa, probe.frequency() + rates.delta, t))
}

pub(crate) fn markovian_from_rates(kappa: f64, frequency: f64, t: f64) -> Complex64 {
    Complex64::from_polar((-kappa * t).exp(), -frequency * t)
}

/// Long-time limit `Z e^{-i varpi_b t}`.
pub fn asymptotic_c(bs: &BoundState, t: f64) -> Complex64 {
    Complex64::from_polar(bs.z, -bs.varpi_b * t)
}

/// Gamma-derivative of the long-time limit, `(dZ/dgamma - i Z^2 t) e^{-i varpi_b t}`,
/// using `d varpi_b / d gamma = Z`.
pub fn asymptotic_sensitivity(bs: &BoundState, dz_dgamma: f64, t: f64) -> Complex64 {
    Complex64::new(dz_dgamma, -bs.z * bs.z * t) * Complex64::from_polar(1.0, -bs.varpi_b * t)
}

/// Photon transmission `N(t)/N = (1 + |c|^2)/2`.
pub fn transmission(c: Complex64) -> f64 {
    debug_assert!(c.norm() <= 1.0 + 1e-9);
    0.5 * (1.0 + c.norm_sqr())
}
