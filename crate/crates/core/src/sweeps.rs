//! Experiment runner: named presets, free-form sweeps over `t`, `N` or
//! `omega_c`, deterministic parallel evaluation and CSV/JSON output.
//!
//! Config files are flat `key = value` lines grouped under `[section]`
//! headers; `#` and `;` start comments. Lists are comma separated.
//!
//! ```text
//! [sweep]
//! observable = precision      # amplitude | precision | spectrum
//! variable = t                # t | N | omega_c
//! start = 1
//! stop = 10
//! points = 46
//! spacing = linear            # linear | log
//!
//! [physics]
//! s = 1
//! eta = 0.02                  # or: eta_rule = 3
//! omega_c = 100, 400, 1000
//! gamma = pi
//! n_avg = 10
//! t = 10                      # or: t_omega_c = 10
//!
//! [solver]
//! methods = exact, asymptotic
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundstate::discrete::{default_band, DiscreteBath};
use crate::boundstate::{bound_state_exists, find_bound_state, threshold_omega_c, BoundState};
use crate::dynamics::{
    asymptotic_c, default_dt, markovian_c, solve_c, solve_c_with_sensitivity, AmplitudeTrajectory, Method,
};
use crate::error::{Error, Result};
use crate::fockstate::{alpha_of_n, rho_with_derivative, EcsBranches};
use crate::qfi::{benchmark_limits, precision, qfi_asymptotic, qfi_ideal, qfi_markovian, qfi_mixed, qfi_mixed_compact};
use crate::special::gamma;
use crate::spectral::{ProbeConfig, SpectralDensity};

pub const PRESETS: [&str; 8] = ["fig1b", "fig1c", "fig1d", "fig2a", "fig2b", "fig3a", "fig3b", "fig3c"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// `|c(t)|`, long-time `|c|` and `Z`.
    Amplitude,
    /// QFI and Cramer-Rao precision.
    Precision,
    /// Lowest eigenfrequencies of the discretized bath.
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "t")]
    Time,
    #[serde(rename = "N")]
    PhotonNumber,
    #[serde(rename = "omega_c")]
    OmegaC,
}

impl Variable {
    pub fn name(&self) -> &'static str {
        match self {
            Variable::Time => "t",
            Variable::PhotonNumber => "N",
            Variable::OmegaC => "omega_c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub variable: Variable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    return self.stop;
                }
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * f,
                    Spacing::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * f).exp(),
                }
            })
            .collect()
    }
}

/// Coupling strength: fixed, or `eta = factor (omega0 + gamma) / (omega_c Gamma(s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Fixed(f64),
    Rule(f64),
}

/// Encoding time: fixed, or `t = factor / omega_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeRule {
    Fixed(f64),
    PerOmegaC(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (csv | json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub observable: Observable,
    pub axis: Axis,
    pub s: f64,
    pub coupling: Coupling,
    /// Curves over cutoff frequency (ignored when it is the sweep variable).
    pub omega_c: Vec<f64>,
    pub omega0: f64,
    pub gamma: f64,
    /// Curves over photon number (ignored when it is the sweep variable).
    pub n_avg: Vec<f64>,
    pub time: TimeRule,
    pub mu: u32,
    pub methods: Vec<Method>,
    /// Upper bound on the solver step; default `min(0.02/omega_c, 0.02/(omega0+gamma))`.
    pub dt: Option<f64>,
    /// Dense Fock cutoff; when set the dense path replaces the analytic one.
    pub cutoff: Option<usize>,
    pub tolerance: f64,
    /// Long-time horizon for amplitude sweeps over `omega_c`.
    pub t_long: f64,
    /// Bath modes for spectrum sweeps.
    pub modes: usize,
    /// Eigenfrequencies reported per spectrum point.
    pub levels: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            observable: Observable::Precision,
            axis: Axis {
                variable: Variable::Time,
                start: 1.0,
                stop: 10.0,
                points: 10,
                spacing: Spacing::Linear,
            },
            s: 1.0,
            coupling: Coupling::Fixed(0.02),
            omega_c: vec![400.0],
            omega0: 1.0,
            gamma: std::f64::consts::PI,
            n_avg: vec![10.0],
            time: TimeRule::Fixed(10.0),
            mu: 1,
            methods: vec![Method::Exact],
            dt: None,
            cutoff: None,
            tolerance: crate::boundstate::DEFAULT_TOL,
            t_long: 200.0,
            modes: 4000,
            levels: 5,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_number(key: &str, raw: &str) -> Result<f64> {
    let v = raw.trim();
    let lower = v.to_ascii_lowercase();
    let parsed = if let Some(prefix) = lower.strip_suffix("pi") {
        let prefix = prefix.trim().trim_end_matches('*').trim();
        let scale = if prefix.is_empty() { Ok(1.0) } else { prefix.parse::<f64>() };
        scale.map(|k| k * std::f64::consts::PI)
    } else {
        lower.parse::<f64>()
    };
    match parsed {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(config_err(format!("{key}: '{v}' is not a number"))),
    }
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = raw.split(',').map(|v| parse_number(key, v)).collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(config_err(format!("{key}: empty list")));
    }
    Ok(values)
}

fn parse_method(raw: &str) -> Result<Method> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "exact" => Ok(Method::Exact),
        "markovian" | "markov" => Ok(Method::Markovian),
        "asymptotic" => Ok(Method::Asymptotic),
        other => Err(config_err(format!("unknown method '{other}'"))),
    }
}

impl ExperimentConfig {
    /// Parses the sectioned `key = value` format; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if map.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(config_err(format!("line {}: duplicate key {full}", lineno + 1)));
            }
        }
        Self::from_map(map)
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = match map.remove("sweep.preset") {
            Some(name) => preset(&name)?,
            None => ExperimentConfig::default(),
        };
        let mut take = |k: &str| map.remove(k);
        if let Some(v) = take("sweep.name") {
            cfg.name = v;
        }
        if let Some(v) = take("sweep.observable") {
            cfg.observable = match v.to_ascii_lowercase().as_str() {
                "amplitude" => Observable::Amplitude,
                "precision" => Observable::Precision,
                "spectrum" => Observable::Spectrum,
                other => return Err(config_err(format!("unknown observable '{other}'"))),
            };
        }
        if let Some(v) = take("sweep.variable") {
            cfg.axis.variable = match v.as_str() {
                "t" => Variable::Time,
                "N" | "n" | "n_avg" => Variable::PhotonNumber,
                "omega_c" => Variable::OmegaC,
                other => return Err(config_err(format!("unknown sweep variable '{other}' (t | N | omega_c)"))),
            };
        }
        if let Some(v) = take("sweep.start") {
            cfg.axis.start = parse_number("start", &v)?;
        }
        if let Some(v) = take("sweep.stop") {
            cfg.axis.stop = parse_number("stop", &v)?;
        }
        if let Some(v) = take("sweep.points") {
            cfg.axis.points = v.parse().map_err(|_| config_err(format!("points: '{v}' is not a count")))?;
        }
        if let Some(v) = take("sweep.spacing") {
            cfg.axis.spacing = match v.to_ascii_lowercase().as_str() {
                "linear" | "lin" => Spacing::Linear,
                "log" => Spacing::Log,
                other => return Err(config_err(format!("unknown spacing '{other}'"))),
            };
        }
        if let Some(v) = take("physics.s") {
            cfg.s = parse_number("s", &v)?;
        }
        match (take("physics.eta"), take("physics.eta_rule")) {
            (Some(_), Some(_)) => return Err(config_err("set either eta or eta_rule, not both")),
            (Some(v), None) => cfg.coupling = Coupling::Fixed(parse_number("eta", &v)?),
            (None, Some(v)) => cfg.coupling = Coupling::Rule(parse_number("eta_rule", &v)?),
            (None, None) => {}
        }
        if let Some(v) = take("physics.omega_c") {
            cfg.omega_c = parse_list("omega_c", &v)?;
        }
        if let Some(v) = take("physics.omega0") {
            cfg.omega0 = parse_number("omega0", &v)?;
        }
        if let Some(v) = take("physics.gamma") {
            cfg.gamma = parse_number("gamma", &v)?;
        }
        if let Some(v) = take("physics.n_avg") {
            cfg.n_avg = parse_list("n_avg", &v)?;
        }
        match (take("physics.t"), take("physics.t_omega_c")) {
            (Some(_), Some(_)) => return Err(config_err("set either t or t_omega_c, not both")),
            (Some(v), None) => cfg.time = TimeRule::Fixed(parse_number("t", &v)?),
            (None, Some(v)) => cfg.time = TimeRule::PerOmegaC(parse_number("t_omega_c", &v)?),
            (None, None) => {}
        }
        if let Some(v) = take("physics.mu") {
            cfg.mu = v.parse().map_err(|_| config_err(format!("mu: '{v}' is not a positive integer")))?;
        }
        if let Some(v) = take("solver.methods") {
            cfg.methods = v.split(',').map(parse_method).collect::<Result<_>>()?;
        }
        if let Some(v) = take("solver.dt") {
            cfg.dt = Some(parse_number("dt", &v)?);
        }
        if let Some(v) = take("solver.cutoff") {
            cfg.cutoff = Some(v.parse().map_err(|_| config_err(format!("cutoff: '{v}' is not a count")))?);
        }
        if let Some(v) = take("solver.tolerance") {
            cfg.tolerance = parse_number("tolerance", &v)?;
        }
        if let Some(v) = take("solver.t_long") {
            cfg.t_long = parse_number("t_long", &v)?;
        }
        if let Some(v) = take("solver.modes") {
            cfg.modes = v.parse().map_err(|_| config_err(format!("modes: '{v}' is not a count")))?;
        }
        if let Some(v) = take("solver.levels") {
            cfg.levels = v.parse().map_err(|_| config_err(format!("levels: '{v}' is not a count")))?;
        }
        if let Some(key) = map.keys().next() {
            return Err(config_err(format!("unknown key '{key}'")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.axis;
        if a.points == 0 {
            return Err(config_err("sweep needs at least one point"));
        }
        if a.points > 1 && !(a.stop > a.start) {
            return Err(config_err(format!("range must be increasing (start {} >= stop {})", a.start, a.stop)));
        }
        if a.spacing == Spacing::Log && !(a.start > 0.0) {
            return Err(config_err("log spacing needs a positive start"));
        }
        if !(a.start >= 0.0) {
            return Err(config_err("sweep values must be nonnegative"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be positive, got {v}")))
            }
        };
        positive("s", self.s)?;
        positive("omega0", self.omega0)?;
        positive("tolerance", self.tolerance)?;
        positive("t_long", self.t_long)?;
        if !(self.gamma >= 0.0) {
            return Err(config_err(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        match self.coupling {
            Coupling::Fixed(eta) if !(eta >= 0.0) => return Err(config_err("eta must be nonnegative")),
            Coupling::Rule(k) => positive("eta_rule", k)?,
            _ => {}
        }
        match self.time {
            TimeRule::Fixed(t) if !(t >= 0.0) => return Err(config_err("t must be nonnegative")),
            TimeRule::PerOmegaC(k) => positive("t_omega_c", k)?,
            _ => {}
        }
        if a.variable != Variable::OmegaC {
            for &w in &self.omega_c {
                positive("omega_c", w)?;
            }
        } else if !(a.start > 0.0) {
            return Err(config_err("omega_c sweep must start above zero"));
        }
        if a.variable == Variable::PhotonNumber && !(a.start > 0.0) {
            return Err(config_err("N sweep must start above zero"));
        }
        if a.variable != Variable::PhotonNumber {
            for &n in &self.n_avg {
                positive("n_avg", n)?;
            }
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if self.mu == 0 {
            return Err(config_err("mu must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err("at least one method is required"));
        }
        match (self.observable, a.variable) {
            (Observable::Spectrum, Variable::OmegaC) => {
                if self.modes < 2 || self.levels == 0 {
                    return Err(config_err("spectrum needs modes >= 2 and levels >= 1"));
                }
            }
            (Observable::Spectrum, _) => return Err(config_err("spectrum sweeps run over omega_c")),
            (Observable::Amplitude, Variable::PhotonNumber) => {
                return Err(config_err("amplitude does not depend on N"))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn spectral_density(&self, omega_c: f64) -> Result<SpectralDensity> {
        let eta = match self.coupling {
            Coupling::Fixed(eta) => eta,
            Coupling::Rule(k) => k * (self.omega0 + self.gamma) / (omega_c * gamma(self.s)),
        };
        SpectralDensity::new(self.s, eta, omega_c)
    }

    pub fn probe(&self) -> Result<ProbeConfig> {
        ProbeConfig::new(self.omega0, self.gamma)
    }

    fn time_for(&self, omega_c: f64) -> f64 {
        match self.time {
            TimeRule::Fixed(t) => t,
            TimeRule::PerOmegaC(k) => k / omega_c,
        }
    }

    /// Plain-text echo used for result headers.
    pub fn echo(&self) -> Vec<String> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        let mut lines = vec![
            format!("name = {}", self.name),
            format!("observable = {}", serde_json::to_string(&self.observable).unwrap_or_default().trim_matches('"')),
            format!(
                "axis = {} from {} to {} ({} points, {})",
                self.axis.variable.name(),
                self.axis.start,
                self.axis.stop,
                self.axis.points,
                match self.axis.spacing {
                    Spacing::Linear => "linear",
                    Spacing::Log => "log",
                }
            ),
            format!("s = {}", self.s),
            match self.coupling {
                Coupling::Fixed(eta) => format!("eta = {eta}"),
                Coupling::Rule(k) => format!("eta = {k} (omega0 + gamma) / (omega_c Gamma(s))"),
            },
            format!("omega_c = {}", list(&self.omega_c)),
            format!("omega0 = {}", self.omega0),
            format!("gamma = {}", self.gamma),
            format!("n_avg = {}", list(&self.n_avg)),
            match self.time {
                TimeRule::Fixed(t) => format!("t = {t}"),
                TimeRule::PerOmegaC(k) => format!("t = {k} / omega_c"),
            },
            format!("mu = {}", self.mu),
            format!(
                "methods = {}",
                self.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
            ),
        ];
        let shadowed = match self.axis.variable {
            Variable::Time => "t = ",
            Variable::PhotonNumber => "n_avg = ",
            Variable::OmegaC => "omega_c = ",
        };
        lines.retain(|l| !l.starts_with(shadowed));
        lines.push(match self.dt {
            Some(dt) => format!("dt = {dt}"),
            None => "dt = min(0.02/omega_c, 0.02/(omega0+gamma))".into(),
        });
        if let Some(c) = self.cutoff {
            lines.push(format!("cutoff = {c}"));
        }
        lines.push(format!("tolerance = {}", self.tolerance));
        match self.observable {
            Observable::Amplitude => lines.push(format!("t_long = {}", self.t_long)),
            Observable::Spectrum => lines.push(format!("modes = {}, levels = {}", self.modes, self.levels)),
            Observable::Precision => {}
        }
        lines
    }
}

/// Builds a named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig {
        name: name.to_string(),
        ..ExperimentConfig::default()
    };
    let probe = base.probe()?;
    let wc_star = threshold_omega_c(1.0, 0.02, &probe);
    let axis = |variable, start, stop, points, spacing| Axis {
        variable,
        start,
        stop,
        points,
        spacing,
    };
    let cfg = match name {
        "fig1b" => ExperimentConfig {
            observable: Observable::Amplitude,
            axis: axis(Variable::Time, 0.0, 50.0, 501, Spacing::Linear),
            omega_c: vec![0.9 * wc_star, 1.1 * wc_star],
            methods: vec![Method::Exact, Method::Asymptotic],
            ..base
        },
        "fig1c" => ExperimentConfig {
            observable: Observable::Amplitude,
            axis: axis(Variable::OmegaC, 100.0, 400.0, 16, Spacing::Linear),
            methods: vec![Method::Exact, Method::Asymptotic],
            ..base
        },
        "fig1d" => ExperimentConfig {
            observable: Observable::Spectrum,
            axis: axis(Variable::OmegaC, 100.0, 400.0, 16, Spacing::Linear),
            ..base
        },
        "fig2a" => ExperimentConfig {
            axis: axis(Variable::Time, 0.2, 10.0, 50, Spacing::Linear),
            omega_c: vec![50.0, 100.0, 400.0, 1000.0],
            n_avg: vec![10.0],
            methods: vec![Method::Exact, Method::Asymptotic],
            ..base
        },
        "fig2b" => ExperimentConfig {
            axis: axis(Variable::PhotonNumber, 1.0, 1000.0, 31, Spacing::Log),
            omega_c: vec![100.0, 400.0, 1000.0],
            time: TimeRule::Fixed(10.0),
            methods: vec![Method::Exact, Method::Asymptotic],
            ..base
        },
        "fig3a" => ExperimentConfig {
            axis: axis(Variable::OmegaC, 100.0, 1e5, 31, Spacing::Log),
            coupling: Coupling::Rule(3.0),
            n_avg: vec![1.0, 10.0, 100.0],
            time: TimeRule::PerOmegaC(10.0),
            methods: vec![Method::Exact, Method::Asymptotic],
            ..base
        },
        "fig3b" => ExperimentConfig {
            observable: Observable::Amplitude,
            axis: axis(Variable::OmegaC, 100.0, 1e5, 31, Spacing::Log),
            coupling: Coupling::Rule(3.0),
            methods: vec![Method::Asymptotic],
            ..base
        },
        "fig3c" => ExperimentConfig {
            axis: axis(Variable::PhotonNumber, 1.0, 1e5, 51, Spacing::Log),
            coupling: Coupling::Rule(3.0),
            omega_c: vec![500.0, 1000.0, 1200.0, 2000.0, 5000.0],
            time: TimeRule::PerOmegaC(10.0),
            methods: vec![Method::Exact, Method::Asymptotic],
            ..base
        },
        other => {
            return Err(config_err(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// One output row; fields that do not apply to the observable are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub curve: usize,
    pub point: usize,
    pub value: f64,
    pub method: Method,
    pub omega_c: f64,
    pub eta: f64,
    pub n_avg: Option<f64>,
    pub t: Option<f64>,
    pub abs_c: Option<f64>,
    pub abs_c_check: Option<f64>,
    pub converged: Option<bool>,
    pub z: Option<f64>,
    pub varpi_b: Option<f64>,
    pub f_q: Option<f64>,
    pub delta_gamma: Option<f64>,
    pub ideal: Option<f64>,
    pub snl: Option<f64>,
    pub weak_hl: Option<f64>,
    pub zeno: Option<f64>,
    pub level: Option<usize>,
    pub eigenfrequency: Option<f64>,
    /// `ok` or the error that stopped this point.
    pub status: String,
}

impl SweepRow {
    fn new(curve: usize, point: usize, value: f64, method: Method, sd: &SpectralDensity) -> Self {
        Self {
            curve,
            point,
            value,
            method,
            omega_c: sd.omega_c(),
            eta: sd.eta(),
            n_avg: None,
            t: None,
            abs_c: None,
            abs_c_check: None,
            converged: None,
            z: None,
            varpi_b: None,
            f_q: None,
            delta_gamma: None,
            ideal: None,
            snl: None,
            weak_hl: None,
            zeno: None,
            level: None,
            eigenfrequency: None,
            status: "ok".into(),
        }
    }

    fn failed(mut self, err: &Error) -> Self {
        self.status = err.to_string().replace(',', ";");
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub version: String,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub generated_at: u64,
    pub rows: Vec<SweepRow>,
}

fn columns(observable: Observable) -> &'static [&'static str] {
    match observable {
        Observable::Amplitude => &[
            "curve", "variable", "method", "omega_c", "eta", "t", "abs_c", "abs_c_check", "converged", "z", "varpi_b",
            "status",
        ],
        Observable::Precision => &[
            "curve", "variable", "method", "omega_c", "eta", "n_avg", "t", "abs_c", "z", "f_q", "delta_gamma", "ideal",
            "snl", "weak_hl", "zeno", "status",
        ],
        Observable::Spectrum => &["curve", "variable", "omega_c", "eta", "level", "eigenfrequency", "varpi_b", "z", "status"],
    }
}

fn fmt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl SweepRow {
    fn field(&self, name: &str) -> String {
        match name {
            "curve" => self.curve.to_string(),
            "variable" => format!("{:.16e}", self.value),
            "method" => self.method.to_string(),
            "omega_c" => format!("{:.16e}", self.omega_c),
            "eta" => format!("{:.16e}", self.eta),
            "n_avg" => fmt_f(self.n_avg),
            "t" => fmt_f(self.t),
            "abs_c" => fmt_f(self.abs_c),
            "abs_c_check" => fmt_f(self.abs_c_check),
            "converged" => self.converged.map(|b| b.to_string()).unwrap_or_default(),
            "z" => fmt_f(self.z),
            "varpi_b" => fmt_f(self.varpi_b),
            "f_q" => fmt_f(self.f_q),
            "delta_gamma" => fmt_f(self.delta_gamma),
            "ideal" => fmt_f(self.ideal),
            "snl" => fmt_f(self.snl),
            "weak_hl" => fmt_f(self.weak_hl),
            "zeno" => fmt_f(self.zeno),
            "level" => self.level.map(|l| l.to_string()).unwrap_or_default(),
            "eigenfrequency" => fmt_f(self.eigenfrequency),
            "status" => self.status.clone(),
            _ => unreachable!("unknown column {name}"),
        }
    }
}

impl SweepResult {
    /// `#` header with the config echo, then the column line and rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nmmetro {}", self.version)?;
        writeln!(out, "# generated_at = {}", self.generated_at)?;
        for line in self.config.echo() {
            writeln!(out, "# {line}")?;
        }
        self.write_csv_body(out)
    }

    /// Column line and rows only; identical for identical configs.
    pub fn write_csv_body<W: Write>(&self, mut out: W) -> Result<()> {
        let shadowed = match self.config.axis.variable {
            Variable::Time => "t",
            Variable::PhotonNumber => "n_avg",
            Variable::OmegaC => "omega_c",
        };
        let cols: Vec<&str> = columns(self.config.observable).iter().copied().filter(|c| *c != shadowed).collect();
        let header: Vec<&str> = cols
            .iter()
            .map(|c| if *c == "variable" { self.config.axis.variable.name() } else { c })
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let fields: Vec<String> = cols.iter().map(|c| row.field(c)).collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    pub fn rows_for(&self, curve: usize, method: Method) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.curve == curve && r.method == method)
    }
}

/// One independent unit of work: a single `omega_c` with every `(N, t)` it needs.
struct Task {
    omega_c: f64,
    /// `(curve, point, value)` on the sweep axis.
    targets: Vec<Target>,
}

#[derive(Clone, Copy)]
struct Target {
    curve: usize,
    point: usize,
    value: f64,
    n_avg: f64,
}

fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let values = cfg.axis.values();
    let n_list: Vec<f64> = if cfg.axis.variable == Variable::PhotonNumber || cfg.observable != Observable::Precision {
        vec![f64::NAN]
    } else {
        cfg.n_avg.clone()
    };
    match cfg.axis.variable {
        Variable::OmegaC => values
            .iter()
            .enumerate()
            .map(|(point, &w)| Task {
                omega_c: w,
                targets: n_list
                    .iter()
                    .enumerate()
                    .map(|(curve, &n)| Target {
                        curve,
                        point,
                        value: w,
                        n_avg: n,
                    })
                    .collect(),
            })
            .collect(),
        Variable::Time | Variable::PhotonNumber => {
            let mut out = Vec::new();
            for (iw, &w) in cfg.omega_c.iter().enumerate() {
                let mut targets = Vec::new();
                for (jn, &n) in n_list.iter().enumerate() {
                    let curve = iw * n_list.len() + jn;
                    for (point, &v) in values.iter().enumerate() {
                        let n_avg = if cfg.axis.variable == Variable::PhotonNumber { v } else { n };
                        targets.push(Target { curve, point, value: v, n_avg });
                    }
                }
                out.push(Task { omega_c: w, targets });
            }
            out
        }
    }
}

fn method_rank(m: Method) -> usize {
    match m {
        Method::Exact => 0,
        Method::Asymptotic => 1,
        Method::Markovian => 2,
    }
}

/// Evaluates every sweep point, `workers` at a time (0 = available parallelism).
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let probe = cfg.probe()?;
    let work = tasks(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let chunks: Vec<Vec<SweepRow>> = pool.install(|| work.par_iter().map(|task| run_task(cfg, &probe, task)).collect());
    let mut rows: Vec<SweepRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.curve, a.point, method_rank(a.method), a.level)
            .cmp(&(b.curve, b.point, method_rank(b.method), b.level))
    });
    let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(SweepResult {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at,
        rows,
    })
}

/// Runs a named preset; `dt` overrides the solver step.
pub fn run_preset(name: &str, dt: Option<f64>, workers: usize) -> Result<SweepResult> {
    let mut cfg = preset(name)?;
    if dt.is_some() {
        cfg.dt = dt;
    }
    run_sweep(&cfg, workers)
}

fn run_task(cfg: &ExperimentConfig, probe: &ProbeConfig, task: &Task) -> Vec<SweepRow> {
    let sd = match cfg.spectral_density(task.omega_c) {
        Ok(sd) => sd,
        Err(e) => {
            // placeholder density so the failed rows still carry omega_c
            let sd = SpectralDensity::ohmic(0.0, task.omega_c.max(f64::MIN_POSITIVE)).expect("zero coupling");
            let mut rows = Vec::new();
            for t in &task.targets {
                for &m in &cfg.methods {
                    rows.push(SweepRow::new(t.curve, t.point, t.value, m, &sd).failed(&e));
                }
            }
            return rows;
        }
    };
    let bound = if bound_state_exists(&sd, probe) { find_bound_state(&sd, probe, cfg.tolerance) } else {
        Err(Error::NoBoundState { margin: crate::boundstate::threshold_margin(&sd, probe) })
    };
    match cfg.observable {
        Observable::Amplitude => amplitude_rows(cfg, probe, &sd, &bound, task),
        Observable::Precision => precision_rows(cfg, probe, &sd, &bound, task),
        Observable::Spectrum => spectrum_rows(cfg, probe, &sd, &bound, task),
    }
}

fn fill_bound(row: &mut SweepRow, bound: &Result<BoundState>) {
    if let Ok(bs) = bound {
        row.z = Some(bs.z);
        row.varpi_b = Some(bs.varpi_b);
    } else {
        row.z = Some(0.0);
    }
}

fn step(cfg: &ExperimentConfig, sd: &SpectralDensity, probe: &ProbeConfig) -> f64 {
    cfg.dt.unwrap_or_else(|| default_dt(sd, probe))
}

fn amplitude_rows(
    cfg: &ExperimentConfig,
    probe: &ProbeConfig,
    sd: &SpectralDensity,
    bound: &Result<BoundState>,
    task: &Task,
) -> Vec<SweepRow> {
    let on_time_axis = cfg.axis.variable == Variable::Time;
    let horizon = if on_time_axis {
        task.targets.iter().map(|t| t.value).fold(0.0, f64::max)
    } else {
        cfg.t_long
    };
    let exact = if cfg.methods.contains(&Method::Exact) && horizon > 0.0 {
        Some(solve_c(sd, probe, horizon, step(cfg, sd, probe)))
    } else {
        None
    };
    let mut rows = Vec::new();
    for target in &task.targets {
        let t = if on_time_axis { target.value } else { cfg.t_long };
        for &method in &cfg.methods {
            let mut row = SweepRow::new(target.curve, target.point, target.value, method, sd);
            row.t = Some(t);
            fill_bound(&mut row, bound);
            let outcome: Result<()> = (|| {
                match method {
                    Method::Exact => {
                        let abs_at = |time: f64| -> Result<f64> {
                            if time == 0.0 {
                                return Ok(1.0);
                            }
                            match exact.as_ref().expect("exact trajectory requested") {
                                Ok(traj) => Ok(traj.sample(time)?.0.norm()),
                                Err(e) => Err(e.clone()),
                            }
                        };
                        row.abs_c = Some(abs_at(t)?);
                        if !on_time_axis {
                            let check = abs_at(0.9 * t)?;
                            row.abs_c_check = Some(check);
                            row.converged = Some((row.abs_c.unwrap_or(0.0) - check).abs() < 1e-3);
                        }
                    }
                    Method::Asymptotic => {
                        row.abs_c = Some(match bound {
                            Ok(bs) => asymptotic_c(bs, t).norm(),
                            Err(Error::NoBoundState { .. }) => 0.0,
                            Err(e) => return Err(e.clone()),
                        });
                    }
                    Method::Markovian => row.abs_c = Some(markovian_c(sd, probe, t)?.norm()),
                }
                Ok(())
            })();
            rows.push(match outcome {
                Ok(()) => row,
                Err(e) => row.failed(&e),
            });
        }
    }
    rows
}

/// QFI with the analytic three-vector state, or the dense Fock path when a cutoff is configured.
fn exact_qfi(cfg: &ExperimentConfig, alpha: f64, c: Complex64, dc: Complex64, omega0_t: f64) -> Result<f64> {
    let c = if c.norm() > 1.0 { c / c.norm() } else { c };
    match cfg.cutoff {
        Some(cutoff) => qfi_mixed(&rho_with_derivative(alpha, c, dc, omega0_t, cutoff)?),
        None => qfi_mixed_compact(&EcsBranches::new(alpha, c, omega0_t)?.with_derivative(dc)),
    }
}

fn precision_rows(
    cfg: &ExperimentConfig,
    probe: &ProbeConfig,
    sd: &SpectralDensity,
    bound: &Result<BoundState>,
    task: &Task,
) -> Vec<SweepRow> {
    let time_of = |target: &Target| {
        if cfg.axis.variable == Variable::Time {
            target.value
        } else {
            cfg.time_for(sd.omega_c())
        }
    };
    let horizon = task.targets.iter().map(time_of).fold(0.0, f64::max);
    let exact: Option<Result<AmplitudeTrajectory>> = (cfg.methods.contains(&Method::Exact) && horizon > 0.0)
        .then(|| solve_c_with_sensitivity(sd, probe, horizon, step(cfg, sd, probe)));
    let rates = cfg.methods.contains(&Method::Markovian).then(|| sd.markov_rates(probe));
    let mut rows = Vec::new();
    for target in &task.targets {
        let t = time_of(target);
        let n_avg = target.n_avg;
        for &method in &cfg.methods {
            let mut row = SweepRow::new(target.curve, target.point, target.value, method, sd);
            row.t = Some(t);
            row.n_avg = Some(n_avg);
            fill_bound(&mut row, bound);
            let outcome: Result<()> = (|| {
                let alpha = alpha_of_n(n_avg)?;
                let bench = benchmark_limits(n_avg, t);
                row.snl = Some(bench.snl);
                row.weak_hl = Some(bench.weak_hl);
                row.zeno = Some(bench.zeno);
                row.ideal = Some(precision(qfi_ideal(n_avg, t)?, cfg.mu)?);
                let f_q = match method {
                    Method::Exact => {
                        let (c, dc) = if t == 0.0 {
                            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
                        } else {
                            let traj = exact.as_ref().expect("exact trajectory requested").as_ref().map_err(|e| e.clone())?;
                            let (c, dc) = traj.sample(t)?;
                            (c, dc.ok_or(Error::MissingDerivative)?)
                        };
                        row.abs_c = Some(c.norm());
                        if t == 0.0 {
                            0.0
                        } else {
                            exact_qfi(cfg, alpha, c, dc, probe.omega0() * t)?
                        }
                    }
                    Method::Asymptotic => match bound {
                        Ok(bs) => {
                            row.abs_c = Some(bs.z);
                            qfi_asymptotic(n_avg, alpha, t, bs.z)?
                        }
                        Err(e) => return Err(e.clone()),
                    },
                    Method::Markovian => {
                        let kappa = rates.as_ref().expect("rates requested").as_ref().map_err(|e| e.clone())?.kappa;
                        row.abs_c = Some((-kappa * t).exp());
                        qfi_markovian(n_avg, t, kappa)
                    }
                };
                row.f_q = Some(f_q);
                row.delta_gamma = Some(precision(f_q, cfg.mu)?);
                Ok(())
            })();
            rows.push(match outcome {
                Ok(()) => row,
                Err(e) => row.failed(&e),
            });
        }
    }
    rows
}

fn spectrum_rows(
    cfg: &ExperimentConfig,
    probe: &ProbeConfig,
    sd: &SpectralDensity,
    bound: &Result<BoundState>,
    task: &Task,
) -> Vec<SweepRow> {
    let target = task.targets[0];
    let base = || {
        let mut row = SweepRow::new(0, target.point, target.value, Method::Exact, sd);
        fill_bound(&mut row, bound);
        row
    };
    let bath = match DiscreteBath::new(sd, probe, cfg.modes, default_band(sd, probe)) {
        Ok(b) => b,
        Err(e) => return vec![base().failed(&e)],
    };
    bath.eigenvalues()
        .into_iter()
        .take(cfg.levels)
        .enumerate()
        .map(|(level, e)| {
            let mut row = base();
            row.level = Some(level);
            row.eigenfrequency = Some(e);
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_lists_and_pi() {
        let cfg = ExperimentConfig::parse(
            "# comment\n[sweep]\nobservable = precision\nvariable = N\nstart = 1\nstop = 100\npoints = 3\nspacing = log\n\
             [physics]\neta = 0.02\nomega_c = 100, 400\ngamma = 2pi ; trailing\nt = 10\n[solver]\nmethods = exact, markovian\n",
        )
        .unwrap();
        assert_eq!(cfg.axis.variable, Variable::PhotonNumber);
        assert_eq!(cfg.omega_c, vec![100.0, 400.0]);
        assert!((cfg.gamma - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(cfg.methods, vec![Method::Exact, Method::Markovian]);
        let v = cfg.axis.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[2] == 100.0);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "[sweep]\nstart = 5\nstop = 1\n",
            "[sweep]\nvariable = q\n",
            "[physics]\neta = 0.1\neta_rule = 3\n",
            "[physics]\nomega_c = abc\n",
            "[physics]\nunknown = 1\n",
            "[sweep\n",
            "[sweep]\nspacing = log\nstart = 0\n",
            "[sweep]\nobservable = spectrum\nvariable = t\n",
            "[sweep]\npoints = 0\n",
            "[sweep]\npreset = fig9z\n",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn presets_echo_captions() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.s, 1.0);
            assert_eq!(cfg.omega0, 1.0);
            assert_eq!(cfg.gamma, std::f64::consts::PI);
            assert_eq!(cfg.mu, 1);
            if name.starts_with("fig3") {
                assert_eq!(cfg.coupling, Coupling::Rule(3.0));
                let sd = cfg.spectral_density(700.0).unwrap();
                assert!((sd.eta() * 700.0 - 3.0 * (1.0 + std::f64::consts::PI)).abs() < 1e-12);
            } else {
                assert_eq!(cfg.coupling, Coupling::Fixed(0.02));
            }
        }
        assert_eq!(preset("fig2a").unwrap().n_avg, vec![10.0]);
        assert_eq!(preset("fig2b").unwrap().time, TimeRule::Fixed(10.0));
        assert_eq!(preset("fig3c").unwrap().time, TimeRule::PerOmegaC(10.0));
        assert!(preset("nope").is_err());
    }

    #[test]
    fn preset_overrides_from_file() {
        let cfg = ExperimentConfig::parse("[sweep]\npreset = fig2b\npoints = 4\n[physics]\nomega_c = 300\n").unwrap();
        assert_eq!(cfg.axis.points, 4);
        assert_eq!(cfg.omega_c, vec![300.0]);
        assert_eq!(cfg.name, "fig2b");
    }

    #[test]
    fn single_point_is_one_pipeline_evaluation() {
        let cfg = ExperimentConfig {
            axis: Axis {
                variable: Variable::Time,
                start: 2.0,
                stop: 2.0,
                points: 1,
                spacing: Spacing::Linear,
            },
            omega_c: vec![50.0],
            n_avg: vec![2.0],
            ..ExperimentConfig::default()
        };
        let res = run_sweep(&cfg, 1).unwrap();
        assert_eq!(res.rows.len(), 1);
        let row = &res.rows[0];
        assert_eq!(row.status, "ok");
        let sd = cfg.spectral_density(50.0).unwrap();
        let probe = cfg.probe().unwrap();
        let traj = solve_c_with_sensitivity(&sd, &probe, 2.0, default_dt(&sd, &probe)).unwrap();
        let (c, dc) = traj.sample(2.0).unwrap();
        let alpha = alpha_of_n(2.0).unwrap();
        let f = qfi_mixed_compact(&EcsBranches::new(alpha, c, 2.0).unwrap().with_derivative(dc.unwrap())).unwrap();
        assert_eq!(row.f_q, Some(f));
    }

    #[test]
    fn decoupled_sweep_reproduces_ideal() {
        let cfg = ExperimentConfig {
            axis: Axis {
                variable: Variable::PhotonNumber,
                start: 0.5,
                stop: 20.0,
                points: 7,
                spacing: Spacing::Log,
            },
            coupling: Coupling::Fixed(0.0),
            omega_c: vec![10.0],
            time: TimeRule::Fixed(3.0),
            ..ExperimentConfig::default()
        };
        let res = run_sweep(&cfg, 1).unwrap();
        assert_eq!(res.rows.len(), 7);
        for row in &res.rows {
            let ideal = qfi_ideal(row.value, 3.0).unwrap();
            assert!((row.f_q.unwrap() / ideal - 1.0).abs() < 1e-8, "{row:?}");
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let cfg = ExperimentConfig {
            axis: Axis {
                variable: Variable::OmegaC,
                start: 150.0,
                stop: 260.0,
                points: 4,
                spacing: Spacing::Linear,
            },
            n_avg: vec![1.0, 5.0],
            time: TimeRule::Fixed(0.5),
            methods: vec![Method::Exact, Method::Asymptotic, Method::Markovian],
            ..ExperimentConfig::default()
        };
        let body = |workers| {
            let mut buf = Vec::new();
            run_sweep(&cfg, workers).unwrap().write_csv_body(&mut buf).unwrap();
            buf
        };
        let one = body(1);
        assert_eq!(one, body(3));
        assert_eq!(one, body(1));
        let text = String::from_utf8(one).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 2 * 3);
    }

    #[test]
    fn missing_bound_state_is_flagged_not_fatal() {
        let cfg = ExperimentConfig {
            observable: Observable::Amplitude,
            axis: Axis {
                variable: Variable::OmegaC,
                start: 50.0,
                stop: 60.0,
                points: 2,
                spacing: Spacing::Linear,
            },
            methods: vec![Method::Asymptotic],
            ..ExperimentConfig::default()
        };
        let res = run_sweep(&cfg, 1).unwrap();
        assert!(res.rows.iter().all(|r| r.z == Some(0.0) && r.varpi_b.is_none() && r.status == "ok"));
    }

    #[test]
    fn unstable_point_is_flagged() {
        let cfg = ExperimentConfig {
            axis: Axis {
                variable: Variable::Time,
                start: 1.0,
                stop: 2.0,
                points: 2,
                spacing: Spacing::Linear,
            },
            dt: Some(1e-8),
            ..ExperimentConfig::default()
        };
        let res = run_sweep(&cfg, 1).unwrap();
        assert!(res.rows.iter().all(|r| r.status.contains("too many steps")));
    }

    #[test]
    fn csv_and_json_output() {
        let mut cfg = preset("fig1d").unwrap();
        cfg.axis.points = 2;
        cfg.modes = 200;
        cfg.levels = 3;
        let res = run_sweep(&cfg, 1).unwrap();
        assert_eq!(res.rows.len(), 6);
        let mut csv = Vec::new();
        res.write(&mut csv, Format::Csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.lines().take_while(|l| l.starts_with('#')).count() >= 10);
        assert!(csv.contains("\ncurve,omega_c,eta,level,eigenfrequency,varpi_b,z,status\n"));
        let mut json = Vec::new();
        res.write(&mut json, Format::Json).unwrap();
        let back: SweepResult = serde_json::from_slice(&json).unwrap();
        assert_eq!(back.rows.len(), res.rows.len());
        assert_eq!(back.config, res.config);
    }
}
