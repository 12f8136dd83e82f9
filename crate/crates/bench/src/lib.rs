//! Benchmark fixtures shared by the criterion targets.
use nmmetro_core::{ProbeConfig, SpectralDensity};

/// Ohmic bath with `eta = 0.02` and probe detuning `gamma = pi`.
pub fn reference_setup(omega_c: f64) -> (SpectralDensity, ProbeConfig) {
    (
        SpectralDensity::ohmic(0.02, omega_c).expect("valid spectral density"),
        ProbeConfig::with_gamma(std::f64::consts::PI).expect("valid probe"),
    )
}
