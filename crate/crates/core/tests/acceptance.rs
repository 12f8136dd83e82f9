//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::Instant;

use nmmetro_core::boundstate::discrete::default_band;
use nmmetro_core::boundstate::{
    bound_state_exists, dz_dgamma_check, find_bound_state, ohmic_residue_closed_form, threshold_omega_c,
    BoundState, DiscreteBath, DEFAULT_TOL,
};
use nmmetro_core::dynamics::{asymptotic_sensitivity, default_dt, solve_c, solve_c_with_sensitivity};
use nmmetro_core::fockstate::{
    alpha_of_n, default_cutoff, ecs_evolved, ecs_evolved_derivative, rho_derivative, rho_of_t, rho_with_derivative,
    EcsBranches,
};
use nmmetro_core::qfi::{
    benchmark_limits, lambert_w, markovian_optimum, precision, qfi_asymptotic, qfi_ideal, qfi_markovian,
    qfi_mixed, qfi_mixed_compact, qfi_pure,
};
use nmmetro_core::sweeps::{run_preset, Variable};
use nmmetro_core::{ProbeConfig, Result, SpectralDensity};
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn probe(gamma: f64) -> ProbeConfig {
    ProbeConfig::with_gamma(gamma).expect("valid probe")
}

fn ohmic(eta: f64, omega_c: f64) -> SpectralDensity {
    SpectralDensity::ohmic(eta, omega_c).expect("valid spectral density")
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `frac(k phi + stream)`, a deterministic low-discrepancy sequence on `[0, 1)`.
fn quasi(k: usize, stream: f64) -> f64 {
    let phi = 0.618_033_988_749_894_9;
    (k as f64 * phi + stream).fract()
}

fn threshold_jump() -> Result<Outcome> {
    let start = Instant::now();
    let p = probe(PI);
    let wc_star = threshold_omega_c(1.0, 0.02, &p);
    let expected = (1.0 + PI) / 0.02;
    let flips = !bound_state_exists(&ohmic(0.02, wc_star * (1.0 - 1e-9)), &p)
        && bound_state_exists(&ohmic(0.02, wc_star * (1.0 + 1e-9)), &p);
    let (below, above) = (ohmic(0.02, 0.9 * wc_star), ohmic(0.02, 1.1 * wc_star));
    let t_long = 200.0;
    let c_below = solve_c(&below, &p, t_long, default_dt(&below, &p))?.c.last().unwrap().norm();
    let c_above = solve_c(&above, &p, t_long, default_dt(&above, &p))?.c.last().unwrap().norm();
    let z = find_bound_state(&above, &p, DEFAULT_TOL)?.z;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (wc_star - expected).abs() < 1e-9 && flips && c_below < 0.02 && (c_above - z).abs() < 5e-3 && secs < 120.0,
        format!(
            "omega_c* = {wc_star:.6}, |c(200)| = {c_below:.4} at 0.9 omega_c*, |c(200)| - Z = {:.2e} at 1.1 omega_c*, {secs:.1} s",
            c_above - z
        ),
    )
}

fn residue_consistency() -> Result<Outcome> {
    let p = probe(PI);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let wc = 210.0 * (5000.0f64 / 210.0).powf(k as f64 / 19.0);
        let sd = ohmic(0.02, wc);
        let bs = find_bound_state(&sd, &p, DEFAULT_TOL)?;
        let z_int = 1.0 / (1.0 + sd.residue_integral_quadrature(bs.varpi_b)?);
        let z_closed = ohmic_residue_closed_form(&sd, &p, bs.varpi_b).expect("ohmic");
        worst = worst.max(rel(z_int, z_closed));
    }
    let mut worst_c = 0.0f64;
    for wc in [250.0, 400.0] {
        let sd = ohmic(0.02, wc);
        let z = find_bound_state(&sd, &p, DEFAULT_TOL)?.z;
        let c = solve_c(&sd, &p, 200.0, default_dt(&sd, &p))?.c.last().unwrap().norm();
        worst_c = worst_c.max((c - z).abs());
    }
    outcome(
        worst < 1e-8 && worst_c < 5e-3,
        format!("max rel |Z_int - Z_closed| = {worst:.2e} over 20 omega_c, max ||c(200)| - Z| = {worst_c:.2e}"),
    )
}

fn pole_slope_identity() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for gamma in [0.5, 1.0, 2.0, PI, 4.0] {
        for wc in [300.0, 500.0, 1000.0, 2000.0, 5000.0] {
            let (sd, p) = (ohmic(0.02, wc), probe(gamma));
            let z = find_bound_state(&sd, &p, DEFAULT_TOL)?.z;
            worst = worst.max(rel(dz_dgamma_check(&sd, &p, 1e-4)?, z));
        }
    }
    outcome(worst < 1e-5, format!("max rel |d varpi_b/d gamma - Z| = {worst:.2e} on 5x5 grid"))
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

fn markovian_limit() -> Result<Outcome> {
    let (sd, p) = (ohmic(0.001, 10.0), probe(PI));
    let kappa = sd.markov_rates(&p)?.kappa;
    let t_end = 3.0 / kappa;
    let traj = solve_c(&sd, &p, t_end, default_dt(&sd, &p))?;
    let worst = traj
        .times
        .iter()
        .zip(&traj.c)
        .map(|(&t, c)| rel(c.norm(), (-kappa * t).exp()))
        .fold(0.0f64, f64::max);
    let n_avg = 10.0;
    let t_opt = golden_section_max(|t| qfi_markovian(n_avg, t, kappa), 0.0, 10.0 / kappa, 200);
    let (t_closed, dg_closed) = markovian_optimum(n_avg, kappa)?;
    let dg = precision(qfi_markovian(n_avg, t_closed, kappa), 1)?;
    let direct = E * kappa / (2.0 * n_avg).sqrt();
    outcome(
        worst < 0.02 && rel(t_opt, 1.0 / kappa) < 1e-6 && rel(dg, direct) < 1e-14 && dg_closed == direct,
        format!(
            "kappa = {kappa:.4e}, max rel ||c| - e^(-kappa t)| = {worst:.2e} on t <= 3/kappa, t_opt kappa - 1 = {:.1e}",
            t_opt * kappa - 1.0
        ),
    )
}

fn ideal_recovery() -> Result<Outcome> {
    let (sd, p) = (ohmic(0.0, 10.0), probe(PI));
    let mut worst = 0.0f64;
    let mut beats = true;
    for n_avg in [0.5, 2.0, 10.0] {
        let alpha = alpha_of_n(n_avg)?;
        for t in [1.0, 10.0] {
            let traj = solve_c_with_sensitivity(&sd, &p, t, default_dt(&sd, &p))?;
            let (c, dc) = traj.sample(t)?;
            let state = EcsBranches::new(alpha, c, p.omega0() * t)?.with_derivative(dc.unwrap());
            let exact = qfi_ideal(n_avg, t)?;
            let f = qfi_mixed_compact(&state)?;
            worst = worst.max(rel(f, exact));
            if n_avg < 1.0 {
                worst = worst.max(rel(qfi_mixed(&state.to_dense(default_cutoff(alpha))?)?, exact));
            }
            let b = benchmark_limits(n_avg, t);
            let dg = precision(f, 1)?;
            beats &= dg < b.snl && dg < b.weak_hl;
        }
    }
    outcome(
        worst < 1e-6 && beats,
        format!("max rel |F_Q - F_ideal| = {worst:.2e}; beats 1/(sqrt(N) t) and 1/(N t): {beats}"),
    )
}

fn asymptotic_state(n_avg: f64, z: f64, t: f64) -> Result<EcsBranches> {
    let bs = BoundState {
        varpi_b: -1.7,
        z,
        residual: 0.0,
    };
    let c = Complex64::from_polar(z, -bs.varpi_b * t);
    let dc = asymptotic_sensitivity(&bs, 0.0, t);
    Ok(EcsBranches::new(alpha_of_n(n_avg)?, c, t)?.with_derivative(dc))
}

fn central_result() -> Result<Outcome> {
    let t = 50.0;
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut failing = 0;
    for n_avg in [0.5, 1.0, 2.0, 5.0, 10.0] {
        for z in [0.8, 0.9, 0.95, 0.99] {
            let f = qfi_mixed_compact(&asymptotic_state(n_avg, z, t)?)?;
            let closed = qfi_asymptotic(n_avg, alpha_of_n(n_avg)?, t, z)?;
            let e = rel(f, closed);
            if e >= 1e-3 {
                failing += 1;
            }
            if e > worst.0 {
                worst = (e, n_avg, z);
            }
        }
    }
    let mut worst_ideal = 0.0f64;
    for n_avg in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let f = qfi_mixed_compact(&asymptotic_state(n_avg, 1.0, t)?)?;
        worst_ideal = worst_ideal.max(rel(f, qfi_ideal(n_avg, t)?));
        worst_ideal = worst_ideal.max(rel(qfi_asymptotic(n_avg, alpha_of_n(n_avg)?, t, 1.0)?, qfi_ideal(n_avg, t)?));
    }
    outcome(
        failing == 0 && worst_ideal < 1e-12,
        format!(
            "{failing}/20 grid points exceed rel 1e-3 (worst {:.2e} at N = {}, Z = {}); Z = 1 vs ideal {worst_ideal:.1e}",
            worst.0, worst.1, worst.2
        ),
    )
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in points {
        num += (x.ln() - mx) * (y.ln() - my);
        den += (x.ln() - mx).powi(2);
    }
    num / den
}

fn has_local_minimum(values: &[f64]) -> bool {
    values.windows(3).any(|w| w[1] < w[0] && w[1] < w[2])
}

fn scaling_transition() -> Result<Outcome> {
    let (z, t) = (0.999, 10.0);
    let window = |lo: f64| -> Result<Vec<(f64, f64)>> {
        (0..=10)
            .map(|k| {
                let n_avg = lo * 10f64.powf(k as f64 / 10.0);
                Ok((n_avg, precision(qfi_mixed_compact(&asymptotic_state(n_avg, z, t)?)?, 1)?))
            })
            .collect()
    };
    let small = fit_slope(&window(10.0)?);
    let large = fit_slope(&window(1e4)?);
    let slopes_ok = (small + 1.0).abs() <= 0.1 && (large + 0.5).abs() <= 0.1;

    let result = run_preset("fig3c", None, 0)?;
    assert_eq!(result.config.axis.variable, Variable::PhotonNumber);
    let mut minima = Vec::new();
    let mut all_ok = true;
    for (curve, &wc) in result.config.omega_c.iter().enumerate() {
        let rows: Vec<_> = result.rows_for(curve, nmmetro_core::dynamics::Method::Exact).collect();
        let z = rows[0].z.unwrap_or(0.0);
        if z <= 0.9625 {
            continue;
        }
        let dg: Vec<f64> = rows.iter().map(|r| r.delta_gamma.unwrap_or(f64::NAN)).collect();
        let found = has_local_minimum(&dg);
        all_ok &= found;
        minima.push(format!("omega_c {wc} (Z {z:.4}): {found}"));
    }
    outcome(
        slopes_ok && all_ok && !minima.is_empty(),
        format!(
            "slopes at Z = {z}: {small:.3} on N in [10, 100], {large:.3} on [1e4, 1e5]; local minimum {}",
            minima.join(", ")
        ),
    )
}

fn monotone_in_time() -> Result<Outcome> {
    let result = run_preset("fig2a", None, 0)?;
    let mut notes = Vec::new();
    let mut pass = true;
    for (curve, &wc) in result.config.omega_c.iter().enumerate() {
        let rows: Vec<_> = result
            .rows_for(curve, nmmetro_core::dynamics::Method::Exact)
            .filter(|r| r.value >= 1.0 - 1e-12 && r.value <= 10.0 + 1e-12)
            .collect();
        let dg: Vec<f64> = rows.iter().map(|r| r.delta_gamma.unwrap_or(f64::NAN)).collect();
        let bound = rows[0].varpi_b.is_some();
        if bound {
            let decreasing = dg.windows(2).all(|w| w[1] < w[0]);
            pass &= decreasing;
            notes.push(format!("omega_c {wc}: strictly decreasing {decreasing}"));
        } else {
            let (imin, _) = dg
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            let rises = imin > 0 && imin + 1 < dg.len() && dg[imin + 1..].windows(2).all(|w| w[1] > w[0]);
            pass &= rises;
            notes.push(format!("omega_c {wc}: minimum at t = {:.1} then rising {rises}", rows[imin].value));
        }
    }
    outcome(pass, notes.join("; "))
}

fn oracle_suite() -> Result<Outcome> {
    let p = probe(PI);
    // discretized bath against the memory-kernel solver
    let mut bath_err = 0.0f64;
    for eta in [0.02, 0.1] {
        let sd = ohmic(eta, 50.0);
        let bath = DiscreteBath::new(&sd, &p, 4000, default_band(&sd, &p))?;
        let roots = bath.secular_roots();
        let traj = solve_c(&sd, &p, 20.0, default_dt(&sd, &p))?;
        for k in 0..=400 {
            let t = 0.05 * k as f64;
            let unitary = DiscreteBath::probe_amplitude(&roots, t).norm();
            bath_err = bath_err.max((unitary - traj.sample(t)?.0.norm()).abs());
        }
    }

    // density-matrix derivative against central differences over gamma
    let alpha = 1.0;
    let cutoff = default_cutoff(alpha);
    let (sd, t, dt, delta) = (ohmic(0.02, 300.0), 2.0, 1e-4, 1e-5);
    let gamma = PI;
    let sens = solve_c_with_sensitivity(&sd, &probe(gamma), t, dt)?;
    let (c, dc) = sens.sample(t)?;
    let analytic = rho_derivative(alpha, c, dc.unwrap(), t, cutoff)?;
    let c_up = *solve_c(&sd, &probe(gamma + delta), t, dt)?.c.last().unwrap();
    let c_down = *solve_c(&sd, &probe(gamma - delta), t, dt)?.c.last().unwrap();
    let fd = (rho_of_t(alpha, c_up, t, cutoff)?.matrix() - rho_of_t(alpha, c_down, t, cutoff)?.matrix())
        / Complex64::from(2.0 * delta);
    let deriv_err = (&analytic - fd).iter().map(|z| z.norm()).fold(0.0f64, f64::max);

    // rank-one states: mixed-state formula against the pure-state formula
    let mut rank_one = 0.0f64;
    for k in 0..20 {
        let alpha = 0.2 + 0.25 * quasi(k, 0.1);
        let t = 0.5 + 9.5 * quasi(k, 0.3);
        let c = Complex64::from_polar(1.0, -2.0 * PI * quasi(k, 0.7));
        let dc = Complex64::new(0.0, -t * (0.2 + 2.0 * quasi(k, 0.9))) * c;
        let cutoff = default_cutoff(alpha);
        let rho = rho_with_derivative(alpha, c, dc, t, cutoff)?;
        let pure = qfi_pure(&ecs_evolved(alpha, c, t, cutoff)?, &ecs_evolved_derivative(alpha, c, dc, cutoff)?)?;
        rank_one = rank_one.max(rel(qfi_mixed(&rho)?, pure));
    }

    let mut lw = 0.0f64;
    for k in 0..=600 {
        let x = 10f64.powf(-300.0 + k as f64);
        let w = lambert_w(x)?;
        lw = lw.max(rel(w * w.exp(), x));
    }
    for x in [0.5 * (-0.5f64).exp(), 10.0 * (-10.0f64).exp(), 1.0, E] {
        let w = lambert_w(x)?;
        lw = lw.max(rel(w * w.exp(), x));
    }

    outcome(
        bath_err < 1e-3 && deriv_err < 1e-6 && rank_one < 1e-6 && lw < 1e-12,
        format!(
            "bath vs solver {bath_err:.2e}, d rho/d gamma vs FD {deriv_err:.2e}, rank-one mixed vs pure {rank_one:.2e}, W residual {lw:.1e}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bound-state threshold and long-time jump", threshold_jump),
        ("residue integral vs closed form, |c(inf)| = Z", residue_consistency),
        ("d varpi_b / d gamma = Z", pole_slope_identity),
        ("weak-coupling Markovian limit", markovian_limit),
        ("ideal recovery without coupling", ideal_recovery),
        ("bound-state QFI closed form", central_result),
        ("photon-number scaling transition", scaling_transition),
        ("precision monotone in time with bound state", monotone_in_time),
        ("oracle suite", oracle_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
