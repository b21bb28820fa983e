//! One function per subcommand. Each returns the JSON result plus the bulk
//! files to write; nothing touches the filesystem here.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use phs_core::certificate::{decay_certificate, energy_envelope, sharpened_certificate, DecayCertificate};
use phs_core::conditions::condition_report;
use phs_core::density::mollify;
use phs_core::model::close_loop;
use phs_core::simulator::{
    check_certificate, discretize, fit_decay_rate, gaussian_state, simulate as run_simulation, spectrum as compute_spectrum,
    DiscreteGenerator, StepOptions, Trajectory, MAX_SPECTRUM_DIM,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{Artifacts, Table};

/// Result of a command: the `result` part of the report, files to write
/// and the process exit code.
#[derive(Debug)]
pub struct Outcome {
    pub result: Value,
    pub artifacts: Artifacts,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(result: Value, artifacts: Artifacts) -> Self {
        Self { result, artifacts, exit_code: 0 }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize infallibly")
}

/// Exit 0 iff both hypotheses hold and the loop at `mu` is dissipative.
pub fn check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sys = cfg.build_system()?;
    let report = condition_report(&sys, cfg.mu)?;
    let exit_code = if report.all_pass() { 0 } else { 2 };
    let result = json!({
        "all_pass": report.all_pass(),
        "conditions": to_value(&report),
        "validation": to_value(&sys.validate()),
    });
    Ok(Outcome { result, artifacts: Artifacts::default(), exit_code })
}

pub fn certify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sys = cfg.build_system()?;
    let cert = decay_certificate(&sys, cfg.mu)?;
    let sharp = sharpened_certificate(&sys, cfg.mu)?;
    let result = json!({
        "certificate": to_value(&cert),
        "constants": to_value(&cert.constants()),
        "reevaluation_residual": cert.reevaluation_residual(),
        "sharpened": to_value(&sharp),
    });
    Ok(Outcome::ok(result, Artifacts::default()))
}

fn trajectory(cfg: &ExperimentConfig, gen: &DiscreteGenerator, dump_every: usize) -> Result<Trajectory> {
    let f0 = gaussian_state(&gen.grid, &cfg.bumps());
    Ok(run_simulation(gen, &f0, StepOptions::new(cfg.numerics.t_final, cfg.dt()).dumping(dump_every))?)
}

fn certificate_or_warn(sys: &phs_core::model::PortHamiltonianSystem, mu: f64) -> Option<DecayCertificate> {
    match decay_certificate(sys, mu) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("no decay certificate: {e}");
            None
        }
    }
}

/// Empirical rate, or None when the window holds too few samples.
fn fitted_rate(cfg: &ExperimentConfig, traj: &Trajectory) -> Option<f64> {
    match fit_decay_rate(traj, cfg.fit_window()) {
        Ok(w) => Some(w),
        Err(e) => {
            log::warn!("no empirical decay rate: {e}");
            None
        }
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sys = cfg.build_system()?;
    let gen = discretize(&close_loop(&sys, cfg.mu)?, cfg.numerics.nodes)?;
    let traj = trajectory(cfg, &gen, cfg.numerics.dump_every)?;
    let cert = certificate_or_warn(&sys, cfg.mu);
    let e0 = traj.initial_energy();
    let k = sys.k;

    let mut header = vec!["t".to_string(), "energy".into(), "envelope".into(), "balance_residual".into()];
    header.extend((1..=k).map(|i| format!("u{i}")));
    header.extend((1..=k).map(|i| format!("y{i}")));
    let mut table = Table::new(header);
    for (i, (&t, &e)) in traj.times.iter().zip(&traj.energies).enumerate() {
        let env = match &cert {
            Some(c) => energy_envelope(c, e0, t)?,
            None => f64::NAN,
        };
        let balance = if i == 0 { 0.0 } else { traj.balance_residuals[i - 1] };
        let mut row = vec![t, e, env, balance];
        row.extend(traj.inputs[i].iter());
        row.extend(traj.outputs[i].iter());
        table.push(row);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("trajectory.csv", table.to_csv());
    if cfg.numerics.dump_every > 0 {
        let mut header = vec!["t".to_string(), "node".into(), "zeta".into()];
        header.extend((1..=gen.m).map(|i| format!("f{i}")));
        let mut states = Table::new(header);
        for (t, f) in &traj.states {
            for (j, &z) in traj.nodes.iter().enumerate() {
                let mut row = vec![*t, j as f64, z];
                row.extend((0..gen.m).map(|c| f[j * gen.m + c]));
                states.push(row);
            }
        }
        artifacts.add("states.csv", states.to_csv());
    }

    let check = cert.as_ref().map(|c| {
        let mut chk = check_certificate(&traj, c);
        chk.margins.clear();
        chk
    });
    let result = json!({
        "nodes": cfg.numerics.nodes,
        "steps": traj.step_count(),
        "dt": traj.dt,
        "initial_energy": e0,
        "final_energy": *traj.energies.last().unwrap(),
        "max_energy_increase": traj.max_energy_increase(),
        "max_balance_residual": traj.max_balance_residual(),
        "feedback_residual": traj.feedback_residual(),
        "fit_window": cfg.fit_window(),
        "omega_hat": fitted_rate(cfg, &traj),
        "certificate": cert.as_ref().map(to_value),
        "certificate_check": check.as_ref().map(to_value),
    });
    Ok(Outcome::ok(result, artifacts))
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sys = cfg.build_system()?;
    let gen = discretize(&close_loop(&sys, cfg.mu)?, cfg.numerics.nodes)?;
    let spec = compute_spectrum(&gen)?;
    let mut table = Table::new(["re", "im"]);
    for z in &spec.eigenvalues {
        table.push(vec![z.re, z.im]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("eigenvalues.csv", table.to_csv());
    let rightmost: Vec<[f64; 2]> = spec.eigenvalues.iter().take(10).map(|z| [z.re, z.im]).collect();
    let result = json!({
        "nodes": cfg.numerics.nodes,
        "reduced_dim": gen.reduced_dim(),
        "count": spec.eigenvalues.len(),
        "abscissa": spec.abscissa,
        "hermitian_max": spec.hermitian_max,
        "rightmost": rightmost,
    });
    Ok(Outcome::ok(result, artifacts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRange {
    pub mu_min: f64,
    pub mu_max: f64,
    pub steps: usize,
}

impl SweepRange {
    /// Log-spaced gains, endpoints included.
    pub fn gains(&self) -> Result<Vec<f64>> {
        if !(self.mu_min > 0.0 && self.mu_max >= self.mu_min && self.mu_max.is_finite()) {
            return Err(CliError::Config(format!("--mu-min/--mu-max: need 0 < min <= max, got [{}, {}]", self.mu_min, self.mu_max)));
        }
        match self.steps {
            0 => Err(CliError::Config("--steps: must be at least 1".into())),
            1 => Ok(vec![self.mu_min]),
            n => {
                let ratio = (self.mu_max / self.mu_min).ln();
                Ok((0..n)
                    .map(|i| match i {
                        0 => self.mu_min,
                        i if i == n - 1 => self.mu_max,
                        i => self.mu_min * (ratio * i as f64 / (n - 1) as f64).exp(),
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    mu: f64,
    lambda: f64,
    kappa: f64,
    kappa_best: f64,
    omega0: f64,
    omega_hat: f64,
    abscissa: f64,
}

fn sweep_row(cfg: &ExperimentConfig, sys: &phs_core::model::PortHamiltonianSystem, mu: f64) -> Result<SweepRow> {
    let report = condition_report(sys, mu)?;
    let cert = certificate_or_warn(sys, mu);
    let gen = discretize(&close_loop(sys, mu)?, cfg.numerics.nodes)?;
    let traj = trajectory(cfg, &gen, 0)?;
    let abscissa = if gen.reduced_dim() <= MAX_SPECTRUM_DIM {
        compute_spectrum(&gen)?.abscissa
    } else {
        f64::NAN
    };
    Ok(SweepRow {
        mu,
        lambda: report.lambda,
        kappa: cert.as_ref().map_or(f64::NAN, |c| c.kappa),
        kappa_best: report.kappa_best,
        omega0: cert.as_ref().map_or(f64::NAN, |c| c.omega0),
        omega_hat: fitted_rate(cfg, &traj).unwrap_or(f64::NAN),
        abscissa,
    })
}

/// Independent runs per gain, fanned out over the rayon pool; rows keep
/// the grid order, so output does not depend on scheduling.
pub fn sweep(cfg: &ExperimentConfig, range: SweepRange) -> Result<Outcome> {
    let sys = cfg.build_system()?;
    let gains = range.gains()?;
    let rows = gains.par_iter().map(|&mu| sweep_row(cfg, &sys, mu)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(["mu", "lambda", "kappa", "kappa_best", "omega0", "omega_hat", "abscissa"]);
    for r in &rows {
        table.push(vec![r.mu, r.lambda, r.kappa, r.kappa_best, r.omega0, r.omega_hat, r.abscissa]);
    }
    let peak = rows
        .iter()
        .filter(|r| r.omega0.is_finite())
        .max_by(|a, b| a.omega0.abs().total_cmp(&b.omega0.abs()))
        .map(|r| r.mu);
    let mut artifacts = Artifacts::default();
    artifacts.add("sweep.csv", table.to_csv());
    let result = json!({
        "range": to_value(&range),
        "rows": to_value(&rows),
        "certified_peak_mu": peak,
    });
    Ok(Outcome::ok(result, artifacts))
}

pub fn mollify_density(cfg: &ExperimentConfig) -> Result<Outcome> {
    let eps = cfg
        .numerics
        .mollify_eps
        .ok_or_else(|| CliError::Config("mollify needs --eps or numerics.mollify_eps".into()))?;
    let plant = cfg.build_plant()?;
    let source = plant.density.as_piecewise().expect("plants are built on BV densities");
    let smooth = mollify(source, eps)?;
    let m = smooth.dim();
    let mut header = vec!["zeta".to_string()];
    header.extend((0..m * m).map(|k| format!("h{}{}", k / m + 1, k % m + 1)));
    header.extend((0..m * m).map(|k| format!("dh{}{}", k / m + 1, k % m + 1)));
    let mut table = Table::new(header);
    for ((z, v), d) in smooth.sample_points().zip(smooth.sample_values()).zip(smooth.sample_derivatives()) {
        let mut row = vec![z];
        row.extend((0..m * m).map(|k| v[(k / m, k % m)]));
        row.extend((0..m * m).map(|k| d[(k / m, k % m)]));
        table.push(row);
    }
    let (src_lo, src_hi) = source.spectral_range();
    let (lo, hi) = smooth.spectral_range();
    let result = json!({
        "eps": eps,
        "samples": smooth.len(),
        "spacing": smooth.spacing(),
        "source_bounds": [src_lo, src_hi],
        "bounds": [lo, hi],
        "bounds_preserved": lo >= src_lo && hi <= src_hi,
        "source_total_variation": source.total_variation(),
        "total_variation": smooth.total_variation(),
        "mbar_prime": source.mbar_prime(),
        "smooth_mbar_prime": smooth.mbar_prime(),
        "variation_bound_holds": smooth.mbar_prime() <= source.mbar_prime() + 1e-8,
        "derivative_consistency": smooth.derivative_consistency(),
        "wide_kernel": smooth.wide_kernel(),
    });
    let mut artifacts = Artifacts::default();
    artifacts.add("density.csv", table.to_csv());
    Ok(Outcome::ok(result, artifacts))
}
