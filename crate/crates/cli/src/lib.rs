//! `phs`: check, certify, simulate and sweep boundary-feedback experiments on
//! 1D port-Hamiltonian systems described by a TOML file.
//!
//! Every command prints a JSON report on stdout (config echo included) and
//! writes it, together with any CSV tables, into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::{Outcome, SweepRange};
use crate::config::ExperimentConfig;
use crate::error::Result;

/// Directory used when neither `--out` nor `outputs.dir` is given.
pub const DEFAULT_OUT_DIR: &str = "phs-out";

#[derive(Debug, Parser)]
#[command(name = "phs", version, about = "Boundary-feedback stabilization experiments for 1D port-Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check passivity, trace domination and closed-loop dissipativity.
    Check(Common),
    /// Compute the explicit decay certificate.
    Certify(Common),
    /// Run the closed loop and test the certificate against it.
    Simulate(Common),
    /// Eigenvalues of the discretized closed-loop generator.
    Spectrum(Common),
    /// Certified and empirical rates over a log grid of gains.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.25)]
        mu_min: f64,
        #[arg(long, default_value_t = 4.0)]
        mu_max: f64,
        /// Number of grid points.
        #[arg(long, default_value_t = 9)]
        steps: usize,
    },
    /// Mollify the energy density and report its properties.
    Mollify(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML, or the JSON report of an earlier run);
    /// the constant unit string when omitted.
    pub config: Option<PathBuf>,
    /// Feedback gain in u = −μ y.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Number of grid cells.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Mollification radius.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory for the report and CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Store every k-th nodal state in states.csv.
    #[arg(long)]
    pub dump_every: Option<usize>,
}

impl Common {
    /// Loads the config and applies the flags before defaults are derived.
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load_raw(path)?,
            None => ExperimentConfig::parse_toml_raw("model = \"string\"")?,
        };
        if let Some(mu) = self.mu {
            cfg.mu = mu;
        }
        if let Some(n) = self.nodes {
            cfg.numerics.nodes = n;
        }
        if let Some(dt) = self.dt {
            cfg.numerics.dt = Some(dt);
        }
        if let Some(t) = self.tfinal {
            cfg.numerics.t_final = t;
        }
        if let Some(eps) = self.eps {
            cfg.numerics.mollify_eps = Some(eps);
        }
        if let Some(k) = self.dump_every {
            cfg.numerics.dump_every = k;
        }
        if let Some(out) = &self.out {
            cfg.outputs.dir = Some(out.display().to_string());
        }
        cfg.completed()
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Certify(_) => "certify",
            Command::Simulate(_) => "simulate",
            Command::Spectrum(_) => "spectrum",
            Command::Sweep { .. } => "sweep",
            Command::Mollify(_) => "mollify",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Certify(c) | Command::Simulate(c) | Command::Spectrum(c) | Command::Mollify(c) => c,
            Command::Sweep { common, .. } => common,
        }
    }
}

/// Full report text and exit code for one invocation; files are written
/// into the output directory as a side effect.
pub fn run(command: &Command) -> Result<(String, i32)> {
    let cfg = command.common().config()?;
    let mut extra = serde_json::Map::new();
    let outcome: Outcome = match command {
        Command::Check(_) => commands::check(&cfg)?,
        Command::Certify(_) => commands::certify(&cfg)?,
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::Spectrum(_) => commands::spectrum(&cfg)?,
        Command::Mollify(_) => commands::mollify_density(&cfg)?,
        Command::Sweep { mu_min, mu_max, steps, .. } => {
            let range = SweepRange { mu_min: *mu_min, mu_max: *mu_max, steps: *steps };
            extra.insert("flags".into(), json!({ "mu_min": mu_min, "mu_max": mu_max, "steps": steps }));
            commands::sweep(&cfg, range)?
        }
    };
    let mut report = serde_json::Map::new();
    report.insert("command".into(), json!(command.name()));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("config".into(), serde_json::to_value(&cfg).expect("config serializes"));
    report.extend(extra);
    report.insert("result".into(), outcome.result);
    let text = output::to_json(&serde_json::Value::Object(report));

    let dir = cfg.outputs.dir.as_deref().unwrap_or(DEFAULT_OUT_DIR);
    let mut artifacts = outcome.artifacts;
    artifacts.add(&format!("{}.json", command.name()), text.clone());
    for path in artifacts.write_all(Path::new(dir))? {
        log::info!("wrote {}", path.display());
    }
    Ok((text, outcome.exit_code))
}
