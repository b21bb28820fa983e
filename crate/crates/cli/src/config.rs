//! Experiment configuration: TOML (or the JSON echo of a previous report),
//! validated and completed with defaults before anything runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use phs_core::density::{mollify, Density, EntryFn, MatrixPiece, PiecewiseMatrixDensity, Polynomial};
use phs_core::model::{string_model, timoshenko_model, PortHamiltonianSystem};

use crate::error::{CliError, Result};

pub const DEFAULT_NODES: usize = 400;
pub const DEFAULT_T_FINAL: f64 = 10.0;
pub const DEFAULT_MU: f64 = 1.0;
/// Width of the default initial bump, relative to the interval length.
pub const DEFAULT_BUMP_WIDTH: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    String,
    Timoshenko,
    Custom,
}

impl ModelKind {
    fn coefficients(self) -> &'static [&'static str] {
        match self {
            ModelKind::String => &["rho", "T"],
            ModelKind::Timoshenko => &["rho", "EI", "Ir", "K"],
            ModelKind::Custom => &[],
        }
    }
}

/// Scalar coefficient: a constant, or breakpoints with one ascending
/// coefficient list per piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Constant(f64),
    Piecewise { breakpoints: Vec<f64>, pieces: Vec<Vec<f64>> },
}

/// Matrix density for custom models: a constant row-major matrix, or
/// breakpoints with, per piece, m·m row-major entries of ascending
/// polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Constant(Vec<Vec<f64>>),
    Piecewise { breakpoints: Vec<f64>, pieces: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub m: usize,
    pub k: usize,
    #[serde(rename = "P1")]
    pub p1: Vec<Vec<f64>>,
    #[serde(rename = "P0", default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<Vec<f64>>>,
    #[serde(rename = "H")]
    pub h: MatrixSpec,
    #[serde(rename = "W_B1", default)]
    pub wb1: Vec<Vec<f64>>,
    #[serde(rename = "W_B2")]
    pub wb2: Vec<Vec<f64>>,
    #[serde(rename = "W_C")]
    pub wc: Vec<Vec<f64>>,
}

/// Gaussian bump amplitude·exp(−½((ζ − center)/width)²) in one component of
/// f = Hx; components are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub component: usize,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Time step; h/2 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify_eps: Option<f64>,
    /// Store every k-th nodal state (0: only the initial one).
    #[serde(default)]
    pub dump_every: usize,
    /// Window [t_lo, t_hi] for the empirical decay rate; [t_final/10, t_final] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            dt: None,
            t_final: DEFAULT_T_FINAL,
            mollify_eps: None,
            dump_every: 0,
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    #[serde(default)]
    pub densities: BTreeMap<String, ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSpec>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub initial: Vec<Bump>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

fn default_t_final() -> f64 {
    DEFAULT_T_FINAL
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

fn schema(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Constant unit-coefficient string on [0, 1].
    pub fn builtin_string() -> Self {
        Self::parse_toml("model = \"string\"").expect("built-in config is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_raw(path)?.completed()
    }

    pub fn parse_toml(text: &str) -> Result<Self> {
        Self::parse_toml_raw(text)?.completed()
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        Self::parse_json_raw(text)?.completed()
    }

    /// Parsed but without defaults, so command-line overrides can still
    /// change quantities that defaults derive from (dt from the node count).
    pub fn load_raw(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::parse_json_raw(&text)
        } else {
            Self::parse_toml_raw(&text)
        }
    }

    pub fn parse_toml_raw(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("TOML parse error: {e}")))
    }

    /// Accepts a bare config or a report whose `config` field echoes one.
    pub fn parse_json_raw(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("JSON parse error at line {}: {e}", e.line())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("model").is_none() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("JSON schema error: {e}")))
    }

    /// Fills defaults and validates; the result is what reports echo.
    pub fn completed(mut self) -> Result<Self> {
        self.check_scalars()?;
        let interval = self.resolve_interval()?;
        self.interval = Some(interval);
        let (a, b) = (interval[0], interval[1]);
        match self.model {
            ModelKind::Custom => {
                if self.custom.is_none() {
                    return Err(schema("custom", "model = \"custom\" needs a [custom] table"));
                }
                if let Some(name) = self.densities.keys().next() {
                    return Err(schema(&format!("densities.{name}"), "custom models take their density from custom.H"));
                }
            }
            kind => {
                if self.custom.is_some() {
                    return Err(schema("custom", format!("only allowed with model = \"custom\", not {kind:?}")));
                }
                let allowed = kind.coefficients();
                if let Some(name) = self.densities.keys().find(|k| !allowed.contains(&k.as_str())) {
                    return Err(schema(
                        &format!("densities.{name}"),
                        format!("unknown coefficient; expected one of {}", allowed.join(", ")),
                    ));
                }
                for name in allowed {
                    self.densities.entry(name.to_string()).or_insert(ScalarSpec::Constant(1.0));
                }
            }
        }
        if self.initial.is_empty() {
            self.initial.push(Bump {
                component: 1,
                amplitude: 1.0,
                center: 0.5 * (a + b),
                width: DEFAULT_BUMP_WIDTH * (b - a),
            });
        }
        if self.numerics.dt.is_none() {
            self.numerics.dt = Some(0.5 * (b - a) / self.numerics.nodes as f64);
        }
        if self.numerics.fit_window.is_none() {
            self.numerics.fit_window = Some([0.1 * self.numerics.t_final, self.numerics.t_final]);
        }
        let m = self.build_plant()?.m;
        for (i, bump) in self.initial.iter().enumerate() {
            if bump.component == 0 || bump.component > m {
                return Err(schema(&format!("initial[{i}].component"), format!("must be in 1..={m}")));
            }
        }
        Ok(self)
    }

    fn check_scalars(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(schema(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        if self.numerics.nodes < phs_core::simulator::MIN_CELLS {
            return Err(schema("numerics.nodes", format!("need at least {} cells", phs_core::simulator::MIN_CELLS)));
        }
        if let Some(dt) = self.numerics.dt {
            positive("numerics.dt", dt)?;
        }
        if !(self.numerics.t_final >= 0.0 && self.numerics.t_final.is_finite()) {
            return Err(schema("numerics.t_final", "must be nonnegative and finite"));
        }
        if let Some(eps) = self.numerics.mollify_eps {
            positive("numerics.mollify_eps", eps)?;
        }
        if let Some([lo, hi]) = self.numerics.fit_window {
            if !(lo >= 0.0 && lo < hi) {
                return Err(schema("numerics.fit_window", format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
            }
        }
        for (i, bump) in self.initial.iter().enumerate() {
            positive(&format!("initial[{i}].width"), bump.width)?;
            if !bump.amplitude.is_finite() || !bump.center.is_finite() {
                return Err(schema(&format!("initial[{i}]"), "amplitude and center must be finite"));
            }
        }
        Ok(())
    }

    fn resolve_interval(&self) -> Result<[f64; 2]> {
        let mut found: Option<(String, [f64; 2])> = None;
        let mut consider = |field: String, bps: &[f64]| -> Result<()> {
            if let (Some(&lo), Some(&hi)) = (bps.first(), bps.last()) {
                match &found {
                    Some((other, iv)) if *iv != [lo, hi] => {
                        return Err(schema(&field, format!("spans [{lo}, {hi}] but {other} spans [{}, {}]", iv[0], iv[1])));
                    }
                    None => found = Some((field, [lo, hi])),
                    _ => {}
                }
            }
            Ok(())
        };
        if let Some(iv) = self.interval {
            consider("interval".into(), &iv)?;
        }
        for (name, spec) in &self.densities {
            if let ScalarSpec::Piecewise { breakpoints, .. } = spec {
                consider(format!("densities.{name}.breakpoints"), breakpoints)?;
            }
        }
        if let Some(CustomSpec { h: MatrixSpec::Piecewise { breakpoints, .. }, .. }) = &self.custom {
            consider("custom.H.breakpoints".into(), breakpoints)?;
        }
        let iv = found.map(|f| f.1).unwrap_or([0.0, 1.0]);
        if !(iv[0] < iv[1]) || !iv[0].is_finite() || !iv[1].is_finite() {
            return Err(schema("interval", format!("need a < b, got [{}, {}]", iv[0], iv[1])));
        }
        Ok(iv)
    }

    fn interval_pair(&self) -> (f64, f64) {
        let iv = self.interval.unwrap_or([0.0, 1.0]);
        (iv[0], iv[1])
    }

    fn scalar_density(&self, name: &str) -> Result<PiecewiseMatrixDensity> {
        let field = format!("densities.{name}");
        let (a, b) = self.interval_pair();
        let spec = self.densities.get(name).cloned().unwrap_or(ScalarSpec::Constant(1.0));
        let d = match spec {
            ScalarSpec::Constant(v) => PiecewiseMatrixDensity::scalar_constant(a, b, v),
            ScalarSpec::Piecewise { breakpoints, pieces } => {
                check_breakpoints(&format!("{field}.breakpoints"), &breakpoints, pieces.len())?;
                for (i, p) in pieces.iter().enumerate() {
                    if p.is_empty() || p.iter().any(|c| !c.is_finite()) {
                        return Err(schema(&format!("{field}.pieces[{i}]"), "needs finite coefficients"));
                    }
                }
                PiecewiseMatrixDensity::scalar_polynomial(breakpoints, pieces)
            }
        }
        .map_err(|e| schema(&field, e))?;
        let (lo, _) = d.spectral_range();
        if !(lo > 0.0) {
            return Err(schema(&field, format!("must be positive on the interval, lower bound {lo}")));
        }
        Ok(d)
    }

    fn custom_density(&self, c: &CustomSpec) -> Result<PiecewiseMatrixDensity> {
        let m = c.m;
        let (a, b) = self.interval_pair();
        match &c.h {
            MatrixSpec::Constant(rows) => {
                let h = matrix("custom.H", rows, m, m)?;
                PiecewiseMatrixDensity::constant(a, b, h).map_err(|e| schema("custom.H", e))
            }
            MatrixSpec::Piecewise { breakpoints, pieces } => {
                check_breakpoints("custom.H.breakpoints", breakpoints, pieces.len())?;
                let pieces = pieces
                    .iter()
                    .enumerate()
                    .map(|(i, entries)| {
                        let field = format!("custom.H.pieces[{i}]");
                        if entries.len() != m * m {
                            return Err(schema(&field, format!("needs {} row-major entries, got {}", m * m, entries.len())));
                        }
                        if entries.iter().any(|e| e.is_empty() || e.iter().any(|c| !c.is_finite())) {
                            return Err(schema(&field, "entries need finite coefficients"));
                        }
                        Ok(MatrixPiece::new(m, entries.iter().map(|e| EntryFn::Poly(Polynomial::new(e.clone()))).collect()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                PiecewiseMatrixDensity::new(breakpoints.clone(), pieces).map_err(|e| schema("custom.H", e))
            }
        }
    }

    /// The plant on its BV density, before any mollification.
    pub fn build_plant(&self) -> Result<PortHamiltonianSystem> {
        let sys = match self.model {
            ModelKind::String => string_model(&self.scalar_density("rho")?, &self.scalar_density("T")?)?,
            ModelKind::Timoshenko => timoshenko_model(
                &self.scalar_density("rho")?,
                &self.scalar_density("EI")?,
                &self.scalar_density("Ir")?,
                &self.scalar_density("K")?,
            )?,
            ModelKind::Custom => self.build_custom()?,
        };
        let report = sys.validate();
        if let Some(check) = report.failures().next() {
            let field = match (self.model, check.name) {
                (ModelKind::Custom, "P1 Hermitian" | "P1 invertible") => "custom.P1",
                (ModelKind::Custom, "P0 skew-Hermitian") => "custom.P0",
                (ModelKind::Custom, "W_B1 full row rank") => "custom.W_B1",
                (ModelKind::Custom, _) => "custom.H",
                _ => "densities",
            };
            return Err(schema(field, format!("{} residual {:e} ({})", check.name, check.residual, check.detail)));
        }
        Ok(sys)
    }

    fn build_custom(&self) -> Result<PortHamiltonianSystem> {
        let c = self.custom.as_ref().expect("checked in completed()");
        let (m, k) = (c.m, c.k);
        if m == 0 {
            return Err(schema("custom.m", "must be positive"));
        }
        if k == 0 || k > m {
            return Err(schema("custom.k", format!("need 1 <= k <= m = {m}, got {k}")));
        }
        let p1 = matrix("custom.P1", &c.p1, m, m)?;
        let p0 = match &c.p0 {
            Some(rows) => matrix("custom.P0", rows, m, m)?,
            None => DMatrix::zeros(m, m),
        };
        let wb1 = matrix("custom.W_B1", &c.wb1, m - k, 2 * m)?;
        let wb2 = matrix("custom.W_B2", &c.wb2, k, 2 * m)?;
        let wc = matrix("custom.W_C", &c.wc, k, 2 * m)?;
        let h = self.custom_density(c)?;
        Ok(PortHamiltonianSystem::new(k, p1, p0, h.into(), wb1, wb2, wc)?)
    }

    /// The plant actually simulated: mollified when `numerics.mollify_eps` is set.
    pub fn build_system(&self) -> Result<PortHamiltonianSystem> {
        let sys = self.build_plant()?;
        match self.numerics.mollify_eps {
            None => Ok(sys),
            Some(eps) => {
                let smooth = mollify(sys.density.as_piecewise().expect("plants are built on BV densities"), eps)
                    .map_err(|e| schema("numerics.mollify_eps", e))?;
                Ok(sys.with_density(Density::Smooth(smooth))?)
            }
        }
    }

    /// Bumps converted to 0-based components for the simulator.
    pub fn bumps(&self) -> Vec<(usize, f64, f64, f64)> {
        self.initial.iter().map(|b| (b.component - 1, b.amplitude, b.center, b.width)).collect()
    }

    pub fn dt(&self) -> f64 {
        self.numerics.dt.expect("filled by completed()")
    }

    pub fn fit_window(&self) -> (f64, f64) {
        let [lo, hi] = self.numerics.fit_window.expect("filled by completed()");
        (lo, hi)
    }
}

fn check_breakpoints(field: &str, bps: &[f64], pieces: usize) -> Result<()> {
    if bps.len() < 2 {
        return Err(schema(field, "need at least two breakpoints"));
    }
    if bps.iter().any(|b| !b.is_finite()) {
        return Err(schema(field, "breakpoints must be finite"));
    }
    if let Some(w) = bps.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(schema(field, format!("must be strictly increasing ({} then {})", w[0], w[1])));
    }
    if pieces != bps.len() - 1 {
        return Err(schema(field, format!("{} breakpoints need {} pieces, got {pieces}", bps.len(), bps.len() - 1)));
    }
    Ok(())
}

fn matrix(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(schema(field, format!("must be {nrows}x{ncols} (row-major), got {} rows", rows.len())));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(schema(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
