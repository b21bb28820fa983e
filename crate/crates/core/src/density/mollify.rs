//! Mollification of piecewise densities by the standard bump kernel.
//!
//! The density is extended beyond [a, b] by its one-sided boundary values
//! (clamped extension) before convolving with j_ε(r) = j(r/ε)/ε, where
//! j(r) = c·exp(−1/(1−r²)) on (−1, 1). Values are computed as normalized
//! positive quadrature sums, so every sample is a convex combination of
//! values of H and inherits its spectral bounds. Derivatives are the
//! convolution of the piecewise derivative plus the jump terms J_k·j_ε(ζ−ζ_k).

use std::sync::LazyLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::PiecewiseMatrixDensity;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::quadrature::{self, GAUSS_16};

/// ∫₋₁¹ exp(−1/(1−r²)) dr.
pub static BUMP_MASS: LazyLock<f64> =
    LazyLock::new(|| quadrature::adaptive(bump_unnormalized, -1.0, 1.0, 1e-14));

fn bump_unnormalized(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Normalization constant c with ∫ j = 1 (≈ 2.25228).
pub fn bump_constant() -> f64 {
    1.0 / *BUMP_MASS
}

/// The unit-mass bump j(r).
pub fn bump(r: f64) -> f64 {
    bump_unnormalized(r) * bump_constant()
}

/// Panels of the kernel variable s ∈ [−1, 1] before splitting at breakpoints.
const KERNEL_PANELS: usize = 8;

/// Smooth density sampled on a uniform grid with values and derivatives;
/// evaluated between samples by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothDensity {
    dim: usize,
    a: f64,
    b: f64,
    eps: f64,
    spacing: f64,
    #[serde(skip)]
    values: Vec<DMatrix<f64>>,
    #[serde(skip)]
    derivatives: Vec<DMatrix<f64>>,
    source_bounds: (f64, f64),
    wide_kernel: bool,
}

/// Default number of samples per mollification radius.
pub const SAMPLES_PER_EPS: usize = 256;

impl SmoothDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when ε ≥ (b − a)/2, i.e. the kernel sees the whole interval.
    pub fn wide_kernel(&self) -> bool {
        self.wide_kernel
    }

    /// Spectral bounds of the source density.
    pub fn source_bounds(&self) -> (f64, f64) {
        self.source_bounds
    }

    pub fn sample_points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.sample_point(i))
    }

    fn sample_point(&self, i: usize) -> f64 {
        if i + 1 == self.values.len() {
            self.b
        } else {
            self.a + i as f64 * self.spacing
        }
    }

    pub fn sample_values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn sample_derivatives(&self) -> &[DMatrix<f64>] {
        &self.derivatives
    }

    fn locate(&self, z: f64) -> (usize, f64, f64) {
        let last = self.values.len() - 2;
        let i = (((z - self.a) / self.spacing).floor().max(0.0) as usize).min(last);
        let x0 = self.sample_point(i);
        let w = self.sample_point(i + 1) - x0;
        (i, ((z - x0) / w).clamp(0.0, 1.0), w)
    }

    pub fn evaluate(&self, z: f64) -> Result<DMatrix<f64>> {
        if !(self.a..=self.b).contains(&z) {
            return Err(Error::Domain(format!("ζ = {z} outside [{}, {}]", self.a, self.b)));
        }
        Ok(self.value(z))
    }

    pub(crate) fn value(&self, z: f64) -> DMatrix<f64> {
        let (i, t, w) = self.locate(z);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        &self.values[i] * h00
            + &self.derivatives[i] * (h10 * w)
            + &self.values[i + 1] * h01
            + &self.derivatives[i + 1] * (h11 * w)
    }

    pub fn derivative(&self, z: f64) -> DMatrix<f64> {
        let (i, t, w) = self.locate(z.clamp(self.a, self.b));
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / w;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / w;
        let d11 = 3.0 * t2 - 2.0 * t;
        &self.values[i] * d00
            + &self.derivatives[i] * d10
            + &self.values[i + 1] * d01
            + &self.derivatives[i + 1] * d11
    }

    /// Mean over [lo, hi] of the Hermite interpolant (2-point Gauss per
    /// sample interval is exact for cubics).
    pub fn cell_average(&self, lo: f64, hi: f64) -> Result<DMatrix<f64>> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("degenerate cell [{lo}, {hi}]")));
        }
        if lo < self.a || hi > self.b {
            return Err(Error::Domain(format!("cell [{lo}, {hi}] outside [{}, {}]", self.a, self.b)));
        }
        let g = 1.0 / 3f64.sqrt();
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        let mut l = lo;
        while l < hi {
            let (i, _, _) = self.locate(l);
            let edge = self.sample_point(i + 1);
            let h = if edge <= l { hi } else { edge.min(hi) };
            let (mid, half) = (0.5 * (l + h), 0.5 * (h - l));
            acc += (self.value(mid - g * half) + self.value(mid + g * half)) * half;
            l = h;
        }
        Ok(acc / (hi - lo))
    }

    /// Extreme eigenvalues over the samples.
    pub fn spectral_range(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let ev = SymmetricEigen::new(v.clone()).eigenvalues;
            (lo.min(ev.min()), hi.max(ev.max()))
        })
    }

    pub fn bounds(&self) -> Result<(f64, f64)> {
        let (lower, upper) = self.spectral_range();
        if lower <= 0.0 {
            return Err(Error::NotEnergyDensity { lower });
        }
        Ok((lower, upper))
    }

    /// ∫‖H′‖ by the trapezoid rule on the derivative samples.
    pub fn total_variation(&self) -> f64 {
        let norms: Vec<f64> = self.derivatives.iter().map(norm2).collect();
        let pts: Vec<f64> = self.sample_points().collect();
        norms
            .windows(2)
            .zip(pts.windows(2))
            .map(|(n, x)| 0.5 * (n[0] + n[1]) * (x[1] - x[0]))
            .sum()
    }

    pub fn mbar_prime(&self) -> f64 {
        norm2(&self.values[0]) + self.total_variation() + norm2(self.values.last().unwrap())
    }

    /// Largest |(H_{i+1} − H_i) − Δ/2·(H′_i + H′_{i+1})| over sample intervals
    /// and entries: trapezoid consistency of derivative and value samples.
    pub fn derivative_consistency(&self) -> f64 {
        let pts: Vec<f64> = self.sample_points().collect();
        (0..self.values.len() - 1)
            .map(|i| {
                let w = pts[i + 1] - pts[i];
                let r = (&self.values[i + 1] - &self.values[i])
                    - (&self.derivatives[i] + &self.derivatives[i + 1]) * (0.5 * w);
                r.amax()
            })
            .fold(0.0, f64::max)
    }

    /// Rows of (ζ, entries of H_ε row-major, entries of H′_ε row-major).
    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.sample_points().enumerate().map(move |(i, z)| {
            let mut row = vec![z];
            row.extend(self.values[i].transpose().iter());
            row.extend(self.derivatives[i].transpose().iter());
            row
        })
    }
}

/// Mollify with the default sample density.
pub fn mollify(density: &PiecewiseMatrixDensity, eps: f64) -> Result<SmoothDensity> {
    let (a, b) = density.interval();
    let spacing = (eps / SAMPLES_PER_EPS as f64).min((b - a) / 1024.0);
    mollify_with_spacing(density, eps, spacing)
}

pub fn mollify_with_spacing(
    density: &PiecewiseMatrixDensity,
    eps: f64,
    spacing: f64,
) -> Result<SmoothDensity> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("mollification radius must be positive, got {eps}")));
    }
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!("sample spacing must be positive, got {spacing}")));
    }
    let (a, b) = density.interval();
    let wide_kernel = eps >= 0.5 * (b - a);
    if wide_kernel {
        log::warn!("mollification radius {eps} is at least half the interval length {}", b - a);
    }
    let count = ((b - a) / spacing).ceil() as usize;
    let spacing = (b - a) / count as f64;
    let dim = density.dim();
    let jumps = density.jumps();
    let c = bump_constant();
    let source_bounds = density.spectral_range();
    let mut values = Vec::with_capacity(count + 1);
    let mut derivatives = Vec::with_capacity(count + 1);
    for i in 0..=count {
        let z = if i == count { b } else { a + i as f64 * spacing };
        let (v, mut d) = convolve(density, z, eps);
        for (zk, jump) in &jumps {
            let s = (z - zk) / eps;
            if s.abs() < 1.0 {
                d += jump * (c * bump_unnormalized(s) / eps);
            }
        }
        values.push(clamp_spectrum(v, source_bounds));
        derivatives.push(d);
    }
    Ok(SmoothDensity {
        dim,
        a,
        b,
        eps,
        spacing,
        values,
        derivatives,
        source_bounds,
        wide_kernel,
    })
}

/// Removes the rounding of the mass normalization, which can push an
/// eigenvalue a few ulps past the bounds of the source.
fn clamp_spectrum(v: DMatrix<f64>, (lo, hi): (f64, f64)) -> DMatrix<f64> {
    if v.nrows() == 1 {
        return v.map(|x| x.clamp(lo, hi));
    }
    let eig = SymmetricEigen::new(v.clone());
    if eig.eigenvalues.min() >= lo && eig.eigenvalues.max() <= hi {
        return v;
    }
    let d = eig.eigenvalues.map(|x| x.clamp(lo, hi));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&d) * q.transpose();
    (&out + out.transpose()) * 0.5
}

/// ∫ j(s) H̃(ζ − εs) ds and ∫ j(s) H̃′(ζ − εs) ds with the weights
/// renormalized to unit mass. The s-axis is split wherever ζ − εs crosses a
/// breakpoint or an endpoint so every panel sees a single smooth piece.
fn convolve(density: &PiecewiseMatrixDensity, z: f64, eps: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = density.interval();
    let dim = density.dim();
    let mut cuts: Vec<f64> = (0..=KERNEL_PANELS)
        .map(|k| -1.0 + 2.0 * k as f64 / KERNEL_PANELS as f64)
        .collect();
    for &p in density.breakpoints() {
        let s = (z - p) / eps;
        if s > -1.0 && s < 1.0 {
            cuts.push(s);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let left = density.value(a);
    let right = density.value(b);
    let mut mass = 0.0;
    let mut val = DMatrix::zeros(dim, dim);
    let mut der = DMatrix::zeros(dim, dim);
    for w in cuts.windows(2) {
        let mid = z - eps * 0.5 * (w[0] + w[1]);
        let piece = (mid > a && mid < b).then(|| density.piece_at(mid));
        for (s, wt) in GAUSS_16.mapped(w[0], w[1]) {
            let k = wt * bump_unnormalized(s);
            if k == 0.0 {
                continue;
            }
            mass += k;
            match piece {
                Some(p) => p.accumulate(z - eps * s, k, &mut val, &mut der),
                None if mid <= a => val += &left * k,
                None => val += &right * k,
            }
        }
    }
    (val / mass, der / mass)
}
