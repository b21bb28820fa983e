use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::piece::{EntryFn, MatrixPiece, Polynomial, MAX_DEGREE};
use super::Side;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::quadrature::{self, GAUSS_64};

const HERMITIAN_TOL: f64 = 1e-12;

/// Matrix-valued function of bounded variation on [a, b]: finitely many
/// smooth pieces separated by breakpoints. Interior breakpoints store the
/// right limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseMatrixDensity {
    dim: usize,
    breakpoints: Vec<f64>,
    pieces: Vec<MatrixPiece>,
}

impl PiecewiseMatrixDensity {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<MatrixPiece>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidDensity("need at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDensity("breakpoints must be finite".into()));
        }
        if let Some(k) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDensity(format!(
                "breakpoints must be strictly increasing (index {} -> {})",
                k,
                k + 1
            )));
        }
        if pieces.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidDensity(format!(
                "{} breakpoints require {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        let dim = pieces[0].dim();
        if dim == 0 || pieces.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidDensity("pieces must share a positive dimension".into()));
        }
        if let Some(k) = pieces.iter().position(|p| p.max_degree() > MAX_DEGREE) {
            return Err(Error::InvalidDensity(format!(
                "piece {k} exceeds the maximum polynomial degree {MAX_DEGREE}"
            )));
        }
        let density = Self { dim, breakpoints, pieces };
        density.check_hermitian()?;
        Ok(density)
    }

    pub fn constant(a: f64, b: f64, value: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![a, b], vec![MatrixPiece::constant(&value)])
    }

    pub fn scalar_constant(a: f64, b: f64, value: f64) -> Result<Self> {
        Self::constant(a, b, DMatrix::from_element(1, 1, value))
    }

    /// Scalar piecewise-constant function; `values[k]` holds on
    /// [breakpoints[k], breakpoints[k+1]).
    pub fn scalar_piecewise_constant(breakpoints: Vec<f64>, values: &[f64]) -> Result<Self> {
        let pieces = values
            .iter()
            .map(|&v| MatrixPiece::constant(&DMatrix::from_element(1, 1, v)))
            .collect();
        Self::new(breakpoints, pieces)
    }

    /// Scalar piecewise polynomial; `coeffs[k]` are ascending powers of ζ.
    pub fn scalar_polynomial(breakpoints: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let pieces = coeffs
            .into_iter()
            .map(|c| MatrixPiece::new(1, vec![EntryFn::Poly(Polynomial::new(c))]))
            .collect();
        Self::new(breakpoints, pieces)
    }

    /// Diagonal density assembled from scalar densities; `invert[i]` replaces
    /// entry i by its reciprocal. Breakpoints are merged.
    pub fn diagonal(entries: &[(&PiecewiseMatrixDensity, bool)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDensity("diagonal needs at least one entry".into()));
        }
        let (a, b) = entries[0].0.interval();
        for (d, _) in entries {
            if d.dim != 1 {
                return Err(Error::Dimension("diagonal entries must be scalar densities".into()));
            }
            let (da, db) = d.interval();
            if (da - a).abs() > 1e-14 || (db - b).abs() > 1e-14 {
                return Err(Error::Domain("scalar densities live on different intervals".into()));
            }
        }
        let mut merged: Vec<f64> = entries.iter().flat_map(|(d, _)| d.breakpoints.clone()).collect();
        merged.sort_by(f64::total_cmp);
        merged.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
        let pieces = merged
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let diag = entries
                    .iter()
                    .map(|(d, inv)| {
                        let e = d.pieces[d.piece_index(mid, Side::Right)].entry(0, 0).clone();
                        if *inv {
                            e.reciprocal().expect("reciprocal")
                        } else {
                            e
                        }
                    })
                    .collect();
                MatrixPiece::diagonal(diag)
            })
            .collect();
        Self::new(merged, pieces)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[MatrixPiece] {
        &self.pieces
    }

    fn piece_index(&self, z: f64, side: Side) -> usize {
        let last = self.pieces.len() - 1;
        // number of breakpoints <= z (Right) or < z (Left), minus one
        let count = match side {
            Side::Right => self.breakpoints.partition_point(|&p| p <= z),
            Side::Left => self.breakpoints.partition_point(|&p| p < z),
        };
        count.saturating_sub(1).min(last)
    }

    fn check_domain(&self, z: f64, side: Side) -> Result<()> {
        let (a, b) = self.interval();
        if !(a..=b).contains(&z) {
            return Err(Error::Domain(format!("ζ = {z} outside [{a}, {b}]")));
        }
        if z == a && side == Side::Left {
            return Err(Error::Domain(format!("no left limit at the left endpoint {a}")));
        }
        if z == b && side == Side::Right {
            return Err(Error::Domain(format!("no right limit at the right endpoint {b}")));
        }
        Ok(())
    }

    /// One-sided limit at ζ.
    pub fn evaluate(&self, z: f64, side: Side) -> Result<DMatrix<f64>> {
        self.check_domain(z, side)?;
        Ok(self.pieces[self.piece_index(z, side)].eval(z))
    }

    /// Value of the stored representative at ζ (right limit in the interior,
    /// the only available limit at the endpoints).
    pub fn value(&self, z: f64) -> DMatrix<f64> {
        let (_, b) = self.interval();
        let side = if z >= b { Side::Left } else { Side::Right };
        let z = z.clamp(self.breakpoints[0], b);
        self.pieces[self.piece_index(z, side)].eval(z)
    }

    /// One-sided derivative of the smooth piece at ζ.
    pub fn derivative(&self, z: f64, side: Side) -> Result<DMatrix<f64>> {
        self.check_domain(z, side)?;
        Ok(self.pieces[self.piece_index(z, side)].derivative(z))
    }

    /// Smooth piece that [`Self::value`] would use at ζ.
    pub(crate) fn piece_at(&self, z: f64) -> &MatrixPiece {
        let (_, b) = self.interval();
        let side = if z >= b { Side::Left } else { Side::Right };
        &self.pieces[self.piece_index(z.clamp(self.breakpoints[0], b), side)]
    }

    pub(crate) fn derivative_unchecked(&self, z: f64) -> DMatrix<f64> {
        let (_, b) = self.interval();
        let side = if z >= b { Side::Left } else { Side::Right };
        self.pieces[self.piece_index(z, side)].derivative(z)
    }

    /// Jumps H(ζ⁺) − H(ζ⁻) at interior breakpoints.
    pub fn jumps(&self) -> Vec<(f64, DMatrix<f64>)> {
        (1..self.pieces.len())
            .map(|k| {
                let z = self.breakpoints[k];
                (z, self.pieces[k].eval(z) - self.pieces[k - 1].eval(z))
            })
            .collect()
    }

    fn check_hermitian(&self) -> Result<()> {
        for (k, piece) in self.pieces.iter().enumerate() {
            let (lo, hi) = (self.breakpoints[k], self.breakpoints[k + 1]);
            let pts = GAUSS_64.mapped(lo, hi).map(|(x, _)| x).chain([lo, hi]);
            for x in pts {
                let h = piece.eval(x);
                if h.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDensity(format!("non-finite value at ζ = {x}")));
                }
                let scale = 1.0 + h.amax();
                let resid = (&h - h.transpose()).amax();
                if resid > HERMITIAN_TOL * scale {
                    return Err(Error::InvalidDensity(format!(
                        "piece {k} is not Hermitian at ζ = {x} (residual {resid:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Var(H) in the operator 2-norm: curve length of the smooth pieces plus
    /// the norms of the interior jumps.
    pub fn total_variation(&self) -> f64 {
        let smooth: f64 = self
            .pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_constant())
            .map(|(k, p)| {
                let (lo, hi) = (self.breakpoints[k], self.breakpoints[k + 1]);
                quadrature::adaptive(|x| norm2(&p.derivative(x)), lo, hi, 1e-10)
            })
            .sum();
        let jumps: f64 = self.jumps().iter().map(|(_, j)| norm2(j)).sum();
        smooth + jumps
    }

    /// Extreme eigenvalues over [a, b] without the positivity check.
    pub fn spectral_range(&self) -> (f64, f64) {
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for (k, piece) in self.pieces.iter().enumerate() {
            let (lo, hi) = (self.breakpoints[k], self.breakpoints[k + 1]);
            let (pl, pu) = piece_extrema(piece, lo, hi);
            lower = lower.min(pl);
            upper = upper.max(pu);
        }
        (lower, upper)
    }

    /// (m̲, m̄): uniform spectral bounds.
    pub fn bounds(&self) -> Result<(f64, f64)> {
        let (lower, upper) = self.spectral_range();
        if lower <= 0.0 || !lower.is_finite() {
            return Err(Error::NotEnergyDensity { lower });
        }
        Ok((lower, upper))
    }

    /// ‖H(a)‖ + Var(H) + ‖H(b)‖.
    pub fn mbar_prime(&self) -> f64 {
        let (a, b) = self.interval();
        norm2(&self.pieces[0].eval(a))
            + self.total_variation()
            + norm2(&self.pieces.last().unwrap().eval(b))
    }

    /// Mean value over [lo, hi], integrating each overlapped piece exactly.
    pub fn cell_average(&self, lo: f64, hi: f64) -> Result<DMatrix<f64>> {
        let (a, b) = self.interval();
        if !(lo < hi) {
            return Err(Error::Domain(format!("degenerate cell [{lo}, {hi}]")));
        }
        if lo < a || hi > b {
            return Err(Error::Domain(format!("cell [{lo}, {hi}] outside [{a}, {b}]")));
        }
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        for (k, piece) in self.pieces.iter().enumerate() {
            let l = lo.max(self.breakpoints[k]);
            let h = hi.min(self.breakpoints[k + 1]);
            if h > l {
                acc += piece.integral(l, h);
            }
        }
        Ok(acc / (hi - lo))
    }
}

fn eig_extremes(h: &DMatrix<f64>) -> (f64, f64) {
    let ev = SymmetricEigen::new(h.clone()).eigenvalues;
    (ev.min(), ev.max())
}

/// Eigenvalue extrema on one piece: Gauss points plus endpoints, then golden
/// section refinement around every discrete local extremum.
fn piece_extrema(piece: &MatrixPiece, lo: f64, hi: f64) -> (f64, f64) {
    if piece.is_constant() {
        return eig_extremes(&piece.eval(lo));
    }
    let mut xs: Vec<f64> = std::iter::once(lo)
        .chain(GAUSS_64.mapped(lo, hi).map(|(x, _)| x))
        .chain(std::iter::once(hi))
        .collect();
    xs.dedup();
    let vals: Vec<(f64, f64)> = xs.iter().map(|&x| eig_extremes(&piece.eval(x))).collect();
    let mut lower = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let mut upper = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    for i in 1..xs.len() - 1 {
        if vals[i].0 <= vals[i - 1].0 && vals[i].0 <= vals[i + 1].0 {
            let f = |x: f64| eig_extremes(&piece.eval(x)).0;
            lower = lower.min(golden_min(f, xs[i - 1], xs[i + 1]));
        }
        if vals[i].1 >= vals[i - 1].1 && vals[i].1 >= vals[i + 1].1 {
            let f = |x: f64| -eig_extremes(&piece.eval(x)).1;
            upper = upper.max(-golden_min(f, xs[i - 1], xs[i + 1]));
        }
    }
    (lower, upper)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f(lo).min(f(hi)).min(f1).min(f2);
    for _ in 0..80 {
        if hi - lo < 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        best = best.min(f1).min(f2);
    }
    best
}
