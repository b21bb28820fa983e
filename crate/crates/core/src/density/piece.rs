use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::quadrature;

/// Highest polynomial degree accepted in a density piece.
pub const MAX_DEGREE: usize = 8;

/// Polynomial in the absolute coordinate ζ, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect(),
        )
    }

    /// p′(x) by Horner's rule.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }

    /// Exact integral over [lo, hi].
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |x: f64| {
            self.coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * x + c / (k as f64 + 1.0))
                * x
        };
        anti(hi) - anti(lo)
    }
}

/// One matrix entry on a smooth piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EntryFn {
    Poly(Polynomial),
    /// ζ ↦ 1 / p(ζ); used for the compliance entries 1/ρ, 1/Iᵣ.
    Reciprocal(Polynomial),
}

impl EntryFn {
    pub fn constant(c: f64) -> Self {
        EntryFn::Poly(Polynomial::constant(c))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            EntryFn::Poly(p) => p.eval(x),
            EntryFn::Reciprocal(p) => 1.0 / p.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            EntryFn::Poly(p) => p.eval_derivative(x),
            EntryFn::Reciprocal(p) => {
                let v = p.eval(x);
                -p.eval_derivative(x) / (v * v)
            }
        }
    }

    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            EntryFn::Poly(p) => p.integral(lo, hi),
            EntryFn::Reciprocal(p) if p.is_constant() => (hi - lo) / p.coeffs[0],
            EntryFn::Reciprocal(p) => quadrature::adaptive(|x| 1.0 / p.eval(x), lo, hi, 1e-14),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            EntryFn::Poly(p) | EntryFn::Reciprocal(p) => p.is_constant(),
        }
    }

    pub fn reciprocal(&self) -> Option<EntryFn> {
        match self {
            EntryFn::Poly(p) if p.is_constant() => Some(EntryFn::constant(1.0 / p.coeffs[0])),
            EntryFn::Poly(p) => Some(EntryFn::Reciprocal(p.clone())),
            EntryFn::Reciprocal(p) => Some(EntryFn::Poly(p.clone())),
        }
    }

    pub(crate) fn degree(&self) -> usize {
        match self {
            EntryFn::Poly(p) | EntryFn::Reciprocal(p) => p.degree(),
        }
    }
}

/// Matrix-valued smooth map on one subinterval; entries row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPiece {
    dim: usize,
    entries: Vec<EntryFn>,
}

impl MatrixPiece {
    pub fn new(dim: usize, entries: Vec<EntryFn>) -> Self {
        assert_eq!(entries.len(), dim * dim, "piece needs dim^2 entries");
        Self { dim, entries }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square());
        let dim = m.nrows();
        let entries = (0..dim * dim).map(|k| EntryFn::constant(m[(k / dim, k % dim)])).collect();
        Self { dim, entries }
    }

    pub fn diagonal(entries: Vec<EntryFn>) -> Self {
        let dim = entries.len();
        let mut all = vec![EntryFn::constant(0.0); dim * dim];
        for (i, e) in entries.into_iter().enumerate() {
            all[i * dim + i] = e;
        }
        Self { dim, entries: all }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &EntryFn {
        &self.entries[i * self.dim + j]
    }

    pub fn eval(&self, x: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).eval(x))
    }

    pub fn derivative(&self, x: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).derivative(x))
    }

    /// val += w·H(x) and der += w·H′(x) without allocating.
    pub(crate) fn accumulate(&self, x: f64, w: f64, val: &mut DMatrix<f64>, der: &mut DMatrix<f64>) {
        for (k, e) in self.entries.iter().enumerate() {
            let (i, j) = (k / self.dim, k % self.dim);
            val[(i, j)] += w * e.eval(x);
            if !e.is_constant() {
                der[(i, j)] += w * e.derivative(x);
            }
        }
    }

    pub fn integral(&self, lo: f64, hi: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).integral(lo, hi))
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(EntryFn::is_constant)
    }

    pub fn max_degree(&self) -> usize {
        self.entries.iter().map(EntryFn::degree).max().unwrap_or(0)
    }
}
