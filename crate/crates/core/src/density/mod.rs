//! Matrix-valued energy densities of bounded variation.

mod mollify;
mod piece;
mod piecewise;

pub use mollify::{bump, bump_constant, mollify, mollify_with_spacing, SmoothDensity, SAMPLES_PER_EPS};
pub use piece::{EntryFn, MatrixPiece, Polynomial, MAX_DEGREE};
pub use piecewise::PiecewiseMatrixDensity;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which one-sided limit to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Energy density of a system: either the BV density itself or a mollified
/// approximation of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Density {
    Piecewise(PiecewiseMatrixDensity),
    Smooth(SmoothDensity),
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Piecewise(d) => d.dim(),
            Density::Smooth(d) => d.dim(),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            Density::Piecewise(d) => d.interval(),
            Density::Smooth(d) => d.interval(),
        }
    }

    /// Representative value at ζ (right limit inside, one-sided at the ends).
    pub fn value(&self, z: f64) -> DMatrix<f64> {
        match self {
            Density::Piecewise(d) => d.value(z),
            Density::Smooth(d) => d.value(z.clamp(d.interval().0, d.interval().1)),
        }
    }

    pub fn derivative(&self, z: f64) -> DMatrix<f64> {
        match self {
            Density::Piecewise(d) => d.derivative_unchecked(z),
            Density::Smooth(d) => d.derivative(z),
        }
    }

    pub fn cell_average(&self, lo: f64, hi: f64) -> Result<DMatrix<f64>> {
        match self {
            Density::Piecewise(d) => d.cell_average(lo, hi),
            Density::Smooth(d) => d.cell_average(lo, hi),
        }
    }

    pub fn bounds(&self) -> Result<(f64, f64)> {
        match self {
            Density::Piecewise(d) => d.bounds(),
            Density::Smooth(d) => d.bounds(),
        }
    }

    pub fn total_variation(&self) -> f64 {
        match self {
            Density::Piecewise(d) => d.total_variation(),
            Density::Smooth(d) => d.total_variation(),
        }
    }

    pub fn mbar_prime(&self) -> f64 {
        match self {
            Density::Piecewise(d) => d.mbar_prime(),
            Density::Smooth(d) => d.mbar_prime(),
        }
    }

    pub fn as_piecewise(&self) -> Option<&PiecewiseMatrixDensity> {
        match self {
            Density::Piecewise(d) => Some(d),
            Density::Smooth(_) => None,
        }
    }
}

impl From<PiecewiseMatrixDensity> for Density {
    fn from(d: PiecewiseMatrixDensity) -> Self {
        Density::Piecewise(d)
    }
}

impl From<SmoothDensity> for Density {
    fn from(d: SmoothDensity) -> Self {
        Density::Smooth(d)
    }
}
