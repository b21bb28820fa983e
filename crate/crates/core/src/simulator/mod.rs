//! Summation-by-parts semi-discretization with boundary conditions imposed by
//! M-orthogonal projection, implicit-midpoint time stepping, spectra,
//! sideways energies and empirical decay rates.

mod fit;
mod generator;
mod grid;
mod integrate;
mod sideways;
mod spectrum;

pub use fit::{check_certificate, fit_decay_rate, fit_decay_rate_series, CertificateCheck, ENVELOPE_SLACK, MIN_FIT_SAMPLES};
pub use generator::{difference, discretize, DenseOperators, DiscreteGenerator, MIN_CELLS};
pub use grid::SpatialGrid;
pub use integrate::{simulate, StepOptions, Trajectory};
pub use sideways::{
    integrate_linear, relative_l1, sideways_derivative, sideways_energy, weighted_profile, Sign, SidewaysProfile,
    MIN_WINDOW_SAMPLES,
};
pub use spectrum::{congruent_operator, eigen_residual, spectrum, Spectrum, MAX_SPECTRUM_DIM};

use nalgebra::DVector;

/// Nodal field made of Gaussian bumps amp·exp(−½((ζ−c)/w)²) in the given
/// (0-based) components: `(component, amplitude, center, width)`.
pub fn gaussian_state(grid: &SpatialGrid, bumps: &[(usize, f64, f64, f64)]) -> DVector<f64> {
    grid.sample(|z| {
        let mut v = DVector::zeros(grid.m);
        for &(comp, amp, center, width) in bumps {
            let r = (z - center) / width;
            v[comp] += amp * (-0.5 * r * r).exp();
        }
        v
    })
}
