use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::density::Density;
use crate::error::{Error, Result};

/// Uniform node grid with trapezoid weights and cell-averaged densities.
#[derive(Debug, Clone, Serialize)]
pub struct SpatialGrid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub m: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub h_nodes: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub h_inv: Vec<DMatrix<f64>>,
}

impl SpatialGrid {
    pub fn new(density: &Density, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 cells, got {n}")));
        }
        let (a, b) = density.interval();
        let m = density.dim();
        let h = (b - a) / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|j| if j == n { b } else { a + j as f64 * h }).collect();
        let weights: Vec<f64> = (0..=n).map(|j| if j == 0 || j == n { 0.5 * h } else { h }).collect();
        let mut h_nodes = Vec::with_capacity(n + 1);
        let mut h_inv = Vec::with_capacity(n + 1);
        for (j, &z) in nodes.iter().enumerate() {
            let lo = if j == 0 { a } else { z - 0.5 * h };
            let hi = if j == n { b } else { z + 0.5 * h };
            let hj = density.cell_average(lo, hi)?;
            let inv = hj
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numerical(format!("cell-averaged density at node {j} is not positive definite")))?
                .inverse();
            h_nodes.push(hj);
            h_inv.push(inv);
        }
        Ok(Self { a, b, n, m, h, nodes, weights, h_nodes, h_inv })
    }

    pub fn state_dim(&self) -> usize {
        self.m * (self.n + 1)
    }

    pub fn node(&self, f: &DVector<f64>, j: usize) -> DVector<f64> {
        f.rows(j * self.m, self.m).into_owned()
    }

    /// x*Hx = f*H⁻¹f at node j.
    pub fn local_energy_density(&self, f: &[f64], j: usize) -> f64 {
        let hi = &self.h_inv[j];
        let mut acc = 0.0;
        for r in 0..self.m {
            for c in 0..self.m {
                acc += f[r] * hi[(r, c)] * f[c];
            }
        }
        acc
    }

    /// E = ½ Σ σ_j f_j* H_j⁻¹ f_j.
    pub fn energy(&self, f: &DVector<f64>) -> Result<f64> {
        if f.len() != self.state_dim() {
            return Err(Error::Dimension(format!("state length {} != {}", f.len(), self.state_dim())));
        }
        let s = f.as_slice();
        Ok(0.5
            * (0..=self.n)
                .map(|j| self.weights[j] * self.local_energy_density(&s[j * self.m..(j + 1) * self.m], j))
                .sum::<f64>())
    }

    /// Samples a function of ζ at the nodes, node-major.
    pub fn sample<F: Fn(f64) -> DVector<f64>>(&self, f: F) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim());
        for (j, &z) in self.nodes.iter().enumerate() {
            out.rows_mut(j * self.m, self.m).copy_from(&f(z));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::PiecewiseMatrixDensity;

    #[test]
    fn weights_and_averages() {
        let rho = PiecewiseMatrixDensity::scalar_piecewise_constant(vec![0.0, 0.55, 1.0], &[1.0, 3.0]).unwrap();
        let g = SpatialGrid::new(&rho.into(), 10).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // node 0.5 averages over [0.45, 0.55]: all in the first piece
        assert!((g.h_nodes[5][(0, 0)] - 1.0).abs() < 1e-14);
        // node 0.6 averages over [0.55, 0.65]
        assert!((g.h_nodes[6][(0, 0)] - 3.0).abs() < 1e-14);
        assert!((g.h_inv[10][(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn energy_of_constant_field() {
        let d = PiecewiseMatrixDensity::scalar_constant(0.0, 2.0, 4.0).unwrap();
        let g = SpatialGrid::new(&d.into(), 8).unwrap();
        let f = DVector::from_element(9, 2.0);
        // ½ ∫ 4 / 4 over length 2
        assert!((g.energy(&f).unwrap() - 1.0).abs() < 1e-15);
    }
}
