//! Energy-exact semi-discretization.
//!
//! The nodal field f is written as f = Z·c, where c holds m kernel coordinates
//! of the boundary pair (f_n; f_0) ∈ ker(W) followed by the interior nodes.
//! Interior nodes are stored in the folded order 1, n−1, 2, n−2, … so that
//! ZᵀMZ and ZᵀSZ have block bandwidth two. Galerkin projection with the
//! energy weight M is exactly the M-orthogonal projection onto ker(W).

use nalgebra::{DMatrix, DVector};

use crate::conditions::{dependent_rows, kernel_basis};
use crate::error::{Error, Result};
use crate::linalg::{BandLu, BandMatrix};
use crate::model::{boundary_form, ClosedLoopSystem};

use super::grid::SpatialGrid;

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    pub grid: SpatialGrid,
    pub m: usize,
    pub n: usize,
    pub p1: DMatrix<f64>,
    pub p0: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub wb2: DMatrix<f64>,
    pub wc: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub mu: Option<f64>,
    /// 2m×m orthonormal basis of ker(W); rows 0..m give f_n, rows m..2m give f_0.
    pub kernel: DMatrix<f64>,
    /// Block position of every interior node (index 0 is the boundary block).
    block_of_node: Vec<usize>,
    node_of_block: Vec<usize>,
    /// ZᵀMZ.
    pub gram: BandMatrix,
    /// ZᵀSZ with S = (σD)⊗P1 + Σ⊗P0.
    pub stiffness: BandMatrix,
    gram_lu: BandLu,
}

/// Rows of σD for the 2-1 summation-by-parts first derivative.
fn sbp_row(n: usize, j: usize) -> Vec<(usize, f64)> {
    match j {
        0 => vec![(0, -0.5), (1, 0.5)],
        _ if j == n => vec![(n - 1, -0.5), (n, 0.5)],
        _ => vec![(j - 1, -0.5), (j + 1, 0.5)],
    }
}

/// Applies the SBP difference operator D to a node-major field.
pub fn difference(grid: &SpatialGrid, f: &DVector<f64>) -> DVector<f64> {
    let (m, n) = (grid.m, grid.n);
    let mut out = DVector::zeros(f.len());
    for j in 0..=n {
        for (k, c) in sbp_row(n, j) {
            for r in 0..m {
                out[j * m + r] += c * f[k * m + r] / grid.weights[j];
            }
        }
    }
    out
}

pub fn discretize(cl: &ClosedLoopSystem, n: usize) -> Result<DiscreteGenerator> {
    if n < MIN_CELLS {
        return Err(Error::Domain(format!("need at least {MIN_CELLS} cells, got {n}")));
    }
    if !cl.full_rank() {
        return Err(Error::RankDeficient { rows: dependent_rows(&cl.w) });
    }
    let sys = &cl.base;
    let m = sys.m;
    let grid = SpatialGrid::new(&sys.density, n)?;
    let kernel = kernel_basis(&cl.w)?;
    debug_assert_eq!(kernel.ncols(), m);

    let mut node_of_block = vec![usize::MAX];
    let (mut lo, mut hi) = (1usize, n - 1);
    while lo <= hi {
        node_of_block.push(lo);
        if hi != lo {
            node_of_block.push(hi);
        }
        lo += 1;
        hi -= 1;
    }
    let mut block_of_node = vec![0usize; n + 1];
    for (blk, &node) in node_of_block.iter().enumerate().skip(1) {
        block_of_node[node] = blk;
    }

    let dim = m * n;
    let bw = 3 * m - 1;
    let mut gram = BandMatrix::zeros(dim, bw, bw);
    let mut stiffness = BandMatrix::zeros(dim, bw, bw);
    let nb = kernel.rows(0, m).into_owned();
    let na = kernel.rows(m, m).into_owned();
    let ident = DMatrix::identity(m, m);
    let zmap = |j: usize| -> (usize, &DMatrix<f64>) {
        if j == 0 {
            (0, &na)
        } else if j == n {
            (0, &nb)
        } else {
            (block_of_node[j], &ident)
        }
    };
    let add_block = |target: &mut BandMatrix, bi: usize, bj: usize, blk: &DMatrix<f64>| {
        for r in 0..m {
            for c in 0..m {
                let v = blk[(r, c)];
                if v != 0.0 {
                    target.add(bi * m + r, bj * m + c, v);
                }
            }
        }
    };
    for i in 0..=n {
        let (bi, zi) = zmap(i);
        let mi = &grid.h_inv[i] * grid.weights[i];
        add_block(&mut gram, bi, bi, &(zi.transpose() * &mi * zi));
        add_block(&mut stiffness, bi, bi, &(zi.transpose() * (&sys.p0 * grid.weights[i]) * zi));
        for (j, c) in sbp_row(n, i) {
            let (bj, zj) = zmap(j);
            add_block(&mut stiffness, bi, bj, &(zi.transpose() * (&sys.p1 * c) * zj));
        }
    }
    let gram_lu = BandLu::new(&gram).ok_or_else(|| Error::Numerical("energy Gram matrix is singular".into()))?;
    Ok(DiscreteGenerator {
        grid,
        m,
        n,
        p1: sys.p1.clone(),
        p0: sys.p0.clone(),
        w: cl.w.clone(),
        wb2: sys.wb2.clone(),
        wc: sys.wc.clone(),
        q: boundary_form(&sys.p1),
        mu: cl.mu,
        kernel,
        block_of_node,
        node_of_block,
        gram,
        stiffness,
        gram_lu,
    })
}

impl DiscreteGenerator {
    pub fn state_dim(&self) -> usize {
        self.grid.state_dim()
    }

    pub fn reduced_dim(&self) -> usize {
        self.m * self.n
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// f = Z·c.
    pub fn expand(&self, c: &DVector<f64>) -> DVector<f64> {
        let (m, n) = (self.m, self.n);
        let mut f = DVector::zeros(self.state_dim());
        let c0 = c.rows(0, m);
        f.rows_mut(n * m, m).copy_from(&(self.kernel.rows(0, m) * c0));
        f.rows_mut(0, m).copy_from(&(self.kernel.rows(m, m) * c0));
        for blk in 1..=n - 1 {
            let node = self.node_of_block[blk];
            f.rows_mut(node * m, m).copy_from(&c.rows(blk * m, m));
        }
        f
    }

    /// Zᵀ·y for a nodal vector y.
    pub fn restrict(&self, y: &DVector<f64>) -> DVector<f64> {
        let (m, n) = (self.m, self.n);
        let mut c = DVector::zeros(self.reduced_dim());
        let c0 = self.kernel.rows(0, m).transpose() * y.rows(n * m, m)
            + self.kernel.rows(m, m).transpose() * y.rows(0, m);
        c.rows_mut(0, m).copy_from(&c0);
        for j in 1..n {
            let blk = self.block_of_node[j];
            c.rows_mut(blk * m, m).copy_from(&y.rows(j * m, m));
        }
        c
    }

    /// M·f.
    pub fn apply_weight(&self, f: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        let mut out = DVector::zeros(f.len());
        for j in 0..=self.n {
            let v = &self.grid.h_inv[j] * f.rows(j * m, m) * self.grid.weights[j];
            out.rows_mut(j * m, m).copy_from(&v);
        }
        out
    }

    /// Reduced coordinates of the M-orthogonal projection of f onto ker(W).
    pub fn project(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        if f.len() != self.state_dim() {
            return Err(Error::Dimension(format!("state length {} != {}", f.len(), self.state_dim())));
        }
        Ok(self.gram_lu.solve(&self.restrict(&self.apply_weight(f))))
    }

    pub fn reduced_energy(&self, c: &DVector<f64>) -> f64 {
        0.5 * self.gram.bilinear(c, c)
    }

    /// Boundary trace v = (f_n; f_0) of a reduced state.
    pub fn trace(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.kernel * c.rows(0, self.m)
    }

    /// L f = H_j (P1 (Df)_j + P0 f_j), the unconstrained nodal operator.
    pub fn apply_unconstrained(&self, f: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        let df = difference(&self.grid, f);
        let mut out = DVector::zeros(f.len());
        for j in 0..=self.n {
            let v = &self.grid.h_nodes[j] * (&self.p1 * df.rows(j * m, m) + &self.p0 * f.rows(j * m, m));
            out.rows_mut(j * m, m).copy_from(&v);
        }
        out
    }

    /// Dense matrices for verification: Z, M, L, the projector P and A_h = P·L.
    pub fn dense_operators(&self) -> DenseOperators {
        let (nd, rd) = (self.state_dim(), self.reduced_dim());
        let mut z = DMatrix::zeros(nd, rd);
        for k in 0..rd {
            let mut e = DVector::zeros(rd);
            e[k] = 1.0;
            z.set_column(k, &self.expand(&e));
        }
        let mut weight = DMatrix::zeros(nd, nd);
        let mut l = DMatrix::zeros(nd, nd);
        for k in 0..nd {
            let mut e = DVector::zeros(nd);
            e[k] = 1.0;
            weight.set_column(k, &self.apply_weight(&e));
            l.set_column(k, &self.apply_unconstrained(&e));
        }
        let g = self.gram.to_dense();
        let ginv = g.clone().try_inverse().expect("Gram matrix is invertible");
        let projector = &z * ginv * z.transpose() * &weight;
        let generator = &projector * &l;
        DenseOperators { z, weight, l, projector, generator }
    }
}

pub struct DenseOperators {
    pub z: DMatrix<f64>,
    pub weight: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub projector: DMatrix<f64>,
    pub generator: DMatrix<f64>,
}
