use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

use super::generator::DiscreteGenerator;

pub const MAX_SPECTRUM_DIM: usize = 5000;

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
    /// Largest eigenvalue of the M-symmetric part on range(P).
    pub hermitian_max: f64,
}

impl Spectrum {
    /// Eigenvalue with imaginary part closest to `im` (ties: larger real part).
    pub fn nearest_imag(&self, im: f64) -> Option<Complex64> {
        self.eigenvalues.iter().copied().min_by(|a, b| {
            (a.im - im)
                .abs()
                .total_cmp(&(b.im - im).abs())
                .then(b.re.total_cmp(&a.re))
        })
    }

    pub fn nearest(&self, z: Complex64) -> Option<Complex64> {
        self.eigenvalues.iter().copied().min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
    }
}

fn ser_complex<S: serde::Serializer>(z: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(z.len()))?;
    for v in z {
        seq.serialize_element(&[v.re, v.im])?;
    }
    seq.end()
}

/// Eigenvalues of A_h on range(P), via the congruent matrix L⁻¹·B·L⁻ᵀ with
/// G = LLᵀ (ZᵀMZ·ċ = ZᵀSZ·c has the same spectrum).
pub fn spectrum(gen: &DiscreteGenerator) -> Result<Spectrum> {
    let dim = gen.reduced_dim();
    if dim > MAX_SPECTRUM_DIM {
        return Err(Error::Domain(format!("spectrum dimension {dim} exceeds the dense cap {MAX_SPECTRUM_DIM}")));
    }
    let k = congruent_operator(gen)?;
    let sym = (&k + k.transpose()) * 0.5;
    let hermitian_max = sym.symmetric_eigenvalues().max();
    let mut eigenvalues: Vec<Complex64> = k.complex_eigenvalues().iter().copied().collect();
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("eigenvalue iteration did not converge".into()));
    }
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(Spectrum { eigenvalues, abscissa, hermitian_max })
}

/// K = L⁻¹·B·L⁻ᵀ, similar to A_h restricted to range(P).
pub fn congruent_operator(gen: &DiscreteGenerator) -> Result<DMatrix<f64>> {
    let g = gen.gram.to_dense();
    let b = gen.stiffness.to_dense();
    let chol = g.cholesky().ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&b)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok(y.transpose())
}

/// Sanity helper: residual ‖A_h f − λ f‖ for a reduced eigenpair in M-norm.
pub fn eigen_residual(gen: &DiscreteGenerator, lambda: f64, c: &DVector<f64>) -> f64 {
    let bc = gen.stiffness.mul_vec(c);
    let gc = gen.gram.mul_vec(c);
    (bc - gc * lambda).norm()
}
