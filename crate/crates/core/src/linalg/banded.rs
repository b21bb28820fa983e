use nalgebra::{DMatrix, DVector};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored row by row.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at (i, j). Panics when (i, j) is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku));
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += row[j + self.kl - i] * x[j];
            }
            y[i] = acc;
        }
    }

    /// Quadratic form x^T A y.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(y))
    }

    /// `alpha * self + beta * other`; both must share the band shape.
    pub fn combine(&self, alpha: f64, other: &BandMatrix, beta: f64) -> BandMatrix {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().zip(&other.data).map(|(a, b)| alpha * a + beta * b).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// LU factorization with partial pivoting restricted to the band.
/// After pivoting U has upper bandwidth `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku2: usize,
    // rows of U (and the working copy during elimination), width kl + ku2 + 1
    u: Vec<f64>,
    // multipliers: row k holds l_{k+1..=k+kl, k}
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn new(a: &BandMatrix) -> Option<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku2 = a.kl + a.ku;
        let w = kl + ku2 + 1;
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + a.ku).min(n.saturating_sub(1));
            for j in lo..=hi {
                u[idx(i, j)] = a.get(i, j);
            }
        }
        let mut l = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];
        let scale = a.data.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = u[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = u[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 * scale || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            let jmax = (k + ku2).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    // row p holds columns >= p - kl, which covers j >= k
                    let (a1, a2) = (idx(k, j), idx(p, j));
                    u.swap(a1, a2);
                }
            }
            let pivot = u[idx(k, k)];
            for i in k + 1..=last {
                let f = u[idx(i, k)] / pivot;
                l[k * kl + (i - k - 1)] = f;
                u[idx(i, k)] = 0.0;
                if f != 0.0 {
                    for j in k + 1..=jmax {
                        u[idx(i, j)] -= f * u[idx(k, j)];
                    }
                }
            }
        }
        Some(Self { n, kl, ku2, u, l, piv })
    }

    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let (n, kl, ku2) = (self.n, self.kl, self.ku2);
        let w = kl + ku2 + 1;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap_rows(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.l[k * kl + (i - k - 1)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let row = &self.u[i * w..(i + 1) * w];
            let mut acc = b[i];
            for j in i + 1..=(i + ku2).min(n - 1) {
                acc -= row[j + kl - i] * b[j];
            }
            b[i] = acc / row[kl];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, kl: usize, ku: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0;
                a.add(i, j, v * 0.1);
            }
            // weak diagonal forces pivoting
            a.add(i, i, if i % 3 == 0 { 1e-3 } else { 0.23 });
        }
        a
    }

    #[test]
    fn matches_dense_solve() {
        for (n, kl, ku) in [(1, 0, 0), (6, 1, 1), (20, 3, 2), (40, 5, 5), (17, 0, 4)] {
            let a = sample(n, kl, ku);
            let b = DVector::from_fn(n, |i, _| (i as f64).sin() + 0.5);
            let lu = BandLu::new(&a).unwrap_or_else(|| panic!("singular n={n} det={}", a.to_dense().determinant()));
            let x = lu.solve(&b);
            let r = a.to_dense() * &x - &b;
            assert!(r.amax() < 1e-10, "n={n} residual {}", r.amax());
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let a = sample(12, 2, 3);
        let x = DVector::from_fn(12, |i, _| i as f64 - 4.0);
        let d = a.to_dense() * &x - a.mul_vec(&x);
        assert!(d.amax() < 1e-13);
    }

    #[test]
    fn singular_is_reported() {
        let a = BandMatrix::zeros(4, 1, 1);
        assert!(BandLu::new(&a).is_none());
    }
}
