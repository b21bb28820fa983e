//! Gauss-Legendre rules and a bisecting adaptive integrator.

use std::f64::consts::PI;
use std::sync::LazyLock;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Affine image of the rule on [lo, hi], as (point, weight) pairs.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        self.mapped(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) static GAUSS_8: LazyLock<GaussRule> = LazyLock::new(|| GaussRule::new(8));
pub(crate) static GAUSS_16: LazyLock<GaussRule> = LazyLock::new(|| GaussRule::new(16));
pub(crate) static GAUSS_64: LazyLock<GaussRule> = LazyLock::new(|| GaussRule::new(64));

/// Adaptive integration: an interval is accepted when the 8- and 16-point
/// rules agree to `rel_tol` relative to the running total (with a tiny
/// absolute floor); otherwise it is bisected.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let coarse_total = GAUSS_16.integrate(lo, hi, &mut f);
    let scale = coarse_total.abs().max(1e-300);
    let mut total = 0.0;
    let mut stack = vec![(lo, hi, 0usize)];
    while let Some((l, h, depth)) = stack.pop() {
        let c = GAUSS_8.integrate(l, h, &mut f);
        let fine = GAUSS_16.integrate(l, h, &mut f);
        let width_share = (h - l) / (hi - lo);
        if (fine - c).abs() <= rel_tol * scale * width_share.max(1e-6)
            || (fine - c).abs() < 1e-15 * (h - l)
            || depth >= 40
        {
            total += fine;
        } else {
            let mid = 0.5 * (l + h);
            stack.push((l, mid, depth + 1));
            stack.push((mid, h, depth + 1));
        }
    }
    total
}
