//! Sideways energies F^±(ζ) = ∫ x*(s,ζ) H(ζ) x(s,ζ) ds over the shrinking
//! time windows, and the derivative identity they satisfy.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PortHamiltonianSystem;

use super::integrate::Trajectory;

/// Minimum number of stored snapshots inside every integration window.
pub const MIN_WINDOW_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    /// Window [γ₀(b−ζ), τ − γ₀(b−ζ)], anchored at b.
    Plus,
    /// Window [γ₀(ζ−a), τ − γ₀(ζ−a)], anchored at a.
    Minus,
}

#[derive(Debug, Clone, Serialize)]
pub struct SidewaysProfile {
    pub sign: Sign,
    pub gamma0: f64,
    pub tau: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl SidewaysProfile {
    /// Value at the anchoring endpoint (b for F⁺, a for F⁻).
    pub fn anchor(&self) -> f64 {
        match self.sign {
            Sign::Plus => *self.values.last().unwrap(),
            Sign::Minus => self.values[0],
        }
    }

    /// Pointwise bound anchor·e^{κ₀(b−a)}.
    pub fn bound(&self, kappa0: f64) -> f64 {
        let len = self.nodes.last().unwrap() - self.nodes[0];
        self.anchor() * (kappa0 * len).exp()
    }

    /// Central differences at interior nodes (one-sided at the ends).
    pub fn finite_difference(&self) -> Vec<f64> {
        let n = self.values.len() - 1;
        (0..=n)
            .map(|j| {
                let (l, r) = if j == 0 {
                    (0, 1)
                } else if j == n {
                    (n - 1, n)
                } else {
                    (j - 1, j + 1)
                };
                (self.values[r] - self.values[l]) / (self.nodes[r] - self.nodes[l])
            })
            .collect()
    }
}

/// Window [r(ζ), t(ζ)] and the slopes r′, t′.
fn window(sign: Sign, gamma0: f64, tau: f64, a: f64, b: f64, z: f64) -> (f64, f64, f64, f64) {
    match sign {
        Sign::Plus => (gamma0 * (b - z), tau - gamma0 * (b - z), -gamma0, gamma0),
        Sign::Minus => (gamma0 * (z - a), tau - gamma0 * (z - a), gamma0, -gamma0),
    }
}

fn check_inputs(traj: &Trajectory, gamma0: f64, tau: f64) -> Result<()> {
    let (a, b) = (traj.nodes[0], *traj.nodes.last().unwrap());
    if !(gamma0 > 0.0) || !(tau > 2.0 * gamma0 * (b - a)) {
        return Err(Error::Domain(format!("need tau > 2 gamma0 (b - a) = {}, got tau = {tau}", 2.0 * gamma0 * (b - a))));
    }
    let last = traj.states.last().map(|s| s.0).unwrap_or(0.0);
    if last < tau * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("stored states end at t = {last}, before tau = {tau}")));
    }
    let inner = traj.states.iter().filter(|(t, _)| *t >= gamma0 * (b - a) && *t <= tau - gamma0 * (b - a)).count();
    if inner < MIN_WINDOW_SAMPLES {
        return Err(Error::Domain(format!(
            "shortest window holds {inner} stored states, need {MIN_WINDOW_SAMPLES}; store states more often"
        )));
    }
    Ok(())
}

/// Exact integral over [lo, hi] of the piecewise-linear interpolant of (t, v).
pub fn integrate_linear(t: &[f64], v: &[f64], lo: f64, hi: f64) -> f64 {
    let at = |s: f64| interpolate_at(t, v, s);
    let mut acc = 0.0;
    let mut left = lo;
    let mut fl = at(lo);
    let start = t.partition_point(|&x| x <= lo);
    for k in start..t.len() {
        if t[k] >= hi {
            break;
        }
        acc += 0.5 * (fl + v[k]) * (t[k] - left);
        left = t[k];
        fl = v[k];
    }
    acc + 0.5 * (fl + at(hi)) * (hi - left)
}

fn quadratic(f: &[f64], k: &DMatrix<f64>) -> f64 {
    let m = f.len();
    let mut acc = 0.0;
    for r in 0..m {
        for c in 0..m {
            acc += f[r] * k[(r, c)] * f[c];
        }
    }
    acc
}

/// Samples of s ↦ f*(s, ζ_j)·K·f(s, ζ_j) over the stored snapshots.
fn series(traj: &Trajectory, j: usize, k: &DMatrix<f64>) -> Vec<f64> {
    let m = traj.m;
    traj.states
        .iter()
        .map(|(_, f)| quadratic(&f.as_slice()[j * m..(j + 1) * m], k))
        .collect()
}

pub fn sideways_energy(traj: &Trajectory, gamma0: f64, tau: f64, sign: Sign) -> Result<SidewaysProfile> {
    check_inputs(traj, gamma0, tau)?;
    let (a, b) = (traj.nodes[0], *traj.nodes.last().unwrap());
    let times: Vec<f64> = traj.states.iter().map(|s| s.0).collect();
    let values = traj
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let (lo, hi, _, _) = window(sign, gamma0, tau, a, b, z);
            integrate_linear(&times, &series(traj, j, &traj.h_inv[j]), lo, hi)
        })
        .collect();
    Ok(SidewaysProfile { sign, gamma0, tau, nodes: traj.nodes.clone(), values })
}

/// dF/dζ from the trajectory: x*(t′H + P₁⁻¹)x at s = t(ζ) minus the same at
/// s = r(ζ) with r′, minus ∫ x*((P₁⁻¹P₀H)ᵀ + H′ + P₁⁻¹P₀H)x ds.
pub fn sideways_derivative(
    traj: &Trajectory,
    sys: &PortHamiltonianSystem,
    gamma0: f64,
    tau: f64,
    sign: Sign,
) -> Result<Vec<f64>> {
    check_inputs(traj, gamma0, tau)?;
    let p1_inv = sys
        .p1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("P1 is singular".into()))?;
    let (a, b) = (traj.nodes[0], *traj.nodes.last().unwrap());
    let times: Vec<f64> = traj.states.iter().map(|s| s.0).collect();
    let value_at = |vals: &[f64], s: f64| interpolate_at(&times, vals, s);
    let out = traj
        .nodes
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let (lo, hi, dlo, dhi) = window(sign, gamma0, tau, a, b, z);
            let h = &traj.h_nodes[j];
            let hinv = &traj.h_inv[j];
            // forms in x = H⁻¹f expressed on f
            let in_f = |k: DMatrix<f64>| hinv * k * hinv;
            let top = in_f(h * dhi + &p1_inv);
            let bottom = in_f(h * dlo + &p1_inv);
            let c = &p1_inv * &sys.p0 * h;
            let inner = in_f(c.transpose() + sys.density.derivative(z) + c);
            value_at(&series(traj, j, &top), hi) - value_at(&series(traj, j, &bottom), lo)
                - integrate_linear(&times, &series(traj, j, &inner), lo, hi)
        })
        .collect();
    Ok(out)
}

fn interpolate_at(t: &[f64], v: &[f64], s: f64) -> f64 {
    let i = t.partition_point(|&x| x < s);
    if i == 0 {
        v[0]
    } else if i >= t.len() {
        *v.last().unwrap()
    } else {
        let w = (s - t[i - 1]) / (t[i] - t[i - 1]);
        v[i - 1] * (1.0 - w) + v[i] * w
    }
}

/// Relative L¹ distance Σ|a − b| / Σ|b| over the interior nodes.
pub fn relative_l1(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (num, den) = (1..n - 1).fold((0.0, 0.0), |(p, q), j| (p + (a[j] - b[j]).abs(), q + b[j].abs()));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// F⁺(ζ)·exp(−∫_ζ^b κ̂) (or F⁻(ζ)·exp(−∫_a^ζ κ̂)) with κ̂ sampled at the nodes
/// and integrated by the trapezoid rule.
pub fn weighted_profile(profile: &SidewaysProfile, kappa_hat: &[f64]) -> Vec<f64> {
    let n = profile.nodes.len() - 1;
    let mut cum = vec![0.0; n + 1];
    for j in 1..=n {
        cum[j] = cum[j - 1] + 0.5 * (kappa_hat[j - 1] + kappa_hat[j]) * (profile.nodes[j] - profile.nodes[j - 1]);
    }
    (0..=n)
        .map(|j| {
            let exponent = match profile.sign {
                Sign::Plus => cum[n] - cum[j],
                Sign::Minus => cum[j],
            };
            profile.values[j] * (-exponent).exp()
        })
        .collect()
}
