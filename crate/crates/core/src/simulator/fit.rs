use serde::Serialize;

use crate::certificate::{energy_envelope, DecayCertificate};
use crate::error::{Error, Result};

use super::integrate::Trajectory;

pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares slope of ½·ln E against t on [t_lo, t_hi]; −∞ when the
/// energy has vanished somewhere in the window.
pub fn fit_decay_rate_series(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(energies)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, e)| (*t, *e))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] contains {} samples, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if pts.iter().any(|&(_, e)| !(e > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| 0.5 * p.1.ln()).sum::<f64>() / n;
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, e)| {
        let dx = t - tm;
        (sxy + dx * (0.5 * e.ln() - ym), sxx + dx * dx)
    });
    Ok(sxy / sxx)
}

pub fn fit_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    fit_decay_rate_series(&traj.times, &traj.energies, window)
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateCheck {
    pub holds: bool,
    /// max_k E_k / envelope(t_k).
    pub worst_ratio: f64,
    pub worst_time: f64,
    pub violations: usize,
    /// (t, E, envelope) thinned to at most `MAX_MARGIN_ROWS` rows.
    pub margins: Vec<(f64, f64, f64)>,
}

pub const MAX_MARGIN_ROWS: usize = 2000;
pub const ENVELOPE_SLACK: f64 = 1e-6;

/// E_k ≤ M₀²e^{2ω₀t_k}E₀·(1 + 1e−6) at every step.
pub fn check_certificate(traj: &Trajectory, cert: &DecayCertificate) -> CertificateCheck {
    let e0 = traj.initial_energy();
    let stride = traj.times.len().div_ceil(MAX_MARGIN_ROWS).max(1);
    let mut out = CertificateCheck { holds: true, worst_ratio: 0.0, worst_time: 0.0, violations: 0, margins: Vec::new() };
    for (k, (&t, &e)) in traj.times.iter().zip(&traj.energies).enumerate() {
        let env = energy_envelope(cert, e0, t).unwrap_or(f64::NAN);
        if e > env * (1.0 + ENVELOPE_SLACK) {
            out.violations += 1;
            out.holds = false;
        }
        if env > 0.0 && e / env > out.worst_ratio {
            out.worst_ratio = e / env;
            out.worst_time = t;
        }
        if k % stride == 0 || k + 1 == traj.times.len() {
            out.margins.push((t, e, env));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let omega = -0.37;
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| (2.0 * omega * t).exp()).collect();
        let w = fit_decay_rate_series(&t, &e, (1.0, 9.0)).unwrap();
        assert!((w - omega).abs() < 1e-12);
    }

    #[test]
    fn extinction_and_short_windows() {
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let mut e = vec![1.0; 20];
        e[10] = 0.0;
        assert_eq!(fit_decay_rate_series(&t, &e, (0.0, 19.0)).unwrap(), f64::NEG_INFINITY);
        assert!(fit_decay_rate_series(&t, &e, (0.0, 5.0)).is_err());
        let w = fit_decay_rate_series(&t, &[2.0; 20], (0.0, 19.0)).unwrap();
        assert_eq!(w, 0.0);
    }
}
