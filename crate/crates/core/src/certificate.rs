//! Explicit exponential-decay certificate for the closed loop u = −μy.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conditions::{check_dissipative, check_impedance_passive, trace_domination};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::model::{close_loop, Endpoint, PortHamiltonianSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    /// κ = λ·min{1/(2μ), μ/2}.
    Analytic,
    /// κ = largest exact dissipation constant of the closed loop (extension).
    Sharpened,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub m_lower: f64,
    pub m_upper: f64,
    pub mbar_prime: f64,
    pub p1_inv_norm: f64,
    pub p1_inv_p0_norm: f64,
    pub length: f64,
    pub gamma0: f64,
    pub kappa0: f64,
    pub t0: f64,
    pub c0: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub kappa_source: KappaSource,
    pub mu0: f64,
    pub ln_mu0: f64,
    pub m0: f64,
    pub omega0: f64,
    pub endpoint: Endpoint,
    pub mu: f64,
    pub convention: String,
}

/// One constant of the chain together with its formula and inputs.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantRecord {
    pub name: &'static str,
    pub value: f64,
    pub formula: &'static str,
    pub inputs: Vec<(&'static str, f64)>,
}

impl DecayCertificate {
    pub fn constants(&self) -> Vec<ConstantRecord> {
        let rec = |name, value, formula, inputs: Vec<(&'static str, f64)>| ConstantRecord { name, value, formula, inputs };
        vec![
            rec("m_lower", self.m_lower, "inf_z lambda_min(H(z))", vec![]),
            rec("m_upper", self.m_upper, "sup_z lambda_max(H(z))", vec![]),
            rec("mbar_prime", self.mbar_prime, "||H(a)|| + Var(H) + ||H(b)||", vec![]),
            rec("gamma0", self.gamma0, "||P1^-1|| / m_lower", vec![("||P1^-1||", self.p1_inv_norm), ("m_lower", self.m_lower)]),
            rec(
                "kappa0",
                self.kappa0,
                "(2 ||P1^-1 P0|| m_upper + mbar_prime) / m_lower",
                vec![
                    ("||P1^-1 P0||", self.p1_inv_p0_norm),
                    ("m_upper", self.m_upper),
                    ("mbar_prime", self.mbar_prime),
                    ("m_lower", self.m_lower),
                ],
            ),
            rec("t0", self.t0, "2 gamma0 (b - a) + 1", vec![("gamma0", self.gamma0), ("b - a", self.length)]),
            rec(
                "C0",
                self.c0,
                "exp(kappa0 (b - a)) (b - a) / (2 m_lower)",
                vec![("kappa0", self.kappa0), ("b - a", self.length), ("m_lower", self.m_lower)],
            ),
            rec(
                "kappa",
                self.kappa,
                match self.kappa_source {
                    KappaSource::Analytic => "lambda min(1/(2 mu), mu/2)",
                    KappaSource::Sharpened => "sup{k : Re<x,Ax> <= -k |f(c)|^2} (exact, extension)",
                },
                vec![("lambda", self.lambda), ("mu", self.mu)],
            ),
            rec(
                "mu0",
                self.mu0,
                "sqrt(X / (1 + X)), X = C0 / (2 kappa)",
                vec![("C0", self.c0), ("kappa", self.kappa)],
            ),
            rec("M0", self.m0, "1 / mu0", vec![("mu0", self.mu0)]),
            rec("omega0", self.omega0, "ln(mu0) / t0", vec![("ln(mu0)", self.ln_mu0), ("t0", self.t0)]),
        ]
    }

    /// Largest relative deviation of any field from its defining formula.
    pub fn reevaluation_residual(&self) -> f64 {
        let rel = |got: f64, want: f64| ((got - want) / want.abs().max(f64::MIN_POSITIVE)).abs();
        let l = self.length;
        let x = self.c0 / (2.0 * self.kappa);
        [
            rel(self.gamma0, self.p1_inv_norm / self.m_lower),
            rel(self.kappa0, (2.0 * self.p1_inv_p0_norm * self.m_upper + self.mbar_prime) / self.m_lower),
            rel(self.t0, 2.0 * self.gamma0 * l + 1.0),
            rel(self.c0, (self.kappa0 * l).exp() * l / (2.0 * self.m_lower)),
            rel(self.mu0, (x / (1.0 + x)).sqrt()),
            rel(self.ln_mu0, -0.5 * (1.0 / x).ln_1p()),
            rel(self.m0, 1.0 / self.mu0),
            rel(self.omega0, self.ln_mu0 / self.t0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Certificate with the analytic κ = λ·min{1/(2μ), μ/2}.
pub fn decay_certificate(sys: &PortHamiltonianSystem, mu: f64) -> Result<DecayCertificate> {
    let (lambda, endpoint) = hypotheses(sys, mu)?;
    let kappa = lambda * (0.5 / mu).min(mu / 2.0);
    chain(sys, mu, lambda, kappa, endpoint, KappaSource::Analytic)
}

/// Same chain with κ replaced by the exact dissipation constant of the loop.
pub fn sharpened_certificate(sys: &PortHamiltonianSystem, mu: f64) -> Result<DecayCertificate> {
    let (lambda, _) = hypotheses(sys, mu)?;
    let d = check_dissipative(&close_loop(sys, mu)?)?;
    let endpoint = d.endpoint.ok_or(Error::NotDissipative)?;
    chain(sys, mu, lambda, d.kappa_best, endpoint, KappaSource::Sharpened)
}

fn hypotheses(sys: &PortHamiltonianSystem, mu: f64) -> Result<(f64, Endpoint)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("feedback gain must be positive, got {mu}")));
    }
    let pass = check_impedance_passive(sys)?;
    if !pass.passive {
        return Err(Error::NotPassive { residual: pass.residual });
    }
    let dom = trace_domination(sys)?;
    match dom.endpoint {
        Some(c) if dom.lambda > 0.0 => Ok((dom.lambda, c)),
        _ => Err(Error::NoTraceDomination),
    }
}

fn chain(
    sys: &PortHamiltonianSystem,
    mu: f64,
    lambda: f64,
    kappa: f64,
    endpoint: Endpoint,
    kappa_source: KappaSource,
) -> Result<DecayCertificate> {
    let (m_lower, m_upper) = sys.density.bounds()?;
    let mbar_prime = sys.density.mbar_prime();
    let p1_inv: DMatrix<f64> = sys
        .p1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("P1 is singular".into()))?;
    let p1_inv_norm = norm2(&p1_inv);
    let p1_inv_p0_norm = norm2(&(&p1_inv * &sys.p0));
    let length = sys.length();
    let gamma0 = p1_inv_norm / m_lower;
    let kappa0 = (2.0 * p1_inv_p0_norm * m_upper + mbar_prime) / m_lower;
    let t0 = 2.0 * gamma0 * length + 1.0;
    let c0 = (kappa0 * length).exp() * length / (2.0 * m_lower);
    let x = c0 / (2.0 * kappa);
    if !x.is_finite() {
        return Err(Error::Numerical(format!("C0 / (2 kappa) overflows (kappa0 (b - a) = {})", kappa0 * length)));
    }
    // ln μ₀ = −½ ln(1 + 1/X) keeps precision when X is large
    let ln_mu0 = -0.5 * (1.0 / x).ln_1p();
    let mu0 = ln_mu0.exp();
    Ok(DecayCertificate {
        m_lower,
        m_upper,
        mbar_prime,
        p1_inv_norm,
        p1_inv_p0_norm,
        length,
        gamma0,
        kappa0,
        t0,
        c0,
        lambda,
        kappa,
        kappa_source,
        mu0,
        ln_mu0,
        m0: 1.0 / mu0,
        omega0: ln_mu0 / t0,
        endpoint,
        mu,
        convention: sys.convention.clone(),
    })
}

/// Energy bound M₀²·e^{2ω₀t}·E₀.
pub fn energy_envelope(cert: &DecayCertificate, e0: f64, t: f64) -> Result<f64> {
    if t < 0.0 || e0 < 0.0 || t.is_nan() || e0.is_nan() {
        return Err(Error::Domain(format!("envelope needs t >= 0 and E0 >= 0, got t = {t}, E0 = {e0}")));
    }
    if e0 == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * cert.ln_mu0 * (t / cert.t0 - 1.0)).exp() * e0)
}
