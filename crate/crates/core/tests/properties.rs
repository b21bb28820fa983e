use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use phs_core::certificate::decay_certificate;
use phs_core::conditions::{check_dissipative, check_impedance_passive, kernel_basis, trace_domination};
use phs_core::density::{mollify, PiecewiseMatrixDensity};
use phs_core::model::{boundary_form, close_loop, energy, string_model, timoshenko_model, PortHamiltonianSystem};
use phs_core::quadrature::GaussRule;

fn matrix(m: usize, n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, m * n).prop_map(move |v| DMatrix::from_row_slice(m, n, &v))
}

fn spd(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (matrix(m, m), 0.1..1.0f64).prop_map(move |(a, s)| &a * a.transpose() + DMatrix::identity(m, m) * s)
}

/// Symmetric with all eigenvalues of modulus ≥ 0.2.
fn symmetric_invertible(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (matrix(m, m), prop::collection::vec(prop_oneof![-2.0..-0.2f64, 0.2..2.0f64], m)).prop_map(move |(a, d)| {
        let q = a.qr().q();
        &q * DMatrix::from_diagonal(&DVector::from_vec(d)) * q.transpose()
    })
}

fn scalar_steps() -> impl Strategy<Value = PiecewiseMatrixDensity> {
    (prop::collection::vec(0.05..0.95f64, 0..4), prop::collection::vec(0.3..3.0f64, 5)).prop_map(|(mut cuts, vals)| {
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 0.01);
        let mut bp = vec![0.0];
        bp.extend(cuts);
        bp.push(1.0);
        let n = bp.len() - 1;
        PiecewiseMatrixDensity::scalar_piecewise_constant(bp, &vals[..n]).unwrap()
    })
}

/// Impedance-passive plant built from boundary flow/effort variables.
///
/// With f∂ = (P1 f(b) − P1 f(a))/√2 and e∂ = (f(b) + f(a))/√2 one has
/// v*Qv = ½ f∂·e∂. Inputs u = A f∂/√2 and outputs y = (A⁻ᵀ e∂ + D A f∂)/√2
/// give u·y = v*Qv + u·Du, so the plant is passive for D ⪰ 0. The first
/// m − k inputs are set to zero by W_B1.
fn passive_system(m: usize, k: usize, p1: DMatrix<f64>, a: DMatrix<f64>, d: DMatrix<f64>) -> Option<PortHamiltonianSystem> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a_inv_t = a.clone().try_inverse()?.transpose();
    let mut flow = DMatrix::zeros(m, 2 * m);
    flow.view_mut((0, 0), (m, m)).copy_from(&(&p1 * s));
    flow.view_mut((0, m), (m, m)).copy_from(&(&p1 * -s));
    let mut effort = DMatrix::zeros(m, 2 * m);
    effort.view_mut((0, 0), (m, m)).copy_from(&(DMatrix::identity(m, m) * s));
    effort.view_mut((0, m), (m, m)).copy_from(&(DMatrix::identity(m, m) * s));
    let u = &a * &flow * s;
    let y = (&a_inv_t * &effort + &d * &a * &flow) * s;
    let density = PiecewiseMatrixDensity::constant(0.0, 1.0, DMatrix::identity(m, m)).unwrap();
    PortHamiltonianSystem::new(
        k,
        p1,
        DMatrix::zeros(m, m),
        density.into(),
        u.rows(0, m - k).into_owned(),
        u.rows(m - k, k).into_owned(),
        y.rows(m - k, k).into_owned(),
    )
    .ok()
}

fn passive_case() -> impl Strategy<Value = (usize, usize, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    (2usize..=3).prop_flat_map(|m| {
        (Just(m), 1..=m, symmetric_invertible(m), spd(m), matrix(m, m))
            .prop_map(|(m, k, p1, a, b)| (m, k, p1, a, &b * b.transpose() * 0.5))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_average_splits(d in scalar_steps(), l in 0.0..0.4f64, mid in 0.4..0.6f64, h in 0.6..1.0f64) {
        let whole = d.cell_average(l, h).unwrap()[(0, 0)] * (h - l);
        let parts = d.cell_average(l, mid).unwrap()[(0, 0)] * (mid - l) + d.cell_average(mid, h).unwrap()[(0, 0)] * (h - mid);
        prop_assert!((whole - parts).abs() <= 1e-13);
    }

    #[test]
    fn monotone_variation_is_endpoint_difference(mut vals in prop::collection::vec(0.3..3.0f64, 4)) {
        vals.sort_by(f64::total_cmp);
        let d = PiecewiseMatrixDensity::scalar_piecewise_constant(vec![0.0, 0.2, 0.5, 0.7, 1.0], &vals).unwrap();
        prop_assert!((d.total_variation() - (vals[3] - vals[0])).abs() <= 1e-15);
    }

    #[test]
    fn energy_is_positive(h in spd(2), f in prop::collection::vec(-1.0..1.0f64, 22), n in 2usize..10) {
        prop_assume!(f.iter().any(|x| x.abs() > 1e-3));
        let d = PiecewiseMatrixDensity::constant(0.0, 1.0, h).unwrap();
        let e = PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, 1.0).unwrap();
        let sys = string_model(&e, &e).unwrap().with_density(d.into()).unwrap();
        let f = DVector::from_vec(f[..2 * (n + 1)].to_vec());
        prop_assert!(energy(&sys, &f).unwrap() > 0.0);
    }

    #[test]
    fn kernel_basis_is_orthonormal(w in (1usize..4, 4usize..7).prop_flat_map(|(r, c)| matrix(r, c))) {
        let n = kernel_basis(&w).unwrap();
        prop_assert_eq!(n.ncols(), w.ncols() - w.nrows());
        prop_assert!((n.transpose() * &n - DMatrix::identity(n.ncols(), n.ncols())).amax() <= 1e-12);
        prop_assert!((&w * &n).amax() <= 1e-12);
    }

    #[test]
    fn passivity_is_invariant_under_reciprocal_scaling(
        rho in 0.2..5.0f64, tension in 0.2..5.0f64, e in -8i32..8,
    ) {
        let t = 2f64.powi(e);
        let mut sys = string_model(
            &PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, rho).unwrap(),
            &PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, tension).unwrap(),
        ).unwrap();
        let base = check_impedance_passive(&sys).unwrap();
        sys.wb2 *= t;
        sys.wc /= t;
        let scaled = check_impedance_passive(&sys).unwrap();
        prop_assert_eq!(base.residual, scaled.residual);
        prop_assert_eq!(base.preserving, scaled.preserving);
        prop_assert!(trace_domination(&sys).unwrap().lambda > 0.0);
    }

    #[test]
    fn certificate_reevaluates(rho in 0.2..5.0f64, tension in 0.2..5.0f64, mu in 0.05..20.0f64) {
        let sys = string_model(
            &PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, rho).unwrap(),
            &PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, tension).unwrap(),
        ).unwrap();
        let c = decay_certificate(&sys, mu).unwrap();
        prop_assert!(c.reevaluation_residual() <= 1e-14);
        prop_assert!(c.ln_mu0 < 0.0 && c.omega0 < 0.0 && c.mu0 <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// ½∫(P1 f′ + P0 f)·f over [0, 1] equals v*Qv for polynomial f.
    #[test]
    fn boundary_form_is_exact(
        (m, p1, p0, coeffs) in (1usize..=3).prop_flat_map(|m| (
            Just(m),
            symmetric_invertible(m),
            matrix(m, m),
            prop::collection::vec(-1.0..1.0f64, m * 5),
        )),
    ) {
        let p0 = &p0 - p0.transpose();
        let f = |z: f64| DVector::from_fn(m, |i, _| (0..5).rev().fold(0.0, |acc, d| acc * z + coeffs[i * 5 + d]));
        let df = |z: f64| DVector::from_fn(m, |i, _| (1..5).rev().fold(0.0, |acc, d| acc * z + d as f64 * coeffs[i * 5 + d]));
        let rule = GaussRule::new(16);
        let lhs = 0.5 * rule.integrate(0.0, 1.0, |z| (&p1 * df(z) + &p0 * f(z)).dot(&f(z)));
        let v = PortHamiltonianSystem::trace(&f(1.0), &f(0.0));
        let rhs = (v.transpose() * boundary_form(&p1) * &v)[(0, 0)];
        prop_assert!((lhs - rhs).abs() <= 1e-9, "{} vs {}", lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn random_passive_systems_admit_the_feedback_rate((m, k, p1, a, d) in passive_case()) {
        let sys = passive_system(m, k, p1, a, d);
        prop_assume!(sys.is_some());
        let sys = sys.unwrap();
        let p = check_impedance_passive(&sys).unwrap();
        prop_assert!(p.passive, "residual {}", p.residual);
        let lam = trace_domination(&sys).unwrap().lambda;
        if lam > 1e-9 {
            for mu in [0.1, 1.0, 10.0] {
                let r = check_dissipative(&close_loop(&sys, mu).unwrap()).unwrap();
                prop_assert!(r.dissipative);
                prop_assert!(r.kappa_best >= lam * (0.5 / mu).min(0.5 * mu) - 1e-10);
            }
        }
    }

    #[test]
    fn mollification_keeps_bounds_and_variation(d in scalar_steps(), eps in 0.02..0.2f64) {
        let s = mollify(&d, eps).unwrap();
        let (lo, hi) = d.bounds().unwrap();
        for v in s.sample_values() {
            prop_assert!(v[(0, 0)] >= lo && v[(0, 0)] <= hi, "{} not in [{}, {}]", v[(0, 0)], lo, hi);
        }
        prop_assert!(s.total_variation() <= d.total_variation() + 1e-8);
    }
}

#[test]
fn pointwise_convergence_at_isolated_continuity_points() {
    let d = PiecewiseMatrixDensity::scalar_piecewise_constant(vec![0.0, 0.3, 0.62, 1.0], &[1.0, 3.0, 0.5]).unwrap();
    let probes = [0.05, 0.25, 0.28, 0.32, 0.35, 0.45, 0.6, 0.64, 0.7, 0.95];
    let mut prev = vec![f64::INFINITY; probes.len()];
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let s = mollify(&d, eps).unwrap();
        for (k, &z) in probes.iter().enumerate() {
            let e = (s.evaluate(z).unwrap()[(0, 0)] - d.value(z)[(0, 0)]).abs();
            assert!(e <= prev[k] + 1e-14, "z = {z}, eps = {eps}");
            prev[k] = e;
        }
    }
    assert!(prev.iter().all(|&e| e < 1e-8));
}

#[test]
fn closed_loops_have_full_rank() {
    let one = PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, 1.0).unwrap();
    for sys in [string_model(&one, &one).unwrap(), timoshenko_model(&one, &one, &one, &one).unwrap()] {
        assert!(sys.validate().all_passed());
        for mu in [0.1, 0.5, 1.0, 2.0, 10.0] {
            assert_eq!(close_loop(&sys, mu).unwrap().rank, sys.m);
        }
    }
}

#[test]
fn certified_rate_peaks_at_unit_gain() {
    let one = PiecewiseMatrixDensity::scalar_constant(0.0, 1.0, 1.0).unwrap();
    let sys = string_model(&one, &one).unwrap();
    let rates: Vec<f64> = (-6..=6).map(|i| decay_certificate(&sys, 2f64.powi(i)).unwrap().omega0.abs()).collect();
    let best = rates.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(best, 6);
    for w in rates[..=6].windows(2) {
        assert!(w[0] < w[1]);
    }
    for w in rates[6..].windows(2) {
        assert!(w[0] > w[1]);
    }
}
