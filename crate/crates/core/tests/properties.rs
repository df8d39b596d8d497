//! Property tests over randomized parameter windows: the structural
//! invariants that must hold for any admissible (tau, eta, nu), not just the
//! pinned acceptance bundle.

use num_complex::Complex64;
use proptest::prelude::*;
use skly_core::adops::DifferenceOperator;
use skly_core::params::{c64, EllipticParams, Sign, TruncationPolicy, I};
use skly_core::specfun::{elliptic_gamma, r_delta, theta1};
use skly_core::value::{rel_residual, CVal};
use skly_core::verify::{run_check, CheckContext};
use std::f64::consts::PI;
use std::sync::Arc;

/// Admissible window: Im tau in [0.5, 1.8], Re a_- = 2 Im eta in [0.4, 1.8].
fn window()
-> impl Strategy<Value = (EllipticParams, TruncationPolicy)> {
    (
        -0.1..0.1f64,
        0.5..1.8f64,
        -0.2..0.2f64,
        0.2..0.9f64,
        -0.2..0.2f64,
        -0.1..0.1f64,
    )
        .prop_filter_map("valid lattice", |(tx, ty, ex, ey, nx, ny)| {
            let p = EllipticParams::from_lattice(c64(tx, ty), c64(ex, ey), c64(nx, ny)).ok()?;
            let pol = TruncationPolicy::for_params(&p);
            Some((p, pol))
        })
}

fn sample_z() -> impl Strategy<Value = Complex64> {
    (-0.45..0.45f64, -0.3..0.3f64).prop_map(|(x, y)| c64(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn theta_is_odd_and_antiperiodic((p, pol) in window(), z in sample_z()) {
        let t = theta1(z, &p, &pol).unwrap();
        let neg = theta1(-z, &p, &pol).unwrap();
        let per = theta1(z + 1.0, &p, &pol).unwrap();
        prop_assert!(rel_residual(neg, -t) < 1e-9);
        prop_assert!(rel_residual(per, -t) < 1e-9);
        // tau-direction multiplier: theta(z + tau) = -q^{-1} e^{-2 i pi z} theta(z).
        let q = (I * PI * p.tau).exp();
        let shifted = theta1(z + p.tau, &p, &pol).unwrap();
        prop_assert!(rel_residual(shifted, -t * (-2.0 * I * PI * z).exp() / q) < 1e-8);
    }

    #[test]
    fn r_delta_is_even_periodic_with_known_step((p, pol) in window(), z in sample_z()) {
        for delta in [Sign::Plus, Sign::Minus] {
            let r = r_delta(delta, z, &p, &pol).unwrap();
            prop_assert!(rel_residual(r_delta(delta, -z, &p, &pol).unwrap(), r) < 1e-10);
            prop_assert!(rel_residual(r_delta(delta, z + 1.0, &p, &pol).unwrap(), r) < 1e-10);
            let step = I * p.a_delta(delta) / 2.0;
            let up = r_delta(delta, z + step, &p, &pol).unwrap();
            let dn = r_delta(delta, z - step, &p, &pol).unwrap();
            prop_assert!(rel_residual(up, -(-2.0 * I * PI * z).exp() * dn) < 1e-8);
        }
    }

    #[test]
    fn gamma_reflection_and_modular_symmetry((p, pol) in window(), z in sample_z()) {
        let g = elliptic_gamma(z, &p, &pol).unwrap();
        let gm = elliptic_gamma(-z, &p, &pol).unwrap();
        if !g.flagged && !gm.flagged {
            prop_assert!(rel_residual(g.v * gm.v, c64(1.0, 0.0)) < 1e-9);
        }
        // Swapping a_+ and a_- leaves the double product unchanged.
        let swapped = EllipticParams::from_modular(p.a_minus, p.a_plus, p.nu).unwrap();
        let pol2 = TruncationPolicy::for_params(&swapped);
        let gs = elliptic_gamma(z, &swapped, &pol2).unwrap();
        if !g.flagged && !gs.flagged {
            prop_assert!(rel_residual(gs.v, g.v) < 1e-9);
        }
    }

    #[test]
    fn compose_rejects_step_mismatch(sx in 0.1..0.9f64, sy in 0.1..0.9f64) {
        prop_assume!((sx - sy).abs() > 1e-6);
        let one: Arc<dyn Fn(Complex64) -> CVal + Send + Sync> =
            Arc::new(|_| CVal::new(c64(1.0, 0.0)));
        let a = DifferenceOperator::new(c64(sx, 0.0)).with_term(1, one.clone());
        let b = DifferenceOperator::new(c64(sy, 0.0)).with_term(1, one);
        prop_assert!(a.compose(&b).is_err());
        prop_assert!(a.compose(&a).is_ok());
    }

    #[test]
    fn compose_adds_indices(j in -2i64..=2, k in -2i64..=2, c in 0.05..0.4f64) {
        let step = c64(0.17, 0.03);
        let coeff: Arc<dyn Fn(Complex64) -> CVal + Send + Sync> =
            Arc::new(|_| CVal::new(c64(1.0, 0.0)));
        let a = DifferenceOperator::new(step).with_term(j, coeff.clone());
        let b = DifferenceOperator::new(step).with_term(k, coeff);
        let ab = a.compose(&b).unwrap();
        prop_assert_eq!(ab.indices(), vec![j + k]);
        // On an exponential the composite acts as the (j+k)-fold shift.
        let f: Arc<dyn Fn(Complex64) -> CVal + Send + Sync> =
            Arc::new(move |z| CVal::new((c * z).exp()));
        let z = c64(0.21, 0.08);
        let want = (c * (z + (j + k) as f64 * step)).exp();
        prop_assert!(rel_residual(ab.apply_at(&*f, z).v, want) < 1e-12);
    }

    #[test]
    fn rel_residual_is_a_scaled_distance(ar in -2.0..2.0f64, ai in -2.0..2.0f64,
                                         br in -2.0..2.0f64, bi in -2.0..2.0f64) {
        let a = c64(ar, ai);
        let b = c64(br, bi);
        prop_assert_eq!(rel_residual(a, a), 0.0);
        prop_assert_eq!(rel_residual(a, b), rel_residual(b, a));
        prop_assert!(rel_residual(a, b) <= (a - b).norm() + 1e-15);
        prop_assert!(rel_residual(a, b) >= 0.0);
    }

    #[test]
    fn checks_replay_bit_identically(seed in any::<u64>()) {
        let p = EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.045, 0.21), c64(0.03, 0.0))
            .unwrap();
        let ctx = CheckContext::new(p).with_seed(seed);
        let a = run_check("specfun.theta_quasiperiodicity", &ctx).unwrap();
        let b = run_check("specfun.theta_quasiperiodicity", &ctx).unwrap();
        prop_assert_eq!(a.residual.to_bits(), b.residual.to_bits());
        prop_assert_eq!(a.pass, b.pass);
    }
}
