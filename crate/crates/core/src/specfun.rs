//! The elliptic building blocks: Jacobi theta functions, the q-Pochhammer
//! constant G, the elliptic gamma function, and the R_delta product
//! functions.
//!
//! All series and products are truncated under a [`TruncationPolicy`];
//! everything here is a pure function of immutable inputs and safe to call
//! concurrently.

use crate::error::{Error, Result};
use crate::params::{c64, EllipticParams, Sign, TruncationPolicy, I};
use crate::value::CVal;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Diagnostics for a truncated evaluation: how many terms/factors were
/// used and the magnitude of the first omitted contribution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Truncation {
    pub terms_used: usize,
    pub est_tail: f64,
}

fn check_lattice(params: &EllipticParams, policy: &TruncationPolicy) -> Result<()> {
    if params.tau.im <= policy.min_im_tau {
        return Err(Error::InvalidParams(format!(
            "Im tau = {} below the rejection threshold {}",
            params.tau.im, policy.min_im_tau
        )));
    }
    Ok(())
}

/// The odd Jacobi theta function `theta_1(z | tau)`, summed as
/// `2 sum_{n>=1} (-1)^{n-1} q^{(n-1/2)^2} sin((2n-1) pi z)`.
pub fn theta1(z: Complex64, params: &EllipticParams, policy: &TruncationPolicy) -> Result<Complex64> {
    Ok(theta1_diag(z, params, policy)?.0)
}

/// As [`theta1`], also reporting truncation diagnostics.
pub fn theta1_diag(
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<(Complex64, Truncation)> {
    check_lattice(params, policy)?;
    // q^e computed as exp(i pi tau e) so complex tau keeps the right branch.
    let log_q = I * PI * params.tau;
    let mut sum = Complex64::new(0.0, 0.0);
    let n_terms = policy.series_terms;
    for n in 1..=n_terms {
        let nf = n as f64;
        let exponent = (nf - 0.5) * (nf - 0.5);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (log_q * exponent).exp() * ((2.0 * nf - 1.0) * PI * z).sin();
    }
    let nf = (n_terms + 1) as f64;
    let tail = params.q.norm().powf((nf - 0.5) * (nf - 0.5))
        * (2.0 * PI * (2.0 * nf - 1.0) * z.im.abs()).exp();
    Ok((2.0 * sum, Truncation { terms_used: n_terms, est_tail: tail }))
}

/// The remaining theta functions, composed from `theta1`:
/// `theta_3(z) = q^{1/4} exp(i pi z) theta(z + 1/2 + tau/2)`,
/// `theta_2(z) = theta(z + 1/2)`, `theta_4(z) = theta_3(z + 1/2)`.
pub fn theta_variant(
    k: u8,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    match k {
        1 => theta1(z, params, policy),
        2 => theta1(z + 0.5, params, policy),
        3 => {
            let shifted = theta1(z + 0.5 + params.tau / 2.0, params, policy)?;
            let q_quarter = (I * PI * params.tau / 4.0).exp();
            Ok(q_quarter * (I * PI * z).exp() * shifted)
        }
        4 => theta_variant(3, z + 0.5, params, policy),
        _ => Err(Error::IndexOutOfRange(format!("theta index {k} not in 1..=4"))),
    }
}

/// The constant `G = prod_{m>=1} (1 - q^{2m})`.
pub fn g_constant(params: &EllipticParams, policy: &TruncationPolicy) -> Result<Complex64> {
    check_lattice(params, policy)?;
    let q2 = params.q * params.q;
    let mut prod = Complex64::new(1.0, 0.0);
    let mut pw = Complex64::new(1.0, 0.0);
    for _ in 1..=4 * policy.series_terms {
        pw *= q2;
        if pw.norm() < policy.product_eps {
            break;
        }
        prod *= 1.0 - pw;
    }
    Ok(prod)
}

/// The elliptic gamma function, as the double product over odd powers of the
/// two nomes. The factor set is symmetric in `a_plus` and `a_minus` by
/// construction. Near-pole evaluations (a denominator factor smaller than
/// `product_eps^{1/2}`) come back flagged.
pub fn elliptic_gamma(
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<CVal> {
    params.require_modular()?;
    let em = (-2.0 * I * PI * z).exp();
    let ep = (2.0 * I * PI * z).exp();
    let scale = em.norm().max(ep.norm());
    let flag_eps = policy.product_eps.sqrt();
    let mut out = Complex64::new(1.0, 0.0);
    let mut flagged = false;
    let mut qp = params.q_plus; // q_+^{2m-1}
    loop {
        if (qp * params.q_minus).norm() * scale < policy.product_eps {
            break;
        }
        let mut qpm = qp * params.q_minus; // q_+^{2m-1} q_-^{2n-1}
        loop {
            if qpm.norm() * scale < policy.product_eps {
                break;
            }
            let num = 1.0 - qpm * em;
            let den = 1.0 - qpm * ep;
            if den.norm() < flag_eps {
                flagged = true;
                out *= num / (den + flag_eps);
            } else {
                out *= num / den;
            }
            qpm *= params.q_minus * params.q_minus;
        }
        qp *= params.q_plus * params.q_plus;
    }
    Ok(CVal { v: out, flagged })
}

/// The holomorphic, even, 1-periodic function
/// `R_delta(z) = prod_{k>=1} (1 - q_d^{2k-1} e^{2 i pi z})(1 - q_d^{2k-1} e^{-2 i pi z})`.
pub fn r_delta(
    delta: Sign,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    params.require_modular()?;
    let qd = params.q_delta(delta);
    let ep = (2.0 * I * PI * z).exp();
    let em = (-2.0 * I * PI * z).exp();
    let scale = ep.norm().max(em.norm());
    let mut prod = Complex64::new(1.0, 0.0);
    let mut pw = qd; // q_d^{2k-1}
    loop {
        if pw.norm() * scale < policy.product_eps {
            break;
        }
        prod *= (1.0 - pw * ep) * (1.0 - pw * em);
        pw *= qd * qd;
    }
    Ok(prod)
}

/// Product shorthand `theta(z + a_1, ..., z + a_n)` over a slice of offsets.
pub fn theta_prod(
    z: Complex64,
    offsets: &[Complex64],
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let mut prod = Complex64::new(1.0, 0.0);
    for &a in offsets {
        prod *= theta1(z + a, params, policy)?;
    }
    Ok(prod)
}

/// `R_delta(z + l_1 + c, ..., z + l_n + c)` style products.
pub fn r_delta_prod(
    delta: Sign,
    z: Complex64,
    offsets: &[Complex64],
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let mut prod = Complex64::new(1.0, 0.0);
    for &l in offsets {
        prod *= r_delta(delta, z + l, params, policy)?;
    }
    Ok(prod)
}

/// Central finite-difference derivative of `theta1` at `z`.
pub fn theta1_derivative(
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let h = 1e-5;
    let hs = [c64(h, 0.0), c64(0.0, h)];
    // Average the two axis directions; theta is entire so both agree.
    let mut acc = Complex64::new(0.0, 0.0);
    for d in hs {
        acc += (theta1(z + d, params, policy)? - theta1(z - d, params, policy)?) / (2.0 * d);
    }
    Ok(acc / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::c64;

    fn params() -> EllipticParams {
        EllipticParams::from_lattice(c64(0.0, 0.8), c64(0.0, 0.17), c64(0.05, 0.0)).unwrap()
    }

    #[test]
    fn theta_is_odd() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        assert!(theta1(c64(0.0, 0.0), &p, &pol).unwrap().norm() < 1e-14);
        let a = theta1(c64(0.3, 0.0), &p, &pol).unwrap();
        let b = theta1(c64(-0.3, 0.0), &p, &pol).unwrap();
        assert!((a + b).norm() < 1e-14);
    }

    #[test]
    fn theta_matches_doubled_term_count() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        let doubled = TruncationPolicy { series_terms: 2 * pol.series_terms, ..pol };
        let z = c64(0.3, 0.1);
        let a = theta1(z, &p, &pol).unwrap();
        let b = theta1(z, &p, &doubled).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn theta2_vanishes_at_minus_half() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        assert!(theta_variant(2, c64(-0.5, 0.0), &p, &pol).unwrap().norm() < 1e-14);
    }

    #[test]
    fn theta4_is_shifted_theta3() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        for z in [c64(0.13, 0.04), c64(-0.27, 0.11)] {
            let a = theta_variant(4, z, &p, &pol).unwrap();
            let b = theta_variant(3, z + 0.5, &p, &pol).unwrap();
            assert!((a - b).norm() < 1e-13 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn theta3_against_direct_series() {
        // Independent oracle: theta_3(z) = sum_{n in Z} q^{n^2} e^{2 i pi n z}.
        let p = EllipticParams::from_lattice(c64(0.0, 1.0), c64(0.0, 0.2), c64(0.0, 0.0)).unwrap();
        let pol = TruncationPolicy::for_params(&p);
        let z = c64(0.2, 0.0);
        let mut direct = Complex64::new(1.0, 0.0);
        for n in 1..40 {
            let nf = n as f64;
            direct += p.q.powf(nf * nf)
                * ((2.0 * I * PI * nf * z).exp() + (-2.0 * I * PI * nf * z).exp());
        }
        let composed = theta_variant(3, z, &p, &pol).unwrap();
        assert!((composed - direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn g_constant_limits() {
        let far = EllipticParams::from_lattice(c64(0.0, 40.0), c64(0.0, 0.2), c64(0.0, 0.0)).unwrap();
        let pol = TruncationPolicy::for_params(&far);
        let g = g_constant(&far, &pol).unwrap();
        assert!((g - 1.0).norm() < 1e-15);

        // Oracle: direct product with doubled cutoff.
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        let g = g_constant(&p, &pol).unwrap();
        let mut oracle = Complex64::new(1.0, 0.0);
        for m in 1..=(8 * pol.series_terms) {
            oracle *= 1.0 - p.q.powf(2.0 * m as f64);
        }
        assert!((g - oracle).norm() < 1e-13 * oracle.norm());
    }

    #[test]
    fn elliptic_gamma_special_values() {
        let p = EllipticParams::from_modular(c64(1.0, 0.0), c64(0.7, 0.0), c64(0.0, 0.0)).unwrap();
        let pol = TruncationPolicy::default();
        let one = elliptic_gamma(c64(0.0, 0.0), &p, &pol).unwrap();
        assert!((one.v - 1.0).norm() < 1e-14);
        let z = c64(0.23, 0.08);
        let refl = elliptic_gamma(z, &p, &pol).unwrap().v * elliptic_gamma(-z, &p, &pol).unwrap().v;
        assert!((refl - 1.0).norm() < 1e-12);
    }

    #[test]
    fn elliptic_gamma_against_tighter_cutoff() {
        let p = EllipticParams::from_modular(c64(1.0, 0.0), c64(0.7, 0.0), c64(0.0, 0.0)).unwrap();
        let loose = TruncationPolicy { product_eps: 1e-13, ..TruncationPolicy::default() };
        let tight = TruncationPolicy { product_eps: 1e-17, ..TruncationPolicy::default() };
        let z = c64(0.2, 0.1);
        let a = elliptic_gamma(z, &p, &loose).unwrap().v;
        let b = elliptic_gamma(z, &p, &tight).unwrap().v;
        assert!((a - b).norm() < 1e-11 * b.norm());
    }

    #[test]
    fn r_delta_even_periodic() {
        let p = EllipticParams::from_modular(c64(0.9, 0.0), c64(0.42, 0.0), c64(0.0, 0.0)).unwrap();
        let pol = TruncationPolicy::default();
        let z = c64(0.3, 0.07);
        let a = r_delta(Sign::Plus, z, &p, &pol).unwrap();
        assert!((a - r_delta(Sign::Plus, -z, &p, &pol).unwrap()).norm() < 1e-12 * a.norm());
        assert!((a - r_delta(Sign::Plus, z + 1.0, &p, &pol).unwrap()).norm() < 1e-12 * a.norm());
        // Oracle: doubled cutoff.
        let tight = TruncationPolicy { product_eps: 1e-28, ..pol };
        let b = r_delta(Sign::Plus, z, &p, &tight).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn rejects_flat_lattice() {
        let p = EllipticParams::from_lattice(c64(0.0, 0.01), c64(0.0, 0.002), c64(0.0, 0.0)).unwrap();
        let pol = TruncationPolicy::default();
        assert!(theta1(c64(0.1, 0.0), &p, &pol).is_err());
    }
}
