//! The coefficient spaces V_k(mu) in normal form: theta-quotient functions
//! `c theta(z + a_1 - nu, ..., z + a_{4k} - nu) / P_k(eta, z)`, the
//! pole-product functions, numerical residue extraction on circular
//! contours, and the numerical rank of function families.

use crate::error::{Error, Result};
use crate::linalg;
use crate::params::{EllipticParams, TruncationPolicy};
use crate::specfun::{theta1, theta_prod};
use crate::value::CVal;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::sync::Arc;

/// A flag-aware complex evaluator of one variable.
pub type Evaluator = Arc<dyn Fn(Complex64) -> CVal + Send + Sync>;

/// Denominator factors below this magnitude mark the value as flagged.
pub const POLE_FLAG_EPS: f64 = 1e-8;

/// Largest integer rebalancing shift accepted when normalizing the zero sum.
const MAX_ZERO_SUM_SHIFT: f64 = 16.0;

/// An element of V_k(mu) in normal form: a prefactor, 4k numerator zeros
/// summing to `2k(k-1) eta` (up to an integer, absorbed on construction),
/// and the representation label nu.
#[derive(Debug, Clone)]
pub struct ThetaRatio {
    pub order_k: usize,
    pub prefactor: Complex64,
    pub zeros: Vec<Complex64>,
    pub nu: Complex64,
    pub params: EllipticParams,
    pub policy: TruncationPolicy,
}

impl ThetaRatio {
    pub fn new(
        order_k: usize,
        prefactor: Complex64,
        mut zeros: Vec<Complex64>,
        nu: Complex64,
        params: &EllipticParams,
    ) -> Result<Self> {
        if order_k == 0 || zeros.len() != 4 * order_k {
            return Err(Error::IndexOutOfRange(format!(
                "order {} needs {} zeros, got {}",
                order_k,
                4 * order_k,
                zeros.len()
            )));
        }
        let k = order_k as f64;
        let target = 2.0 * k * (k - 1.0) * params.eta;
        let sum: Complex64 = zeros.iter().sum();
        let dev = sum - target;
        let shift = dev.re.round();
        if shift.abs() > MAX_ZERO_SUM_SHIFT {
            return Err(Error::BadZeroSum {
                expected: "2k(k-1)eta (mod Z, |shift| <= 16)".into(),
                deviation: dev.norm(),
            });
        }
        let excess = dev - shift;
        if excess.norm() > 1e-9 {
            return Err(Error::BadZeroSum {
                expected: "2k(k-1)eta (mod Z)".into(),
                deviation: excess.norm(),
            });
        }
        // Re-balance exactly on the last component.
        let last = zeros.len() - 1;
        zeros[last] -= excess;
        Ok(ThetaRatio {
            order_k,
            prefactor,
            zeros,
            nu,
            params: *params,
            policy: TruncationPolicy::for_params(params),
        })
    }

    /// The k = 1 normal form `theta(z + a - nu) / theta(2z)` with zero-sum
    /// offsets. For `a = 0` this is `theta(z - nu)^4 / theta(2z)`.
    pub fn v1(a: [Complex64; 4], nu: Complex64, params: &EllipticParams) -> Result<Self> {
        let sum: Complex64 = a.iter().sum();
        if sum.norm() > 1e-12 {
            return Err(Error::BadZeroSum {
                expected: "0".into(),
                deviation: sum.norm(),
            });
        }
        Self::new(1, Complex64::new(1.0, 0.0), a.to_vec(), nu, params)
    }

    /// A seeded random order-k element (exact zero sum by construction).
    pub fn random<R: Rng>(
        order_k: usize,
        nu: Complex64,
        params: &EllipticParams,
        rng: &mut R,
    ) -> Self {
        let k = order_k as f64;
        let target = 2.0 * k * (k - 1.0) * params.eta;
        let mut zeros: Vec<Complex64> = (0..4 * order_k - 1)
            .map(|_| Complex64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3)))
            .collect();
        let partial: Complex64 = zeros.iter().sum();
        zeros.push(target - partial);
        ThetaRatio::new(order_k, Complex64::new(1.0, 0.0), zeros, nu, params)
            .expect("random zeros sum exactly")
    }

    pub fn eval(&self, z: Complex64) -> CVal {
        let offsets: Vec<Complex64> = self.zeros.iter().map(|&a| a - self.nu).collect();
        let num = match theta_prod(z, &offsets, &self.params, &self.policy) {
            Ok(v) => v,
            Err(_) => return CVal::flagged(Complex64::new(0.0, 0.0)),
        };
        let den = match pk_factors(self.order_k, self.params.eta, z, &self.params, &self.policy) {
            Ok(v) => v,
            Err(_) => return CVal::flagged(Complex64::new(0.0, 0.0)),
        };
        let flagged = den.min_factor < POLE_FLAG_EPS;
        CVal {
            v: self.prefactor * num / den.product,
            flagged,
        }
    }

    pub fn evaluator(&self) -> Evaluator {
        let f = self.clone();
        Arc::new(move |z| f.eval(z))
    }

    /// Evaluator of the reflected function `z -> g(-z)`.
    pub fn reflected(&self) -> Evaluator {
        let f = self.clone();
        Arc::new(move |z| f.eval(-z))
    }

    pub fn mu_k(&self) -> Complex64 {
        self.params.mu.powu(self.order_k as u32)
    }
}

struct FactorProduct {
    product: Complex64,
    min_factor: f64,
}

fn pk_factors(
    k: usize,
    eta: Complex64,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<FactorProduct> {
    let mut product = Complex64::new(1.0, 0.0);
    let mut min_factor = f64::INFINITY;
    for l in 0..k {
        let f = theta1(2.0 * z + 2.0 * (l as f64) * eta, params, policy)?;
        min_factor = min_factor.min(f.norm());
        product *= f;
    }
    Ok(FactorProduct { product, min_factor })
}

/// `P_k(eta, z) = prod_{l=0}^{k-1} theta(2z + 2 l eta)`.
pub fn pk_product(
    k: usize,
    eta: Complex64,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    Ok(pk_factors(k, eta, z, params, policy)?.product)
}

/// `P^(k)_m(eta, z)`: the product over `l = -m, ..., k - m` omitting the
/// index `l = k - 2m`.
pub fn pkm_product(
    k: usize,
    m: usize,
    eta: Complex64,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    if m > k {
        return Err(Error::IndexOutOfRange(format!("m = {m} exceeds k = {k}")));
    }
    let skip = k as i64 - 2 * m as i64;
    let mut product = Complex64::new(1.0, 0.0);
    for l in -(m as i64)..=(k as i64 - m as i64) {
        if l == skip {
            continue;
        }
        product *= theta1(2.0 * z + 2.0 * (l as f64) * eta, params, policy)?;
    }
    Ok(product)
}

/// A circular contour for residue extraction.
#[derive(Debug, Clone, Copy)]
pub struct ResidueProbe {
    pub center: Complex64,
    pub radius: f64,
    pub n_points: usize,
}

impl ResidueProbe {
    pub fn new(center: Complex64) -> Self {
        ResidueProbe {
            center,
            radius: 0.05,
            n_points: 64,
        }
    }

    pub fn with_radius(center: Complex64, radius: f64) -> Self {
        ResidueProbe {
            center,
            radius,
            n_points: 64,
        }
    }
}

/// `(1/2 pi i) oint (z - center)^m f(z) dz` by the trapezoid rule on the
/// circle; exponentially accurate for meromorphic integrands.
pub fn contour_moment<F>(f: F, probe: &ResidueProbe, m: u32) -> Result<Complex64>
where
    F: Fn(Complex64) -> CVal,
{
    let n = probe.n_points;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let theta = 2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
        let w = Complex64::new(0.0, theta).exp();
        let val = f(probe.center + probe.radius * w);
        if val.flagged {
            return Err(Error::ContourHitsPole);
        }
        acc += val.v * w.powu(m + 1);
    }
    Ok(acc * probe.radius.powi(m as i32 + 1) / (n as f64))
}

/// The residue `(1/2 pi i) oint f(z) dz` around the probe center.
pub fn residue<F>(f: F, probe: &ResidueProbe) -> Result<Complex64>
where
    F: Fn(Complex64) -> CVal,
{
    contour_moment(f, probe, 0)
}

/// Numerical rank of the span of `fs` from their evaluations at the sample
/// points; threshold `1e-8 x sigma_max`. Returns the rank and the
/// singular-value gap across the cut.
pub fn rank_of_span(fs: &[Evaluator], sample_points: &[Complex64]) -> Result<(usize, f64)> {
    if sample_points.len() < 6 {
        return Err(Error::InvalidParams(
            "need at least 6 sample points for a rank decision".into(),
        ));
    }
    let mut mat = DMatrix::zeros(sample_points.len(), fs.len());
    for (i, &z) in sample_points.iter().enumerate() {
        for (j, f) in fs.iter().enumerate() {
            let v = f(z);
            if v.flagged {
                return Err(Error::DegenerateSamples);
            }
            mat[(i, j)] = v.v;
        }
    }
    Ok(linalg::rank_with_gap(&mat, 1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{c64, I};
    use crate::value::rel_residual;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> EllipticParams {
        EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.0, 0.21), c64(0.03, 0.0)).unwrap()
    }

    #[test]
    fn v1_matches_direct_formula() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        let zero = c64(0.0, 0.0);
        let f = ThetaRatio::v1([zero; 4], zero, &p).unwrap();
        let z = c64(0.31, 0.12);
        let direct = theta1(z, &p, &pol).unwrap().powu(4) / theta1(2.0 * z, &p, &pol).unwrap();
        assert!(rel_residual(f.eval(z).v, direct) < 1e-10);
    }

    #[test]
    fn v1_quasi_periodicity() {
        let p = params();
        let a = [c64(0.1, 0.0), c64(-0.2, 0.05), c64(0.3, -0.02), c64(-0.2, -0.03)];
        let f = ThetaRatio::v1(a, p.nu, &p).unwrap();
        let z = c64(0.27, 0.09);
        assert!(rel_residual(f.eval(z + 1.0).v, f.eval(z).v) < 1e-9);
        assert!(rel_residual(f.eval(z + p.tau).v, p.mu * f.eval(z).v) < 1e-9);
    }

    #[test]
    fn eval_zeros_and_flags() {
        let p = params();
        let a = [c64(0.1, 0.0), c64(-0.2, 0.05), c64(0.3, -0.02), c64(-0.2, -0.03)];
        let f = ThetaRatio::v1(a, p.nu, &p).unwrap();
        // Numerator zero at z = nu - a_1.
        assert!(f.eval(p.nu - a[0]).norm() < 1e-10);
        // Denominator zero at z = 0: flagged.
        assert!(f.eval(c64(1e-12, 0.0)).flagged);
    }

    #[test]
    fn pk_single_factor_and_zeros() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        let z = c64(0.2, 0.05);
        let p1 = pk_product(1, p.eta, z, &p, &pol).unwrap();
        let direct = theta1(2.0 * z, &p, &pol).unwrap();
        assert!(rel_residual(p1, direct) < 1e-12);
        for l in 0..3u32 {
            let at = -(l as f64) * p.eta;
            assert!(pk_product(3, p.eta, at, &p, &pol).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn pkm_skips_one_index() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        let z = c64(0.2, 0.0);
        let got = pkm_product(3, 1, p.eta, z, &p, &pol).unwrap();
        // Direct product over l in {-1, 0, 2, ... } \ {1}.
        let mut want = Complex64::new(1.0, 0.0);
        for l in [-1i64, 0, 2] {
            want *= theta1(2.0 * z + 2.0 * (l as f64) * p.eta, &p, &pol).unwrap();
        }
        assert!(rel_residual(got, want) < 1e-12);
        assert!(pkm_product(2, 3, p.eta, z, &p, &pol).is_err());
    }

    #[test]
    fn residue_of_simple_pole_and_analytic() {
        let probe = ResidueProbe::new(c64(0.0, 0.0));
        let r = residue(|z| CVal::new(1.0 / z), &probe).unwrap();
        assert!((r - 1.0).norm() < 1e-12);
        let r = residue(|z| CVal::new(z.exp()), &probe).unwrap();
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn residue_of_inverse_theta() {
        let p = params();
        let pol = TruncationPolicy::for_params(&p);
        let probe = ResidueProbe::with_radius(c64(0.0, 0.0), 0.04);
        let r = residue(
            |z| CVal::new(1.0 / theta1(2.0 * z, &p, &pol).unwrap()),
            &probe,
        )
        .unwrap();
        // Oracle: theta'(0) by central finite difference.
        let d = crate::specfun::theta1_derivative(c64(0.0, 0.0), &p, &pol).unwrap();
        assert!(rel_residual(r, 1.0 / (2.0 * d)) < 1e-8);
    }

    #[test]
    fn rank_is_4k() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..=2usize {
            let fs: Vec<Evaluator> = (0..5 * 4 * k)
                .map(|_| ThetaRatio::random(k, p.nu, &p, &mut rng).evaluator())
                .collect();
            let pts: Vec<Complex64> = (0..(12 * k + 8))
                .map(|i| {
                    let t = i as f64 / (12 * k + 8) as f64;
                    c64(0.11 + 0.31 * t, 0.23 - 0.4 * t) + 0.13 * I * (2.0 * PI * t).cos()
                })
                .collect();
            let (rank, gap) = rank_of_span(&fs, &pts).unwrap();
            assert_eq!(rank, 4 * k, "V_{k} should be {}-dimensional", 4 * k);
            assert!(gap > 1e2);
        }
    }

    #[test]
    fn duplicated_functions_leave_rank_unchanged() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut fs: Vec<Evaluator> = (0..8)
            .map(|_| ThetaRatio::random(1, p.nu, &p, &mut rng).evaluator())
            .collect();
        let pts: Vec<Complex64> = (0..20)
            .map(|i| c64(0.07 + 0.02 * i as f64, 0.15 - 0.013 * i as f64))
            .collect();
        let (r1, _) = rank_of_span(&fs, &pts).unwrap();
        let dup = fs[0].clone();
        fs.push(dup);
        let (r2, _) = rank_of_span(&fs, &pts).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn bad_zero_sum_rejected() {
        let p = params();
        let a = [c64(0.1, 0.0), c64(0.1, 0.0), c64(0.1, 0.0), c64(0.1, 0.0)];
        assert!(ThetaRatio::v1(a, p.nu, &p).is_err());
    }
}
