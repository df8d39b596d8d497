//! Finite-dimensional modules: spaces of even theta sections spanned by
//! kernel functions, fitted matrix representations of the difference
//! operators on them, and the matrix-level identities those fits must obey.

use crate::adops::{a_r_delta, sklyanin_generator, sklyanin_offsets, DifferenceOperator};
use crate::coeffspace::Evaluator;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, rank_with_gap};
use crate::params::{c64, EllipticParams, Sign, TruncationPolicy, I};
use crate::report::VerificationReport;
use crate::specfun::{r_delta, theta1, theta_variant};
use crate::value::CVal;
use crate::verify::sklyanin::j_constant;
use crate::verify::CheckContext;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// A finite-dimensional section space with a fitting grid. `mu` is the
/// per-index coefficient multiplier an operator must carry to act here.
pub struct ThetaModule {
    pub mu: Complex64,
    pub dim: usize,
    pub sections: Vec<Evaluator>,
    pub train: Vec<Complex64>,
    pub holdout: Vec<Complex64>,
    pub gap: f64,
}

/// A fitted matrix action. Columns are images: column `i` holds the
/// coordinates of `op(section_i)` in the section basis, so composition of
/// operators is matrix multiplication.
pub struct OperatorMatrix {
    pub dim: usize,
    pub entries: DMatrix<Complex64>,
    pub fit_residual: f64,
}

/// Distance from `z` to the half-period lattice combinations
/// `p/2 + (q a_+ + r a_-) i/2` where the operator coefficients degenerate.
fn grid_margin(z: Complex64, params: &EllipticParams) -> f64 {
    let mut best = f64::INFINITY;
    for q in -2..=2 {
        for r in -2..=2 {
            let d = z - I * (q as f64 * params.a_plus + r as f64 * params.a_minus) / 2.0;
            let dx = d.re - (2.0 * d.re).round() / 2.0;
            best = best.min(dx.hypot(d.im));
        }
    }
    best
}

fn module_grid(rng: &mut ChaCha8Rng, count: usize, params: &EllipticParams) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < 400 * count {
        guard += 1;
        let z = c64(rng.gen_range(-0.45..0.45), rng.gen_range(0.02..0.2));
        if grid_margin(z, params) > 0.03 {
            out.push(z);
        }
    }
    out
}

/// Distinct spectral parameters: pairwise separated both as `y_i - y_j`
/// and `y_i + y_j` (sections are even in `y`).
fn sample_ys(rng: &mut ChaCha8Rng, count: usize) -> Vec<Complex64> {
    let mut ys: Vec<Complex64> = Vec::with_capacity(count);
    let mut guard = 0;
    while ys.len() < count && guard < 400 * count {
        guard += 1;
        let y = c64(rng.gen_range(-0.35..0.35), rng.gen_range(-0.2..0.2));
        if ys
            .iter()
            .all(|&p| (y - p).norm() > 0.05 && (y + p).norm() > 0.05)
            && y.norm() > 0.05
        {
            ys.push(y);
        }
    }
    ys
}

/// One kernel section of the order-`2N` space: the product
/// `prod_{k=0}^{N-1} R_delta(z +- y + (2k - N + 1) i a_{-delta} / 2)`.
fn theta_section(
    delta: Sign,
    n: usize,
    y: Complex64,
    params: &EllipticParams,
) -> Evaluator {
    let p = *params;
    let pol = TruncationPolicy::for_params(params);
    let iam = I * params.a_delta(delta.flip());
    Arc::new(move |z| {
        let mut prod = c64(1.0, 0.0);
        for k in 0..n {
            let shift = (2.0 * k as f64 - n as f64 + 1.0) * iam / 2.0;
            prod *= r_delta(delta, z + y + shift, &p, &pol).unwrap_or(c64(0.0, 0.0))
                * r_delta(delta, z - y + shift, &p, &pol).unwrap_or(c64(0.0, 0.0));
        }
        CVal::new(prod)
    })
}

fn split_grid(
    rng: &mut ChaCha8Rng,
    dim: usize,
    params: &EllipticParams,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let total = 3 * dim + 8;
    let grid = module_grid(rng, total, params);
    let n_holdout = (3 * grid.len()).div_ceil(10);
    let (hold, train) = grid.split_at(n_holdout);
    (train.to_vec(), hold.to_vec())
}

fn assemble_module(
    sections: Vec<Evaluator>,
    mu: Complex64,
    rng: &mut ChaCha8Rng,
    params: &EllipticParams,
) -> Result<ThetaModule> {
    let dim = sections.len();
    let (train, holdout) = split_grid(rng, dim, params);
    if train.len() < dim + 2 {
        return Err(Error::DegenerateSamples);
    }
    let m = DMatrix::from_fn(dim, train.len(), |i, j| sections[i](train[j]).v);
    let (rank, gap) = rank_with_gap(&m, 1e-8);
    if rank != dim || gap < 1e2 {
        return Err(Error::BasisDegenerate);
    }
    Ok(ThetaModule {
        mu,
        dim,
        sections,
        train,
        holdout,
        gap,
    })
}

/// Build the `(N+1)`-dimensional module of even order-`2N` theta sections
/// from `N + 1` kernel sections at distinct spectral parameters. Retries
/// with fresh parameters when the sampled basis is degenerate.
pub fn build_theta_module(
    delta: Sign,
    n: usize,
    params: &EllipticParams,
    rng: &mut ChaCha8Rng,
) -> Result<ThetaModule> {
    params.require_modular()?;
    let mu = (-2.0 * PI * (n as f64) * params.a_delta(delta.flip())).exp();
    let mut last = Error::BasisDegenerate;
    for _ in 0..5 {
        let ys = sample_ys(rng, n + 1);
        if ys.len() < n + 1 {
            continue;
        }
        let sections: Vec<Evaluator> = ys
            .iter()
            .map(|&y| theta_section(delta, n, y, params))
            .collect();
        match assemble_module(sections, mu, rng, params) {
            Ok(m) => return Ok(m),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// The mixed module at multiplier `exp(-2 pi (N_+ a_+ + N_- a_-))`: section
/// products of the two pure kernels at opposite shifts, rank at most
/// `(N_+ + 1)(N_- + 1)`.
pub fn build_mixed_module(
    n_plus: usize,
    n_minus: usize,
    params: &EllipticParams,
    rng: &mut ChaCha8Rng,
) -> Result<ThetaModule> {
    params.require_modular()?;
    let mu = (-2.0
        * PI
        * (n_plus as f64 * params.a_plus + n_minus as f64 * params.a_minus))
        .exp();
    let dim = (n_plus + 1) * (n_minus + 1);
    let shift_m = I * params.a_minus * (n_minus as f64) / 2.0;
    let shift_p = I * params.a_plus * (n_plus as f64) / 2.0;
    let mut last = Error::BasisDegenerate;
    for _ in 0..5 {
        let ys = sample_ys(rng, dim);
        if ys.len() < dim {
            continue;
        }
        let sections: Vec<Evaluator> = ys
            .iter()
            .map(|&y| {
                let inner_m = theta_section(Sign::Minus, n_plus, y, params);
                let inner_p = theta_section(Sign::Plus, n_minus, y, params);
                let f: Evaluator =
                    Arc::new(move |z| inner_m(z + shift_m) * inner_p(z - shift_p));
                f
            })
            .collect();
        match assemble_module(sections, mu, rng, params) {
            Ok(m) => return Ok(m),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Fit the matrix of `op` on the module: least squares on the training
/// grid, validated on the holdout grid. The operator's multiplier tag (when
/// present) must match the module's.
pub fn operator_matrix(op: &DifferenceOperator, module: &ThetaModule) -> Result<OperatorMatrix> {
    if let Some(tag) = op.mu_tag {
        if (tag - module.mu).norm() > 1e-10 * (1.0 + module.mu.norm()) {
            return Err(Error::MultiplierMismatch);
        }
    }
    let dim = module.dim;
    let a = DMatrix::from_fn(module.train.len(), dim, |i, j| {
        module.sections[j](module.train[i]).v
    });
    let mut entries = DMatrix::from_element(dim, dim, c64(0.0, 0.0));
    let mut fit_residual: f64 = 0.0;
    for i in 0..dim {
        let sec = module.sections[i].clone();
        let mut b = DVector::from_element(module.train.len(), c64(0.0, 0.0));
        for (t, &z) in module.train.iter().enumerate() {
            let v = op.apply_at(sec.as_ref(), z);
            if v.flagged {
                return Err(Error::DegenerateSamples);
            }
            b[t] = v.v;
        }
        let x = lstsq(&a, &b)?;
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for &z in &module.holdout {
            let v = op.apply_at(sec.as_ref(), z);
            if v.flagged {
                continue;
            }
            let mut fitted = c64(0.0, 0.0);
            for j in 0..dim {
                fitted += x[j] * module.sections[j](z).v;
            }
            scale = scale.max(v.norm());
            worst = worst.max((v.v - fitted).norm());
        }
        let rel = worst / (1.0 + scale);
        if rel > 1e-4 {
            return Err(Error::FitFailure(rel));
        }
        fit_residual = fit_residual.max(rel);
        for j in 0..dim {
            entries[(j, i)] = x[j];
        }
    }
    Ok(OperatorMatrix {
        dim,
        entries,
        fit_residual,
    })
}

/// Random coupling vector with the sum pinned to the module constraint.
fn module_couplings(
    rng: &mut ChaCha8Rng,
    target: Complex64,
) -> [Complex64; 4] {
    let mut l = [c64(0.0, 0.0); 4];
    for ln in &mut l {
        *ln = c64(rng.gen_range(-0.25..0.25), rng.gen_range(-0.1..0.1));
    }
    let sum: Complex64 = l.iter().sum();
    let corr = (target - sum) / 4.0;
    for ln in &mut l {
        *ln += corr;
    }
    l
}

fn generator_sum(n: usize, delta: Sign, params: &EllipticParams) -> Complex64 {
    -2.0 * I * params.a - I * (n as f64) * params.a_delta(delta.flip())
}

/// The first-order generators preserve the order-`2N` modules: the fitted
/// action reproduces the operator on held-out points.
pub fn check_module_invariance(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x71);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for delta in [Sign::Plus, Sign::Minus] {
        for n in 1..=2usize {
            let module = build_theta_module(delta, n, &p, &mut rng)?;
            let l = module_couplings(&mut rng, generator_sum(n, delta, &p));
            let op = a_r_delta(delta, l, &p)?;
            let m = operator_matrix(&op, &module)?;
            worst = worst.max(m.fit_residual);
            detail.push_str(&format!("{}N{n}={:.1e} ", delta.label(), m.fit_residual));
        }
    }
    Ok(ctx
        .report("repn.module_invariance", worst, 1e-6)
        .with_detail(detail.trim_end().to_string()))
}

/// The modular copy with the same coupling sum also preserves the module.
pub fn check_modular_invariance_default(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x72);
    let mut worst: f64 = 0.0;
    for n in 1..=2usize {
        let module = build_theta_module(Sign::Plus, n, &p, &mut rng)?;
        let l = module_couplings(&mut rng, generator_sum(n, Sign::Plus, &p));
        let op = a_r_delta(Sign::Minus, l, &p)?;
        let m = operator_matrix(&op, &module)?;
        worst = worst.max(m.fit_residual);
    }
    Ok(ctx.report("repn.modular_invariance", worst, 1e-6))
}

/// Representation label matching the order-`2N` module multiplier.
fn nu_for_module(n: usize, params: &EllipticParams) -> Complex64 {
    I * params.a_minus * (n as f64) / 4.0
}

fn frob(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Fit the four generators on the two-dimensional module and check the six
/// quadratic relations as matrix identities. Also pins the bridge between
/// the theta-quotient generators and the R-quotient generators: their
/// coefficient ratio must be a constant.
pub fn check_matrix_relations_default(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params.with_nu(nu_for_module(1, &ctx.params));
    p.require_modular()?;
    let pol = TruncationPolicy::for_params(&p);
    let mut rng = ctx.rng(0x73);
    let module = build_theta_module(Sign::Plus, 1, &p, &mut rng)?;
    let mut mats = Vec::with_capacity(4);
    for t in 0..4usize {
        let d = sklyanin_generator(t, &p)?;
        mats.push(operator_matrix(&d, &module)?.entries);
    }
    let mut worst: f64 = 0.0;
    for (k, l, m) in [(1usize, 2usize, 3usize), (2, 3, 1), (3, 1, 2)] {
        let j = j_constant((l as u8, m as u8), p.eta, &p, &pol)?;
        let prod = |a: usize, b: usize| &mats[a] * &mats[b];
        let scale = frob(&prod(0, k))
            .max(frob(&prod(l, m)))
            .max(frob(&prod(k, l)));
        let r1 = prod(0, k) - prod(k, 0) - (prod(l, m) + prod(m, l)) * (I * j);
        let r2 = prod(k, l) - prod(l, k) - (prod(0, m) + prod(m, 0)) * I;
        worst = worst.max(frob(&r1) / (1.0 + scale));
        worst = worst.max(frob(&r2) / (1.0 + scale));
    }
    // Bridge: each theta-quotient generator is a constant multiple of an
    // R-quotient generator with translated couplings (one component pushed
    // up a full period to absorb the exponential).
    let mut bridge: f64 = 0.0;
    for t in 0..4usize {
        let offsets = sklyanin_offsets(t, &p);
        let mut l = [c64(0.0, 0.0); 4];
        for n in 0..4 {
            l[n] = offsets[n] - p.nu - I * p.a_plus / 2.0 - I * p.a_minus / 4.0;
        }
        l[0] += I * p.a_plus;
        let d = sklyanin_generator(t, &p)?;
        let ar = a_r_delta(Sign::Plus, l, &p)?;
        let mut ratios = Vec::new();
        for &z in &module.train {
            let a = d.coeff_eval(1, z);
            let b = ar.coeff_eval(1, z);
            if a.flagged || b.flagged || b.norm() < 1e-12 {
                continue;
            }
            ratios.push(a.v / b.v);
        }
        if ratios.len() < 4 {
            return Err(Error::DegenerateSamples);
        }
        let mean: Complex64 = ratios.iter().sum::<Complex64>() / ratios.len() as f64;
        for r in &ratios {
            bridge = bridge.max((r - mean).norm() / (1.0 + mean.norm()));
        }
        // The reflected coefficient must carry the same constant.
        for &z in &module.train {
            let a = d.coeff_eval(-1, z);
            let b = ar.coeff_eval(-1, z);
            if a.flagged || b.flagged || b.norm() < 1e-12 {
                continue;
            }
            bridge = bridge.max((a.v / b.v - mean).norm() / (1.0 + mean.norm()));
        }
    }
    Ok(ctx
        .report("repn.matrix_relations", worst.max(bridge), 1e-6)
        .with_detail(format!("bridge={bridge:.2e}")))
}

/// The two Casimir combinations of the fitted generator matrices are
/// explicit theta constants times the identity.
pub fn check_casimir_matrices(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params.with_nu(nu_for_module(1, &ctx.params));
    p.require_modular()?;
    let pol = TruncationPolicy::for_params(&p);
    let mut rng = ctx.rng(0x74);
    let module = build_theta_module(Sign::Plus, 1, &p, &mut rng)?;
    let mut mats = Vec::with_capacity(4);
    for t in 0..4usize {
        let d = sklyanin_generator(t, &p)?;
        mats.push(operator_matrix(&d, &module)?.entries);
    }
    let dim = module.dim;
    let mut c1 = DMatrix::from_element(dim, dim, c64(0.0, 0.0));
    for m in &mats {
        c1 += m * m;
    }
    let th = theta1(2.0 * p.nu + p.eta, &p, &pol)?;
    let t1 = 4.0 * th * th;
    for i in 0..dim {
        c1[(i, i)] -= t1;
    }
    let mut worst = frob(&c1) / (1.0 + t1.norm());
    let mut c2 = DMatrix::from_element(dim, dim, c64(0.0, 0.0));
    for k in 1..=3usize {
        let coef = theta_variant((k + 1) as u8, 2.0 * p.eta, &p, &pol)?
            * theta_variant((k + 1) as u8, c64(0.0, 0.0), &p, &pol)?
            / theta_variant((k + 1) as u8, p.eta, &p, &pol)?.powi(2);
        c2 += (&mats[k] * &mats[k]) * coef;
    }
    let t2 = 4.0 * theta1(2.0 * p.nu, &p, &pol)? * theta1(2.0 * p.nu + 2.0 * p.eta, &p, &pol)?;
    for i in 0..dim {
        c2[(i, i)] -= t2;
    }
    worst = worst.max(frob(&c2) / (1.0 + t2.norm()));
    Ok(ctx.report("repn.casimir_matrices", worst, 1e-5))
}

/// The fit is a homomorphism: the matrix of a product is the product of the
/// matrices, in the columns-as-images convention.
pub fn check_homomorphism(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x75);
    let module = build_theta_module(Sign::Plus, 1, &p, &mut rng)?;
    let target = generator_sum(1, Sign::Plus, &p);
    let a = a_r_delta(Sign::Plus, module_couplings(&mut rng, target), &p)?;
    let b = a_r_delta(Sign::Plus, module_couplings(&mut rng, target), &p)?;
    let ma = operator_matrix(&a, &module)?.entries;
    let mb = operator_matrix(&b, &module)?.entries;
    let mab = operator_matrix(&a.compose(&b)?, &module)?.entries;
    let prod = &ma * &mb;
    let res = frob(&(mab - &prod)) / (1.0 + frob(&prod));
    Ok(ctx.report("repn.homomorphism", res, 1e-6))
}

/// The mixed module: rank at most `(N_+ + 1)(N_- + 1)` (equal generically)
/// and invariance under both modular copies.
pub fn check_mixed_module(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x76);
    let module = build_mixed_module(1, 1, &p, &mut rng)?;
    if module.dim != 4 {
        return Err(Error::BasisDegenerate);
    }
    let target = -2.0 * I * p.a - I * (p.a_plus + p.a_minus);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let op = a_r_delta(delta, module_couplings(&mut rng, target), &p)?;
        let m = operator_matrix(&op, &module)?;
        worst = worst.max(m.fit_residual);
    }
    Ok(ctx
        .report("repn.mixed_module", worst, 1e-5)
        .with_detail(format!("rank=4 gap={:.1e}", module.gap)))
}

/// At trivial multiplier the generators act on constants: applying them to
/// the constant function 1 returns a constant.
pub fn check_mu1_constants(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x77);
    let one: Evaluator = Arc::new(|_| CVal::new(c64(1.0, 0.0)));
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let l = module_couplings(&mut rng, -2.0 * I * p.a);
        let op = a_r_delta(delta, l, &p)?;
        let img = op.apply(one.clone());
        let mut vals = Vec::new();
        for &z in &module_grid(&mut rng, 12, &p) {
            let v = img(z);
            if !v.flagged {
                vals.push(v.v);
            }
        }
        if vals.len() < 6 {
            return Err(Error::DegenerateSamples);
        }
        let mean: Complex64 = vals.iter().sum::<Complex64>() / vals.len() as f64;
        for v in &vals {
            worst = worst.max((v - mean).norm() / (1.0 + mean.norm()));
        }
    }
    Ok(ctx.report("repn.mu1_constants", worst, 1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn params() -> EllipticParams {
        EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.045, 0.21), c64(0.03, 0.0)).unwrap()
    }

    #[test]
    fn theta_module_has_expected_rank() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=2usize {
            let m = build_theta_module(Sign::Plus, n, &p, &mut rng).unwrap();
            assert_eq!(m.dim, n + 1);
            assert!(m.gap > 1e2);
        }
    }

    #[test]
    fn sections_are_even_and_periodic() {
        let p = params();
        let s = theta_section(Sign::Plus, 2, c64(0.17, 0.05), &p);
        let z = c64(0.21, 0.09);
        let a = s(z).v;
        assert!((a - s(-z).v).norm() < 1e-10 * (1.0 + a.norm()));
        assert!((a - s(z + 1.0).v).norm() < 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn multiplier_mismatch_rejected() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let module = build_theta_module(Sign::Plus, 1, &p, &mut rng).unwrap();
        // Wrong sum: multiplier differs from the module's.
        let l = module_couplings(&mut rng, -2.0 * I * p.a);
        let op = a_r_delta(Sign::Plus, l, &p).unwrap();
        assert!(matches!(
            operator_matrix(&op, &module),
            Err(Error::MultiplierMismatch)
        ));
    }
}
