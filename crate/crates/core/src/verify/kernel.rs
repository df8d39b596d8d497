//! Kernel-function identities tying the z-side operators to y-side
//! operators with reflected couplings, the twofold product against the
//! eight-coupling operator, the special reduction, and the commuting
//! modular pair.

use super::{CheckContext};
use crate::adops::{
    a_r_delta, chi1, chi2, h_from_lm, p_t_delta, phi1, phi2, special_reduction_h, v_delta,
    van_diejen, vb_delta, VanDiejenCouplings,
};
use crate::coeffspace::Evaluator;
use crate::error::{Error, Result};
use crate::params::{c64, EllipticParams, Sign, TruncationPolicy, I};
use crate::report::{fmt_c, VerificationReport};
use crate::specfun::{elliptic_gamma, r_delta};
use crate::value::{rel_residual, CVal};
use crate::verify::sklyanin::random_couplings;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Distance from a gamma-function argument to its nearest pole or zero
/// (the first product shell dominates in the working window).
fn gamma_arg_margin(w: Complex64, params: &EllipticParams) -> f64 {
    let mut best = f64::INFINITY;
    for m in 0..3 {
        for n in 0..3 {
            let shell =
                I * ((2 * m + 1) as f64 * params.a_plus + (2 * n + 1) as f64 * params.a_minus)
                    / 2.0;
            for s in [-1.0, 1.0] {
                let d = w - s * shell;
                let dx = d.re - d.re.round();
                best = best.min(dx.hypot(d.im));
            }
        }
    }
    best
}

/// `K(gamma; z, y) = G(z + y - gamma) G(z - y - gamma) G(-z + y - gamma)
/// G(-z - y - gamma)`; flagged when an argument approaches the pole/zero
/// shells or a product factor degenerates.
pub fn gamma_kernel(
    gamma: Complex64,
    z: Complex64,
    y: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<CVal> {
    let mut out = CVal::new(c64(1.0, 0.0));
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            let w = s1 * z + s2 * y - gamma;
            if gamma_arg_margin(w, params) < 0.05 {
                return Ok(CVal::flagged(c64(0.0, 0.0)));
            }
            out = out * elliptic_gamma(w, params, policy)?;
        }
    }
    Ok(out)
}

fn random_l<R: Rng>(rng: &mut R) -> [Complex64; 4] {
    let mut l = [c64(0.0, 0.0); 4];
    for ln in &mut l {
        *ln = c64(rng.gen_range(-0.25..0.25), rng.gen_range(-0.15..0.15));
    }
    l
}

/// Pin the coupling sum to `target` by an even shift of all components.
fn pin_sum(l: &mut [Complex64; 4], target: Complex64) {
    let sum: Complex64 = l.iter().sum();
    let corr = (target - sum) / 4.0;
    for ln in l.iter_mut() {
        *ln += corr;
    }
}

fn sample_pairs<R: Rng>(rng: &mut R, n: usize) -> Vec<(Complex64, Complex64)> {
    (0..n)
        .map(|_| {
            (
                c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.06..0.06)),
                c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.06..0.06)),
            )
        })
        .collect()
}

/// One side of the first-order kernel identity: the operator acts on the
/// kernel in its own variable. Returns (sum of terms, largest term).
fn ar_on_kernel(
    delta: Sign,
    l: &[Complex64; 4],
    gamma: Complex64,
    own: Complex64,
    other: Complex64,
    in_z: bool,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<(CVal, f64)> {
    let step = I * params.a_delta(delta.flip()) / 2.0;
    let mut sum = CVal::new(c64(0.0, 0.0));
    let mut scale: f64 = 0.0;
    for s in [1.0, -1.0] {
        let f = crate::adops::f_r_delta(delta, l, s * own, params, policy)?;
        let shifted = own + s * step;
        let k = if in_z {
            gamma_kernel(gamma, shifted, other, params, policy)?
        } else {
            gamma_kernel(gamma, other, shifted, params, policy)?
        };
        let term = f * k;
        scale = scale.max(term.norm());
        sum = sum + term;
    }
    Ok((sum, scale))
}

fn kernel_identity_r_residual(
    ctx: &CheckContext,
    delta: Sign,
    l: &[Complex64; 4],
    gamma: Complex64,
    k: &[Complex64; 4],
) -> Result<f64> {
    let p = ctx.params;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x31);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for (z, y) in sample_pairs(&mut rng, 14) {
        let (lhs, s1) = ar_on_kernel(delta, l, gamma, z, y, true, &p, &pol)?;
        let (rhs, s2) = ar_on_kernel(delta, k, gamma, y, z, false, &p, &pol)?;
        if lhs.flagged || rhs.flagged {
            continue;
        }
        used += 1;
        worst = worst.max((lhs.v - rhs.v).norm() / (1.0 + s1.max(s2)));
    }
    if used < 6 {
        return Err(Error::DegenerateSamples);
    }
    Ok(worst)
}

pub fn check_kernel_identity_r_default(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x32);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let l = random_l(&mut rng);
        let sum: Complex64 = l.iter().sum();
        // Exact compatibility: gamma = ia + sum/2 ties the two coupling sets.
        let gamma = I * p.a + sum / 2.0;
        let mut k = [c64(0.0, 0.0); 4];
        for n in 0..4 {
            k[n] = -l[n] + gamma - I * p.a;
        }
        worst = worst.max(kernel_identity_r_residual(ctx, delta, &l, gamma, &k)?);
    }
    Ok(ctx.report("kernel.identity_r", worst, 1e-7))
}

/// For trivial multiplier the kernels degenerate to 1 and the identity
/// collapses to equality of two constants built from the coefficient sums.
pub fn check_kernel_identity_r_mu1(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x33);
    let mut l = random_l(&mut rng);
    pin_sum(&mut l, -2.0 * I * p.a);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let csum = |lv: &[Complex64; 4], z: Complex64| -> Result<CVal> {
            let a = crate::adops::f_r_delta(delta, lv, z, &p, &pol)?;
            let b = crate::adops::f_r_delta(delta, lv, -z, &p, &pol)?;
            Ok(a + b)
        };
        let mut vals = Vec::new();
        for (z, y) in sample_pairs(&mut rng, 8) {
            let base = csum(&l, z)?;
            if !base.flagged {
                vals.push(base.v);
            }
            for img in [phi1(&l), phi2(&l)] {
                let v = csum(&img, y)?;
                if !v.flagged {
                    vals.push(v.v);
                }
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
    Ok(ctx.report("kernel.identity_r_mu1", worst, 1e-7))
}

/// The normalized-gamma pairing: the two reflections intertwine the
/// operator through the two kernels; which kernel goes with which
/// reflection depends on the half-integer branch of the normalization.
pub fn check_kernel_corollary(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x34);
    let l = random_l(&mut rng);
    let sum: Complex64 = l.iter().sum();
    let g0 = I * p.a + sum / 2.0;
    // Normalize Re into [0, 1/2) by half-integer shifts.
    let shift = (2.0 * g0.re).floor() / 2.0;
    let gamma_hat = g0 - shift;
    let gamma_tilde = gamma_hat + 0.5;
    let parity = ((2.0 * shift).round() as i64).rem_euclid(2);
    type Map = fn(&[Complex64; 4]) -> [Complex64; 4];
    let (map_hat, map_tilde): (Map, Map) = if parity == 0 {
        (phi1, phi2)
    } else {
        (phi2, phi1)
    };
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        for (gamma, map) in [(gamma_hat, map_hat), (gamma_tilde, map_tilde)] {
            let k = map(&l);
            worst = worst.max(kernel_identity_r_residual(ctx, delta, &l, gamma, &k)?);
        }
    }
    Ok(ctx
        .report("kernel.corollary", worst, 1e-7)
        .with_detail(format!("gamma_hat={} branch={parity}", fmt_c(gamma_hat))))
}

/// One side of the second-order kernel identity for the eight-coupling
/// operator.
fn ad_on_kernel(
    delta: Sign,
    c: &VanDiejenCouplings,
    gamma: Complex64,
    own: Complex64,
    other: Complex64,
    in_z: bool,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<(CVal, f64)> {
    let step = I * params.a_delta(delta.flip());
    let kernel = |w: Complex64| -> Result<CVal> {
        if in_z {
            gamma_kernel(gamma, w, other, params, policy)
        } else {
            gamma_kernel(gamma, other, w, params, policy)
        }
    };
    let mut sum = CVal::new(c64(0.0, 0.0));
    let mut scale: f64 = 0.0;
    for s in [1.0, -1.0] {
        let v = v_delta(delta, &c.h, s * own, params, policy)?;
        let term = v * kernel(own - s * step)?;
        scale = scale.max(term.norm());
        sum = sum + term;
    }
    let vb = vb_delta(delta, c, own, params, policy)?;
    let term = vb * kernel(own)?;
    scale = scale.max(term.norm());
    sum = sum + term;
    Ok((sum, scale))
}

pub fn check_kernel_identity_d_default(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x35);
    let h = random_couplings(ctx, &mut rng);
    let hsum: Complex64 = h.iter().sum();
    let g1 = I * p.a + hsum / 4.0;
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        for (gamma, img) in [(g1, chi1(&h)), (g1 + 0.5, chi2(&h))] {
            let ch = VanDiejenCouplings::new(h);
            let ci = VanDiejenCouplings::new(img);
            let mut used = 0;
            for (z, y) in sample_pairs(&mut rng, 14) {
                let (lhs, s1) = ad_on_kernel(delta, &ch, gamma, z, y, true, &p, &pol)?;
                let (rhs, s2) = ad_on_kernel(delta, &ci, gamma, y, z, false, &p, &pol)?;
                if lhs.flagged || rhs.flagged {
                    continue;
                }
                used += 1;
                worst = worst.max((lhs.v - rhs.v).norm() / (1.0 + s1.max(s2)));
            }
            if used < 6 {
                return Err(Error::DegenerateSamples);
            }
        }
    }
    Ok(ctx.report("kernel.identity_d", worst, 1e-6))
}

/// The sum of the four residue products is invariant under both coupling
/// reflections.
pub fn check_e8_sum(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x36);
    let h = random_couplings(ctx, &mut rng);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let total = |hv: &[Complex64; 8]| -> Result<Complex64> {
            let mut s = c64(0.0, 0.0);
            for t in 0..4 {
                s += p_t_delta(delta, t, hv, &p, &pol)?;
            }
            Ok(s)
        };
        let base = total(&h)?;
        for img in [chi1(&h), chi2(&h)] {
            worst = worst.max(rel_residual(total(&img)?, base));
        }
    }
    Ok(ctx.report("kernel.e8_sum", worst, 1e-8))
}

/// The squared first-order operator agrees with the eight-coupling operator
/// up to an additive constant: the shift coefficients match exactly and the
/// zero-shift coefficients differ by a z-independent constant.
pub fn check_ar2_product(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x37);
    let zs = ctx.sample_points(&mut rng, ctx.samples);
    let target = -4.0 * p.nu - 2.0 * I * p.a;
    let mut worst: f64 = 0.0;
    let mut constant = c64(0.0, 0.0);
    for delta in [Sign::Plus, Sign::Minus] {
        let mut l = random_l(&mut rng);
        let mut m = random_l(&mut rng);
        pin_sum(&mut l, target);
        pin_sum(&mut m, target);
        for (lv, mv) in [(l, m), (m, l)] {
            let a2 = a_r_delta(delta, lv, &p)?.compose(&a_r_delta(delta, mv, &p)?)?;
            let h = h_from_lm(delta, &lv, &mv, &p)?;
            let ad = van_diejen(delta, &VanDiejenCouplings::new(h), &p)?.refine_step(2);
            let mut diffs = Vec::new();
            for &z in &zs {
                for j in [-2i64, 2] {
                    let a = a2.coeff_eval(j, z);
                    let b = ad.coeff_eval(j, z);
                    if a.flagged || b.flagged {
                        continue;
                    }
                    worst = worst.max(rel_residual(a.v, b.v));
                }
                let a = a2.coeff_eval(0, z);
                let b = ad.coeff_eval(0, z);
                if !a.flagged && !b.flagged {
                    diffs.push(a.v - b.v);
                }
            }
            if diffs.len() < 4 {
                return Err(Error::DegenerateSamples);
            }
            let mean: Complex64 = diffs.iter().sum::<Complex64>() / diffs.len() as f64;
            for d in &diffs {
                worst = worst.max((d - mean).norm() / (1.0 + mean.norm()));
            }
            constant = mean;
        }
    }
    Ok(ctx
        .report("vandiejen.ar2_product", worst, 1e-7)
        .with_detail(format!("c_delta={}", fmt_c(constant))))
}

/// With the marked special couplings in the second half, the additive
/// coefficient vanishes identically and the shift coefficient collapses to
/// a four-factor quotient.
pub fn check_special_reduction(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x38);
    let first = random_l(&mut rng);
    let h = special_reduction_h(first, &p);
    let couplings = VanDiejenCouplings::new(h);
    let delta = Sign::Plus;
    let iam = I * p.a_minus;
    let iad = I * p.a_plus;
    // Four of the eight numerator factors recombine through the duplication
    // formula into the second denominator factor, up to the shift multiplier
    // of R_+. Coefficient-wise this leaves an exact exponential gauge:
    //   V(h;z) = -exp(4 i pi z) exp(2 pi a_-) * red(z),
    // and the gauge is a conjugation: with W(z) = exp(pi (2z^2 + z)/a_-),
    // the full operator equals W . A_red . W^{-1}. The additive coefficient
    // vanishes identically for these couplings.
    let reduced = |z: Complex64| -> Result<CVal> {
        let den = r_delta(delta, 2.0 * z + iad / 2.0, &p, &pol)?;
        let mut num = c64(1.0, 0.0);
        for hn in first.iter() {
            num *= r_delta(delta, z - hn - iam / 2.0, &p, &pol)?;
        }
        if den.norm() < 1e-10 {
            return Ok(CVal::flagged(c64(0.0, 0.0)));
        }
        Ok(CVal::new(num / den))
    };
    let gauge = |z: Complex64| (2.0 * PI * I * (2.0 * z + 0.5 - iam)).exp();
    let w_conj = |z: Complex64| (PI * (2.0 * z * z + z) / p.a_minus).exp();
    let f: Evaluator = Arc::new(|z| CVal::new((0.31 * z).exp() + (2.0 * PI * z).cos()));
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for &z in &ctx.sample_points(&mut rng, 2 * ctx.samples) {
        let full = v_delta(delta, &h, z, &p, &pol)?;
        let red = reduced(z)?;
        let vb = vb_delta(delta, &couplings, z, &p, &pol)?;
        if full.flagged || red.flagged || vb.flagged {
            continue;
        }
        used += 1;
        worst = worst.max(rel_residual(full.v, gauge(z) * red.v));
        worst = worst.max(vb.norm() / (1.0 + full.norm()));
        // Operator-level conjugation at the same point.
        let full_m = v_delta(delta, &h, -z, &p, &pol)?;
        let red_m = reduced(-z)?;
        if full_m.flagged || red_m.flagged {
            continue;
        }
        let lhs = full.v * f(z - iam).v + full_m.v * f(z + iam).v + vb.v * f(z).v;
        let rhs = w_conj(z)
            * (red.v * f(z - iam).v / w_conj(z - iam) + red_m.v * f(z + iam).v / w_conj(z + iam));
        worst = worst.max(rel_residual(lhs, rhs));
    }
    if used < 6 {
        return Err(Error::DegenerateSamples);
    }
    Ok(ctx
        .report("vandiejen.special_reduction", worst, 1e-7)
        .with_detail(format!("samples={used}")))
}

/// The two modular copies of the eight-coupling operator commute whenever
/// both coupling vectors produce the same multiplier; the first-order
/// modular copies do not.
pub fn check_commuting(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let mut rng = ctx.rng(0x39);
    let h1 = random_couplings(ctx, &mut rng);
    let h2 = random_couplings(ctx, &mut rng);
    let a_plus = van_diejen(Sign::Plus, &VanDiejenCouplings::new(h1), &p)?;
    let a_minus = van_diejen(Sign::Minus, &VanDiejenCouplings::new(h2), &p)?;
    let f: Evaluator = Arc::new(|z| CVal::new((0.23 * z).exp() + (2.0 * PI * z).cos()));
    let pm = a_plus.apply(a_minus.apply(f.clone()));
    let mp = a_minus.apply(a_plus.apply(f.clone()));
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for &z in &ctx.sample_points(&mut rng, 2 * ctx.samples) {
        let a = pm(z);
        let b = mp(z);
        if a.flagged || b.flagged {
            continue;
        }
        used += 1;
        worst = worst.max(rel_residual(a.v, b.v));
    }
    if used < ctx.samples {
        return Err(Error::DegenerateSamples);
    }
    // Control: the first-order modular copies with a shared multiplier do
    // not commute.
    let target = -4.0 * p.nu - 2.0 * I * p.a;
    let mut l1 = random_l(&mut rng);
    let mut l2 = random_l(&mut rng);
    pin_sum(&mut l1, target);
    pin_sum(&mut l2, target);
    let r_plus = a_r_delta(Sign::Plus, l1, &p)?;
    let r_minus = a_r_delta(Sign::Minus, l2, &p)?;
    let rp = r_plus.apply(r_minus.apply(f.clone()));
    let rm = r_minus.apply(r_plus.apply(f.clone()));
    let mut control: f64 = 0.0;
    for &z in &ctx.sample_points(&mut rng, ctx.samples) {
        let a = rp(z);
        let b = rm(z);
        if a.flagged || b.flagged {
            continue;
        }
        control = control.max(rel_residual(a.v, b.v));
    }
    let mut rep = ctx
        .report("vandiejen.commuting", worst, 1e-7)
        .with_detail(format!("control={control:.2e}"));
    if control < 1e-3 {
        rep = rep.failed(format!("control commutator too small: {control:.2e}"));
    }
    Ok(rep)
}

/// The additive coefficient must not depend on the free parameter entering
/// its construction.
pub fn check_xi_independence(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x3a);
    let h = random_couplings(ctx, &mut rng);
    let base = VanDiejenCouplings::new(h);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        for xi in [c64(0.089, -0.044), c64(0.233, 0.061)] {
            let other = base.with_xi(xi);
            for &z in &ctx.sample_points(&mut rng, ctx.samples) {
                let a = vb_delta(delta, &base, z, &p, &pol)?;
                let b = vb_delta(delta, &other, z, &p, &pol)?;
                if a.flagged || b.flagged {
                    continue;
                }
                worst = worst.max(rel_residual(a.v, b.v));
            }
        }
    }
    Ok(ctx.report("vandiejen.xi_independence", worst, 1e-8))
}
