//! The tensor-square picture: the quadratic theta identity behind the
//! generator relations, the induced operator on products, its kernel and
//! image dimensions, the Casimir images, and the half-period degeneration.

use super::sklyanin::a_f_operator;
use super::CheckContext;
use crate::adops::{sklyanin_generator, sklyanin_offsets, sklyanin_prefactor, DifferenceOperator};
use crate::coeffspace::POLE_FLAG_EPS;
use crate::error::{Error, Result};
use crate::linalg::rank_with_gap;
use crate::params::{c64, EllipticParams, TruncationPolicy, I};
use crate::report::VerificationReport;
use crate::specfun::{theta1, theta_prod, theta_variant};
use crate::value::{rel_residual, CVal};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::sync::Arc;

/// A function of two variables destined for [`tensor_to_operator`].
pub type TensorFn = Arc<dyn Fn(Complex64, Complex64) -> CVal + Send + Sync>;

/// `theta(z + alpha, z + beta, z + gamma, z - alpha - beta - gamma)`, the
/// degree-four building block.
fn quad(
    alpha: Complex64,
    beta: Complex64,
    gamma: Complex64,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    theta_prod(z, &[alpha, beta, gamma, -alpha - beta - gamma], params, policy)
}

/// The antisymmetrized two-variable combination whose specializations span
/// the relation kernel. Also reports the scale of the two products so
/// callers can form relative residuals.
#[allow(clippy::too_many_arguments)]
pub fn f_eta(
    a: Complex64,
    b: Complex64,
    c1: Complex64,
    c2: Complex64,
    z1: Complex64,
    z2: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<(Complex64, f64)> {
    let u = params.eta / 2.0;
    let t1 = quad(a - u, b - u, c1 + u, z1, params, policy)?
        * quad(a + u, b + u, c2 - u, z2, params, policy)?;
    let t2 = quad(a - u, b - u, c2 + u, z1, params, policy)?
        * quad(a + u, b + u, c1 - u, z2, params, policy)?;
    Ok((t1 - t2, t1.norm().max(t2.norm())))
}

/// The operator induced on a two-variable function: shift coefficients
/// `K(z - nu, z - nu + eta) / theta(2z, 2z + 2 eta)` (and the reflection),
/// plus the additive coefficient from the mixed evaluations. Step `eta`,
/// indices -2, 0, 2.
pub fn tensor_to_operator(
    kernel: TensorFn,
    nu: Complex64,
    params: &EllipticParams,
) -> DifferenceOperator {
    let policy = TruncationPolicy::for_params(params);
    let eta = params.eta;
    let p = *params;
    let shift = {
        let kernel = kernel.clone();
        move |z: Complex64| -> CVal {
            let num = kernel(z - nu, z - nu + eta);
            let d1 = theta1(2.0 * z, &p, &policy).unwrap_or(c64(0.0, 0.0));
            let d2 = theta1(2.0 * z + 2.0 * eta, &p, &policy).unwrap_or(c64(0.0, 0.0));
            CVal {
                v: num.v / (d1 * d2),
                flagged: num.flagged || d1.norm().min(d2.norm()) < POLE_FLAG_EPS,
            }
        }
    };
    let up = {
        let shift = shift.clone();
        Arc::new(move |z: Complex64| shift(z))
    };
    let down = Arc::new(move |z: Complex64| shift(-z));
    let zero = Arc::new(move |z: Complex64| -> CVal {
        // The bracket is odd under z -> -z; the odd outer denominator makes
        // the whole additive coefficient even.
        let d0 = theta1(2.0 * z, &p, &policy).unwrap_or(c64(0.0, 0.0));
        let mut flagged = d0.norm() < POLE_FLAG_EPS;
        let mut acc = CVal::new(c64(0.0, 0.0));
        for s in [1.0, -1.0] {
            let num = kernel(s * z - nu, -s * z - nu - eta);
            let den = theta1(-2.0 * s * z - 2.0 * eta, &p, &policy).unwrap_or(c64(0.0, 0.0));
            flagged |= num.flagged || den.norm() < POLE_FLAG_EPS;
            acc = acc + num * (s / den);
        }
        CVal {
            v: acc.v / d0,
            flagged,
        }
    });
    DifferenceOperator::new(eta)
        .with_term(2, up)
        .with_term(-2, down)
        .with_term(0, zero)
}

fn random_offset<R: Rng>(rng: &mut R) -> Complex64 {
    c64(rng.gen_range(-0.3..0.3), rng.gen_range(-0.1..0.1))
}

fn quad_tensor(
    a: Complex64,
    b: Complex64,
    c1: Complex64,
    c2: Complex64,
    antisym: bool,
    params: &EllipticParams,
) -> TensorFn {
    let p = *params;
    let pol = TruncationPolicy::for_params(params);
    Arc::new(move |z1, z2| {
        let u = p.eta / 2.0;
        let t1 = quad(a - u, b - u, c1 + u, z1, &p, &pol).unwrap_or(c64(0.0, 0.0))
            * quad(a + u, b + u, c2 - u, z2, &p, &pol).unwrap_or(c64(0.0, 0.0));
        if !antisym {
            return CVal::new(t1);
        }
        let t2 = quad(a - u, b - u, c2 + u, z1, &p, &pol).unwrap_or(c64(0.0, 0.0))
            * quad(a + u, b + u, c1 - u, z2, &p, &pol).unwrap_or(c64(0.0, 0.0));
        CVal::new(t1 - t2)
    })
}

/// The quadratic identity: the combination vanishes identically on the
/// shifted diagonal in both reflections, and the induced operator
/// annihilates it coefficient by coefficient.
pub fn check_feta_vanishing(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x61);
    let mut worst_curve: f64 = 0.0;
    for _ in 0..24 {
        let (a, b, c1, c2) = (
            random_offset(&mut rng),
            random_offset(&mut rng),
            random_offset(&mut rng),
            random_offset(&mut rng),
        );
        let z = c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.1..0.1));
        for s in [1.0, -1.0] {
            let (v, scale) = f_eta(a, b, c1, c2, s * z - p.nu, s * z - p.nu + p.eta, &p, &pol)?;
            worst_curve = worst_curve.max(v.norm() / (1.0 + scale));
        }
    }
    // Operator annihilation: every coefficient of the image of the
    // antisymmetrized tensor vanishes, measured against the same
    // coefficient of its non-antisymmetrized half.
    let mut worst_op: f64 = 0.0;
    for _ in 0..4 {
        let (a, b, c1, c2) = (
            random_offset(&mut rng),
            random_offset(&mut rng),
            random_offset(&mut rng),
            random_offset(&mut rng),
        );
        let op = tensor_to_operator(quad_tensor(a, b, c1, c2, true, &p), p.nu, &p);
        let op_ref = tensor_to_operator(quad_tensor(a, b, c1, c2, false, &p), p.nu, &p);
        for &z in &ctx.sample_points(&mut rng.clone(), ctx.samples) {
            for j in [-2i64, 0, 2] {
                let c = op.coeff_eval(j, z);
                let r = op_ref.coeff_eval(j, z);
                if c.flagged || r.flagged {
                    continue;
                }
                worst_op = worst_op.max(c.norm() / (1.0 + r.norm()));
            }
        }
    }
    Ok(ctx
        .report("tensors.feta_vanishing", worst_curve.max(worst_op / 10.0), 1e-9)
        .with_detail(format!("curve={worst_curve:.2e} operator={worst_op:.2e}")))
}

/// The relation kernel is six-dimensional: random specializations of the
/// combination, sampled on a grid, have numeric rank 6.
pub fn check_relation_rank(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x62);
    let rows = 20;
    let cols = 30;
    let pts: Vec<(Complex64, Complex64)> = (0..cols)
        .map(|_| {
            (
                c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.12..0.12)),
                c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.12..0.12)),
            )
        })
        .collect();
    let mut m = DMatrix::from_element(rows, cols, c64(0.0, 0.0));
    for i in 0..rows {
        let (a, b, c1, c2) = (
            random_offset(&mut rng),
            random_offset(&mut rng),
            random_offset(&mut rng),
            random_offset(&mut rng),
        );
        for (j, &(z1, z2)) in pts.iter().enumerate() {
            m[(i, j)] = f_eta(a, b, c1, c2, z1, z2, &p, &pol)?.0;
        }
    }
    let (rank, gap) = rank_with_gap(&m, 1e-8);
    if rank != 6 {
        return Ok(ctx
            .report("tensors.relation_rank", f64::INFINITY, 1e-2)
            .failed(format!("kernel rank {rank} != 6 (gap {gap:.1e})")));
    }
    if gap < 1e2 {
        return Err(Error::RankAmbiguous);
    }
    Ok(ctx
        .report("tensors.relation_rank", 1.0 / gap, 1e-2)
        .with_detail(format!("rank=6 gap={gap:.1e}")))
}

/// A degree-four basis element `theta(z - p, z - q, z - r, z + p + q + r)`.
fn basis_element(
    offsets: [Complex64; 3],
    params: &EllipticParams,
) -> Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync> {
    let p = *params;
    let pol = TruncationPolicy::for_params(params);
    Arc::new(move |z| {
        let s = offsets[0] + offsets[1] + offsets[2];
        theta_prod(z, &[-offsets[0], -offsets[1], -offsets[2], s], &p, &pol)
            .unwrap_or(c64(0.0, 0.0))
    })
}

/// The induced operator on the sixteen product-basis tensors spans a
/// nine-dimensional space of difference operators.
pub fn check_image_rank(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let mut rng = ctx.rng(0x63);
    let es: Vec<_> = (0..4)
        .map(|_| {
            let offsets = [
                random_offset(&mut rng),
                random_offset(&mut rng),
                random_offset(&mut rng),
            ];
            basis_element(offsets, &p)
        })
        .collect();
    let zs = ctx.sample_points(&mut rng, 12);
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for ei in &es {
        for ej in &es {
            let (a, b) = (ei.clone(), ej.clone());
            let tensor: TensorFn = Arc::new(move |z1, z2| CVal::new(a(z1) * b(z2)));
            let op = tensor_to_operator(tensor, p.nu, &p);
            let mut row = Vec::with_capacity(3 * zs.len());
            for &z in &zs {
                for j in [-2i64, 0, 2] {
                    let c = op.coeff_eval(j, z);
                    if c.flagged {
                        return Err(Error::DegenerateSamples);
                    }
                    row.push(c.v);
                }
            }
            rows.push(row);
        }
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let (rank, gap) = rank_with_gap(&m, 1e-8);
    if rank != 9 {
        return Ok(ctx
            .report("tensors.image_rank", f64::INFINITY, 1e-2)
            .failed(format!("image rank {rank} != 9 (gap {gap:.1e})")));
    }
    if gap < 1e2 {
        return Err(Error::RankAmbiguous);
    }
    Ok(ctx
        .report("tensors.image_rank", 1.0 / gap, 1e-2)
        .with_detail(format!("rank=9 gap={gap:.1e}")))
}

/// The two Casimir tensors map to explicit constants times the identity.
pub fn check_casimirs(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let k0: TensorFn = {
        let (pp, pol2) = (p, pol);
        Arc::new(move |z1, z2| {
            let t = theta1(z1 + z2, &pp, &pol2).unwrap_or(c64(0.0, 0.0));
            let v = theta1(z1 - z2 + pp.eta, &pp, &pol2).unwrap_or(c64(0.0, 0.0))
                * theta1(z1 - z2 - pp.eta, &pp, &pol2).unwrap_or(c64(0.0, 0.0))
                * t
                * t;
            CVal::new(2.0 * v)
        })
    };
    let k2: TensorFn = {
        let (pp, pol2) = (p, pol);
        Arc::new(move |z1, z2| {
            let v = theta1(z1 - z2 + pp.eta, &pp, &pol2).unwrap_or(c64(0.0, 0.0))
                * theta1(z1 - z2 - pp.eta, &pp, &pol2).unwrap_or(c64(0.0, 0.0))
                * theta1(z1 + z2 + 2.0 * pp.eta, &pp, &pol2).unwrap_or(c64(0.0, 0.0))
                * theta1(z1 + z2, &pp, &pol2).unwrap_or(c64(0.0, 0.0));
            CVal::new(2.0 * v)
        })
    };
    let t0 = {
        let th = theta1(2.0 * p.nu + p.eta, &p, &pol)?;
        4.0 * th * th
    };
    let t2 = 4.0 * theta1(2.0 * p.nu, &p, &pol)? * theta1(2.0 * p.nu + 2.0 * p.eta, &p, &pol)?;
    let mut rng = ctx.rng(0x64);
    let zs = ctx.sample_points(&mut rng, ctx.samples);
    let mut worst: f64 = 0.0;

    // Primary route: the central quadratic combinations of the generators
    // composed as operators. The second one weights the three non-identity
    // generators by theta-variant ratios at 2 eta.
    let d: Vec<DifferenceOperator> =
        (0..4).map(|t| sklyanin_generator(t, &p)).collect::<Result<_>>()?;
    let zero = c64(0.0, 0.0);
    let wk: Vec<Complex64> = (1..4u8)
        .map(|k| {
            let num = theta_variant(k + 1, 2.0 * p.eta, &p, &pol)?
                * theta_variant(k + 1, zero, &p, &pol)?;
            let den = theta_variant(k + 1, p.eta, &p, &pol)?;
            Ok(num / (den * den))
        })
        .collect::<Result<_>>()?;
    let mut k0_op = d[0].compose(&d[0])?;
    let mut k2_op = d[1].compose(&d[1])?.scale(wk[0]);
    for k in 1..4usize {
        k0_op = k0_op.add(&d[k].compose(&d[k])?)?;
        if k > 1 {
            k2_op = k2_op.add(&d[k].compose(&d[k])?.scale(wk[k - 1]))?;
        }
    }
    for (op, target) in [(&k0_op, t0), (&k2_op, t2)] {
        for &z in &zs {
            let up = op.coeff_eval(2, z);
            let dn = op.coeff_eval(-2, z);
            let c0 = op.coeff_eval(0, z);
            if up.flagged || dn.flagged || c0.flagged {
                continue;
            }
            worst = worst.max(up.norm() / (1.0 + target.norm()));
            worst = worst.max(dn.norm() / (1.0 + target.norm()));
            worst = worst.max((c0.v - target).norm() / (1.0 + target.norm()));
        }
    }

    // Secondary route: the two-variable theta products. The generator sum
    // Sum_t I_t(z1) I_t(z2) equals minus the first product (the third slot
    // carries a factor i, so it enters the sum with a minus), and the
    // assembled operators come out as the matching constants.
    let scale_t: Vec<Complex64> = (0..4u8)
        .map(|t| {
            let s = theta_variant(t + 1, p.eta, &p, &pol)?;
            Ok(if t == 2 { I * s } else { s })
        })
        .collect::<Result<_>>()?;
    let mut tensor_worst: f64 = 0.0;
    for _ in 0..6 {
        let z1 = c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.1..0.1));
        let z2 = c64(rng.gen_range(-0.4..0.4), rng.gen_range(-0.1..0.1));
        let mut sum = zero;
        for t in 0..4u8 {
            sum += scale_t[t as usize]
                * scale_t[t as usize]
                * theta_variant(t + 1, 2.0 * z1, &p, &pol)?
                * theta_variant(t + 1, 2.0 * z2, &p, &pol)?;
        }
        tensor_worst = tensor_worst.max(rel_residual(sum, -k0(z1, z2).v));
    }
    worst = worst.max(tensor_worst);
    // The tensor-route constants carry a sign flip relative to the operator
    // route (same i-squared source), and the second product lands on the
    // nu-shifted argument pair.
    let t2_tensor =
        -4.0 * theta1(2.0 * p.nu - p.eta, &p, &pol)? * theta1(2.0 * p.nu + p.eta, &p, &pol)?;
    for (kernel, target) in [(k0, -t0), (k2, t2_tensor)] {
        let op = tensor_to_operator(kernel, p.nu, &p);
        for &z in &zs {
            let up = op.coeff_eval(2, z);
            let dn = op.coeff_eval(-2, z);
            let c0 = op.coeff_eval(0, z);
            if up.flagged || dn.flagged || c0.flagged {
                continue;
            }
            worst = worst.max(up.norm() / (1.0 + target.norm()));
            worst = worst.max(dn.norm() / (1.0 + target.norm()));
            worst = worst.max((c0.v - target).norm() / (1.0 + target.norm()));
        }
    }
    Ok(ctx
        .report("casimir.operators", worst, 1e-8)
        .with_detail(format!("tensor_sign_residual={tensor_worst:.3e}")))
}

/// The four generator coefficients, cleared of their common denominator,
/// are single theta functions in disguise.
pub fn check_imap(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let rng = ctx.rng(0x65);
    let eta = p.eta;
    let mut worst: f64 = 0.0;
    for t in 0..4usize {
        let pre = sklyanin_prefactor(t, &p, &pol)?;
        let offsets = sklyanin_offsets(t, &p);
        let scale = match t {
            0 => theta_variant(1, eta, &p, &pol)?,
            1 => theta_variant(2, eta, &p, &pol)?,
            2 => I * theta_variant(3, eta, &p, &pol)?,
            3 => theta_variant(4, eta, &p, &pol)?,
            _ => unreachable!(),
        };
        for &z in &ctx.sample_points(&mut rng.clone(), ctx.samples) {
            let lhs = pre * theta_prod(z - p.nu, &offsets, &p, &pol)?;
            let rhs = scale * theta_variant((t + 1) as u8, 2.0 * (z - p.nu), &p, &pol)?;
            worst = worst.max(rel_residual(lhs, rhs));
        }
    }
    Ok(ctx.report("tensors.imap", worst, 1e-8))
}

/// At the half-period step the four image operators satisfy a split set of
/// vanishing (anti)commutators, while the remaining anticommutator stays
/// bounded away from zero.
pub fn check_b_relations_half(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params.with_eta(c64(0.5, 0.0));
    let pol = TruncationPolicy::for_params(&p);
    let nu = p.nu;
    let ops: Vec<DifferenceOperator> = (0..4usize)
        .map(|t| {
            let pp = p;
            let f: crate::coeffspace::Evaluator = Arc::new(move |z| {
                let num = theta_variant((t + 1) as u8, 2.0 * (z - nu), &pp, &pol)
                    .unwrap_or(c64(0.0, 0.0));
                let den = theta1(2.0 * z, &pp, &pol).unwrap_or(c64(0.0, 0.0));
                CVal {
                    v: num / den,
                    flagged: den.norm() < POLE_FLAG_EPS,
                }
            });
            a_f_operator(f, c64(0.5, 0.0))
        })
        .collect();
    let mut rng = ctx.rng(0x66);
    let zs = ctx.sample_points(&mut rng, ctx.samples);
    let bracket_residual =
        |a: &DifferenceOperator, b: &DifferenceOperator, anti: bool| -> Result<f64> {
            let ab = a.compose(b)?;
            let br = if anti {
                a.anticommutator(b)?
            } else {
                a.commutator(b)?
            };
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            let mut seen = false;
            for &z in &zs {
                for j in br.indices() {
                    let c = br.coeff_eval(j, z);
                    let s = ab.coeff_eval(j, z);
                    if c.flagged || s.flagged {
                        continue;
                    }
                    seen = true;
                    scale = scale.max(s.norm());
                    worst = worst.max(c.norm());
                }
            }
            if !seen {
                return Err(Error::DegenerateSamples);
            }
            Ok(worst / (1.0 + scale))
        };
    // The two split triples that must vanish at the half-period step.
    let vanishing: [(usize, usize, bool); 6] = [
        (0, 2, true),
        (0, 3, true),
        (2, 3, false),
        (1, 2, true),
        (3, 1, true),
        (0, 1, false),
    ];
    let mut worst: f64 = 0.0;
    for &(i, j, anti) in &vanishing {
        worst = worst.max(bracket_residual(&ops[i], &ops[j], anti)?);
    }
    // Control: the one anticommutator that does not collapse.
    let control = bracket_residual(&ops[0], &ops[1], true)?;
    let mut rep = ctx
        .report("tensors.b_relations_half", worst, 1e-8)
        .with_detail(format!("control={control:.2e}"));
    if control < 1e-3 {
        rep = rep.failed(format!("control anticommutator too small: {control:.2e}"));
    }
    Ok(rep)
}
