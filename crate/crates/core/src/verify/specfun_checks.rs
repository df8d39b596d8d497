//! Checks for the special-function layer: theta quasi-periodicity and
//! duplication, the gamma/R difference equations, the theta-to-R bridge,
//! and the coefficient-space dimension and residue-pairing facts.

use super::CheckContext;
use crate::coeffspace::{rank_of_span, residue, Evaluator, ResidueProbe, ThetaRatio};
use crate::error::{Error, Result};
use crate::params::{c64, Sign, I};
use crate::report::VerificationReport;
use crate::specfun::{elliptic_gamma, g_constant, r_delta, theta1};
use crate::value::rel_residual;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

const N_POINTS: usize = 50;

fn random_z<R: Rng>(rng: &mut R, im_scale: f64) -> Complex64 {
    c64(rng.gen_range(-0.5..0.5), rng.gen_range(-im_scale..im_scale))
}

pub fn check_theta_quasiperiodicity(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x51);
    let mut worst: f64 = 0.0;
    for _ in 0..N_POINTS {
        let z = random_z(&mut rng, 0.3 * p.tau.im);
        let th = theta1(z, &p, &pol)?;
        let shift1 = theta1(z + 1.0, &p, &pol)?;
        worst = worst.max(rel_residual(shift1, -th));
        let shift_tau = theta1(z + p.tau, &p, &pol)?;
        let factor = -(-I * PI * p.tau).exp() * (-2.0 * I * PI * z).exp();
        worst = worst.max(rel_residual(shift_tau, factor * th));
    }
    Ok(ctx.report("specfun.theta_quasiperiodicity", worst, 1e-8))
}

pub fn check_theta_duplication(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let g = g_constant(&p, &pol)?;
    let pre = I * (I * PI * p.tau / 4.0).exp() / (g * g * g);
    let mut rng = ctx.rng(0x52);
    let mut worst: f64 = 0.0;
    for _ in 0..N_POINTS {
        let z = random_z(&mut rng, 0.3 * p.tau.im);
        let lhs = theta1(2.0 * z, &p, &pol)?;
        let rhs = pre
            * theta1(z, &p, &pol)?
            * theta1(z + 0.5, &p, &pol)?
            * theta1(z + p.tau / 2.0, &p, &pol)?
            * theta1(z - 0.5 - p.tau / 2.0, &p, &pol)?;
        worst = worst.max(rel_residual(lhs, rhs));
    }
    Ok(ctx.report("specfun.theta_duplication", worst, 1e-8))
}

pub fn check_theta_three_term(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x53);
    let mut worst: f64 = 0.0;
    let pm = |x: Complex64, y: Complex64| -> Result<Complex64> {
        Ok(theta1(x + y, &p, &pol)? * theta1(x - y, &p, &pol)?)
    };
    for _ in 0..N_POINTS {
        let z = random_z(&mut rng, 0.2 * p.tau.im);
        let al = random_z(&mut rng, 0.15);
        let be = random_z(&mut rng, 0.15);
        let ga = random_z(&mut rng, 0.15);
        let t1 = pm(z, al)? * pm(be, ga)?;
        let t2 = pm(z, be)? * pm(ga, al)?;
        let t3 = pm(z, ga)? * pm(al, be)?;
        let scale = t1.norm().max(t2.norm()).max(t3.norm());
        worst = worst.max((t1 + t2 + t3).norm() / (1.0 + scale));
    }
    Ok(ctx.report("specfun.theta_three_term", worst, 1e-8))
}

pub fn check_gamma_reflection(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x54);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for _ in 0..N_POINTS {
        let z = random_z(&mut rng, 0.15);
        let a = elliptic_gamma(z, &p, &pol)?;
        let b = elliptic_gamma(-z, &p, &pol)?;
        if a.flagged || b.flagged {
            continue;
        }
        used += 1;
        worst = worst.max((a.v * b.v - 1.0).norm());
        // The factor set is symmetric in the two nomes: swapping the modular
        // pair must reproduce the same value.
        let swapped = crate::params::EllipticParams::from_modular(p.a_minus, p.a_plus, p.nu)?;
        let c = elliptic_gamma(z, &swapped, &pol)?;
        if !c.flagged {
            worst = worst.max(rel_residual(a.v, c.v));
        }
    }
    if used < 2 * N_POINTS / 3 {
        return Err(Error::DegenerateSamples);
    }
    Ok(ctx.report("specfun.gamma_reflection", worst, 1e-8))
}

pub fn check_gamma_difference(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x55);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let half = I * p.a_delta(delta.flip()) / 2.0;
        let mut used = 0;
        for _ in 0..N_POINTS {
            let z = random_z(&mut rng, 0.1);
            let up = elliptic_gamma(z + half, &p, &pol)?;
            let dn = elliptic_gamma(z - half, &p, &pol)?;
            if up.flagged || dn.flagged || dn.v.norm() < 1e-12 {
                continue;
            }
            used += 1;
            let rhs = r_delta(delta, z, &p, &pol)?;
            worst = worst.max(rel_residual(up.v / dn.v, rhs));
        }
        if used < 2 * N_POINTS / 3 {
            return Err(Error::DegenerateSamples);
        }
    }
    Ok(ctx.report("specfun.gamma_difference", worst, 1e-8))
}

pub fn check_r_difference(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x56);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let half = I * p.a_delta(delta) / 2.0;
        for _ in 0..N_POINTS {
            let z = random_z(&mut rng, 0.15);
            let up = r_delta(delta, z + half, &p, &pol)?;
            let dn = r_delta(delta, z - half, &p, &pol)?;
            if dn.norm() < 1e-10 {
                continue;
            }
            let rhs = -(-2.0 * I * PI * z).exp();
            worst = worst.max(rel_residual(up / dn, rhs));
        }
    }
    Ok(ctx.report("specfun.r_difference", worst, 1e-8))
}

pub fn check_r_duplication(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let mut rng = ctx.rng(0x57);
    let mut worst: f64 = 0.0;
    for delta in [Sign::Plus, Sign::Minus] {
        let quarter = I * p.a_delta(delta) / 4.0;
        for _ in 0..N_POINTS {
            let z = random_z(&mut rng, 0.15);
            let lhs = r_delta(delta, 2.0 * z, &p, &pol)?;
            let rhs = r_delta(delta, z + quarter, &p, &pol)?
                * r_delta(delta, z - quarter, &p, &pol)?
                * r_delta(delta, z + 0.5 + quarter, &p, &pol)?
                * r_delta(delta, z + 0.5 - quarter, &p, &pol)?;
            worst = worst.max(rel_residual(lhs, rhs));
        }
    }
    Ok(ctx.report("specfun.r_duplication", worst, 1e-8))
}

pub fn check_theta_r_bridge(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    p.require_modular()?;
    let pol = ctx.policy();
    let g = g_constant(&p, &pol)?;
    let pre = I * (I * PI * p.tau / 4.0).exp() * g;
    let mut rng = ctx.rng(0x58);
    let mut worst: f64 = 0.0;
    for _ in 0..N_POINTS {
        let z = random_z(&mut rng, 0.2 * p.tau.im);
        let lhs = theta1(z, &p, &pol)?;
        let rhs = pre * (-I * PI * z).exp() * r_delta(Sign::Plus, z - p.tau / 2.0, &p, &pol)?;
        worst = worst.max(rel_residual(lhs, rhs));
    }
    Ok(ctx.report("specfun.theta_r_bridge", worst, 1e-8))
}

pub fn check_dimensions(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let mut rng = ctx.rng(0x59);
    let mut detail = String::new();
    let mut min_gap = f64::INFINITY;
    for k in 1..=3usize {
        let fs: Vec<Evaluator> = (0..5 * 4 * k)
            .map(|_| ThetaRatio::random(k, p.nu, &p, &mut rng).evaluator())
            .collect();
        let pts = ctx.sample_points(&mut rng.clone(), 16 * k + 8);
        let (rank, gap) = rank_of_span(&fs, &pts)?;
        min_gap = min_gap.min(gap);
        detail.push_str(&format!("V{k}:rank={rank}/gap={gap:.1e} "));
        if rank != 4 * k {
            return Ok(ctx
                .report("coeffspace.dimensions", f64::INFINITY, 1e-8)
                .failed(format!("rank {} != {} for order {}", rank, 4 * k, k)));
        }
        if gap < 1e2 {
            return Err(Error::RankAmbiguous);
        }
    }
    Ok(ctx
        .report("coeffspace.dimensions", 1.0 / min_gap, 1e-2)
        .with_detail(detail.trim_end().to_string()))
}

pub fn check_coeff_quasiperiodicity(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let mut rng = ctx.rng(0x5a);
    let mut worst: f64 = 0.0;
    for k in 1..=2usize {
        let f = ThetaRatio::random(k, p.nu, &p, &mut rng);
        let mu_k = f.mu_k();
        for &z in &ctx.sample_points(&mut rng.clone(), 8) {
            let base = f.eval(z);
            let per = f.eval(z + 1.0);
            let quasi = f.eval(z + p.tau);
            if base.flagged || per.flagged || quasi.flagged {
                continue;
            }
            worst = worst.max(rel_residual(per.v, base.v));
            worst = worst.max(rel_residual(quasi.v, mu_k * base.v));
        }
    }
    Ok(ctx.report("coeffspace.quasiperiodicity", worst, 1e-8))
}

/// Residues of the one-step coefficient at the four half-periods pair up:
/// `Res f(z)|_{omega_t} = -e^{lambda_t} Res f(-z)|_{omega_t}`.
pub fn check_residue_pairing(ctx: &CheckContext) -> Result<VerificationReport> {
    let p = ctx.params;
    let mut rng = ctx.rng(0x5b);
    let a = ctx.random_zero_sum(&mut rng);
    let f = ThetaRatio::v1(a, p.nu, &p)?;
    let fwd = f.evaluator();
    let bwd = f.reflected();
    let mut worst: f64 = 0.0;
    for t in 0..4usize {
        let probe = ResidueProbe::with_radius(p.omega(t), 0.04);
        let rp = residue(|z| fwd(z), &probe)?;
        let rm = residue(|z| bwd(z), &probe)?;
        let factor = -p.lambda(t).exp();
        worst = worst.max(rel_residual(rp, factor * rm));
    }
    Ok(ctx.report("coeffspace.residue_pairing", worst, 1e-7))
}
