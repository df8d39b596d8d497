//! Benchmarks for the numeric building blocks: series evaluation, the
//! double-product gamma function, operator assembly and composition, and a
//! module fit.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use skly_core::adops::{sklyanin_generator, van_diejen, VanDiejenCouplings};
use skly_core::params::{c64, EllipticParams, Sign, TruncationPolicy};
use skly_core::repn::{build_theta_module, operator_matrix};
use skly_core::specfun::{elliptic_gamma, r_delta, theta1};
use skly_core::value::CVal;
use skly_core::verify::CheckContext;

fn default_params() -> (EllipticParams, TruncationPolicy) {
    let p = EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.045, 0.21), c64(0.03, 0.0)).unwrap();
    let pol = TruncationPolicy::for_params(&p);
    (p, pol)
}

fn bench_specfun(c: &mut Criterion) {
    let (p, pol) = default_params();
    let z = c64(0.21, 0.08);
    c.bench_function("theta1", |b| {
        b.iter(|| theta1(black_box(z), &p, &pol).unwrap())
    });
    c.bench_function("r_delta_plus", |b| {
        b.iter(|| r_delta(Sign::Plus, black_box(z), &p, &pol).unwrap())
    });
    c.bench_function("elliptic_gamma", |b| {
        b.iter(|| elliptic_gamma(black_box(z), &p, &pol).unwrap())
    });
}

fn bench_operators(c: &mut Criterion) {
    let (p, _) = default_params();
    let d0 = sklyanin_generator(0, &p).unwrap();
    let d1 = sklyanin_generator(1, &p).unwrap();
    let z = c64(0.17, 0.11);
    c.bench_function("generator_coeff_eval", |b| {
        b.iter(|| d0.coeff_eval(1, black_box(z)))
    });
    c.bench_function("compose_and_eval", |b| {
        b.iter(|| {
            let prod = d0.compose(&d1).unwrap();
            prod.coeff_eval(0, black_box(z))
        })
    });
    let f = |w: num_complex::Complex64| CVal::new((0.23 * w).exp());
    c.bench_function("generator_apply_at", |b| {
        b.iter(|| d0.apply_at(&f, black_box(z)))
    });
    let h = [
        c64(0.11, 0.02),
        c64(-0.07, 0.05),
        c64(0.19, -0.03),
        c64(0.02, 0.01),
        c64(0.05, 0.04),
        c64(-0.13, -0.02),
        c64(0.08, 0.03),
        c64(-0.25, -0.1),
    ];
    c.bench_function("van_diejen_assembly_eval", |b| {
        b.iter(|| {
            let op = van_diejen(Sign::Plus, &VanDiejenCouplings::new(h), &p).unwrap();
            op.coeff_eval(-1, black_box(z))
        })
    });
}

fn bench_module_fit(c: &mut Criterion) {
    let (p, _) = default_params();
    let ctx = CheckContext::new(p);
    c.bench_function("theta_module_fit_n1", |b| {
        b.iter(|| {
            let mut rng = ctx.rng(0x7e);
            let nu = skly_core::params::I * p.a_minus / 4.0;
            let pm = p.with_nu(nu);
            let module = build_theta_module(Sign::Plus, 1, &pm, &mut rng).unwrap();
            let op = sklyanin_generator(0, &pm).unwrap();
            operator_matrix(&op, &module).unwrap().fit_residual
        })
    });
}

criterion_group!(benches, bench_specfun, bench_operators, bench_module_fit);
criterion_main!(benches);
