//! The identity harness: every checkable equation, residue condition, and
//! dimension claim becomes a named check producing a [`VerificationReport`].
//! Checks are pure functions of a [`CheckContext`] (parameters, seed,
//! tolerance), so replays are deterministic.

pub mod tensors;
pub mod kernel;
pub mod sklyanin;
pub mod specfun_checks;

use crate::coeffspace::Evaluator;
use crate::error::{Error, Result};
use crate::params::{c64, EllipticParams, TruncationPolicy};
use crate::report::{fmt_c, VerificationReport};
use crate::value::CVal;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Shared inputs of every check.
#[derive(Debug, Clone, Copy)]
pub struct CheckContext {
    pub params: EllipticParams,
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
}

impl CheckContext {
    pub fn new(params: EllipticParams) -> Self {
        CheckContext {
            params,
            seed: 7,
            tol: 1e-7,
            samples: 9,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Seeded generator; the salt decorrelates different checks run from the
    /// same context without breaking replay.
    pub fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy::for_params(&self.params)
    }

    pub fn params_echo(&self) -> String {
        format!(
            "tau={} eta={} nu={}",
            fmt_c(self.params.tau),
            fmt_c(self.params.eta),
            fmt_c(self.params.nu)
        )
    }

    pub fn report(&self, name: &str, residual: f64, tol: f64) -> VerificationReport {
        VerificationReport::from_residual(name, &self.params_echo(), self.seed, residual, tol)
    }

    /// Random points kept away from the pole candidates `z + l eta in
    /// Lambda/2` (|l| small) by rejection sampling.
    pub fn sample_points(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(n);
        let mut guard = 0;
        while out.len() < n && guard < 200 * n {
            guard += 1;
            let z = c64(
                rng.gen_range(-0.45..0.45),
                rng.gen_range(0.03..0.42) * self.params.tau.im,
            );
            if pole_distance(z, &self.params, 3) > 0.035 {
                out.push(z);
            }
        }
        out
    }

    /// A random zero-sum offset vector (V_1 coefficient data).
    pub fn random_zero_sum(&self, rng: &mut ChaCha8Rng) -> [Complex64; 4] {
        let mut a = [c64(0.0, 0.0); 4];
        for an in a.iter_mut().take(3) {
            *an = c64(rng.gen_range(-0.35..0.35), rng.gen_range(-0.25..0.25));
        }
        a[3] = -(a[0] + a[1] + a[2]);
        a
    }

    /// A seeded even entire test function: a truncated cosine series.
    pub fn even_test_function(&self, rng: &mut ChaCha8Rng) -> Evaluator {
        let coeffs: Vec<Complex64> = (0..=4)
            .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Arc::new(move |z| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &a) in coeffs.iter().enumerate() {
                acc += a * (2.0 * std::f64::consts::PI * (n as f64) * z).cos();
            }
            CVal::new(acc)
        })
    }
}

/// Distance from `z` to the nearest point `w - l eta` with `w in Lambda/2`
/// and `|l| <= lmax`, in the cell metric of the lattice.
pub fn pole_distance(z: Complex64, params: &EllipticParams, lmax: i64) -> f64 {
    let tau = params.tau;
    let mut best = f64::INFINITY;
    for l in -lmax..=lmax {
        let w = z + (l as f64) * params.eta;
        // Cell coordinates w = x + y tau; nearest half-lattice point has
        // coordinates (m/2, n/2).
        let y = w.im / tau.im;
        let x = w.re - y * tau.re;
        let dx = x - (2.0 * x).round() / 2.0;
        let dy = y - (2.0 * y).round() / 2.0;
        let d = (dx + dy * tau.re).hypot(dy * tau.im);
        if d < best {
            best = d;
        }
    }
    best
}

/// Reject parameter bundles whose eta is numerically close to a low-order
/// rational lattice combination (the operational stand-in for the lattice
/// irrationality assumption).
pub fn require_generic_eta(params: &EllipticParams, max_den: i64) -> Result<()> {
    if params.eta_rational_distance(max_den) < 0.02 {
        return Err(Error::DegenerateEta);
    }
    Ok(())
}

type CheckFn = fn(&CheckContext) -> Result<VerificationReport>;

/// The full registry, ordered by name. The CLI consumes this table.
pub fn all_checks() -> Vec<(&'static str, CheckFn)> {
    let mut v: Vec<(&'static str, CheckFn)> = vec![
        ("adops.coefficient_recurrence", sklyanin::check_coefficient_recurrence),
        ("adops.composition", sklyanin::check_composition),
        ("tensors.b_relations_half", tensors::check_b_relations_half),
        ("tensors.feta_vanishing", tensors::check_feta_vanishing),
        ("tensors.imap", tensors::check_imap),
        ("tensors.image_rank", tensors::check_image_rank),
        ("tensors.relation_rank", tensors::check_relation_rank),
        ("casimir.operators", tensors::check_casimirs),
        ("coeffspace.dimensions", specfun_checks::check_dimensions),
        ("coeffspace.quasiperiodicity", specfun_checks::check_coeff_quasiperiodicity),
        ("coeffspace.residue_pairing", specfun_checks::check_residue_pairing),
        ("kernel.corollary", kernel::check_kernel_corollary),
        ("kernel.e8_sum", kernel::check_e8_sum),
        ("kernel.identity_d", kernel::check_kernel_identity_d_default),
        ("kernel.identity_r", kernel::check_kernel_identity_r_default),
        ("kernel.identity_r_mu1", kernel::check_kernel_identity_r_mu1),
        ("repn.casimir_matrices", crate::repn::check_casimir_matrices),
        ("repn.homomorphism", crate::repn::check_homomorphism),
        ("repn.matrix_relations", crate::repn::check_matrix_relations_default),
        ("repn.mixed_module", crate::repn::check_mixed_module),
        ("repn.modular_invariance", crate::repn::check_modular_invariance_default),
        ("repn.module_invariance", crate::repn::check_module_invariance),
        ("repn.mu1_constants", crate::repn::check_mu1_constants),
        ("sklyanin.constants_in_v2", sklyanin::check_constants_in_v2),
        ("sklyanin.eta_quasiperiodicity", sklyanin::check_eta_quasiperiodicity_default),
        ("sklyanin.h_holomorphy", sklyanin::check_h_holomorphy_default),
        ("sklyanin.j_ellipticity", sklyanin::check_j_ellipticity),
        ("sklyanin.m0_invariance", sklyanin::check_m0_invariance),
        ("sklyanin.relations", sklyanin::check_sklyanin_relations_default),
        ("sklyanin.relations_scaled", sklyanin::check_sklyanin_relations_scaled),
        ("sklyanin.type_perturbed", sklyanin::check_type_perturbed),
        ("sklyanin.type_threefold", sklyanin::check_type_threefold),
        ("sklyanin.type_trivial", sklyanin::check_type_trivial),
        ("sklyanin.type_twofold", sklyanin::check_type_twofold),
        ("specfun.gamma_difference", specfun_checks::check_gamma_difference),
        ("specfun.gamma_reflection", specfun_checks::check_gamma_reflection),
        ("specfun.r_difference", specfun_checks::check_r_difference),
        ("specfun.r_duplication", specfun_checks::check_r_duplication),
        ("specfun.theta_duplication", specfun_checks::check_theta_duplication),
        ("specfun.theta_quasiperiodicity", specfun_checks::check_theta_quasiperiodicity),
        ("specfun.theta_r_bridge", specfun_checks::check_theta_r_bridge),
        ("specfun.theta_three_term", specfun_checks::check_theta_three_term),
        ("vandiejen.ar2_product", kernel::check_ar2_product),
        ("vandiejen.commuting", kernel::check_commuting),
        ("vandiejen.special_reduction", kernel::check_special_reduction),
        ("vandiejen.type", sklyanin::check_van_diejen_type_default),
        ("vandiejen.xi_independence", kernel::check_xi_independence),
    ];
    v.sort_by_key(|(name, _)| *name);
    v
}

/// Run one named check.
pub fn run_check(name: &str, ctx: &CheckContext) -> Result<VerificationReport> {
    for (n, f) in all_checks() {
        if n == name {
            return f(ctx);
        }
    }
    Err(Error::UnknownCheck(name.to_string()))
}

/// Run every registered check, in name order. Infrastructure errors become
/// failed reports rather than aborting the sweep.
pub fn run_all(ctx: &CheckContext) -> Vec<VerificationReport> {
    all_checks()
        .into_iter()
        .map(|(name, f)| match f(ctx) {
            Ok(r) => r,
            Err(e) => ctx
                .report(name, f64::INFINITY, ctx.tol)
                .failed(format!("error: {e}")),
        })
        .collect()
}
