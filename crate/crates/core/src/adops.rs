//! Analytic difference operators: finite sums `sum_j c_j(z) T_{j s}` with
//! `(T_s f)(z) = f(z + s)`, together with the concrete operator families
//! (Sklyanin generators, modular pairs A_{R,delta}, van Diejen operators).

use crate::coeffspace::{Evaluator, ThetaRatio, POLE_FLAG_EPS};
use crate::error::{Error, Result};
use crate::params::{c64, EllipticParams, Sign, TruncationPolicy, I};
use crate::specfun::{g_constant, r_delta, r_delta_prod, theta1};
use crate::value::{rel_residual, CVal};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

/// A difference operator `sum_j c_j(z) T_{j step}`, indexed by the integer
/// shift multiple. The optional `mu_tag` records the per-index multiplier
/// `mu` of the coefficients under the relevant lattice translation
/// (`c_j(z + p) = mu^j c_j(z)`); composition demands matching tags.
#[derive(Clone)]
pub struct DifferenceOperator {
    pub step: Complex64,
    terms: BTreeMap<i64, Evaluator>,
    pub mu_tag: Option<Complex64>,
}

fn steps_match(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-12 * (1.0 + a.norm().max(b.norm()))
}

impl DifferenceOperator {
    pub fn new(step: Complex64) -> Self {
        DifferenceOperator {
            step,
            terms: BTreeMap::new(),
            mu_tag: None,
        }
    }

    /// The identity operator (constant coefficient 1 at shift 0).
    pub fn identity(step: Complex64) -> Self {
        Self::new(step).with_term(0, Arc::new(|_| CVal::new(c64(1.0, 0.0))))
    }

    pub fn with_term(mut self, j: i64, coeff: Evaluator) -> Self {
        self.terms.insert(j, coeff);
        self
    }

    pub fn with_mu_tag(mut self, mu: Complex64) -> Self {
        self.mu_tag = Some(mu);
        self
    }

    pub fn indices(&self) -> Vec<i64> {
        self.terms.keys().copied().collect()
    }

    pub fn coeff(&self, j: i64) -> Option<&Evaluator> {
        self.terms.get(&j)
    }

    /// Coefficient value, zero when the index is absent.
    pub fn coeff_eval(&self, j: i64, z: Complex64) -> CVal {
        match self.terms.get(&j) {
            Some(c) => c(z),
            None => CVal::new(c64(0.0, 0.0)),
        }
    }

    /// Apply to a function at one point: `sum_j c_j(z) f(z + j step)`.
    pub fn apply_at<F>(&self, f: &F, z: Complex64) -> CVal
    where
        F: Fn(Complex64) -> CVal + ?Sized,
    {
        let mut acc = CVal::new(c64(0.0, 0.0));
        for (&j, c) in &self.terms {
            acc = acc + c(z) * f(z + (j as f64) * self.step);
        }
        acc
    }

    /// Apply to a function, producing a new evaluator.
    pub fn apply(&self, f: Evaluator) -> Evaluator {
        let op = self.clone();
        Arc::new(move |z| op.apply_at(f.as_ref(), z))
    }

    fn merged_tag(&self, other: &Self) -> Result<Option<Complex64>> {
        match (self.mu_tag, other.mu_tag) {
            (Some(a), Some(b)) => {
                if (a - b).norm() <= 1e-10 * (1.0 + a.norm()) {
                    Ok(Some(a))
                } else {
                    Err(Error::MultiplierMismatch)
                }
            }
            _ => Ok(None),
        }
    }

    /// Operator product: `(AB)_j(z) = sum_k a_k(z) b_{j-k}(z + k step)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if !steps_match(self.step, other.step) {
            return Err(Error::StepMismatch(
                format!("{}", self.step),
                format!("{}", other.step),
            ));
        }
        let tag = self.merged_tag(other)?;
        let step = self.step;
        let mut out = DifferenceOperator::new(step);
        out.mu_tag = tag;
        let mut indices = std::collections::BTreeSet::new();
        for &k in self.terms.keys() {
            for &l in other.terms.keys() {
                indices.insert(k + l);
            }
        }
        for j in indices {
            let mut parts: Vec<(Evaluator, Evaluator, Complex64)> = Vec::new();
            for (&k, a) in &self.terms {
                if let Some(b) = other.terms.get(&(j - k)) {
                    parts.push((a.clone(), b.clone(), (k as f64) * step));
                }
            }
            out.terms.insert(
                j,
                Arc::new(move |z| {
                    let mut acc = CVal::new(c64(0.0, 0.0));
                    for (a, b, shift) in &parts {
                        acc = acc + a(z) * b(z + shift);
                    }
                    acc
                }),
            );
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !steps_match(self.step, other.step) {
            return Err(Error::StepMismatch(
                format!("{}", self.step),
                format!("{}", other.step),
            ));
        }
        let tag = self.merged_tag(other)?;
        let mut out = DifferenceOperator::new(self.step);
        out.mu_tag = tag;
        let mut indices: std::collections::BTreeSet<i64> = self.terms.keys().copied().collect();
        indices.extend(other.terms.keys().copied());
        for j in indices {
            let a = self.terms.get(&j).cloned();
            let b = other.terms.get(&j).cloned();
            out.terms.insert(
                j,
                Arc::new(move |z| {
                    let mut acc = CVal::new(c64(0.0, 0.0));
                    if let Some(a) = &a {
                        acc = acc + a(z);
                    }
                    if let Some(b) = &b {
                        acc = acc + b(z);
                    }
                    acc
                }),
            );
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = DifferenceOperator::new(self.step);
        out.mu_tag = self.mu_tag;
        for (&j, c) in &self.terms {
            let c = c.clone();
            out.terms.insert(j, Arc::new(move |z| c(z) * factor));
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c64(-1.0, 0.0)))
    }

    /// `[A, B]_- = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// `[A, B]_+ = AB + BA`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self> {
        self.compose(other)?.add(&other.compose(self)?)
    }

    /// Re-express on the finer step `step / factor` (index `j` becomes
    /// `j * factor`). The multiplier tag does not survive re-indexing.
    pub fn refine_step(&self, factor: u32) -> Self {
        let f = factor as i64;
        let mut out = DifferenceOperator::new(self.step / (factor as f64));
        for (&j, c) in &self.terms {
            out.terms.insert(j * f, c.clone());
        }
        out
    }

    /// Worst relative coefficient residual between two operators over the
    /// sample points, comparing the union of their shift indices. Flagged
    /// evaluations are skipped; returns an error if a coefficient could not
    /// be compared anywhere.
    pub fn coefficients_close(&self, other: &Self, points: &[Complex64]) -> Result<f64> {
        if !steps_match(self.step, other.step) {
            return Err(Error::StepMismatch(
                format!("{}", self.step),
                format!("{}", other.step),
            ));
        }
        let mut indices: std::collections::BTreeSet<i64> = self.terms.keys().copied().collect();
        indices.extend(other.terms.keys().copied());
        let mut worst: f64 = 0.0;
        for j in indices {
            let mut seen = false;
            for &z in points {
                let a = self.coeff_eval(j, z);
                let b = other.coeff_eval(j, z);
                if a.flagged || b.flagged {
                    continue;
                }
                seen = true;
                worst = worst.max(rel_residual(a.v, b.v));
            }
            if !seen {
                return Err(Error::DegenerateSamples);
            }
        }
        Ok(worst)
    }
}

impl std::fmt::Debug for DifferenceOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DifferenceOperator")
            .field("step", &self.step)
            .field("indices", &self.indices())
            .field("mu_tag", &self.mu_tag)
            .finish()
    }
}

/// `A(a, nu) = f(a, nu; z) T_eta + f(a, nu; -z) T_{-eta}` with
/// `f(a, nu; z) = theta(z + a - nu) / theta(2z)` and zero-sum `a`.
pub fn a_nu_operator(
    a: [Complex64; 4],
    nu: Complex64,
    params: &EllipticParams,
) -> Result<DifferenceOperator> {
    let p = params.with_nu(nu);
    let f = ThetaRatio::v1(a, nu, &p)?;
    Ok(DifferenceOperator::new(p.eta)
        .with_term(1, f.evaluator())
        .with_term(-1, f.reflected())
        .with_mu_tag(p.mu))
}

/// Zero-sum offset vectors of the four Sklyanin generators.
pub fn sklyanin_offsets(t: usize, params: &EllipticParams) -> [Complex64; 4] {
    let tau = params.tau;
    let one = c64(1.0, 0.0);
    match t {
        0 => [c64(0.0, 0.0), one / 2.0, tau / 2.0, (-one - tau) / 2.0],
        1 => [one / 4.0, -one / 4.0, (one + 2.0 * tau) / 4.0, (-one - 2.0 * tau) / 4.0],
        2 => [
            (one + tau) / 4.0,
            (one - tau) / 4.0,
            (-one + tau) / 4.0,
            (-one - tau) / 4.0,
        ],
        3 => [tau / 4.0, -tau / 4.0, (2.0 * one + tau) / 4.0, (-2.0 * one - tau) / 4.0],
        _ => panic!("generator index {t} not in 0..=3"),
    }
}

/// Scalar prefactor of the generator `D_t` in front of `A(a_t, nu)`.
pub fn sklyanin_prefactor(
    t: usize,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let q_quarter = (I * PI * params.tau / 4.0).exp();
    let g = g_constant(params, policy)?;
    let base = I * q_quarter / (g * g * g);
    let eta = params.eta;
    let tau = params.tau;
    Ok(match t {
        0 => base * theta1(eta, params, policy)?,
        1 => -base * theta1(eta + 0.5, params, policy)?,
        2 => base * (I * PI * eta).exp() * theta1(eta + 0.5 + tau / 2.0, params, policy)?,
        3 => base * (I * PI * eta).exp() * theta1(eta + tau / 2.0, params, policy)?,
        _ => return Err(Error::IndexOutOfRange(format!("generator index {t}"))),
    })
}

/// The Sklyanin generator `D_t`, `t = 0..=3`, with step `eta`.
pub fn sklyanin_generator(t: usize, params: &EllipticParams) -> Result<DifferenceOperator> {
    if t > 3 {
        return Err(Error::IndexOutOfRange(format!("generator index {t}")));
    }
    let policy = TruncationPolicy::for_params(params);
    let pre = sklyanin_prefactor(t, params, &policy)?;
    Ok(a_nu_operator(sklyanin_offsets(t, params), params.nu, params)?.scale(pre))
}

/// `f_delta(l; z) = R_delta(z + l + i a_{-delta}/4) / R_delta(2z - i a_delta/2)`.
pub fn f_r_delta(
    delta: Sign,
    l: &[Complex64; 4],
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<CVal> {
    let shift = I * params.a_delta(delta.flip()) / 4.0;
    let offsets: Vec<Complex64> = l.iter().map(|&ln| ln + shift).collect();
    let num = r_delta_prod(delta, z, &offsets, params, policy)?;
    let den = r_delta(delta, 2.0 * z - I * params.a_delta(delta) / 2.0, params, policy)?;
    Ok(CVal {
        v: num / den,
        flagged: den.norm() < POLE_FLAG_EPS,
    })
}

/// The modular-pair generator
/// `A_{R,delta}(l) = f_delta(l; z) T_{i a_{-delta}/2} + (z -> -z)`.
pub fn a_r_delta(
    delta: Sign,
    l: [Complex64; 4],
    params: &EllipticParams,
) -> Result<DifferenceOperator> {
    params.require_modular()?;
    let policy = TruncationPolicy::for_params(params);
    let step = I * params.a_delta(delta.flip()) / 2.0;
    let mu = a_r_multiplier(&l, params);
    let (p1, p2) = (*params, *params);
    let (l1, l2) = (l, l);
    Ok(DifferenceOperator::new(step)
        .with_term(
            1,
            Arc::new(move |z| f_r_delta(delta, &l1, z, &p1, &policy).unwrap_or(CVal::flagged(c64(0.0, 0.0)))),
        )
        .with_term(
            -1,
            Arc::new(move |z| f_r_delta(delta, &l2, -z, &p2, &policy).unwrap_or(CVal::flagged(c64(0.0, 0.0)))),
        )
        .with_mu_tag(mu))
}

/// Multiplier `mu = exp(-2 pi i (sum l_n + 2 i a))` of `A_{R,delta}(l)`.
pub fn a_r_multiplier(l: &[Complex64; 4], params: &EllipticParams) -> Complex64 {
    let sum: Complex64 = l.iter().sum();
    (-2.0 * PI * I * (sum + 2.0 * I * params.a)).exp()
}

/// The reflection `l -> -l + <kappa, l> kappa / 2`, `kappa = (1,1,1,1)`.
pub fn phi1(l: &[Complex64; 4]) -> [Complex64; 4] {
    let s: Complex64 = l.iter().sum();
    [s / 2.0 - l[0], s / 2.0 - l[1], s / 2.0 - l[2], s / 2.0 - l[3]]
}

/// `phi_2(l) = phi_1(l) + kappa / 2`; squares to translation by `kappa`.
pub fn phi2(l: &[Complex64; 4]) -> [Complex64; 4] {
    let mut out = phi1(l);
    for x in &mut out {
        *x += 0.5;
    }
    out
}

/// The reflection `h -> -h + <zeta, h> zeta / 4`, `zeta = (1,...,1)` in C^8.
pub fn chi1(h: &[Complex64; 8]) -> [Complex64; 8] {
    let s: Complex64 = h.iter().sum();
    let mut out = [c64(0.0, 0.0); 8];
    for (o, &hn) in out.iter_mut().zip(h.iter()) {
        *o = s / 4.0 - hn;
    }
    out
}

/// `chi_2(h) = chi_1(h) + zeta / 2`; squares to translation by `zeta`.
pub fn chi2(h: &[Complex64; 8]) -> [Complex64; 8] {
    let mut out = chi1(h);
    for x in &mut out {
        *x += 0.5;
    }
    out
}

/// Couplings of a van Diejen operator: the vector `h in C^8` and the free
/// parameter `xi` entering the additive coefficient (the operator must not
/// depend on it).
#[derive(Debug, Clone, Copy)]
pub struct VanDiejenCouplings {
    pub h: [Complex64; 8],
    pub xi: Complex64,
}

impl VanDiejenCouplings {
    pub fn new(h: [Complex64; 8]) -> Self {
        VanDiejenCouplings {
            h,
            xi: c64(0.171, 0.093),
        }
    }

    pub fn with_xi(mut self, xi: Complex64) -> Self {
        self.xi = xi;
        self
    }

    /// Multiplier-squared of the shift coefficients:
    /// `exp(-2 pi i (sum h_n + 4 i a))`, which must equal `mu^2`.
    pub fn mu_squared(&self, params: &EllipticParams) -> Complex64 {
        let sum: Complex64 = self.h.iter().sum();
        (-2.0 * PI * I * (sum + 4.0 * I * params.a)).exp()
    }
}

/// Half-periods `omega_{t,delta}` of the lattice `Z + i a_delta Z`.
pub fn omega_delta(delta: Sign, t: usize, params: &EllipticParams) -> Complex64 {
    let ia = I * params.a_delta(delta);
    match t {
        0 => c64(0.0, 0.0),
        1 => c64(0.5, 0.0),
        2 => ia / 2.0,
        3 => c64(-0.5, 0.0) - ia / 2.0,
        _ => panic!("half-period index {t} out of range"),
    }
}

/// The shift coefficient
/// `V_delta(h; z) = prod_n R_delta(z - h_n - i a_{-delta}/2)
///                 / [R_delta(2z + i a_delta/2) R_delta(2z - i a_{-delta} + i a_delta/2)]`.
pub fn v_delta(
    delta: Sign,
    h: &[Complex64; 8],
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<CVal> {
    let am = I * params.a_delta(delta.flip());
    let ad = I * params.a_delta(delta);
    let offsets: Vec<Complex64> = h.iter().map(|&hn| -hn - am / 2.0).collect();
    let num = r_delta_prod(delta, z, &offsets, params, policy)?;
    let d1 = r_delta(delta, 2.0 * z + ad / 2.0, params, policy)?;
    let d2 = r_delta(delta, 2.0 * z - am + ad / 2.0, params, policy)?;
    Ok(CVal {
        v: num / (d1 * d2),
        flagged: d1.norm().min(d2.norm()) < POLE_FLAG_EPS,
    })
}

/// The residue products `p_{t,delta}(h)`, `t = 0..=3`.
pub fn p_t_delta(
    delta: Sign,
    t: usize,
    h: &[Complex64; 8],
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let ad = params.a_delta(delta);
    let mut prod = c64(1.0, 0.0);
    match t {
        0 => {
            for &hn in h {
                prod *= r_delta(delta, hn, params, policy)?;
            }
        }
        1 => {
            for &hn in h {
                prod *= r_delta(delta, hn - 0.5, params, policy)?;
            }
        }
        2 => {
            prod = (-2.0 * PI * ad).exp();
            for &hn in h {
                prod *= (-I * PI * hn).exp() * r_delta(delta, hn - I * ad / 2.0, params, policy)?;
            }
        }
        3 => {
            prod = (-2.0 * PI * ad).exp();
            for &hn in h {
                prod *=
                    (I * PI * hn).exp() * r_delta(delta, hn + 0.5 + I * ad / 2.0, params, policy)?;
            }
        }
        _ => return Err(Error::IndexOutOfRange(format!("p index {t}"))),
    }
    Ok(prod)
}

/// The elliptic building block
/// `E_{t,delta}(xi; z) = R(z + xi - ia - w_t) R(z - xi + ia - w_t)
///                      / [R(z - ia - w_t) R(z + ia - w_t)]`.
pub fn e_t_delta(
    delta: Sign,
    t: usize,
    xi: Complex64,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<CVal> {
    let ia = I * params.a;
    let w = omega_delta(delta, t, params);
    let num = r_delta(delta, z + xi - ia - w, params, policy)?
        * r_delta(delta, z - xi + ia - w, params, policy)?;
    let d1 = r_delta(delta, z - ia - w, params, policy)?;
    let d2 = r_delta(delta, z + ia - w, params, policy)?;
    Ok(CVal {
        v: num / (d1 * d2),
        flagged: d1.norm().min(d2.norm()) < POLE_FLAG_EPS,
    })
}

/// `E_{t,delta}(xi; omega_{t,delta}) = (R_delta(xi - ia) / R_delta(ia))^2`,
/// independent of `t`. Errors when `R_delta(ia)` vanishes.
pub fn e_t_at_half_period(
    delta: Sign,
    xi: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<Complex64> {
    let ia = I * params.a;
    let den = r_delta(delta, ia, params, policy)?;
    if den.norm() < POLE_FLAG_EPS {
        return Err(Error::CasimirDivergence);
    }
    let ratio = r_delta(delta, xi - ia, params, policy)? / den;
    Ok(ratio * ratio)
}

/// The additive coefficient `V_{b,delta}(h; z)` (a xi-independent even
/// elliptic function of `z`).
pub fn vb_delta(
    delta: Sign,
    couplings: &VanDiejenCouplings,
    z: Complex64,
    params: &EllipticParams,
    policy: &TruncationPolicy,
) -> Result<CVal> {
    let xi = couplings.xi;
    let ad = I * params.a_delta(delta);
    let am = I * params.a_delta(delta.flip());
    let d1 = r_delta(delta, xi - ad / 2.0, params, policy)?;
    let d2 = r_delta(delta, xi - am - ad / 2.0, params, policy)?;
    if d1.norm().min(d2.norm()) < POLE_FLAG_EPS {
        return Err(Error::BadXi);
    }
    let e_const = e_t_at_half_period(delta, xi, params, policy)?;
    let mut sum = CVal::new(c64(0.0, 0.0));
    for t in 0..4 {
        let p = p_t_delta(delta, t, &couplings.h, params, policy)?;
        let e = e_t_delta(delta, t, xi, z, params, policy)?;
        sum = sum + (e - e_const) * p;
    }
    Ok(sum / (2.0 * d1 * d2))
}

/// The van Diejen operator
/// `A_{D,delta}(h) = V(h; z) T_{-i a_{-delta}} + V(h; -z) T_{i a_{-delta}} + V_b(h; z)`
/// with step `i a_{-delta}` and indices `-1, 1, 0`.
pub fn van_diejen(
    delta: Sign,
    couplings: &VanDiejenCouplings,
    params: &EllipticParams,
) -> Result<DifferenceOperator> {
    params.require_modular()?;
    let policy = TruncationPolicy::for_params(params);
    let step = I * params.a_delta(delta.flip());
    // Fail fast on a bad xi or divergent additive constant.
    vb_delta(delta, couplings, c64(0.317, 0.071), params, &policy)?;
    let (cp, cm, cb) = (*couplings, *couplings, *couplings);
    let (pp, pm, pb) = (*params, *params, *params);
    Ok(DifferenceOperator::new(step)
        .with_term(
            -1,
            Arc::new(move |z| {
                v_delta(delta, &cm.h, z, &pm, &policy).unwrap_or(CVal::flagged(c64(0.0, 0.0)))
            }),
        )
        .with_term(
            1,
            Arc::new(move |z| {
                v_delta(delta, &cp.h, -z, &pp, &policy).unwrap_or(CVal::flagged(c64(0.0, 0.0)))
            }),
        )
        .with_term(
            0,
            Arc::new(move |z| {
                vb_delta(delta, &cb, z, &pb, &policy).unwrap_or(CVal::flagged(c64(0.0, 0.0)))
            }),
        )
        .with_mu_tag(couplings.mu_squared(params)))
}

/// Couplings of the van Diejen operator matching the twofold product
/// `A_{R,delta}(l) A_{R,delta}(m)`: `h_n = l_n - i a_{-delta}/4`,
/// `h_{n+4} = m_n + i a_{-delta}/4`. Requires `sum l = sum m`.
pub fn h_from_lm(
    delta: Sign,
    l: &[Complex64; 4],
    m: &[Complex64; 4],
    params: &EllipticParams,
) -> Result<[Complex64; 8]> {
    let sl: Complex64 = l.iter().sum();
    let sm: Complex64 = m.iter().sum();
    if (sl - sm).norm() > 1e-10 {
        return Err(Error::ConstraintViolated(format!(
            "sum l and sum m differ by {:.3e}",
            (sl - sm).norm()
        )));
    }
    let am = I * params.a_delta(delta.flip());
    let mut h = [c64(0.0, 0.0); 8];
    for n in 0..4 {
        h[n] = l[n] - am / 4.0;
        h[n + 4] = m[n] + am / 4.0;
    }
    Ok(h)
}

/// Fill the second half of `h` with the special values `(i a_+/2,
/// i a_+/2 + 1/2, 0, 1/2)` under which `A_{D,+}` collapses to a pure
/// two-term shift operator.
pub fn special_reduction_h(first: [Complex64; 4], params: &EllipticParams) -> [Complex64; 8] {
    let iap = I * params.a_plus / 2.0;
    [
        first[0],
        first[1],
        first[2],
        first[3],
        iap,
        iap + 0.5,
        c64(0.0, 0.0),
        c64(0.5, 0.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> EllipticParams {
        EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.0, 0.21), c64(0.03, 0.0)).unwrap()
    }

    fn sample_points() -> Vec<Complex64> {
        (0..7)
            .map(|i| c64(0.11 + 0.05 * i as f64, 0.07 - 0.02 * i as f64))
            .collect()
    }

    fn test_function() -> Evaluator {
        Arc::new(|z| CVal::new((0.3 * z).exp() + (2.0 * I * PI * z).cos()))
    }

    #[test]
    fn identity_composes_trivially() {
        let p = params();
        let a = a_nu_operator(sklyanin_offsets(0, &p), p.nu, &p).unwrap();
        let id = DifferenceOperator::identity(p.eta);
        let left = a.compose(&id).unwrap();
        let right = id.compose(&a).unwrap();
        assert!(left.coefficients_close(&a, &sample_points()).unwrap() < 1e-12);
        assert!(right.coefficients_close(&a, &sample_points()).unwrap() < 1e-12);
    }

    #[test]
    fn compose_matches_sequential_apply() {
        let p = params();
        let a = a_nu_operator(sklyanin_offsets(0, &p), p.nu, &p).unwrap();
        let b = a_nu_operator(sklyanin_offsets(2, &p), p.nu, &p).unwrap();
        let ab = a.compose(&b).unwrap();
        let f = test_function();
        let bf = b.apply(f.clone());
        for &z in &sample_points() {
            let lhs = ab.apply_at(f.as_ref(), z);
            let rhs = a.apply_at(bf.as_ref(), z);
            assert!(rel_residual(lhs.v, rhs.v) < 1e-10);
        }
    }

    #[test]
    fn self_commutator_vanishes() {
        let p = params();
        let a = a_nu_operator(sklyanin_offsets(1, &p), p.nu, &p).unwrap();
        let c = a.commutator(&a).unwrap();
        for &z in &sample_points() {
            for j in c.indices() {
                assert!(c.coeff_eval(j, z).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn refine_step_preserves_action() {
        let p = params();
        let a = a_nu_operator(sklyanin_offsets(0, &p), p.nu, &p).unwrap();
        let r = a.refine_step(2);
        assert!((r.step - a.step / 2.0).norm() < 1e-15);
        let f = test_function();
        for &z in &sample_points() {
            let lhs = a.apply_at(f.as_ref(), z);
            let rhs = r.apply_at(f.as_ref(), z);
            assert!(rel_residual(lhs.v, rhs.v) < 1e-12);
        }
    }

    #[test]
    fn step_mismatch_rejected() {
        let p = params();
        let a = a_nu_operator(sklyanin_offsets(0, &p), p.nu, &p).unwrap();
        let b = a.refine_step(2);
        assert!(a.compose(&b).is_err());
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn a_nu_coefficient_multiplier() {
        let p = params();
        let a = a_nu_operator(sklyanin_offsets(3, &p), p.nu, &p).unwrap();
        let z = c64(0.23, 0.11);
        let c1 = a.coeff_eval(1, z).v;
        let c1_shift = a.coeff_eval(1, z + p.tau).v;
        assert!(rel_residual(c1_shift, p.mu * c1) < 1e-9);
        let cm = a.coeff_eval(-1, z).v;
        let cm_shift = a.coeff_eval(-1, z + p.tau).v;
        assert!(rel_residual(cm_shift, cm / p.mu) < 1e-9);
    }

    #[test]
    fn a_r_coefficient_multiplier() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut l = [c64(0.0, 0.0); 4];
        for ln in &mut l {
            *ln = c64(rng.gen_range(-0.3..0.3), rng.gen_range(-0.2..0.2));
        }
        let mu = a_r_multiplier(&l, &p);
        for delta in [Sign::Plus, Sign::Minus] {
            let a = a_r_delta(delta, l, &p).unwrap();
            let z = c64(0.19, 0.07);
            let period = I * p.a_delta(delta);
            let c1 = a.coeff_eval(1, z).v;
            let c1_shift = a.coeff_eval(1, z + period).v;
            assert!(rel_residual(c1_shift, mu * c1) < 1e-9, "delta = {:?}", delta);
        }
    }

    #[test]
    fn van_diejen_additive_term_is_elliptic_and_xi_free() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Build h with sum h = -4ia so that mu^2 = 1 ... any h works for
        // ellipticity of V_b; use a generic constrained vector.
        let mut h = [c64(0.0, 0.0); 8];
        for hn in h.iter_mut().take(7) {
            *hn = c64(rng.gen_range(-0.2..0.2), rng.gen_range(-0.1..0.1));
        }
        let partial: Complex64 = h.iter().take(7).sum();
        h[7] = -4.0 * I * p.a - partial;
        let c = VanDiejenCouplings::new(h);
        let pol = TruncationPolicy::for_params(&p);
        let z = c64(0.22, 0.13);
        for delta in [Sign::Plus, Sign::Minus] {
            let v0 = vb_delta(delta, &c, z, &p, &pol).unwrap().v;
            let v1 = vb_delta(delta, &c, z + 1.0, &p, &pol).unwrap().v;
            let v2 = vb_delta(delta, &c, z + I * p.a_delta(delta), &p, &pol).unwrap().v;
            assert!(rel_residual(v0, v1) < 1e-9);
            assert!(rel_residual(v0, v2) < 1e-9);
            let other = c.with_xi(c64(0.089, -0.044));
            let v3 = vb_delta(delta, &other, z, &p, &pol).unwrap().v;
            assert!(rel_residual(v0, v3) < 1e-8);
        }
    }

    #[test]
    fn involution_maps() {
        let l = [c64(0.1, 0.2), c64(-0.3, 0.1), c64(0.2, -0.2), c64(0.4, 0.0)];
        let back = phi1(&phi1(&l));
        for n in 0..4 {
            assert!((back[n] - l[n]).norm() < 1e-14);
        }
        let twice = phi2(&phi2(&l));
        for n in 0..4 {
            assert!((twice[n] - l[n] - 1.0).norm() < 1e-14);
        }
        let mut h = [c64(0.0, 0.0); 8];
        for (n, hn) in h.iter_mut().enumerate() {
            *hn = c64(0.05 * n as f64, -0.03 * n as f64);
        }
        let back = chi1(&chi1(&h));
        for n in 0..8 {
            assert!((back[n] - h[n]).norm() < 1e-14);
        }
        let twice = chi2(&chi2(&h));
        for n in 0..8 {
            assert!((twice[n] - h[n] - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn h_from_lm_requires_equal_sums() {
        let p = params();
        let l = [c64(0.1, 0.0), c64(0.2, 0.0), c64(-0.1, 0.0), c64(0.0, 0.0)];
        let mut m = l;
        m[0] += 0.3;
        assert!(h_from_lm(Sign::Plus, &l, &m, &p).is_err());
        let h = h_from_lm(Sign::Plus, &l, &l, &p).unwrap();
        let am = I * p.a_minus;
        assert!((h[0] - (l[0] - am / 4.0)).norm() < 1e-15);
        assert!((h[4] - (l[0] + am / 4.0)).norm() < 1e-15);
    }
}
