//! Parameter bundles for the elliptic lattice and the modular conventions.
//!
//! Two coordinate systems are in use. The lattice convention works with
//! `(tau, eta, nu)` on the lattice `Z + tau Z`. The modular convention works
//! with `(a_plus, a_minus)` in the right half plane, tied to the first by
//! `tau = i a_plus`, `eta = i a_minus / 2`. A single bundle carries both so
//! constructors can state which they read.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The parameter bundle: lattice data `(tau, eta)`, representation label
/// `nu` (with multiplier `mu = exp(8 i pi nu)`), and the modular pair
/// `(a_plus, a_minus)` with nomes `q_pm = exp(-pi a_pm)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    pub tau: Complex64,
    pub eta: Complex64,
    pub nu: Complex64,
    pub mu: Complex64,
    pub q: Complex64,
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    pub q_plus: Complex64,
    pub q_minus: Complex64,
    /// Modular invariant `(a_plus + a_minus) / 2`.
    pub a: Complex64,
}

impl EllipticParams {
    /// Build from the lattice convention `(tau, eta, nu)`.
    ///
    /// The modular pair is derived as `a_plus = -i tau`, `a_minus = -2 i eta`;
    /// it only has positive real parts when `eta` lies in the upper half
    /// plane, which the modular-convention constructors require separately.
    pub fn from_lattice(tau: Complex64, eta: Complex64, nu: Complex64) -> Result<Self> {
        if tau.im <= 0.0 {
            return Err(Error::InvalidParams(format!("Im tau = {} <= 0", tau.im)));
        }
        let a_plus = -I * tau;
        let a_minus = -2.0 * I * eta;
        Ok(Self::assemble(tau, eta, nu, a_plus, a_minus))
    }

    /// Build from the modular convention `(a_plus, a_minus, nu)`,
    /// i.e. `tau = i a_plus` and `eta = i a_minus / 2`.
    pub fn from_modular(a_plus: Complex64, a_minus: Complex64, nu: Complex64) -> Result<Self> {
        if a_plus.re <= 0.0 || a_minus.re <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "Re a_+ = {}, Re a_- = {} must be positive",
                a_plus.re, a_minus.re
            )));
        }
        let tau = I * a_plus;
        let eta = I * a_minus / 2.0;
        Ok(Self::assemble(tau, eta, nu, a_plus, a_minus))
    }

    fn assemble(
        tau: Complex64,
        eta: Complex64,
        nu: Complex64,
        a_plus: Complex64,
        a_minus: Complex64,
    ) -> Self {
        EllipticParams {
            tau,
            eta,
            nu,
            mu: (8.0 * I * PI * nu).exp(),
            q: (I * PI * tau).exp(),
            a_plus,
            a_minus,
            q_plus: (-PI * a_plus).exp(),
            q_minus: (-PI * a_minus).exp(),
            a: (a_plus + a_minus) / 2.0,
        }
    }

    /// Same lattice, different representation label.
    pub fn with_nu(&self, nu: Complex64) -> Self {
        Self::assemble(self.tau, self.eta, nu, self.a_plus, self.a_minus)
    }

    /// Same lattice, different shift step.
    pub fn with_eta(&self, eta: Complex64) -> Self {
        Self::assemble(self.tau, eta, self.nu, self.a_plus, -2.0 * I * eta)
    }

    /// The normalized representation label for a given multiplier:
    /// `nu = Arg(mu)/(8 pi) - i ln|mu|/(8 pi)` shifted by quarters into
    /// `Re nu in [0, 1/4)`.
    pub fn nu_from_mu(mu: Complex64) -> Complex64 {
        let mut nu = c64(mu.arg() / (8.0 * PI), -mu.norm().ln() / (8.0 * PI));
        while nu.re < 0.0 {
            nu += 0.25;
        }
        while nu.re >= 0.25 {
            nu -= 0.25;
        }
        nu
    }

    /// Check the modular pair is usable (`Re a_pm > 0`).
    pub fn require_modular(&self) -> Result<()> {
        if self.a_plus.re <= 0.0 || self.a_minus.re <= 0.0 {
            return Err(Error::InvalidParams(
                "modular conventions need Re a_+ > 0 and Re a_- > 0 (Im eta > 0)".into(),
            ));
        }
        Ok(())
    }

    /// Nome for the requested sign.
    pub fn q_delta(&self, delta: Sign) -> Complex64 {
        match delta {
            Sign::Plus => self.q_plus,
            Sign::Minus => self.q_minus,
        }
    }

    pub fn a_delta(&self, delta: Sign) -> Complex64 {
        match delta {
            Sign::Plus => self.a_plus,
            Sign::Minus => self.a_minus,
        }
    }

    /// Half-periods `omega_t` of the lattice `Z + tau Z`.
    pub fn omega(&self, t: usize) -> Complex64 {
        match t {
            0 => c64(0.0, 0.0),
            1 => c64(0.5, 0.0),
            2 => c64(0.5, 0.0) + self.tau / 2.0,
            3 => self.tau / 2.0,
            _ => panic!("half-period index {t} out of range"),
        }
    }

    /// Automorphy exponents `lambda_t` attached to the half-periods.
    pub fn lambda(&self, t: usize) -> Complex64 {
        match t {
            0 | 1 => c64(0.0, 0.0),
            2 | 3 => 8.0 * I * PI * self.nu,
            _ => panic!("half-period index {t} out of range"),
        }
    }

    /// Distance (in the cell metric) from `eta` to the nearest point
    /// `p/q + (r/s) tau` with denominators up to `max_den`.
    pub fn eta_rational_distance(&self, max_den: i64) -> f64 {
        let tau = self.tau;
        // Cell coordinates of eta: eta = x + y tau.
        let det = tau.im;
        let y = self.eta.im / det;
        let x = self.eta.re - y * tau.re;
        let mut best = f64::INFINITY;
        for qd in 1..=max_den {
            for sd in 1..=max_den {
                let px = (x * qd as f64).round() / qd as f64;
                let ry = (y * sd as f64).round() / sd as f64;
                let d = ((x - px) + (y - ry) * tau.re).hypot((y - ry) * tau.im);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }
}

/// The two modular signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

/// Truncation control for the theta series and the infinite products.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    /// Theta sum cutoff `N_theta`.
    pub series_terms: usize,
    /// Drop product factors once their base magnitude falls below this.
    pub product_eps: f64,
    /// Reject lattices flatter than this (series converge too slowly).
    pub min_im_tau: f64,
}

impl TruncationPolicy {
    /// Fixed cutoff chosen so `|q|^{(N-1/2)^2} < 1e-18` for the given lattice.
    pub fn for_params(params: &EllipticParams) -> Self {
        let decay = -params.q.norm().ln();
        let n = if decay > 0.0 {
            ((18.0 * std::f64::consts::LN_10 / decay).sqrt() + 0.5).ceil() as usize + 2
        } else {
            64
        };
        TruncationPolicy {
            series_terms: n.max(8),
            product_eps: 1e-14,
            min_im_tau: 0.05,
        }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            series_terms: 40,
            product_eps: 1e-14,
            min_im_tau: 0.05,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_and_modular_agree() {
        let p = EllipticParams::from_modular(c64(0.9, 0.0), c64(0.42, 0.0), c64(0.03, 0.0)).unwrap();
        assert!((p.tau - c64(0.0, 0.9)).norm() < 1e-15);
        assert!((p.eta - c64(0.0, 0.21)).norm() < 1e-15);
        let p2 = EllipticParams::from_lattice(p.tau, p.eta, p.nu).unwrap();
        assert!((p2.a_plus - p.a_plus).norm() < 1e-15);
        assert!((p2.a_minus - p.a_minus).norm() < 1e-15);
    }

    #[test]
    fn mu_nu_round_trip() {
        let nu = c64(0.07, 0.01);
        let mu = (8.0 * I * PI * nu).exp();
        let back = EllipticParams::nu_from_mu(mu);
        assert!(back.re >= 0.0 && back.re < 0.25);
        let mu2 = (8.0 * I * PI * back).exp();
        assert!((mu - mu2).norm() < 1e-12 * mu.norm());
    }

    #[test]
    fn rejects_lower_half_plane_tau() {
        assert!(EllipticParams::from_lattice(c64(0.0, -1.0), c64(0.0, 0.2), c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn eta_rational_distance_flags_half_lattice() {
        let p = EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.5, 0.0), c64(0.0, 0.0)).unwrap();
        assert!(p.eta_rational_distance(12) < 1e-12);
        let p = EllipticParams::from_lattice(c64(0.0, 0.9), c64(0.0, 0.21), c64(0.0, 0.0)).unwrap();
        assert!(p.eta_rational_distance(12) > 0.005);
    }
}
