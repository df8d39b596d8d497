//! Flag-aware complex values.
//!
//! Verification sweeps must survive grazing a pole: instead of raising,
//! near-pole evaluations return a value carrying a `flagged` bit, and the
//! flag propagates through arithmetic.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A complex value together with a pole-proximity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVal {
    pub v: Complex64,
    pub flagged: bool,
}

impl CVal {
    pub fn new(v: Complex64) -> Self {
        CVal { v, flagged: false }
    }

    pub fn flagged(v: Complex64) -> Self {
        CVal { v, flagged: true }
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }
}

impl From<Complex64> for CVal {
    fn from(v: Complex64) -> Self {
        CVal::new(v)
    }
}

impl From<f64> for CVal {
    fn from(v: f64) -> Self {
        CVal::new(Complex64::new(v, 0.0))
    }
}

macro_rules! cval_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for CVal {
            type Output = CVal;
            fn $method(self, rhs: CVal) -> CVal {
                CVal {
                    v: self.v $op rhs.v,
                    flagged: self.flagged || rhs.flagged,
                }
            }
        }
        impl $trait<Complex64> for CVal {
            type Output = CVal;
            fn $method(self, rhs: Complex64) -> CVal {
                CVal { v: self.v $op rhs, flagged: self.flagged }
            }
        }
    };
}

cval_binop!(Add, add, +);
cval_binop!(Sub, sub, -);
cval_binop!(Mul, mul, *);
cval_binop!(Div, div, /);

impl Neg for CVal {
    type Output = CVal;
    fn neg(self) -> CVal {
        CVal {
            v: -self.v,
            flagged: self.flagged,
        }
    }
}

/// Relative residual used throughout the harness:
/// `|lhs - rhs| / (1 + max(|lhs|, |rhs|))`.
pub fn rel_residual(lhs: Complex64, rhs: Complex64) -> f64 {
    (lhs - rhs).norm() / (1.0 + lhs.norm().max(rhs.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_propagate() {
        let a = CVal::new(Complex64::new(1.0, 0.0));
        let b = CVal::flagged(Complex64::new(2.0, 0.0));
        assert!(!(a * a).flagged);
        assert!((a * b).flagged);
        assert!((a + b).flagged);
        assert!((-b).flagged);
    }
}
