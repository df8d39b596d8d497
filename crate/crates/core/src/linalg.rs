//! Thin wrappers over nalgebra for the numeric-rank and least-squares
//! machinery shared by the coefficient-space and representation modules.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Numerical rank via singular values, with a fixed relative threshold.
/// Also returns the gap `sigma_r / sigma_{r+1}` across the cut (infinite
/// when everything below the cut is zero).
pub fn rank_with_gap(matrix: &DMatrix<Complex64>, rel_threshold: f64) -> (usize, f64) {
    let svd = matrix.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return (0, f64::INFINITY);
    }
    let cut = rel_threshold * smax;
    let rank = sv.iter().filter(|&&s| s >= cut).count();
    let gap = if rank == 0 || rank == sv.len() {
        f64::INFINITY
    } else if sv[rank] == 0.0 {
        f64::INFINITY
    } else {
        sv[rank - 1] / sv[rank]
    };
    (rank, gap)
}

pub fn rank(matrix: &DMatrix<Complex64>, rel_threshold: f64) -> usize {
    rank_with_gap(matrix, rel_threshold).0
}

/// Minimum-norm least squares solve of `A x = b` via the SVD.
pub fn lstsq(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| Error::InvalidParams(format!("least-squares solve failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::c64;

    #[test]
    fn rank_of_outer_product() {
        let u = DVector::from_fn(6, |i, _| c64(1.0 + i as f64, 0.3 * i as f64));
        let v = DVector::from_fn(5, |i, _| c64(0.5 - i as f64, 1.0));
        let m = &u * v.transpose();
        assert_eq!(rank(&m, 1e-8), 1);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_fn(8, 3, |i, j| {
            c64((i * j * j + 1) as f64, ((i + 2) as f64).powi(j as i32) * 0.1)
        });
        let x = DVector::from_vec(vec![c64(1.0, 2.0), c64(-0.5, 0.0), c64(0.0, 1.5)]);
        let b = &a * &x;
        let sol = lstsq(&a, &b).unwrap();
        assert!((sol - x).norm() < 1e-10);
    }
}
