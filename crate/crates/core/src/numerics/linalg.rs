//! Dense kernels for the finite-chain oracle: matrix exponential, null-space
//! solves and eigenvalues. Chains are small (n ≤ 200), so everything is dense.

use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let norm = norm1(a);
    if norm == 0.0 {
        return id;
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| DMatrix::identity(n, n));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Numerical rank deficiency of `m` (count of singular values below `tol·σ_max`).
pub fn null_dimension(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return m.ncols();
    }
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    m.ncols().min(m.nrows()) - rank + m.ncols().saturating_sub(m.nrows())
}

/// Left null vector of a generator normalized to a probability vector.
pub fn stationary_vector(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = q.nrows();
    let qt = q.transpose();
    let dim = null_dimension(&qt, 1e-10);
    if dim != 1 {
        return Err(Error::Reducible { dimension: dim });
    }
    let mut a = qt;
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mut pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Linalg("singular stationary system".into()))?;
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-14 {
            *v = 0.0;
        }
    }
    let s = pi.sum();
    pi /= s;
    Ok(pi)
}

/// Eigenvalues of a general real matrix, sorted by decreasing real part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_two_state_closed_form() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let p = expm(&q);
        let e = (-2.0f64).exp();
        assert_relative_eq!(p[(0, 0)], 0.5 * (1.0 + e), epsilon = 1e-15);
        assert_relative_eq!(p[(0, 1)], 0.5 * (1.0 - e), epsilon = 1e-15);
    }

    #[test]
    fn expm_large_norm_scales() {
        let q = DMatrix::from_row_slice(2, 2, &[-50.0, 50.0, 30.0, -30.0]);
        let p = expm(&q);
        // After a long horizon each row is the stationary law (3/8, 5/8).
        assert_relative_eq!(p[(0, 0)], 0.375, epsilon = 1e-12);
        assert_relative_eq!(p[(1, 1)], 0.625, epsilon = 1e-12);
    }

    #[test]
    fn expm_nilpotent() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        let p = expm(&a);
        assert_relative_eq!(p[(0, 1)], 3.0, epsilon = 1e-14);
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn stationary_detects_reducibility() {
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(stationary_vector(&q), Err(Error::Reducible { dimension: 2 })));
    }
}
