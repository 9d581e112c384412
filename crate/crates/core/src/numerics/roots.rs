use crate::error::{Error, Result};

/// Solves `f(x) = target` for a strictly increasing `f`.
///
/// Starts from `[-step, step]` and doubles the bracket until it contains the
/// root, then bisects down to `x_tol`.
pub fn solve_increasing<F>(f: F, target: f64, step: f64, x_tol: f64, max_doublings: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut lo = -step.abs().max(f64::MIN_POSITIVE);
    let mut hi = -lo;
    let mut doublings = 0;
    while f(lo)? > target {
        lo *= 2.0;
        doublings += 1;
        if doublings > max_doublings || !lo.is_finite() {
            return Err(Error::BracketDivergence { doublings, target });
        }
    }
    while f(hi)? < target {
        hi *= 2.0;
        doublings += 1;
        if doublings > max_doublings || !hi.is_finite() {
            return Err(Error::BracketDivergence { doublings, target });
        }
    }
    bisect(&f, target, lo, hi, x_tol)
}

/// Bisection on an increasing function with `f(lo) <= target <= f(hi)`.
pub fn bisect<F>(f: &F, target: f64, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    while hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v == target {
            return Ok(mid);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
