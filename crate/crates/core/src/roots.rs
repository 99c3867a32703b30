//! Bracketed root finding for monotone functions.
//!
//! Every inverse in the crate (generator inverses, derivative inverses,
//! conditional quantiles) reduces to locating the zero of a monotone function
//! on a half line. The solvers here first secure a sign-changing bracket and
//! never step outside it.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Expands `[lo, lo + step]` to the right until `f` changes sign.
///
/// `f(lo)` must be non-negative and `f` eventually negative (a decreasing
/// function crossing zero). Returns the bracket `(a, b)` with
/// `f(a) >= 0 > f(b)`.
pub fn bracket_decreasing<F>(mut f: F, lo: f64, step: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut a = lo;
    let mut width = step.max(f64::MIN_POSITIVE);
    for _ in 0..2100 {
        let b = a + width;
        if !b.is_finite() {
            break;
        }
        let fb = f(b);
        if fb.is_nan() {
            return Err(Error::NumericalFailure(format!("NaN while bracketing at {b}")));
        }
        if fb < 0.0 {
            return Ok((a, b));
        }
        a = b;
        width *= 2.0;
    }
    Err(Error::NumericalFailure(format!(
        "could not bracket a root to the right of {lo}"
    )))
}

/// Plain bisection on a sign-changing bracket, for a fixed number of halvings.
///
/// Returns the midpoint of the final bracket. Works for discontinuous
/// monotone functions, in which case it locates the jump.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, iterations: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa_pos = f(a) >= 0.0;
    for _ in 0..iterations {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) >= 0.0) == fa_pos {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Safeguarded Newton iteration inside the bracket `[lo, hi]`.
///
/// `f` returns the function value and its derivative. Newton steps that leave
/// the bracket or fail to halve the previous step are replaced by bisection,
/// so convergence is guaranteed for any continuous `f` with a sign change.
/// Stops once the step is below `rel_tol * |x|`.
pub fn newton_bracketed<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let (fhi, _) = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "no sign change on [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    // xl carries the negative end.
    let (mut xl, mut xh) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = (hi - lo).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..MAX_ITER {
        if fx == 0.0 {
            return Ok(x);
        }
        let newton_leaves = ((x - xh) * dfx - fx) * ((x - xl) * dfx - fx) > 0.0;
        if !dfx.is_finite() || dfx == 0.0 || newton_leaves || (2.0 * fx).abs() > (dx_old * dfx).abs()
        {
            dx_old = dx;
            dx = 0.5 * (xh - xl);
            x = xl + dx;
            if x == xl {
                return Ok(x);
            }
        } else {
            dx_old = dx;
            dx = fx / dfx;
            let prev = x;
            x -= dx;
            if x == prev {
                return Ok(x);
            }
        }
        if dx.abs() <= rel_tol * x.abs() || (xh - xl).abs() <= f64::EPSILON * x.abs() {
            return Ok(x);
        }
        (fx, dfx) = f(x);
        if fx.is_nan() {
            return Err(Error::NumericalFailure(format!("NaN at {x}")));
        }
        if fx < 0.0 {
            xl = x;
        } else {
            xh = x;
        }
    }
    Err(Error::NumericalFailure(format!(
        "Newton iteration did not converge near {x}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt2() {
        let r = newton_bracketed(|x| (2.0 - x * x, -2.0 * x), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn newton_survives_bad_derivative() {
        // derivative deliberately wrong by a factor of 100
        let r = newton_bracketed(|x| (1.0 - x.powi(3), -300.0 * x * x), 0.0, 5.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_then_bisect_step() {
        let f = |x: f64| if x <= 3.25 { 1.0 } else { -1.0 };
        let (a, b) = bracket_decreasing(f, 0.0, 1.0).unwrap();
        assert!(a <= 3.25 && b > 3.25);
        let jump = bisect(f, a, b, 80);
        assert!((jump - 3.25).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change_is_an_error() {
        assert!(newton_bracketed(|x| (1.0 + x, 1.0), 0.0, 1.0, 1e-12).is_err());
    }
}
