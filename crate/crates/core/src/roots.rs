//! Scalar root finding by bracketed bisection.
//!
//! Every solver in this crate reduces to one or more monotone scalar
//! equations, so bisection with a sign-change bracket is all we need. On
//! positive brackets spanning more than a factor of two the midpoint is taken
//! geometrically, which lets a bracket like `[1e-30, 1e30]` collapse in a few
//! dozen steps.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Largest acceptable |f(x)| at the returned point.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo:e}, {hi:e}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error(
        "no convergence after {iterations} iterations: bracket [{lo:e}, {hi:e}], residual {residual:e}"
    )]
    NonConvergence {
        lo: f64,
        hi: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("function returned NaN at x = {x:e}")]
    NotANumber { x: f64 },
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 2.0 * lo {
        (lo * hi).sqrt()
    } else {
        lo + 0.5 * (hi - lo)
    }
}

/// Finds a root of `f` inside `[lo, hi]`, which must bracket a sign change.
///
/// Iterates until the bracket collapses to adjacent floats or `max_iter` is
/// reached; the better endpoint is accepted if its residual is within `ftol`.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = eval(&mut f, lo)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let mut f_hi = eval(&mut f, hi)?;
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(RootError::NoSignChange { lo, hi, f_lo, f_hi });
    }

    let mut iterations = 0;
    while iterations < opts.max_iter {
        let mid = midpoint(lo, hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let f_mid = eval(&mut f, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }

    let (best, residual) = if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo.abs())
    } else {
        (hi, f_hi.abs())
    };
    if residual <= opts.ftol {
        Ok(best)
    } else {
        Err(RootError::NonConvergence {
            lo,
            hi,
            residual,
            iterations,
        })
    }
}

/// Widens `[lo, hi]` inside `(0, inf)` by factors of two on both ends until
/// `f` changes sign. Meant for functions monotone in a positive variable.
pub fn bracket_positive<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    max_expansions: usize,
) -> Result<(f64, f64), RootError>
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo > 0.0 && hi > lo);
    let mut f_lo = eval(&mut f, lo)?;
    let mut f_hi = eval(&mut f, hi)?;
    for _ in 0..max_expansions {
        if f_lo == 0.0 || f_hi == 0.0 || f_lo.signum() != f_hi.signum() {
            return Ok((lo, hi));
        }
        lo *= 0.5;
        hi *= 2.0;
        f_lo = eval(&mut f, lo)?;
        f_hi = eval(&mut f, hi)?;
    }
    if f_lo == 0.0 || f_hi == 0.0 || f_lo.signum() != f_hi.signum() {
        Ok((lo, hi))
    } else {
        Err(RootError::NoSignChange { lo, hi, f_lo, f_hi })
    }
}

/// Convenience wrapper: bracket from an initial guess, then bisect.
pub fn solve_positive<F>(mut f: F, guess: f64, opts: RootOptions) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let guess = if guess.is_finite() && guess > 0.0 {
        guess
    } else {
        1.0
    };
    let (lo, hi) = bracket_positive(&mut f, 0.5 * guess, 2.0 * guess, opts.max_iter)?;
    bisect(f, lo, hi, opts)
}

fn eval<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64, RootError> {
    let y = f(x);
    if y.is_nan() {
        Err(RootError::NotANumber { x })
    } else {
        Ok(y)
    }
}
