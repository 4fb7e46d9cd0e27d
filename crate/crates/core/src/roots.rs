//! Bracketed scalar root refinement: bisection, then safeguarded Newton.

use crate::error::{Error, Result};

/// Stopping rule for [`bisect_polish`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Stop when `|f(x)| <= residual`.
    pub residual: f64,
    /// Stop when the bracket width is at most `relative_width * max(|lo|, |hi|)`.
    pub relative_width: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            residual: 1e-12,
            relative_width: 1e-15,
        }
    }
}

const BISECTION_STEPS: usize = 20;
const MAX_STEPS: usize = 400;

/// Refines a root of `f` inside `[lo, hi]`, which must bracket a sign change.
///
/// Runs a fixed number of bisection steps to shrink the bracket, then
/// switches to Newton steps that are accepted only if they land strictly
/// inside the current bracket (otherwise the step bisects). The bracket is
/// maintained throughout, so the result always lies in `[lo, hi]`.
pub fn bisect_polish<F, D>(
    op: &'static str,
    f: F,
    df: D,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSignChange {
            op,
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let width_ok = |a: f64, b: f64| (b - a) <= tol.relative_width * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);

    let mut x = 0.5 * (a + b);
    for step in 0..MAX_STEPS {
        let fx = f(x);
        if fx == 0.0 || fx.abs() <= tol.residual && step >= BISECTION_STEPS {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        if width_ok(a, b) {
            return Ok(closer(&f, a, b));
        }
        let mid = 0.5 * (a + b);
        x = if step < BISECTION_STEPS {
            mid
        } else {
            let d = df(x);
            let newton = x - fx / d;
            if d.is_finite() && d != 0.0 && newton > a && newton < b {
                newton
            } else {
                mid
            }
        };
        if x == a || x == b {
            return Ok(closer(&f, a, b));
        }
    }
    Ok(closer(&f, a, b))
}

fn closer<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}
