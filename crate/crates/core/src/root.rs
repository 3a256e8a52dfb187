//! Bisection for nonincreasing functions.
//!
//! Every root in this crate is the crossing of a monotone function from
//! `≥ 0` to `< 0`, so a sign-preserving bracket is all that is needed.

use crate::error::{Error, Result};

pub const X_TOL: f64 = 1e-10;
pub const F_TOL: f64 = 1e-10;
const MAX_ITER: usize = 400;
const MAX_DOUBLINGS: usize = 200;

/// Final bracket of a bisection: `f(lo) ≥ 0 > f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// The feasible endpoint together with its residual.
    pub fn feasible(&self) -> (f64, f64) {
        (self.lo, self.f_lo.abs())
    }
}

/// Shrinks `[lo, hi]` with `f(lo) ≥ 0 > f(hi)` until `hi − lo ≤ X_TOL`
/// (relative for large abscissae) and `f(lo) ≤ F_TOL`, or until the bracket
/// cannot shrink further in floating point.
pub fn bisect_decreasing<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<Bracket> {
    let mut b = Bracket { lo, hi, f_lo: f(lo), f_hi: f(hi) };
    if !(b.f_lo >= 0.0) || !(b.f_hi < 0.0) {
        return Err(Error::NoBracket(format!("f({lo}) = {}, f({hi}) = {}: need f(lo) >= 0 > f(hi)", b.f_lo, b.f_hi)));
    }
    for _ in 0..MAX_ITER {
        let width = b.hi - b.lo;
        if width <= X_TOL * b.lo.abs().max(1.0) && b.f_lo <= F_TOL {
            break;
        }
        if width <= 4.0 * f64::EPSILON * b.lo.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let m = b.lo + 0.5 * width;
        let fm = f(m);
        if fm >= 0.0 {
            b.lo = m;
            b.f_lo = fm;
        } else {
            b.hi = m;
            b.f_hi = fm;
        }
    }
    Ok(b)
}

/// Doubles `hi` from `start` until `f(hi) < 0`, then bisects on `[lo, hi]`.
pub fn bisect_decreasing_unbounded<F: FnMut(f64) -> f64>(mut f: F, lo: f64, start: f64) -> Result<Bracket> {
    let mut hi = start.max(lo + 1.0);
    let mut inner_lo = lo;
    let mut fh = f(hi);
    let mut k = 0;
    while fh >= 0.0 {
        k += 1;
        if k > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NoBracket(format!("function stays nonnegative up to {hi}")));
        }
        inner_lo = hi;
        hi *= 2.0;
        fh = f(hi);
    }
    bisect_decreasing(f, inner_lo, hi)
}
