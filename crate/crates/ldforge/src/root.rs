//! Bracketing root finders.  All monotone functionals in this crate are
//! root-found by bisection; brackets are either known a priori or grown
//! geometrically.

use crate::{Error, Result};

/// Bisection on `[lo, hi]`; requires a sign change.  Tolerance is on the
/// abscissa.  Returns the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NonConvergence(format!(
            "bisect: no sign change on [{lo}, {hi}] (f = {flo:.3e}, {fhi:.3e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grow a bracket for `f` around `x0 > 0` by repeated doubling/halving, then
/// bisect.  Intended for monotone `f` with a single root on `(0, inf)`.
/// `max_doublings` caps the expansion in each direction.
pub fn bisect_expanding<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    xtol: f64,
    max_doublings: u32,
) -> Result<f64> {
    let f0 = f(x0);
    if f0 == 0.0 {
        return Ok(x0);
    }
    let mut lo = x0;
    let mut hi = x0;
    let mut flo = f0;
    let mut fhi = f0;
    for _ in 0..max_doublings {
        if flo.signum() != f0.signum() || fhi.signum() != f0.signum() {
            break;
        }
        lo *= 0.5;
        hi *= 2.0;
        flo = f(lo);
        fhi = f(hi);
    }
    if flo.signum() != f0.signum() {
        bisect(f, lo, x0.min(hi), xtol)
    } else if fhi.signum() != f0.signum() {
        bisect(f, lo.max(x0), hi, xtol)
    } else {
        Err(Error::NonConvergence(format!(
            "bracket expansion failed on [{lo:.3e}, {hi:.3e}] around {x0:.3e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn expansion_locates_far_root() {
        let r = bisect_expanding(|x| x - 100.0, 1.0, 1e-12, 60).unwrap();
        assert!((r - 100.0).abs() < 1e-10);
    }
}
