use crate::error::{Error, Result};

/// Root of a monotone scalar function by bisection.
///
/// `g(lo)` and `g(hi)` must differ in sign. The returned point is the
/// midpoint of a bracket of width at most `tol` and always lies in
/// `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut g: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval at floating-point resolution
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
