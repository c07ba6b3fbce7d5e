//! Rounding helpers that tolerate floating-point noise around integers.
//!
//! Products like `0.8 * 60.0` or ratios like `16.0 / 1.0000000000000002`
//! land a few ulps away from the integer they represent. A plain `ceil` or
//! `floor` would then jump a whole step, which turns into an extra VM or a
//! lost concurrency slot.

const REL_EPS: f64 = 1e-9;

fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    if (x - r).abs() <= REL_EPS * r.abs().max(1.0) {
        Some(r)
    } else {
        None
    }
}

pub(crate) fn ceil_tol(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.ceil())
}

pub(crate) fn floor_tol(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.floor())
}

/// Rounds `t` up to the next multiple of `quantum`.
pub(crate) fn quantize_up(t: f64, quantum: f64) -> f64 {
    ceil_tol(t / quantum) * quantum
}
