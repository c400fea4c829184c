//! The monotone branch of `x^4 - x^3 = t` on `[1, 3/2]`.
//!
//! Both the MPM filter and the MPMI filter family inflate a singular value
//! `rho` to `rho * x` where `x` solves this quartic with `t = lambda / rho^4`.
//! The solver works with the excess `y = x - 1`, because `1 - 1/x = y / (1 + y)`
//! is then available without cancellation when `t` is tiny.

use crate::error::{Error, Result};

/// Upper end of the admissible right-hand side, `(3/2)^4 - (3/2)^3`.
pub const T_MAX: f64 = 27.0 / 16.0;

/// Unique `x` in `[1, 3/2]` with `x^4 - x^3 = t`.
pub fn solve_quartic_monotone(t: f64) -> Result<f64> {
    if !(0.0..=T_MAX).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "quartic right-hand side {t} outside [0, 27/16]"
        )));
    }
    Ok(1.0 + quartic_excess(t))
}

/// `y = x - 1` for the root of `x^4 - x^3 = t`, with `t` clamped to `[0, 27/16]`.
pub(crate) fn quartic_excess(t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    if t >= T_MAX {
        return 0.5;
    }
    // g(y) = y (1 + y)^3 is increasing and convex on [0, 1/2] with g(y) >= y,
    // so Newton started at min(t, 1/2) decreases monotonically onto the root.
    let mut y = t.min(0.5);
    for _ in 0..100 {
        let p = 1.0 + y;
        let g = y * p * p * p - t;
        let dg = p * p * (1.0 + 4.0 * y);
        let next = y - g / dg;
        if !(next < y) {
            break;
        }
        y = next.max(0.0);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection on x^4 - x^3 - t over [1, 1.5], independent of the
    /// Newton path.
    fn bisect(t: f64) -> f64 {
        let (mut lo, mut hi) = (1.0f64, 1.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.powi(4) - mid.powi(3) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn endpoints_are_exact() {
        assert_eq!(solve_quartic_monotone(0.0).unwrap(), 1.0);
        assert_eq!(solve_quartic_monotone(T_MAX).unwrap(), 1.5);
    }

    #[test]
    fn t_one_matches_bisection() {
        let x = solve_quartic_monotone(1.0).unwrap();
        assert!((x - bisect(1.0)).abs() < 1e-14);
        assert!((x - 1.3803).abs() < 1e-4);
    }

    #[test]
    fn tiny_t_keeps_excess() {
        let y = quartic_excess(1e-30);
        assert!((y - 1e-30).abs() < 1e-44);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(solve_quartic_monotone(-1e-3).is_err());
        assert!(solve_quartic_monotone(1.7).is_err());
        assert!(solve_quartic_monotone(f64::NAN).is_err());
    }

    #[test]
    fn agrees_with_bisection_on_grid() {
        for i in 0..=200 {
            let t = T_MAX * i as f64 / 200.0;
            let x = solve_quartic_monotone(t).unwrap();
            assert!((x - bisect(t)).abs() <= 1e-14, "t = {t}");
        }
    }
}
