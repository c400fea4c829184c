//! Generalized roots of nondecreasing, left-continuous step-and-ramp functions.
//!
//! Both discrepancy equations in this crate have the same shape: a function
//! that is continuous and increasing between analytically known breakpoints,
//! left-continuous at each breakpoint, and jumps up just past it. A
//! generalized root of `f = target` is either an ordinary root inside a
//! continuity interval or a breakpoint `p` with `f(p) <= target <= f(p + 0)`.

use serde::{Deserialize, Serialize};

/// Where to evaluate relative to a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The value at the point (equal to the left limit).
    At,
    /// The right limit.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedRoot {
    pub point: f64,
    /// True when `point` is a breakpoint the function jumps across.
    pub jump: bool,
    /// `f(point)`, i.e. the left-continuous value.
    pub value: f64,
}

/// Outcome when no generalized root exists below the plateau.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AbovePlateau {
    pub plateau: f64,
}

/// Finds the generalized root of `f(p) = target` on `p >= 0`.
///
/// `breakpoints` must be positive. `f(0, Side::Right)` is the starting level,
/// and `f(max breakpoint, Side::Right)` is the plateau. Inside a continuity
/// interval the search bisects until the bracket collapses to adjacent
/// floating-point numbers, returning the endpoint whose value is closest to
/// `target`.
pub(crate) fn generalized_root(
    breakpoints: &[f64],
    target: f64,
    f: impl Fn(f64, Side) -> f64,
) -> Result<GeneralizedRoot, AbovePlateau> {
    let mut points: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > 0.0).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut prev = 0.0;
    let mut prev_right = f(0.0, Side::Right);
    if target < prev_right {
        // Only reachable if the function jumps at zero itself.
        return Ok(GeneralizedRoot {
            point: 0.0,
            jump: true,
            value: f(0.0, Side::At),
        });
    }
    for &p in &points {
        let at_p = f(p, Side::At);
        if target <= at_p {
            return Ok(bisect(prev, prev_right, p, at_p, target, &f));
        }
        let right_p = f(p, Side::Right);
        if target < right_p {
            return Ok(GeneralizedRoot {
                point: p,
                jump: true,
                value: at_p,
            });
        }
        prev = p;
        prev_right = right_p;
    }
    Err(AbovePlateau { plateau: prev_right })
}

fn bisect(
    mut lo: f64,
    mut f_lo: f64,
    mut hi: f64,
    mut f_hi: f64,
    target: f64,
    f: &impl Fn(f64, Side) -> f64,
) -> GeneralizedRoot {
    // f_lo is a right limit at the segment start, f_hi a value at an
    // interior point or at the segment end.
    let start = lo;
    for _ in 0..4000 {
        if f_hi == target {
            break;
        }
        let mid = if lo > 0.0 && hi > 4.0 * lo {
            (lo.sqrt() * hi.sqrt()).clamp(lo, hi)
        } else {
            lo + 0.5 * (hi - lo)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid, Side::At);
        if f_mid < target {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // The segment start itself belongs to the previous interval, so only an
    // interior lo is a candidate.
    if lo > start && (target - f_lo).abs() < (f_hi - target).abs() {
        GeneralizedRoot {
            point: lo,
            jump: false,
            value: f_lo,
        }
    } else {
        GeneralizedRoot {
            point: hi,
            jump: false,
            value: f_hi,
        }
    }
}
