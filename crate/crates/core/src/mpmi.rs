//! Exact matrix, noisy right-hand side: solving through a better-conditioned
//! neighbour of the matrix.
//!
//! The exact matrix `A = U diag(rho) V^T` is replaced by
//! `A~_h = U diag(rho_k x_k(h)) V^T`, where the filter family `x_k(h)` starts
//! at 1 for `h = 0`, stays in `(1, c_k]` while index `k` survives and drops to
//! 0 past a breakpoint. The level `h(delta)` is the generalized root of the
//! discrepancy equation
//!
//! ```text
//! beta_delta^2(h) = sum_{k <= r} (1 - 1/x_k(h))^2 v_k^2 + mu_delta^2 = delta^2 + mu_delta^2
//! ```
//!
//! with `v = U^T u_delta` and `mu_delta = |A A^+ u_delta - u_delta|`.
//! The solution is `z_delta = A~_{h(delta)}^+ u_delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Vector};
use crate::mpm::mpm_breakpoint;
use crate::quartic::{quartic_excess, T_MAX};
use crate::report::{tail_norm_sq, Method, Parameter, SolveReport};
use crate::root::{generalized_root, Side};
use crate::svd::{svd, SvdFactors};

/// A family of singular-value multipliers `x_k(h)`, `k < len()`.
///
/// Implementations must satisfy, for `0 < h <= breakpoint(k)`:
/// `1 < x_k(h) <= bound(k)`; `x_k(0) = 1`; `x_k(h) = 0` past the breakpoint;
/// left continuity; and `1 / x_k(h)` nonincreasing in `h`.
pub trait FilterFamily {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Level past which `x_k(h) = 0`.
    fn breakpoint(&self, k: usize) -> f64;

    /// `x_k(h)`, left-continuous.
    fn x(&self, k: usize, h: f64) -> f64;

    /// `1 - theta(x_k(h))`, with `side` selecting the value or the right limit.
    fn complement(&self, k: usize, h: f64, side: Side) -> f64 {
        if side == Side::Right && h >= self.breakpoint(k) {
            return 1.0;
        }
        let x = self.x(k, h);
        if x > 0.0 {
            1.0 - 1.0 / x
        } else {
            1.0
        }
    }

    /// Upper bound `c_k` of `x_k` while the index survives.
    fn bound(&self, k: usize) -> f64;

    /// `a_k` in the small-`h` expansion `x_k(h) ~ 1 + a_k h`.
    fn slope(&self, k: usize) -> f64;

    /// A level `H` past every breakpoint, where the family is identically 0.
    fn cap(&self) -> f64 {
        (0..self.len()).map(|k| self.breakpoint(k)).fold(0.0, f64::max) * 2.0
    }
}

/// The MPMI family: `x_k(h)` solves `x^4 - x^3 = h / rho_k^4` on `[1, 3/2]`
/// for `h <= (27/16) rho_k^4`, and is 0 beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpmiFamily {
    rho: Vec<f64>,
    breaks: Vec<f64>,
}

impl MpmiFamily {
    /// Builds the family from positive singular values.
    pub fn new(rho: &[f64]) -> Result<Self> {
        if let Some(bad) = rho.iter().find(|&&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidInput(format!("singular value {bad} must be positive")));
        }
        Ok(MpmiFamily {
            rho: rho.to_vec(),
            breaks: rho.iter().map(|&r| mpm_breakpoint(r)).collect(),
        })
    }

    /// Family over the numerical range of `svd`.
    pub fn from_svd(svd: &SvdFactors) -> Self {
        let rho = svd.range_sigma();
        MpmiFamily {
            rho: rho.to_vec(),
            breaks: rho.iter().map(|&r| mpm_breakpoint(r)).collect(),
        }
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    fn excess(&self, k: usize, h: f64) -> Option<f64> {
        let brk = self.breaks[k];
        if h > brk {
            None
        } else if h == brk {
            Some(0.5)
        } else if h == 0.0 {
            Some(0.0)
        } else {
            Some(quartic_excess(h / self.rho[k].powi(4)))
        }
    }
}

impl FilterFamily for MpmiFamily {
    fn len(&self) -> usize {
        self.rho.len()
    }

    fn breakpoint(&self, k: usize) -> f64 {
        self.breaks[k]
    }

    fn x(&self, k: usize, h: f64) -> f64 {
        self.excess(k, h).map_or(0.0, |y| 1.0 + y)
    }

    fn complement(&self, k: usize, h: f64, side: Side) -> f64 {
        if side == Side::Right && h >= self.breaks[k] {
            return 1.0;
        }
        self.excess(k, h).map_or(1.0, |y| y / (1.0 + y))
    }

    fn bound(&self, _k: usize) -> f64 {
        1.5
    }

    fn slope(&self, k: usize) -> f64 {
        self.rho[k].powi(-4)
    }

    fn cap(&self) -> f64 {
        self.breaks.first().copied().unwrap_or(T_MAX) * 2.0
    }
}

/// Single-index MPMI multiplier `x(h)` for singular value `rho`.
pub fn mpmi_x(rho: f64, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::InvalidInput(format!("h = {h} must be >= 0")));
    }
    Ok(MpmiFamily::new(&[rho])?.x(0, h))
}

/// `|A A^+ u - u|` computed from the coordinates of `u` outside the range.
pub fn mu_delta(svd: &SvdFactors, u_delta: &[f64]) -> Result<f64> {
    let v = svd.project(u_delta)?;
    Ok(tail_norm_sq(&v, svd.rank()).sqrt())
}

fn beta_sq_side(h: f64, v: &[f64], mu_sq: f64, family: &impl FilterFamily, side: Side) -> f64 {
    let mut acc = mu_sq;
    for (k, vk) in v.iter().enumerate().take(family.len()) {
        let c = family.complement(k, h, side);
        acc += c * c * vk * vk;
    }
    acc
}

/// `beta_delta^2(h)` given the projected right-hand side `v = U^T u_delta`.
pub fn beta_delta_sq(h: f64, svd: &SvdFactors, v: &[f64], family: &impl FilterFamily) -> Result<f64> {
    if v.len() != svd.rows() {
        return Err(Error::DimensionMismatch(format!(
            "projected right-hand side has length {}, expected {}",
            v.len(),
            svd.rows()
        )));
    }
    if !(h >= 0.0) {
        return Err(Error::InvalidInput(format!("h = {h} must be >= 0")));
    }
    let mu_sq = tail_norm_sq(v, family.len());
    Ok(beta_sq_side(h, v, mu_sq, family, Side::At))
}

/// Values of `beta_delta^2` on both sides of a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakpointJump {
    pub h: f64,
    pub left: f64,
    pub right: f64,
}

/// Sampled discrepancy function, for inspection and plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCurve {
    /// `(h, beta_delta^2(h))` on an increasing grid starting at 0.
    pub samples: Vec<(f64, f64)>,
    pub jumps: Vec<BreakpointJump>,
    pub mu_delta_sq: f64,
    pub u_norm_sq: f64,
}

impl DiscrepancyCurve {
    /// Samples `beta_delta^2` at `h = 0` and `points - 1` log-spaced levels
    /// from a thousandth of the smallest breakpoint up to the family cap.
    pub fn scan(svd: &SvdFactors, u_delta: &[f64], family: &impl FilterFamily, points: usize) -> Result<Self> {
        let v = svd.project(u_delta)?;
        let mu_sq = tail_norm_sq(&v, family.len());
        let u_norm_sq = v.iter().map(|x| x * x).sum();
        let lo = (0..family.len())
            .map(|k| family.breakpoint(k))
            .filter(|&b| b > 0.0)
            .fold(f64::INFINITY, f64::min);
        let hi = family.cap();
        let mut samples = vec![(0.0, beta_sq_side(0.0, &v, mu_sq, family, Side::At))];
        if lo.is_finite() && points > 1 {
            let (l0, l1) = ((lo * 1e-3).ln(), hi.ln());
            for i in 0..points - 1 {
                let frac = if points > 2 {
                    i as f64 / (points - 2) as f64
                } else {
                    1.0
                };
                let h = (l0 + (l1 - l0) * frac).exp();
                samples.push((h, beta_sq_side(h, &v, mu_sq, family, Side::At)));
            }
        }
        let mut breaks: Vec<f64> = (0..family.len()).map(|k| family.breakpoint(k)).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let jumps = breaks
            .into_iter()
            .map(|h| BreakpointJump {
                h,
                left: beta_sq_side(h, &v, mu_sq, family, Side::At),
                right: beta_sq_side(h, &v, mu_sq, family, Side::Right),
            })
            .collect();
        Ok(DiscrepancyCurve {
            samples,
            jumps,
            mu_delta_sq: mu_sq,
            u_norm_sq,
        })
    }
}

/// Generalized root of the discrepancy equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HDelta {
    pub h: f64,
    /// True when `h` is a breakpoint that `beta_delta^2` jumps across.
    pub jump: bool,
    /// `delta^2 + mu_delta^2`.
    pub target: f64,
    /// `beta_delta^2(h) = beta_delta^2(h - 0)`.
    pub beta_sq: f64,
    /// `beta_delta^2(h + 0)`.
    pub beta_sq_right: f64,
    pub mu_delta_sq: f64,
    pub u_norm_sq: f64,
}

/// Solves `beta_delta^2(h) = delta_abs^2 + mu_delta^2` for `h(delta)`.
pub fn solve_h_delta(svd: &SvdFactors, u_delta: &[f64], delta_abs: f64, family: &impl FilterFamily) -> Result<HDelta> {
    if !(delta_abs > 0.0) || !delta_abs.is_finite() {
        return Err(Error::InvalidInput(format!("noise level {delta_abs} must be positive")));
    }
    let v = svd.project(u_delta)?;
    solve_h_delta_projected(&v, delta_abs, family)
}

pub(crate) fn solve_h_delta_projected(v: &[f64], delta_abs: f64, family: &impl FilterFamily) -> Result<HDelta> {
    let mu_sq = tail_norm_sq(v, family.len());
    let u_norm_sq: f64 = v.iter().map(|x| x * x).sum();
    let target = delta_abs * delta_abs + mu_sq;
    if target >= u_norm_sq {
        return Err(Error::NoiseDominatesSignal { target, u_norm_sq });
    }
    let breaks: Vec<f64> = (0..family.len()).map(|k| family.breakpoint(k)).collect();
    let root = generalized_root(&breaks, target, |h, side| beta_sq_side(h, v, mu_sq, family, side))
        .map_err(|_| Error::NoiseDominatesSignal { target, u_norm_sq })?;
    Ok(HDelta {
        h: root.point,
        jump: root.jump,
        target,
        beta_sq: root.value,
        beta_sq_right: beta_sq_side(root.point, v, mu_sq, family, Side::Right),
        mu_delta_sq: mu_sq,
        u_norm_sq,
    })
}

/// `rho_k x_k(h)` for every index of the family.
pub fn filtered_spectrum(family: &MpmiFamily, h: f64) -> Vec<f64> {
    (0..family.len()).map(|k| family.rho[k] * family.x(k, h)).collect()
}

/// Spectral condition number of `A~_h`: largest over smallest nonzero
/// filtered singular value.
pub fn condition_number_filtered(svd: &SvdFactors, family: &MpmiFamily, h: f64) -> Result<f64> {
    if family.len() > svd.sigma().len() {
        return Err(Error::DimensionMismatch("family longer than the spectrum".into()));
    }
    let vals = filtered_spectrum(family, h);
    let nz = vals.iter().copied().filter(|&s| s > 0.0);
    let max = nz.clone().fold(0.0f64, f64::max);
    let min = nz.fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return Err(Error::UndefinedCondition);
    }
    Ok(max / min)
}

/// Number of indices that survive at level `h` (those with `h <= h_k`).
pub fn effective_rank(family: &impl FilterFamily, h: f64) -> usize {
    (0..family.len()).filter(|&k| h <= family.breakpoint(k)).count()
}

/// Detailed MPMI outcome: the report plus the root diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpmiSolution {
    pub report: SolveReport,
    pub root: HDelta,
    pub filtered_sigma: Vec<f64>,
}

/// MPMI solve from a precomputed factorization of the exact matrix.
pub fn mpmi_solve(svd: &SvdFactors, u_delta: &Vector, delta_abs: f64) -> Result<SolveReport> {
    mpmi_solve_detailed(svd, u_delta, delta_abs).map(|s| s.report)
}

/// MPMI solve that factors `a_bar` first.
pub fn mpmi_solve_matrix(a_bar: &DenseMatrix, u_delta: &Vector, delta_abs: f64) -> Result<SolveReport> {
    mpmi_solve(&svd(a_bar)?, u_delta, delta_abs)
}

pub fn mpmi_solve_detailed(svd: &SvdFactors, u_delta: &Vector, delta_abs: f64) -> Result<MpmiSolution> {
    if u_delta.norm() == 0.0 {
        return Err(Error::InvalidInput("right-hand side is zero".into()));
    }
    if !(delta_abs > 0.0) || !delta_abs.is_finite() {
        return Err(Error::InvalidInput(format!("noise level {delta_abs} must be positive")));
    }
    let family = MpmiFamily::from_svd(svd);
    if family.is_empty() {
        return Err(Error::UndefinedCondition);
    }
    let v = svd.project(u_delta)?;
    let root = solve_h_delta_projected(&v, delta_abs, &family)?;
    let filtered = filtered_spectrum(&family, root.h);
    let weights: Vec<f64> = filtered.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
    let coeffs: Vec<f64> = weights.iter().zip(v.iter()).map(|(w, c)| w * c).collect();
    let solution = svd.synthesize(&coeffs);
    let report = SolveReport::from_spectral(
        svd,
        &v,
        &weights,
        solution,
        Method::Mpmi,
        Parameter::H(root.h),
        effective_rank(&family, root.h),
        condition_number_filtered(svd, &family, root.h)?,
        root.jump,
    )?;
    Ok(MpmiSolution {
        report,
        root,
        filtered_sigma: filtered,
    })
}
