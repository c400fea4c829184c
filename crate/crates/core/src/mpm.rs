//! Minimal pseudoinverse matrices.
//!
//! Given an approximate matrix `A_h` with `|A_h - A| <= h` (Frobenius), the
//! minimal pseudoinverse is the pseudoinverse of smallest norm among all
//! matrices in that ball. It is obtained by inflating each singular value
//! `rho_k` to `rho_k x_k(lambda)`, with `x^4 - x^3 = lambda / rho_k^4`, or
//! annihilating it once `lambda` passes `lambda_k = (27/16) rho_k^4`. The
//! multiplier `lambda` is fixed by the spectral distance equation
//! `beta(lambda) = h^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Vector};
use crate::quartic::{quartic_excess, T_MAX};
use crate::report::{Method, Parameter, SolveReport};
use crate::root::{generalized_root, GeneralizedRoot, Side};
use crate::svd::{apply_filtered_pinv, svd, SvdFactors};

/// Breakpoint `(27/16) rho^4` past which the singular value is annihilated.
pub fn mpm_breakpoint(rho: f64) -> f64 {
    T_MAX * rho.powi(4)
}

/// Relative excess `x - 1` of the inflated value, or `None` if annihilated.
fn excess(rho: f64, lambda: f64, side: Side) -> Option<f64> {
    if lambda == 0.0 {
        return Some(0.0);
    }
    let brk = mpm_breakpoint(rho);
    match side {
        Side::At if lambda > brk => None,
        Side::Right if lambda >= brk => None,
        _ if lambda == brk => Some(0.5),
        _ => Some(quartic_excess(lambda / rho.powi(4))),
    }
}

/// `rho_k(lambda)`: `rho x(lambda)` up to and including the breakpoint, zero
/// beyond it.
pub fn mpm_filtered_value(rho: f64, lambda: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("singular value {rho} must be positive")));
    }
    check_lambda(lambda)?;
    Ok(excess(rho, lambda, Side::At).map_or(0.0, |y| rho * (1.0 + y)))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda {lambda} must be >= 0")));
    }
    Ok(())
}

fn beta_side(lambda: f64, sigma: &[f64], side: Side) -> f64 {
    sigma
        .iter()
        .filter(|&&rho| rho > 0.0)
        .map(|&rho| match excess(rho, lambda, side) {
            Some(y) => (rho * y) * (rho * y),
            None => rho * rho,
        })
        .sum()
}

/// `beta(lambda) = sum_k (rho_k(lambda) - rho_k)^2` over positive `rho_k`.
pub fn mpm_beta(lambda: f64, sigma: &[f64]) -> Result<f64> {
    check_lambda(lambda)?;
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("singular values must be >= 0".into()));
    }
    Ok(beta_side(lambda, sigma, Side::At))
}

/// Generalized root `lambda(h)` of `beta(lambda) = h^2`.
pub fn mpm_solve_lambda(h: f64, sigma: &[f64]) -> Result<GeneralizedRoot> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "matrix error level h = {h} must be positive"
        )));
    }
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("singular values must be >= 0".into()));
    }
    let h_sq = h * h;
    let breaks: Vec<f64> = sigma.iter().filter(|&&s| s > 0.0).map(|&s| mpm_breakpoint(s)).collect();
    generalized_root(&breaks, h_sq, |lambda, side| beta_side(lambda, sigma, side)).map_err(|e| {
        Error::ErrorExceedsEnergy {
            h_sq,
            energy: e.plateau,
        }
    })
}

/// Spectrum of a minimal pseudoinverse construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpmSpectrum {
    /// Singular values of `A_h`, with the sub-tolerance tail set to zero.
    pub sigma: Vec<f64>,
    /// `(27/16) rho_k^4` for each nonzero `rho_k`, nonincreasing.
    pub lambda_breaks: Vec<f64>,
    pub lambda: f64,
    /// `rho_k(lambda)` for every `k`.
    pub filtered_sigma: Vec<f64>,
    pub jump: bool,
}

impl MpmSpectrum {
    /// Number of nonzero filtered values.
    pub fn rank(&self) -> usize {
        self.filtered_sigma.iter().filter(|&&s| s > 0.0).count()
    }

    /// Ratio of largest to smallest nonzero filtered singular value.
    pub fn condition_number(&self) -> Result<f64> {
        let nz = self.filtered_sigma.iter().filter(|&&s| s > 0.0);
        let max = nz.clone().fold(0.0f64, |a, &b| a.max(b));
        let min = nz.fold(f64::INFINITY, |a, &b| a.min(b));
        if max == 0.0 {
            return Err(Error::UndefinedCondition);
        }
        Ok(max / min)
    }

    /// `|A~_h - A_h|`, i.e. `sqrt(beta(lambda))`.
    pub fn distance(&self) -> f64 {
        self.sigma
            .iter()
            .zip(&self.filtered_sigma)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Filtered spectrum of `A_h` for matrix error level `h`.
pub fn mpm_spectrum(svd: &SvdFactors, h: f64) -> Result<MpmSpectrum> {
    let sigma = svd.truncated_sigma();
    let root = mpm_solve_lambda(h, &sigma)?;
    let filtered_sigma = sigma
        .iter()
        .map(|&rho| {
            if rho > 0.0 {
                mpm_filtered_value(rho, root.point)
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda_breaks = sigma.iter().filter(|&&s| s > 0.0).map(|&s| mpm_breakpoint(s)).collect();
    Ok(MpmSpectrum {
        sigma,
        lambda_breaks,
        lambda: root.point,
        filtered_sigma,
        jump: root.jump,
    })
}

/// Output of the full MPM algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct MpmResult {
    /// The minimal pseudoinverse `A~_h^+`.
    pub a_tilde_plus: DenseMatrix,
    /// The MPM matrix `A~_h`.
    pub a_tilde: DenseMatrix,
    pub spectrum: MpmSpectrum,
}

/// SVD, spectral root and assembly of `A~_h^+` and `A~_h`.
pub fn mpm_pseudoinverse(a_h: &DenseMatrix, h: f64) -> Result<MpmResult> {
    let f = svd(a_h)?;
    mpm_pseudoinverse_from_svd(&f, h)
}

pub fn mpm_pseudoinverse_from_svd(svd: &SvdFactors, h: f64) -> Result<MpmResult> {
    let spectrum = mpm_spectrum(svd, h)?;
    Ok(MpmResult {
        a_tilde_plus: svd.assemble_pinv(&spectrum.filtered_sigma)?,
        a_tilde: svd.assemble(&spectrum.filtered_sigma)?,
        spectrum,
    })
}

/// `z = A~_h^+ u`, treating the factored matrix as the approximate one.
pub fn mpm_solve(svd: &SvdFactors, u: &Vector, h: f64) -> Result<SolveReport> {
    let spectrum = mpm_spectrum(svd, h)?;
    let solution = apply_filtered_pinv(svd, &spectrum.filtered_sigma, u)?;
    let coords = svd.project(u)?;
    let weights: Vec<f64> = spectrum
        .filtered_sigma
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 })
        .collect();
    SolveReport::from_spectral(
        svd,
        &coords,
        &weights,
        solution,
        Method::Mpm,
        Parameter::H(h),
        spectrum.rank(),
        spectrum.condition_number()?,
        spectrum.jump,
    )
}
