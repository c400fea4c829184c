//! Comparison methods: truncated SVD, Tikhonov regularization and the
//! Morozov-type variant `(aI + A^T A)^{-1} A^T A A^T (aI + A A^T)^{-1}`.
//!
//! All three act diagonally in the singular basis of the exact matrix, so
//! solutions, residuals and condition numbers are evaluated spectrally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Vector;
use crate::report::{tail_norm_sq, Method, Parameter, SolveReport};
use crate::svd::SvdFactors;

/// Which Tikhonov-type filter to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegMethod {
    /// Filter factors `rho / (a + rho^2)`.
    Tikhonov,
    /// Filter factors `rho^3 / (a + rho^2)^2`.
    Morozov,
}

/// What the residual is matched against when choosing `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscrepancyTarget {
    /// `delta^2 + mu_delta^2`, consistent with the MPMI equation.
    #[default]
    WithFloor,
    /// `delta^2` alone.
    Plain,
}

impl RegMethod {
    /// Multiplier on `v_k` in the solution coordinates.
    pub fn filter(self, rho: f64, alpha: f64) -> f64 {
        let d = alpha + rho * rho;
        match self {
            RegMethod::Tikhonov => rho / d,
            RegMethod::Morozov => rho * rho * rho / (d * d),
        }
    }

    /// `1 - rho * filter`, computed without cancellation.
    fn residual_factor(self, rho: f64, alpha: f64) -> f64 {
        let d = alpha + rho * rho;
        match self {
            RegMethod::Tikhonov => alpha / d,
            // 1 - rho^4/d^2 = alpha (alpha + 2 rho^2) / d^2
            RegMethod::Morozov => alpha * (alpha + 2.0 * rho * rho) / (d * d),
        }
    }

    fn method(self) -> Method {
        match self {
            RegMethod::Tikhonov => Method::Tr,
            RegMethod::Morozov => Method::Morozov,
        }
    }
}

/// Condition number of the diagonal operator `diag(1 / filter_k)` over the range.
pub fn regularized_condition(rho: &[f64], alpha: f64, method: RegMethod) -> Result<f64> {
    if rho.is_empty() {
        return Err(Error::UndefinedCondition);
    }
    let inv: Vec<f64> = rho.iter().map(|&r| 1.0 / method.filter(r, alpha)).collect();
    let max = inv.iter().copied().fold(0.0f64, f64::max);
    let min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max / min)
}

/// Tikhonov filter factors and condition number at a given `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TikhonovSpectrum {
    pub alpha: f64,
    pub factors: Vec<f64>,
    pub cond: f64,
}

impl TikhonovSpectrum {
    pub fn new(rho: &[f64], alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(TikhonovSpectrum {
            alpha,
            factors: rho.iter().map(|&r| RegMethod::Tikhonov.filter(r, alpha)).collect(),
            cond: regularized_condition(rho, alpha, RegMethod::Tikhonov)?,
        })
    }
}

/// Morozov-variant filter factors and condition number at a given `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorozovSpectrum {
    pub alpha: f64,
    pub factors: Vec<f64>,
    pub cond: f64,
}

impl MorozovSpectrum {
    pub fn new(rho: &[f64], alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(MorozovSpectrum {
            alpha,
            factors: rho.iter().map(|&r| RegMethod::Morozov.filter(r, alpha)).collect(),
            cond: regularized_condition(rho, alpha, RegMethod::Morozov)?,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    Ok(())
}

fn check_delta(delta_abs: f64) -> Result<()> {
    if !(delta_abs > 0.0) || !delta_abs.is_finite() {
        return Err(Error::InvalidInput(format!("noise level {delta_abs} must be positive")));
    }
    Ok(())
}

/// Smallest `r <= range` with `sum_{k >= r} v_k^2 <= target`, where the tail
/// past `range` is the fixed floor `mu_sq`.
pub(crate) fn rank_by_tail(v_range: &[f64], mu_sq: f64, target: f64) -> usize {
    let range = v_range.len();
    if target < mu_sq {
        return range;
    }
    let mut tail = mu_sq;
    let mut r = range;
    while r > 0 {
        let next = tail + v_range[r - 1] * v_range[r - 1];
        if next > target {
            break;
        }
        tail = next;
        r -= 1;
    }
    r
}

/// TSVD rank from the discrepancy principle on the right-hand side.
pub fn tsvd_rank_by_discrepancy(svd: &SvdFactors, u_delta: &[f64], delta_abs: f64) -> Result<usize> {
    check_delta(delta_abs)?;
    let v = svd.project(u_delta)?;
    tsvd_rank_projected(&v, svd.rank(), delta_abs)
}

fn tsvd_rank_projected(v: &[f64], range: usize, delta_abs: f64) -> Result<usize> {
    let mu_sq = tail_norm_sq(v, range);
    let u_norm_sq: f64 = v.iter().map(|x| x * x).sum();
    let target = delta_abs * delta_abs + mu_sq;
    if target >= u_norm_sq {
        return Err(Error::NoiseDominatesSignal { target, u_norm_sq });
    }
    Ok(rank_by_tail(&v[..range], mu_sq, target))
}

/// TSVD rank from a known matrix error: the smallest `kappa` whose discarded
/// tail has Frobenius norm at most `h`.
pub fn tsvd_rank_by_matrix_error(sigma: &[f64], h: f64) -> Result<usize> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("h = {h} must be finite and >= 0")));
    }
    let energy: f64 = sigma.iter().map(|s| s * s).sum();
    if h * h >= energy {
        return Err(Error::ErrorExceedsEnergy { h_sq: h * h, energy });
    }
    let mut tail = 0.0;
    let mut kappa = sigma.len();
    while kappa > 0 {
        let next = tail + sigma[kappa - 1] * sigma[kappa - 1];
        if next.sqrt() > h {
            break;
        }
        tail = next;
        kappa -= 1;
    }
    Ok(kappa)
}

/// Truncated-SVD solution keeping the leading `rank` singular values.
pub fn tsvd_solve(svd: &SvdFactors, u_delta: &Vector, rank: usize) -> Result<SolveReport> {
    let v = svd.project(u_delta)?;
    tsvd_solve_projected(svd, &v, rank)
}

pub(crate) fn tsvd_solve_projected(svd: &SvdFactors, v: &[f64], rank: usize) -> Result<SolveReport> {
    if rank == 0 {
        return Err(Error::InvalidInput("TSVD rank must be at least 1".into()));
    }
    if rank > svd.rank() {
        return Err(Error::InvalidInput(format!(
            "TSVD rank {rank} exceeds numerical rank {}",
            svd.rank()
        )));
    }
    let sigma = svd.sigma();
    let weights: Vec<f64> = sigma[..rank].iter().map(|s| 1.0 / s).collect();
    let coeffs: Vec<f64> = weights.iter().zip(v).map(|(w, c)| w * c).collect();
    SolveReport::from_spectral(
        svd,
        v,
        &weights,
        svd.synthesize(&coeffs),
        Method::Tsvd,
        Parameter::Rank(rank),
        rank,
        sigma[0] / sigma[rank - 1],
        false,
    )
}

/// TSVD with the rank chosen by [`tsvd_rank_by_discrepancy`].
pub fn tsvd_solve_discrepancy(svd: &SvdFactors, u_delta: &Vector, delta_abs: f64) -> Result<SolveReport> {
    check_delta(delta_abs)?;
    let v = svd.project(u_delta)?;
    let rank = tsvd_rank_projected(&v, svd.rank(), delta_abs)?;
    tsvd_solve_projected(svd, &v, rank)
}

fn regularized_solve_projected(svd: &SvdFactors, v: &[f64], alpha: f64, method: RegMethod) -> Result<SolveReport> {
    check_alpha(alpha)?;
    let rho = svd.range_sigma();
    if rho.is_empty() {
        return Err(Error::UndefinedCondition);
    }
    let weights: Vec<f64> = rho.iter().map(|&r| method.filter(r, alpha) / r).collect();
    let coeffs: Vec<f64> = rho.iter().zip(v).map(|(&r, c)| method.filter(r, alpha) * c).collect();
    let mut report = SolveReport::from_spectral(
        svd,
        v,
        &weights,
        svd.synthesize(&coeffs),
        method.method(),
        Parameter::Alpha(alpha),
        rho.len(),
        regularized_condition(rho, alpha, method)?,
        false,
    )?;
    report.residual = residual_sq(rho, v, alpha, method).sqrt();
    Ok(report)
}

/// Tikhonov solution `(aI + A^T A)^{-1} A^T u`.
pub fn tikhonov_solve(svd: &SvdFactors, u_delta: &Vector, alpha: f64) -> Result<SolveReport> {
    let v = svd.project(u_delta)?;
    regularized_solve_projected(svd, &v, alpha, RegMethod::Tikhonov)
}

/// Morozov-variant solution with filter factors `rho^3 / (a + rho^2)^2`.
pub fn morozov_variant_solve(svd: &SvdFactors, u_delta: &Vector, alpha: f64) -> Result<SolveReport> {
    let v = svd.project(u_delta)?;
    regularized_solve_projected(svd, &v, alpha, RegMethod::Morozov)
}

/// `|A z_alpha - u|^2` in spectral form.
fn residual_sq(rho: &[f64], v: &[f64], alpha: f64, method: RegMethod) -> f64 {
    let head: f64 = rho
        .iter()
        .zip(v)
        .map(|(&r, &c)| {
            let f = method.residual_factor(r, alpha);
            f * f * c * c
        })
        .sum();
    head + tail_norm_sq(v, rho.len())
}

/// `alpha(delta)` from the discrepancy principle, by bisection on `ln alpha`
/// over `[eps rho_1^2, 1e6 rho_1^2]`.
pub fn discrepancy_alpha(svd: &SvdFactors, u_delta: &[f64], delta_abs: f64, method: RegMethod) -> Result<f64> {
    discrepancy_alpha_with(svd, u_delta, delta_abs, method, DiscrepancyTarget::WithFloor)
}

pub fn discrepancy_alpha_with(
    svd: &SvdFactors,
    u_delta: &[f64],
    delta_abs: f64,
    method: RegMethod,
    target_kind: DiscrepancyTarget,
) -> Result<f64> {
    check_delta(delta_abs)?;
    let v = svd.project(u_delta)?;
    alpha_projected(svd.range_sigma(), &v, delta_abs, method, target_kind)
}

pub(crate) fn alpha_projected(
    rho: &[f64],
    v: &[f64],
    delta_abs: f64,
    method: RegMethod,
    target_kind: DiscrepancyTarget,
) -> Result<f64> {
    if rho.is_empty() {
        return Err(Error::UndefinedCondition);
    }
    let mu_sq = tail_norm_sq(v, rho.len());
    let u_norm_sq: f64 = v.iter().map(|x| x * x).sum();
    let target = match target_kind {
        DiscrepancyTarget::WithFloor => delta_abs * delta_abs + mu_sq,
        DiscrepancyTarget::Plain => delta_abs * delta_abs,
    };
    if target >= u_norm_sq {
        return Err(Error::NoiseDominatesSignal { target, u_norm_sq });
    }
    let tol = 1e-10 * u_norm_sq;
    let scale = rho[0] * rho[0];
    let (mut lo, mut hi) = ((f64::EPSILON * scale).ln(), (1e6 * scale).ln());
    let f = |ln_a: f64| residual_sq(rho, v, ln_a.exp(), method);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo > target + tol || f_hi < target - tol {
        return Err(Error::BracketExhausted {
            target,
            low_residual: f_lo,
            high_residual: f_hi,
        });
    }
    if (f_lo - target).abs() <= tol {
        return Ok(lo.exp());
    }
    if (f_hi - target).abs() <= tol {
        return Ok(hi.exp());
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm - target).abs() <= tol {
            return Ok(mid.exp());
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a_lo, a_hi) = (f(lo), f(hi));
    Ok(if (a_lo - target).abs() <= (a_hi - target).abs() {
        lo.exp()
    } else {
        hi.exp()
    })
}

/// Tikhonov-type solve with `alpha` from the discrepancy principle.
pub fn regularized_solve_discrepancy(
    svd: &SvdFactors,
    u_delta: &Vector,
    delta_abs: f64,
    method: RegMethod,
    target_kind: DiscrepancyTarget,
) -> Result<SolveReport> {
    check_delta(delta_abs)?;
    let v = svd.project(u_delta)?;
    let alpha = alpha_projected(svd.range_sigma(), &v, delta_abs, method, target_kind)?;
    regularized_solve_projected(svd, &v, alpha, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use crate::svd::svd;
    use approx::assert_relative_eq;

    fn diag_svd(d: &[f64]) -> SvdFactors {
        svd(&DenseMatrix::from_diag(d.len(), d.len(), d).unwrap()).unwrap()
    }

    fn vec(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn rank_by_tail_examples() {
        assert_eq!(rank_by_tail(&[3.0, 0.0, 0.0], 0.0, 0.5), 1);
        // v = (2, 1 | 1): tails 6, 2, 1; target 1.5
        assert_eq!(rank_by_tail(&[2.0, 1.0], 1.0, 1.5), 2);
        assert_eq!(rank_by_tail(&[2.0, 1.0], 1.0, 0.5), 2);
    }

    #[test]
    fn rank_by_discrepancy_on_diag() {
        let f = svd(&DenseMatrix::from_diag(3, 3, &[1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(
            tsvd_rank_by_discrepancy(&f, &[2.0, 1.0, 1.0], 0.5f64.sqrt()).unwrap(),
            2
        );
        let f = diag_svd(&[3.0, 2.0, 1.0]);
        assert_eq!(tsvd_rank_by_discrepancy(&f, &[3.0, 0.0, 0.0], 2.9).unwrap(), 1);
        assert!(tsvd_rank_by_discrepancy(&f, &[3.0, 0.0, 0.0], 3.0).is_err());
    }

    #[test]
    fn rank_by_matrix_error_examples() {
        assert_eq!(tsvd_rank_by_matrix_error(&[3.0, 2.0, 1.0], 2.4).unwrap(), 1);
        assert_eq!(tsvd_rank_by_matrix_error(&[1.0], 0.5).unwrap(), 1);
        assert_eq!(tsvd_rank_by_matrix_error(&[3.0, 2.0, 1.0], 0.0).unwrap(), 3);
        assert!(tsvd_rank_by_matrix_error(&[1.0], 1.0).is_err());
    }

    #[test]
    fn tsvd_examples() {
        let f = diag_svd(&[2.0, 1.0]);
        let r = tsvd_solve(&f, &vec(&[2.0, 1.0]), 1).unwrap();
        assert_relative_eq!(r.solution[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.solution[1], 0.0, epsilon = 1e-15);
        assert_eq!(r.condition_number, 1.0);
        let full = tsvd_solve(&f, &vec(&[2.0, 1.0]), 2).unwrap();
        assert_relative_eq!(full.solution[1], 1.0, epsilon = 1e-15);
        assert!(tsvd_solve(&f, &vec(&[2.0, 1.0]), 0).is_err());
        assert!(tsvd_solve(&f, &vec(&[2.0, 1.0]), 3).is_err());
    }

    #[test]
    fn tikhonov_and_morozov_scalar() {
        let f = diag_svd(&[1.0]);
        let t = tikhonov_solve(&f, &vec(&[1.0]), 1.0).unwrap();
        assert_relative_eq!(t.solution[0], 0.5, max_relative = 1e-15);
        let m = morozov_variant_solve(&f, &vec(&[1.0]), 1.0).unwrap();
        assert_relative_eq!(m.solution[0], 0.25, max_relative = 1e-15);
        assert!(tikhonov_solve(&f, &vec(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn small_alpha_recovers_inverse() {
        let a = DenseMatrix::new(2, 2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        let f = svd(&a).unwrap();
        let u = vec(&[1.0, 2.0]);
        for solve in [tikhonov_solve, morozov_variant_solve] {
            let z = solve(&f, &u, 1e-14).unwrap().solution;
            assert!((z[0] - 0.2).abs() < 1e-10 && (z[1] - 0.6).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_alpha() {
        let f = diag_svd(&[1.0]);
        let a = discrepancy_alpha(&f, &[2.0], 1.0, RegMethod::Tikhonov).unwrap();
        assert_relative_eq!(a, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn morozov_condition_expansion() {
        let rho = [5.0, 2.0, 0.5];
        let alpha: f64 = 1e-6 * 0.25;
        let nu: f64 = 10.0;
        let approx = nu * (1.0 - alpha * (1.0 / 0.25 - 1.0 / 25.0)).powi(2);
        let exact = MorozovSpectrum::new(&rho, alpha).unwrap().cond;
        assert!(((exact - approx) / nu).abs() < 1e-10);
        assert!(exact < nu);
    }

    #[test]
    fn tikhonov_condition_improves_below_product() {
        let rho = [4.0, 1.0, 0.25];
        let nu = 16.0;
        for alpha in [1e-6, 1e-3, 0.1, 0.5, 0.99] {
            assert!(TikhonovSpectrum::new(&rho, alpha).unwrap().cond < nu, "alpha {alpha}");
        }
    }
}
