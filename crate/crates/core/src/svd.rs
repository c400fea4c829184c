//! Singular value decomposition and pseudoinverse machinery.
//!
//! The factorization is a one-sided (Hestenes) Jacobi iteration: columns of
//! the working matrix are rotated pairwise until they are mutually orthogonal
//! to working precision. It is slow compared to bidiagonalization for large
//! matrices but computes small singular values to high relative accuracy and
//! is bit-for-bit deterministic for a given input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, frobenius_norm, DenseMatrix, Vector};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(sigma) V^T` with full orthogonal `U` (m x m) and `V` (n x n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    u: DenseMatrix,
    v: DenseMatrix,
    sigma: Vec<f64>,
    rank_tolerance: f64,
}

impl SvdFactors {
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// Singular values, nonincreasing, length `min(m, n)`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Replaces the default `sigma_1 * max(m, n) * eps` threshold.
    pub fn with_rank_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(Error::InvalidInput(format!(
                "rank tolerance {tol} must be finite and >= 0"
            )));
        }
        self.rank_tolerance = tol;
        Ok(self)
    }

    /// Number of singular values strictly above the rank tolerance.
    pub fn rank(&self) -> usize {
        self.sigma.iter().take_while(|&&s| s > self.rank_tolerance).count()
    }

    /// Leading `rank()` singular values.
    pub fn range_sigma(&self) -> &[f64] {
        &self.sigma[..self.rank()]
    }

    /// Coordinates of `y` in the left singular basis, `U^T y`.
    pub fn project(&self, y: &[f64]) -> Result<Vector> {
        if y.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, matrix has {} rows",
                y.len(),
                self.rows()
            )));
        }
        self.u.tr_matvec(y)
    }

    /// `sum_k weights[k] * V[:, k]` for `k < weights.len() <= n`.
    pub fn synthesize(&self, weights: &[f64]) -> Vector {
        let n = self.cols();
        assert!(weights.len() <= n);
        let out = (0..n).map(|i| dot(&self.v.row(i)[..weights.len()], weights)).collect();
        Vector::from_vec_unchecked(out)
    }

    /// `U diag(values) V^T`.
    pub fn assemble(&self, values: &[f64]) -> Result<DenseMatrix> {
        self.check_spectrum_len(values)?;
        let (m, n) = (self.rows(), self.cols());
        let mut data = vec![0.0; m * n];
        for (k, &s) in values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let us = self.u.get(i, k) * s;
                if us == 0.0 {
                    continue;
                }
                let row = &mut data[i * n..(i + 1) * n];
                for (j, r) in row.iter_mut().enumerate() {
                    *r += us * self.v.get(j, k);
                }
            }
        }
        DenseMatrix::new(m, n, data)
    }

    /// `V diag(theta(values)) U^T`, the explicit filtered pseudoinverse.
    pub fn assemble_pinv(&self, values: &[f64]) -> Result<DenseMatrix> {
        self.check_spectrum_len(values)?;
        let (m, n) = (self.rows(), self.cols());
        let mut data = vec![0.0; n * m];
        for (k, &s) in values.iter().enumerate() {
            let w = theta(s)?;
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vw = self.v.get(i, k) * w;
                if vw == 0.0 {
                    continue;
                }
                let row = &mut data[i * m..(i + 1) * m];
                for (j, r) in row.iter_mut().enumerate() {
                    *r += vw * self.u.get(j, k);
                }
            }
        }
        DenseMatrix::new(n, m, data)
    }

    /// Moore-Penrose pseudoinverse with singular values at or below the rank
    /// tolerance treated as zero.
    pub fn pinv(&self) -> Result<DenseMatrix> {
        self.assemble_pinv(&self.truncated_sigma())
    }

    /// Singular values with the sub-tolerance tail set to zero.
    pub fn truncated_sigma(&self) -> Vec<f64> {
        let r = self.rank();
        self.sigma
            .iter()
            .enumerate()
            .map(|(k, &s)| if k < r { s } else { 0.0 })
            .collect()
    }

    fn check_spectrum_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.sigma.len() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum has {} values, expected {}",
                values.len(),
                self.sigma.len()
            )));
        }
        Ok(())
    }
}

/// Reciprocal with the convention `theta(0) = 0`.
pub fn theta(rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidInput(format!("theta needs rho >= 0, got {rho}")));
    }
    Ok(if rho > 0.0 { 1.0 / rho } else { 0.0 })
}

/// `V diag(theta(filtered_sigma)) U^T u` without forming the pseudoinverse.
pub fn apply_filtered_pinv(svd: &SvdFactors, filtered_sigma: &[f64], u: &[f64]) -> Result<Vector> {
    svd.check_spectrum_len(filtered_sigma)?;
    let coords = svd.project(u)?;
    let weights = filtered_sigma
        .iter()
        .zip(coords.iter())
        .map(|(&s, &c)| Ok(theta(s)? * c))
        .collect::<Result<Vec<_>>>()?;
    Ok(svd.synthesize(&weights))
}

/// `sigma_1 / sigma_r` with `r` the numerical rank.
pub fn spectral_cond(svd: &SvdFactors) -> Result<f64> {
    let r = svd.rank();
    if r == 0 {
        return Err(Error::UndefinedCondition);
    }
    Ok(svd.sigma[0] / svd.sigma[r - 1])
}

/// Residuals of the four Moore-Penrose identities for a candidate `X = A^+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinvCheckReport {
    /// `|AXA - A| / |A|`
    pub axa: f64,
    /// `|XAX - X| / |X|`
    pub xax: f64,
    /// `|(AX)^T - AX| / (|A| |X|)`
    pub ax_symmetric: f64,
    /// `|(XA)^T - XA| / (|A| |X|)`
    pub xa_symmetric: f64,
}

impl PinvCheckReport {
    pub fn max_residual(&self) -> f64 {
        self.axa.max(self.xax).max(self.ax_symmetric).max(self.xa_symmetric)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

pub fn moore_penrose_check(a: &DenseMatrix, a_plus: &DenseMatrix) -> Result<PinvCheckReport> {
    if a.rows() != a_plus.cols() || a.cols() != a_plus.rows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} so A^+ must be {}x{}, got {}x{}",
            a.rows(),
            a.cols(),
            a.cols(),
            a.rows(),
            a_plus.rows(),
            a_plus.cols()
        )));
    }
    let na = frobenius_norm(a);
    let nx = frobenius_norm(a_plus);
    let rel = |num: f64, den: f64| if den > 0.0 { num / den } else { num };

    let ax = a.matmul(a_plus)?;
    let xa = a_plus.matmul(a)?;
    let axa = ax.matmul(a)?.sub(a)?;
    let xax = xa.matmul(a_plus)?.sub(a_plus)?;
    let ax_sym = ax.transpose().sub(&ax)?;
    let xa_sym = xa.transpose().sub(&xa)?;
    Ok(PinvCheckReport {
        axa: rel(frobenius_norm(&axa), na),
        xax: rel(frobenius_norm(&xax), nx),
        ax_symmetric: rel(frobenius_norm(&ax_sym), na * nx),
        xa_symmetric: rel(frobenius_norm(&xa_sym), na * nx),
    })
}

/// Full SVD of `a`.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    // Work on whichever orientation has at least as many rows as columns.
    let transposed = m < n;
    let (len, ncols) = if transposed { (n, m) } else { (m, n) };

    // Column-major working copy: column j of the oriented matrix is
    // work[j * len..(j + 1) * len].
    let mut work = vec![0.0; len * ncols];
    for i in 0..m {
        for j in 0..n {
            let (r, c) = if transposed { (j, i) } else { (i, j) };
            work[c * len + r] = a.get(i, j);
        }
    }
    let mut right = vec![0.0; ncols * ncols];
    for j in 0..ncols {
        right[j * ncols + j] = 1.0;
    }

    jacobi_sweeps(&mut work, &mut right, len, ncols)?;

    let norms: Vec<f64> = (0..ncols).map(|j| column_norm(&work[j * len..(j + 1) * len])).collect();
    let mut order: Vec<usize> = (0..ncols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();

    // Left factor of the oriented matrix, completed to a square basis.
    let mut left_cols: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&j| {
            let s = norms[j];
            if s > 0.0 {
                let mut col: Vec<f64> = work[j * len..(j + 1) * len].iter().map(|x| x / s).collect();
                let nrm = column_norm(&col);
                col.iter_mut().for_each(|x| *x /= nrm);
                Some(col)
            } else {
                None
            }
        })
        .collect();
    left_cols.resize(len, None);
    let left = complete_basis(left_cols, len);

    let mut right_sorted = vec![0.0; ncols * ncols];
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..ncols {
            right_sorted[i * ncols + new_j] = right[old_j * ncols + i];
        }
    }
    let right = DenseMatrix::from_vec_unchecked(ncols, ncols, right_sorted);

    let (u, v) = if transposed { (right, left) } else { (left, right) };
    let rank_tolerance = sigma.first().copied().unwrap_or(0.0) * (m.max(n) as f64) * f64::EPSILON;
    Ok(SvdFactors {
        u,
        v,
        sigma,
        rank_tolerance,
    })
}

fn column_norm(col: &[f64]) -> f64 {
    let scale = col.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let ss: f64 = col.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

/// Hestenes one-sided Jacobi on the columns of `work` (`ncols` columns of
/// length `len`), accumulating the rotations into `right`.
fn jacobi_sweeps(work: &mut [f64], right: &mut [f64], len: usize, ncols: usize) -> Result<usize> {
    if ncols < 2 {
        return Ok(0);
    }
    let tol = (len as f64).sqrt() * f64::EPSILON;
    for sweep in 1..=MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..ncols - 1 {
            for j in i + 1..ncols {
                let (head, tail) = work.split_at_mut(j * len);
                let ci = &mut head[i * len..(i + 1) * len];
                let cj = &mut tail[..len];

                let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
                for (x, y) in ci.iter().zip(cj.iter()) {
                    a += x * x;
                    b += y * y;
                    d += x * y;
                }
                if a == 0.0 || b == 0.0 || d.abs() <= tol * a.sqrt() * b.sqrt() {
                    continue;
                }
                rotated = true;

                let zeta = (b - a) / (2.0 * d);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(ci, cj, c, s);

                let (rh, rt) = right.split_at_mut(j * ncols);
                rotate(&mut rh[i * ncols..(i + 1) * ncols], &mut rt[..ncols], c, s);
            }
        }
        if !rotated {
            return Ok(sweep);
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (p, q) in x.iter_mut().zip(y.iter_mut()) {
        let (xp, yq) = (*p, *q);
        *p = c * xp - s * yq;
        *q = s * xp + c * yq;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to everything else,
/// returning the `len x len` matrix whose columns are the basis.
fn complete_basis(mut cols: Vec<Option<Vec<f64>>>, len: usize) -> DenseMatrix {
    // Squared norm of each coordinate row restricted to the known columns;
    // 1 - row_mass[i] is the squared residual of e_i after projection.
    let mut row_mass = vec![0.0; len];
    for col in cols.iter().flatten() {
        for (m, x) in row_mass.iter_mut().zip(col) {
            *m += x * x;
        }
    }
    let missing: Vec<usize> = (0..cols.len()).filter(|&k| cols[k].is_none()).collect();
    for slot in missing {
        let pick = (0..len)
            .min_by(|&x, &y| row_mass[x].total_cmp(&row_mass[y]).then(x.cmp(&y)))
            .expect("basis length is positive");
        let mut r = vec![0.0; len];
        r[pick] = 1.0;
        for _ in 0..2 {
            for col in cols.iter().flatten() {
                let proj = dot(col, &r);
                for (ri, ci) in r.iter_mut().zip(col) {
                    *ri -= proj * ci;
                }
            }
        }
        let nrm = column_norm(&r);
        r.iter_mut().for_each(|x| *x /= nrm);
        for (m, x) in row_mass.iter_mut().zip(&r) {
            *m += x * x;
        }
        cols[slot] = Some(r);
    }
    let mut data = vec![0.0; len * len];
    for (k, col) in cols.into_iter().enumerate() {
        let col = col.expect("all slots filled");
        for (i, x) in col.into_iter().enumerate() {
            data[i * len + k] = x;
        }
    }
    DenseMatrix::from_vec_unchecked(len, len, data)
}
