use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Vector;
use crate::svd::SvdFactors;

/// Solver identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mpmi,
    Mpm,
    Tsvd,
    Tr,
    Morozov,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mpmi, Method::Mpm, Method::Tsvd, Method::Tr, Method::Morozov];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mpmi => "mpmi",
            Method::Mpm => "mpm",
            Method::Tsvd => "tsvd",
            Method::Tr => "tr",
            Method::Morozov => "morozov",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mpmi" => Ok(Method::Mpmi),
            "mpm" => Ok(Method::Mpm),
            "tsvd" => Ok(Method::Tsvd),
            "tr" | "tikhonov" => Ok(Method::Tr),
            "morozov" => Ok(Method::Morozov),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// The regularization parameter a solver settled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Parameter {
    /// Filter level `h` (MPMI, MPM).
    H(f64),
    /// Tikhonov-type `alpha`.
    Alpha(f64),
    /// Truncation rank.
    Rank(usize),
}

impl Parameter {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Parameter::H(x) | Parameter::Alpha(x) => x,
            Parameter::Rank(r) => r as f64,
        }
    }
}

/// Result of one regularized solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub solution: Vector,
    pub parameter: Parameter,
    pub effective_rank: usize,
    /// Spectral condition number of the operator actually inverted.
    pub condition_number: f64,
    /// `|A z - u|`.
    pub residual: f64,
    /// `|A A^+ u - u|`, the residual floor.
    pub mu_delta: f64,
    pub jump_root: bool,
}

impl SolveReport {
    /// Builds a report for `z = sum_k weights[k] * coords[k] * V[:, k]`,
    /// evaluating the residual in the singular basis.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_spectral(
        svd: &SvdFactors,
        coords: &[f64],
        weights: &[f64],
        solution: Vector,
        method: Method,
        parameter: Parameter,
        effective_rank: usize,
        condition_number: f64,
        jump_root: bool,
    ) -> Result<SolveReport> {
        let sigma = svd.sigma();
        let mut res_sq = 0.0;
        for (k, &c) in coords.iter().enumerate() {
            let gain = if k < weights.len() && k < sigma.len() {
                sigma[k] * weights[k]
            } else {
                0.0
            };
            res_sq += (gain - 1.0) * (gain - 1.0) * c * c;
        }
        Ok(SolveReport {
            method,
            solution,
            parameter,
            effective_rank,
            condition_number,
            residual: res_sq.sqrt(),
            mu_delta: tail_norm_sq(coords, svd.rank()).sqrt(),
            jump_root,
        })
    }
}

/// `sum_{k >= from} coords[k]^2`.
pub(crate) fn tail_norm_sq(coords: &[f64], from: usize) -> f64 {
    coords.iter().skip(from).map(|c| c * c).sum()
}
