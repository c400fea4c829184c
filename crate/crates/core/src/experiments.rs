//! Poisson-kernel model problem and the seeded comparison harness.
//!
//! The matrix is `a_ij = 1 / ((x_i - y_j)^2 + H0^2)` on uniform grids of
//! `[-1, 1]`, the truth is `z(y) = (1 - y^2) sin(4 pi y)`, and noisy data are
//! `u_bar + delta |u_bar| e / |e|` with `e` standard normal from a seeded
//! ChaCha stream. The SVD of the fixed matrix is computed once and shared by
//! all (delta, seed) tasks, which run in parallel and are collected in input
//! order, so output is bit-identical across runs and thread counts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{regularized_solve_discrepancy, tsvd_solve_discrepancy, DiscrepancyTarget, RegMethod};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::matrix::{DenseMatrix, Vector};
use crate::mpm::mpm_solve;
use crate::mpmi::{mpmi_solve, DiscrepancyCurve, MpmiFamily};
use crate::report::{Method, SolveReport};
use crate::svd::{spectral_cond, svd, SvdFactors};

pub const DESK_M: usize = 199;
pub const DESK_N: usize = 201;
pub const FULL_M: usize = 1991;
pub const FULL_N: usize = 2001;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonProblem {
    pub m: usize,
    pub n: usize,
    pub h0: f64,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub matrix: DenseMatrix,
    pub z_bar: Vector,
    pub u_bar: Vector,
}

fn grid(len: usize) -> Vec<f64> {
    let step = 2.0 / (len - 1) as f64;
    let mut g: Vec<f64> = (0..len).map(|i| -1.0 + step * i as f64).collect();
    g[len - 1] = 1.0;
    g
}

impl PoissonProblem {
    pub fn build(m: usize, n: usize, h0: f64) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidInput(format!("grid sizes must be >= 2, got {m}x{n}")));
        }
        if !(h0 > 0.0) || !h0.is_finite() {
            return Err(Error::InvalidInput(format!("H0 = {h0} must be positive")));
        }
        let x_grid = grid(m);
        let y_grid = grid(n);
        let h0_sq = h0 * h0;
        let matrix = DenseMatrix::from_fn(m, n, |i, j| {
            let d = x_grid[i] - y_grid[j];
            1.0 / (d * d + h0_sq)
        })?;
        let z_bar = Vector::new(
            y_grid
                .iter()
                .map(|&y| (1.0 - y * y) * (4.0 * std::f64::consts::PI * y).sin())
                .collect(),
        )?;
        let u_bar = matrix.matvec(&z_bar)?;
        Ok(PoissonProblem {
            m,
            n,
            h0,
            x_grid,
            y_grid,
            matrix,
            z_bar,
            u_bar,
        })
    }
}

pub fn build_poisson(m: usize, n: usize, h0: f64) -> Result<PoissonProblem> {
    PoissonProblem::build(m, n, h0)
}

/// `u_bar + delta_rel |u_bar| e / |e|`, `e ~ N(0, I)` drawn from `seed`.
pub fn perturb_rhs(u_bar: &Vector, delta_rel: f64, seed: u64) -> Result<Vector> {
    if !(delta_rel > 0.0 && delta_rel < 1.0) {
        return Err(Error::InvalidInput(format!(
            "relative noise level {delta_rel} must lie in (0, 1)"
        )));
    }
    let scale = u_bar.norm();
    if scale == 0.0 {
        return Err(Error::InvalidInput("exact right-hand side is zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let e: Vec<f64> = (0..u_bar.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let f = delta_rel * scale / norm;
            return Vector::new(u_bar.iter().zip(&e).map(|(u, e)| u + f * e).collect());
        }
    }
}

/// `|z - z_bar| / |z_bar|`.
pub fn relative_error(z: &[f64], z_bar: &[f64]) -> Result<f64> {
    if z.len() != z_bar.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", z.len(), z_bar.len())));
    }
    let den = z_bar.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::InvalidInput("reference vector is zero".into()));
    }
    let num = z.iter().zip(z_bar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => median(values),
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub h0: f64,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub aggregation: Aggregation,
    pub scale: Scale,
    /// Matrix-error level used by the plain MPM method.
    pub mpm_h: f64,
    pub discrepancy_target: DiscrepancyTarget,
    /// Dump `(h, beta^2)` curves for the first seed of every delta.
    pub curves: bool,
    pub curve_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: DESK_M,
            n: DESK_N,
            h0: 0.1,
            deltas: vec![0.005, 0.01, 0.05, 0.1, 0.3],
            seeds: (0..20).collect(),
            methods: vec![Method::Mpmi, Method::Tsvd, Method::Tr],
            aggregation: Aggregation::Median,
            scale: Scale::Desk,
            mpm_h: 1e-10,
            discrepancy_target: DiscrepancyTarget::WithFloor,
            curves: false,
            curve_points: 2000,
        }
    }
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("bad boolean '{value}' for key '{key}'"))),
    }
}

/// Seeds as `a..b` (half-open), `a..=b`, or a comma list.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let v = value.trim();
    if let Some((a, b)) = v.split_once("..=") {
        let (a, b): (u64, u64) = (num("seeds", a)?, num("seeds", b)?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (num("seeds", a)?, num("seeds", b)?);
        return Ok((a..b).collect());
    }
    list(v, |s| num("seeds", s))
}

impl ExperimentConfig {
    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut explicit_dims = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "m" => {
                    cfg.m = num(&key, value)?;
                    explicit_dims = true;
                }
                "n" => {
                    cfg.n = num(&key, value)?;
                    explicit_dims = true;
                }
                "h0" => cfg.h0 = num(&key, value)?,
                "deltas" => cfg.deltas = list(value, |s| num("deltas", s))?,
                "seeds" => cfg.seeds = parse_seeds(value)?,
                "methods" => cfg.methods = list(value, Method::from_str)?,
                "aggregation" => {
                    cfg.aggregation = match value.to_ascii_lowercase().as_str() {
                        "median" => Aggregation::Median,
                        "mean" => Aggregation::Mean,
                        _ => return Err(Error::Parse(format!("unknown aggregation '{value}'"))),
                    }
                }
                "scale" => {
                    cfg.scale = match value.to_ascii_lowercase().as_str() {
                        "desk" => Scale::Desk,
                        "full" => Scale::Full,
                        _ => return Err(Error::Parse(format!("unknown scale '{value}'"))),
                    }
                }
                "mpm_h" => cfg.mpm_h = num(&key, value)?,
                "discrepancy_target" => {
                    cfg.discrepancy_target = match value.to_ascii_lowercase().as_str() {
                        "floor" | "withfloor" | "with_floor" => DiscrepancyTarget::WithFloor,
                        "plain" => DiscrepancyTarget::Plain,
                        _ => return Err(Error::Parse(format!("unknown discrepancy target '{value}'"))),
                    }
                }
                "curves" => cfg.curves = parse_bool(&key, value)?,
                "curve_points" => cfg.curve_points = num(&key, value)?,
                _ => return Err(Error::Parse(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        if cfg.scale == Scale::Full && !explicit_dims {
            cfg.m = FULL_M;
            cfg.n = FULL_N;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Switches to the 1991 x 2001 grid.
    pub fn full_scale(mut self) -> Self {
        self.scale = Scale::Full;
        self.m = FULL_M;
        self.n = FULL_N;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.m < 2 || self.n < 2 {
            return bad(format!("grid sizes must be >= 2, got {}x{}", self.m, self.n));
        }
        if !(self.h0 > 0.0) || !self.h0.is_finite() {
            return bad(format!("h0 = {} must be positive", self.h0));
        }
        if self.deltas.is_empty() {
            return bad("at least one delta is required".into());
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
            return bad(format!("delta {d} outside (0, 1)"));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let unique: BTreeSet<Method> = self.methods.iter().copied().collect();
        if unique.len() != self.methods.len() {
            return bad("duplicate method in list".into());
        }
        if !(self.mpm_h > 0.0) || !self.mpm_h.is_finite() {
            return bad(format!("mpm_h = {} must be positive", self.mpm_h));
        }
        if self.curves && self.curve_points < 2 {
            return bad("curve_points must be at least 2".into());
        }
        Ok(())
    }
}

/// One (method, delta, seed) solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub delta: f64,
    pub seed: u64,
    /// Relative solution error; `None` when the solve failed.
    pub error: Option<f64>,
    pub condition_number: Option<f64>,
    pub parameter: Option<f64>,
    pub effective_rank: Option<usize>,
    pub jump_root: bool,
    pub residual: Option<f64>,
    pub failure: Option<String>,
}

impl RunRecord {
    fn from_outcome(method: Method, delta: f64, seed: u64, z_bar: &[f64], outcome: Result<SolveReport>) -> Self {
        let base = RunRecord {
            method,
            delta,
            seed,
            error: None,
            condition_number: None,
            parameter: None,
            effective_rank: None,
            jump_root: false,
            residual: None,
            failure: None,
        };
        match outcome.and_then(|r| relative_error(&r.solution, z_bar).map(|e| (r, e))) {
            Ok((r, e)) => RunRecord {
                error: Some(e),
                condition_number: Some(r.condition_number),
                parameter: Some(r.parameter.as_f64()),
                effective_rank: Some(r.effective_rank),
                jump_root: r.jump_root,
                residual: Some(r.residual),
                ..base
            },
            Err(e) => RunRecord {
                failure: Some(e.name().to_string()),
                ..base
            },
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Aggregated statistics for one (method, delta) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub delta: f64,
    pub runs: usize,
    pub failures: usize,
    pub error: Option<f64>,
    pub condition_number: Option<f64>,
    pub jump_count: usize,
    pub jump_fraction: f64,
    pub parameter: Option<f64>,
    pub parameter_min: Option<f64>,
    pub parameter_max: Option<f64>,
    pub effective_rank: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub config: ExperimentConfig,
    pub numerical_rank: usize,
    pub sigma_max: f64,
    pub condition_number: f64,
    pub rows: Vec<TableRow>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentTable {
    pub fn row(&self, method: Method, delta: f64) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.method == method && r.delta == delta)
    }

    pub fn any_success(&self) -> bool {
        self.runs.iter().any(RunRecord::succeeded)
    }

    /// One line per (method, delta).
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(format_f64).unwrap_or_default();
        let mut out = String::from(
            "method,delta,runs,failures,error,condition_number,jump_count,jump_fraction,parameter,parameter_min,parameter_max,effective_rank\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.method,
                format_f64(r.delta),
                r.runs,
                r.failures,
                opt(r.error),
                opt(r.condition_number),
                r.jump_count,
                format_f64(r.jump_fraction),
                opt(r.parameter),
                opt(r.parameter_min),
                opt(r.parameter_max),
                opt(r.effective_rank),
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn solve_one(
    method: Method,
    svd: &SvdFactors,
    u: &Vector,
    delta_abs: f64,
    cfg: &ExperimentConfig,
) -> Result<SolveReport> {
    match method {
        Method::Mpmi => mpmi_solve(svd, u, delta_abs),
        Method::Mpm => mpm_solve(svd, u, cfg.mpm_h),
        Method::Tsvd => tsvd_solve_discrepancy(svd, u, delta_abs),
        Method::Tr => regularized_solve_discrepancy(svd, u, delta_abs, RegMethod::Tikhonov, cfg.discrepancy_target),
        Method::Morozov => regularized_solve_discrepancy(svd, u, delta_abs, RegMethod::Morozov, cfg.discrepancy_target),
    }
}

fn aggregate(cfg: &ExperimentConfig, method: Method, delta: f64, runs: &[&RunRecord]) -> TableRow {
    let ok: Vec<&&RunRecord> = runs.iter().filter(|r| r.succeeded()).collect();
    let col = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let errors = col(|r| r.error);
    let conds = col(|r| r.condition_number);
    let params = col(|r| r.parameter);
    let ranks = col(|r| r.effective_rank.map(|k| k as f64));
    let jumps = ok.iter().filter(|r| r.jump_root).count();
    TableRow {
        method,
        delta,
        runs: runs.len(),
        failures: runs.len() - ok.len(),
        error: cfg.aggregation.apply(&errors),
        condition_number: cfg.aggregation.apply(&conds),
        jump_count: jumps,
        jump_fraction: if ok.is_empty() {
            0.0
        } else {
            jumps as f64 / ok.len() as f64
        },
        parameter: cfg.aggregation.apply(&params),
        parameter_min: params.iter().copied().reduce(f64::min),
        parameter_max: params.iter().copied().reduce(f64::max),
        effective_rank: cfg.aggregation.apply(&ranks),
    }
}

/// Runs every configured method on every (delta, seed) pair.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    cfg.validate()?;
    let problem = PoissonProblem::build(cfg.m, cfg.n, cfg.h0)?;
    let factors = svd(&problem.matrix)?;
    run_experiment_on(&problem, &factors, cfg)
}

/// Same as [`run_experiment`] with a prebuilt problem and factorization.
pub fn run_experiment_on(
    problem: &PoissonProblem,
    factors: &SvdFactors,
    cfg: &ExperimentConfig,
) -> Result<ExperimentTable> {
    cfg.validate()?;
    let delta_scale = problem.u_bar.norm();
    let tasks: Vec<(f64, u64)> = cfg
        .deltas
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let per_task: Vec<Vec<RunRecord>> = tasks
        .par_iter()
        .map(|&(delta, seed)| {
            let u = perturb_rhs(&problem.u_bar, delta, seed);
            cfg.methods
                .iter()
                .map(|&method| {
                    let outcome = u
                        .clone()
                        .and_then(|u| solve_one(method, factors, &u, delta * delta_scale, cfg));
                    RunRecord::from_outcome(method, delta, seed, &problem.z_bar, outcome)
                })
                .collect()
        })
        .collect();
    let runs: Vec<RunRecord> = per_task.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &delta in &cfg.deltas {
            let cell: Vec<&RunRecord> = runs.iter().filter(|r| r.method == method && r.delta == delta).collect();
            rows.push(aggregate(cfg, method, delta, &cell));
        }
    }
    Ok(ExperimentTable {
        config: cfg.clone(),
        numerical_rank: factors.rank(),
        sigma_max: factors.sigma().first().copied().unwrap_or(0.0),
        condition_number: spectral_cond(factors)?,
        rows,
        runs,
    })
}

/// Discrepancy curve for the first seed of each delta.
pub fn discrepancy_curves(
    problem: &PoissonProblem,
    factors: &SvdFactors,
    cfg: &ExperimentConfig,
) -> Result<Vec<(f64, u64, DiscrepancyCurve)>> {
    let family = MpmiFamily::from_svd(factors);
    let seed = cfg.seeds[0];
    cfg.deltas
        .par_iter()
        .map(|&delta| {
            let u = perturb_rhs(&problem.u_bar, delta, seed)?;
            Ok((
                delta,
                seed,
                DiscrepancyCurve::scan(factors, &u, &family, cfg.curve_points)?,
            ))
        })
        .collect()
}

/// `h,beta_sq` samples followed by the breakpoint jumps.
pub fn curve_csv(curve: &DiscrepancyCurve) -> String {
    let mut out = String::from("h,beta_sq\n");
    for &(h, b) in &curve.samples {
        let _ = writeln!(out, "{},{}", format_f64(h), format_f64(b));
    }
    out
}

/// `h,left,right` rows, one per breakpoint.
pub fn jumps_csv(curve: &DiscrepancyCurve) -> String {
    let mut out = String::from("h,left,right\n");
    for j in &curve.jumps {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_f64(j.h),
            format_f64(j.left),
            format_f64(j.right)
        );
    }
    out
}

/// Files written by [`write_outputs`].
pub const TABLE_CSV: &str = "table.csv";
pub const DETAIL_JSON: &str = "detail.json";

/// Writes the aggregated CSV, the per-run JSON and, when configured, one
/// `beta_curve_delta_<d>.csv` / `beta_jumps_delta_<d>.csv` pair per delta.
/// Returns the paths written, in order.
pub fn write_outputs(
    dir: &Path,
    table: &ExperimentTable,
    curves: &[(f64, u64, DiscrepancyCurve)],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut files = vec![
        (dir.join(TABLE_CSV), table.to_csv()),
        (dir.join(DETAIL_JSON), table.to_json()? + "\n"),
    ];
    for (delta, _, curve) in curves {
        let tag = format_f64(*delta);
        files.push((dir.join(format!("beta_curve_delta_{tag}.csv")), curve_csv(curve)));
        files.push((dir.join(format!("beta_jumps_delta_{tag}.csv")), jumps_csv(curve)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, body) in files {
        fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
