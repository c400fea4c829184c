use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use mpmi_core::baselines::{
    morozov_variant_solve, regularized_solve_discrepancy, tikhonov_solve, tsvd_solve, tsvd_solve_discrepancy,
    DiscrepancyTarget, RegMethod,
};
use mpmi_core::experiments::{discrepancy_curves, run_experiment_on, write_outputs, ExperimentConfig, PoissonProblem};
use mpmi_core::io::{format_f64, read_matrix, read_vector, write_matrix, write_matrix_file, write_vector_file, Format};
use mpmi_core::mpm::{mpm_pseudoinverse_from_svd, mpm_solve};
use mpmi_core::mpmi::mpmi_solve;
use mpmi_core::svd::spectral_cond;
use mpmi_core::{frobenius_norm, svd, Error, Method, SolveReport, SvdFactors};
use serde_json::{json, Value};

use crate::{Cli, Command, ExperimentArgs, PinvArgs, SolveArgs, SvdReportArgs, TargetArg};

const SIDECAR_THRESHOLD: usize = 1000;

/// Flag misuse detected after parsing; maps to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if !e.is_input_error() => 3,
        None if err.downcast_ref::<SolverFailure>().is_some() => 3,
        _ => 2,
    }
}

pub fn describe(err: &anyhow::Error) -> String {
    match err.downcast_ref::<Error>() {
        Some(e) => format!("{}: {e}", e.name()),
        None if err.downcast_ref::<Usage>().is_some() => format!("usage: {err}"),
        None if err.downcast_ref::<SolverFailure>().is_some() => format!("solver-failure: {err}"),
        None => format!("io: {err:#}"),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Pinv(a) => pinv(a),
        Command::SvdReport(a) => svd_report(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn emit(out: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).context("writing standard output")
        }
    }
}

fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize") + "\n"
}

fn positive(name: &str, x: f64) -> anyhow::Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(usage(format!("--{name} must be a positive number, got {x}")))
    }
}

fn factor(matrix: &Path, rank_tol: Option<f64>) -> anyhow::Result<SvdFactors> {
    let a = read_matrix(matrix)?;
    let f = svd(&a)?;
    Ok(match rank_tol {
        Some(t) => f.with_rank_tolerance(t)?,
        None => f,
    })
}

#[derive(Debug, Clone, Copy)]
enum Param {
    DeltaRel(f64),
    DeltaAbs(f64),
    Alpha(f64),
    Rank(usize),
    H(f64),
}

fn solve_param(a: &SolveArgs) -> anyhow::Result<Param> {
    let p = match (a.delta_rel, a.delta_abs, a.alpha, a.rank, a.h) {
        (Some(x), None, None, None, None) => {
            if !(x > 0.0 && x < 1.0) {
                return Err(usage(format!("--delta-rel must lie in (0, 1), got {x}")));
            }
            Param::DeltaRel(x)
        }
        (None, Some(x), None, None, None) => Param::DeltaAbs(positive("delta-abs", x)?),
        (None, None, Some(x), None, None) => Param::Alpha(positive("alpha", x)?),
        (None, None, None, Some(r), None) => Param::Rank(r),
        (None, None, None, None, Some(x)) => Param::H(positive("h", x)?),
        _ => {
            return Err(usage(
                "give exactly one of --delta-rel, --delta-abs, --alpha, --rank, --h",
            ))
        }
    };
    let method: Method = a.method.into();
    let ok = match method {
        Method::Mpmi => matches!(p, Param::DeltaRel(_) | Param::DeltaAbs(_)),
        Method::Mpm => matches!(p, Param::H(_)),
        Method::Tsvd => matches!(p, Param::DeltaRel(_) | Param::DeltaAbs(_) | Param::Rank(_)),
        Method::Tr | Method::Morozov => matches!(p, Param::DeltaRel(_) | Param::DeltaAbs(_) | Param::Alpha(_)),
    };
    if !ok {
        let need = match method {
            Method::Mpmi => "--delta-rel or --delta-abs",
            Method::Mpm => "--h",
            Method::Tsvd => "--delta-rel, --delta-abs or --rank",
            Method::Tr | Method::Morozov => "--delta-rel, --delta-abs or --alpha",
        };
        return Err(usage(format!("method {method} needs {need}")));
    }
    Ok(p)
}

fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn solve(a: SolveArgs) -> anyhow::Result<ExitCode> {
    let param = solve_param(&a)?;
    if let Some(t) = a.rank_tol {
        if t.is_nan() || t < 0.0 {
            return Err(usage("--rank-tol must be >= 0"));
        }
    }
    let f = factor(&a.matrix, a.rank_tol)?;
    let u = read_vector(&a.rhs)?;
    if u.len() != f.rows() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} entries, matrix has {} rows",
            u.len(),
            f.rows()
        ))
        .into());
    }
    let delta_abs = match param {
        Param::DeltaRel(x) => Some(x * u.norm()),
        Param::DeltaAbs(x) => Some(x),
        _ => None,
    };
    let target = match a.target {
        TargetArg::Floor => DiscrepancyTarget::WithFloor,
        TargetArg::Plain => DiscrepancyTarget::Plain,
    };
    let method: Method = a.method.into();
    let report: SolveReport = match (method, param) {
        (Method::Mpmi, _) => mpmi_solve(&f, &u, delta_abs.unwrap())?,
        (Method::Mpm, Param::H(h)) => mpm_solve(&f, &u, h)?,
        (Method::Tsvd, Param::Rank(r)) => tsvd_solve(&f, &u, r)?,
        (Method::Tsvd, _) => tsvd_solve_discrepancy(&f, &u, delta_abs.unwrap())?,
        (Method::Tr, Param::Alpha(x)) => tikhonov_solve(&f, &u, x)?,
        (Method::Morozov, Param::Alpha(x)) => morozov_variant_solve(&f, &u, x)?,
        (Method::Tr, _) => regularized_solve_discrepancy(&f, &u, delta_abs.unwrap(), RegMethod::Tikhonov, target)?,
        (Method::Morozov, _) => regularized_solve_discrepancy(&f, &u, delta_abs.unwrap(), RegMethod::Morozov, target)?,
        (Method::Mpm, _) => unreachable!("validated above"),
    };

    let mut doc = serde_json::to_value(&report).context("serializing report")?;
    doc["delta_abs"] = delta_abs.map_or(Value::Null, Value::from);
    doc["numerical_rank"] = json!(f.rank());
    if let Some(out) = &a.out {
        if report.solution.len() > SIDECAR_THRESHOLD {
            let side = sidecar_path(out, ".solution.csv");
            write_vector_file(&side, &report.solution)?;
            doc["solution"] = Value::Null;
            doc["solution_file"] = json!(side.to_string_lossy());
        }
    }
    emit(a.out.as_deref(), &to_json(&doc))?;
    Ok(ExitCode::SUCCESS)
}

fn pinv(a: PinvArgs) -> anyhow::Result<ExitCode> {
    let h = positive("h", a.h)?;
    let matrix = read_matrix(&a.matrix)?;
    let f = svd(&matrix)?;
    let res = mpm_pseudoinverse_from_svd(&f, h)?;
    let distance = frobenius_norm(&res.a_tilde.sub(&matrix)?);
    let summary = json!({
        "h": h,
        "lambda": res.spectrum.lambda,
        "jump": res.spectrum.jump,
        "rank": res.spectrum.rank(),
        "distance": distance,
        "within_h": distance <= h + 1e-10 * matrix.frobenius_norm(),
        "condition_number": res.spectrum.condition_number().ok(),
        "filtered_sigma": res.spectrum.filtered_sigma,
    });
    // a bare --emit-matrix goes next to --out, or after the pseudoinverse on stdout
    let mut stdout_tilde = false;
    match (&a.emit_matrix, &a.out) {
        (Some(Some(path)), _) => write_matrix_file(path, &res.a_tilde)?,
        (Some(None), Some(out)) => write_matrix_file(&sidecar_path(out, ".matrix.csv"), &res.a_tilde)?,
        (Some(None), None) => stdout_tilde = true,
        (None, _) => {}
    }
    match &a.out {
        Some(path) => {
            write_matrix_file(path, &res.a_tilde_plus)?;
            emit(None, &to_json(&summary))?;
        }
        None => {
            let mut body = write_matrix(&res.a_tilde_plus, Format::Csv);
            if stdout_tilde {
                body.push('\n');
                body.push_str(&write_matrix(&res.a_tilde, Format::Csv));
            }
            emit(None, &body)?;
            eprint!("{}", to_json(&summary));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn svd_report(a: SvdReportArgs) -> anyhow::Result<ExitCode> {
    if let Some(t) = a.rank_tol {
        if t.is_nan() || t < 0.0 {
            return Err(usage("--rank-tol must be >= 0"));
        }
    }
    let matrix = read_matrix(&a.matrix)?;
    let f = svd(&matrix)?;
    let f = match a.rank_tol {
        Some(t) => f.with_rank_tolerance(t)?,
        None => f,
    };
    let mut csv = String::from("k,sigma\n");
    for (k, s) in f.sigma().iter().enumerate() {
        csv.push_str(&format!("{},{}\n", k + 1, format_f64(*s)));
    }
    let summary = json!({
        "rows": f.rows(),
        "cols": f.cols(),
        "numerical_rank": f.rank(),
        "rank_tolerance": f.rank_tolerance(),
        "condition_number": spectral_cond(&f).ok(),
        "frobenius_norm": matrix.frobenius_norm(),
    });
    match &a.out {
        Some(path) => {
            emit(Some(path), &csv)?;
            emit(None, &to_json(&summary))?;
        }
        None => {
            emit(None, &csv)?;
            eprint!("{}", to_json(&summary));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::Io(format!("{}: {e}", a.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if a.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(base) = a.seed {
        let count = cfg.seeds.len() as u64;
        cfg.seeds = (base..base.checked_add(count).ok_or_else(|| usage("--seed too large"))?).collect();
    }
    cfg.validate()?;
    let problem = PoissonProblem::build(cfg.m, cfg.n, cfg.h0)?;
    let f = svd(&problem.matrix)?;
    let table = run_experiment_on(&problem, &f, &cfg)?;
    let curves = if cfg.curves {
        discrepancy_curves(&problem, &f, &cfg)?
    } else {
        Vec::new()
    };
    let written = write_outputs(&a.out_dir, &table, &curves)?;
    for p in &written {
        println!("{}", p.display());
    }
    if table.any_success() {
        Ok(ExitCode::SUCCESS)
    } else {
        let first = table.runs.iter().find_map(|r| r.failure.clone()).unwrap_or_default();
        bail!(SolverFailure(format!("every run failed (first failure: {first})")))
    }
}

/// All experiment cells failed; maps to exit code 3.
#[derive(Debug)]
struct SolverFailure(String);

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SolverFailure {}
