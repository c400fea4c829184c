use mpmi_core::experiments::{
    discrepancy_curves, median, perturb_rhs, run_experiment, run_experiment_on, ExperimentConfig, PoissonProblem,
};
use mpmi_core::mpmi::MpmiFamily;
use mpmi_core::svd::spectral_cond;
use mpmi_core::{svd, Method, SvdFactors};

fn desk() -> (PoissonProblem, SvdFactors) {
    let p = PoissonProblem::build(199, 201, 0.1).unwrap();
    let f = svd(&p.matrix).unwrap();
    (p, f)
}

#[test]
fn noise_is_exact_seeded_and_uncorrelated() {
    let p = PoissonProblem::build(400, 20, 0.1).unwrap();
    let noises: Vec<Vec<f64>> = (0..100)
        .map(|s| {
            let u = perturb_rhs(&p.u_bar, 0.1, s).unwrap();
            let e: Vec<f64> = u.iter().zip(p.u_bar.iter()).map(|(a, b)| a - b).collect();
            let rel = e.iter().map(|x| x * x).sum::<f64>().sqrt() / p.u_bar.norm();
            assert!((rel - 0.1).abs() < 1e-14);
            e
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    let mut mean_abs = 0.0;
    let mut pairs = 0;
    for i in 0..noises.len() {
        for j in i + 1..noises.len() {
            let c: f64 = noises[i].iter().zip(&noises[j]).map(|(a, b)| a * b).sum::<f64>()
                / (norm(&noises[i]) * norm(&noises[j]));
            worst = worst.max(c.abs());
            mean_abs += c.abs();
            pairs += 1;
        }
    }
    mean_abs /= pairs as f64;
    // for m = 400 the correlation of independent directions is ~ N(0, 1/400)
    assert!(mean_abs < 0.06, "mean |corr| {mean_abs}");
    assert!(worst < 0.3, "max |corr| {worst}");
    assert_eq!(
        perturb_rhs(&p.u_bar, 0.1, 3).unwrap(),
        perturb_rhs(&p.u_bar, 0.1, 3).unwrap()
    );
}

#[test]
fn desk_scale_trends_and_bounds() {
    let (p, f) = desk();
    let cfg = ExperimentConfig {
        deltas: vec![0.005, 0.01, 0.05, 0.1, 0.3],
        seeds: (0..20).collect(),
        methods: Method::ALL.to_vec(),
        ..ExperimentConfig::default()
    };
    let table = run_experiment_on(&p, &f, &cfg).unwrap();
    assert_eq!(table.rows.len(), 25);

    let nu_s = spectral_cond(&f).unwrap();
    let fam = MpmiFamily::from_svd(&f);
    let rho = fam.rho();
    let mut jumps = 0;
    let mut mpmi_runs = 0;
    for run in table.runs.iter().filter(|r| r.method == Method::Mpmi) {
        assert!(run.succeeded(), "{run:?}");
        let nu = run.condition_number.unwrap();
        let r = run.effective_rank.unwrap();
        assert!(nu <= nu_s);
        assert!(nu <= 1.5 * rho[0] / rho[r - 1] * (1.0 + 1e-14));
        jumps += usize::from(run.jump_root);
        mpmi_runs += 1;
    }
    println!(
        "jump roots: {jumps} of {mpmi_runs} MPMI runs ({:.3})",
        jumps as f64 / mpmi_runs as f64
    );
    assert!(jumps > 0);

    for row in &table.rows {
        if let Some(e) = row.error {
            assert!(e >= 0.0);
        }
        if let Some(nu) = row.condition_number {
            assert!(nu >= 1.0, "{row:?}");
        }
    }
    // TSVD rank strictly below the numerical rank at delta = 0.05
    let tsvd = table.row(Method::Tsvd, 0.05).unwrap();
    assert!(tsvd.parameter_max.unwrap() < table.numerical_rank as f64);
}

#[test]
fn mpmi_error_decreases_with_noise() {
    let (p, f) = desk();
    let cfg = ExperimentConfig {
        deltas: vec![0.1, 0.01, 0.001],
        seeds: (0..20).collect(),
        methods: vec![Method::Mpmi],
        ..ExperimentConfig::default()
    };
    let table = run_experiment_on(&p, &f, &cfg).unwrap();
    let errs: Vec<f64> = cfg
        .deltas
        .iter()
        .map(|&d| table.row(Method::Mpmi, d).unwrap().error.unwrap())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    // single-method config gives a single row group
    assert!(table.rows.iter().all(|r| r.method == Method::Mpmi));
    assert_eq!(table.rows.len(), 3);
}

#[test]
fn curves_cover_each_delta() {
    let cfg = ExperimentConfig {
        m: 40,
        n: 41,
        deltas: vec![0.01, 0.1],
        seeds: vec![9],
        curves: true,
        curve_points: 100,
        ..ExperimentConfig::default()
    };
    let p = PoissonProblem::build(cfg.m, cfg.n, cfg.h0).unwrap();
    let f = svd(&p.matrix).unwrap();
    let curves = discrepancy_curves(&p, &f, &cfg).unwrap();
    assert_eq!(curves.len(), 2);
    for (_, seed, c) in &curves {
        assert_eq!(*seed, 9);
        assert_eq!(c.samples.len(), 100);
    }
}

#[test]
fn failures_are_recorded_not_fatal() {
    // noise at 0.9 of |u| still leaves room; mpm with a huge h does not
    let cfg = ExperimentConfig {
        m: 20,
        n: 21,
        deltas: vec![0.9],
        seeds: vec![0, 1],
        methods: vec![Method::Mpm, Method::Mpmi],
        mpm_h: 1e6,
        ..ExperimentConfig::default()
    };
    let table = run_experiment(&cfg).unwrap();
    let mpm = table.row(Method::Mpm, 0.9).unwrap();
    assert_eq!(mpm.failures, 2);
    assert_eq!(mpm.error, None);
    assert!(table
        .runs
        .iter()
        .any(|r| r.failure.as_deref() == Some("error-exceeds-energy")));
    assert!(table.any_success());
    assert_eq!(median(&[1.0]), 1.0);
}
