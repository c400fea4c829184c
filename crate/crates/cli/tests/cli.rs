use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mpmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpmi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn solution(v: &Value) -> Vec<f64> {
    v["solution"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

const A3: &str = "rows,cols\n3,3\n4,1,0\n1,3,1\n0,1,2\n";
// A3 * (1, -1, 2)
const U3: &str = "3,1\n3\n0\n3\n";

#[test]
fn mpmi_tiny_noise_matches_direct_solve() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", A3);
    let u = write(dir.path(), "u.csv", U3);
    let v = report(&mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "mpmi",
        "--delta-rel",
        "1e-10",
    ]));
    for (z, e) in solution(&v).iter().zip([1.0, -1.0, 2.0]) {
        assert!((z - e).abs() < 1e-6);
    }
    assert_eq!(v["method"], "mpmi");
    assert_eq!(v["parameter"]["kind"], "h");
    assert!(v["jump_root"].is_boolean());
    assert!(v["effective_rank"].as_u64().unwrap() <= 3);
}

#[test]
fn full_rank_tsvd_matches_pinv() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "2,3\n1,2,3\n4,5,6\n");
    let u = write(dir.path(), "u.csv", "2,1\n1\n2\n");
    let tsvd = report(&mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "tsvd",
        "--rank",
        "2",
    ]));
    let mpm = report(&mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "mpm",
        "--h",
        "1e-14",
    ]));
    for (x, y) in solution(&tsvd).iter().zip(solution(&mpm)) {
        assert!((x - y).abs() < 1e-8);
    }
    // minimum-norm solution of the underdetermined system: z = A^T (A A^T)^{-1} u
    let expected = [-1.0 / 18.0, 1.0 / 9.0, 5.0 / 18.0];
    for (x, y) in solution(&tsvd).iter().zip(expected) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn regularized_methods_report_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.mtx",
        "%%MatrixMarket matrix array real general\n1 1\n1\n",
    );
    let u = write(dir.path(), "u.csv", "1,1\n2\n");
    let tr = report(&mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "tr",
        "--delta-abs",
        "1",
    ]));
    assert!((tr["parameter"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let mz = report(&mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "morozov",
        "--alpha",
        "1",
    ]));
    assert!((solution(&mz)[0] - 0.5).abs() < 1e-15);
}

#[test]
fn desk_poisson_solve_reports_root() {
    let dir = tempfile::tempdir().unwrap();
    let p = mpmi_core::experiments::PoissonProblem::build(199, 201, 0.1).unwrap();
    let u = mpmi_core::experiments::perturb_rhs(&p.u_bar, 0.05, 0).unwrap();
    let a_path = dir.path().join("a.csv");
    let u_path = dir.path().join("u.csv");
    mpmi_core::io::write_matrix_file(&a_path, &p.matrix).unwrap();
    mpmi_core::io::write_vector_file(&u_path, &u).unwrap();
    let out = dir.path().join("r.json");
    let o = mpmi(&[
        "solve",
        "--matrix",
        s(&a_path),
        "--rhs",
        s(&u_path),
        "--method",
        "mpmi",
        "--delta-rel",
        "0.05",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["parameter"]["value"].as_f64().unwrap() > 0.0);
    let r = v["effective_rank"].as_u64().unwrap();
    assert!(r >= 1 && r < v["numerical_rank"].as_u64().unwrap());
    assert!(v["condition_number"].as_f64().unwrap() >= 1.0);
    assert!(v["jump_root"].is_boolean());
    assert_eq!(solution(&v).len(), 201);
}

#[test]
fn large_solutions_go_to_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let n = 1001;
    let mut body = format!("1,{n}\n");
    body.push_str(&vec!["1"; n].join(","));
    let a = write(dir.path(), "a.csv", &body);
    let u = write(dir.path(), "u.csv", "1,1\n5\n");
    let out = dir.path().join("r.json");
    let o = mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "tsvd",
        "--rank",
        "1",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["solution"].is_null());
    let side = PathBuf::from(v["solution_file"].as_str().unwrap());
    let z = mpmi_core::io::read_vector(&side).unwrap();
    assert_eq!(z.len(), n);
    assert!((z[0] - 5.0 / n as f64).abs() < 1e-15);
}

#[test]
fn pinv_forced_jump_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.csv", "1,1\n1\n");
    let out = dir.path().join("p.csv");
    let tilde = dir.path().join("t.csv");
    let o = mpmi(&[
        "pinv",
        "--matrix",
        s(&one),
        "--h",
        "0.8",
        "--out",
        s(&out),
        "--emit-matrix",
        s(&tilde),
    ]);
    let v = report(&o);
    assert_eq!(v["jump"], true);
    assert_eq!(v["within_h"], true);
    let p = mpmi_core::io::read_matrix(&out).unwrap();
    assert!((p.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(mpmi_core::io::read_matrix(&tilde).unwrap().get(0, 0), 1.5);
    let o = mpmi(&[
        "pinv",
        "--matrix",
        s(&one),
        "--h",
        "0.8",
        "--emit-matrix",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let side = dir.path().join("p.csv.matrix.csv");
    assert_eq!(mpmi_core::io::read_matrix(&side).unwrap().get(0, 0), 1.5);

    let eye = write(dir.path(), "eye.csv", "3,3\n1,0,0\n0,1,0\n0,0,1\n");
    let o = mpmi(&["pinv", "--matrix", s(&eye), "--h", "1e-12"]);
    assert!(o.status.success());
    let p = mpmi_core::io::parse_csv_matrix(&String::from_utf8(o.stdout).unwrap()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((p.get(i, j) - e).abs() < 1e-10);
        }
    }
    let summary: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(summary["within_h"], true);
    assert_eq!(summary["rank"], 3);
}

#[test]
fn svd_report_of_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "d.csv", "3,3\n3,0,0\n0,2,0\n0,0,1\n");
    let out = dir.path().join("s.csv");
    let v = report(&mpmi(&["svd-report", "--matrix", s(&a), "--out", s(&out)]));
    assert_eq!(v["condition_number"], 3.0);
    assert_eq!(v["numerical_rank"], 3);
    assert_eq!(fs::read_to_string(&out).unwrap(), "k,sigma\n1,3.0\n2,2.0\n3,1.0\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", A3);
    let u = write(dir.path(), "u.csv", U3);
    let bad = write(dir.path(), "bad.csv", "2,2\n1,x,3,4\n");
    let code = |o: Output| o.status.code().unwrap();

    // input errors
    let o = mpmi(&[
        "solve",
        "--matrix",
        s(&bad),
        "--rhs",
        s(&u),
        "--method",
        "mpmi",
        "--delta-rel",
        "0.1",
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse"));
    assert_eq!(code(o), 2);
    assert_eq!(
        code(mpmi(&[
            "solve",
            "--matrix",
            s(&a),
            "--rhs",
            s(&u),
            "--method",
            "mpmi",
            "--alpha",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(mpmi(&["solve", "--matrix", s(&a), "--rhs", s(&u), "--method", "mpmi"])),
        2
    );
    assert_eq!(
        code(mpmi(&[
            "solve",
            "--matrix",
            s(&a),
            "--rhs",
            s(&u),
            "--method",
            "tr",
            "--alpha",
            "1",
            "--rank",
            "2"
        ])),
        2
    );
    assert_eq!(
        code(mpmi(&["svd-report", "--matrix", s(&dir.path().join("nope.csv"))])),
        2
    );
    assert_eq!(
        code(mpmi(&["experiment", "--config", s(&bad), "--out-dir", s(dir.path())])),
        2
    );

    // solver errors
    let o = mpmi(&[
        "solve",
        "--matrix",
        s(&a),
        "--rhs",
        s(&u),
        "--method",
        "mpmi",
        "--delta-abs",
        "100",
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise-dominates-signal"));
    assert_eq!(code(o), 3);
    assert_eq!(code(mpmi(&["pinv", "--matrix", s(&a), "--h", "100"])), 3);
}

fn run_experiment(config: &Path, out: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let o = Command::new(env!("CARGO_BIN_EXE_mpmi"))
        .env("MPMI_THREADS", threads)
        .args(["experiment", "--config", s(config), "--out-dir", s(out)])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.conf",
        "m = 40\nn = 41\ndeltas = 0.01, 0.1\nseeds = 0..5\nmethods = mpmi, mpm, tsvd, tr, morozov\ncurves = true\ncurve_points = 200\n",
    );
    let a = run_experiment(&cfg, &dir.path().join("a"), "1");
    let b = run_experiment(&cfg, &dir.path().join("b"), "3");
    let c = run_experiment(&cfg, &dir.path().join("c"), "3");
    assert_eq!(a.len(), 6);
    assert!(a == b && b == c);
    let table = String::from_utf8(a.iter().find(|f| f.0 == "table.csv").unwrap().1.clone()).unwrap();
    assert_eq!(table.lines().count(), 1 + 5 * 2);
}

#[test]
fn experiment_single_method_and_seed_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.conf",
        "m = 30\nn = 31\ndeltas = 0.05\nseeds = 0..3\nmethods = mpmi\n",
    );
    let out = dir.path().join("o");
    let o = mpmi(&["experiment", "--config", s(&cfg), "--out-dir", s(&out), "--seed", "100"]);
    assert!(o.status.success());
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("mpmi,0.05,3,0,"));
    let detail: Value = serde_json::from_str(&fs::read_to_string(out.join("detail.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = detail["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![100, 101, 102]);
}

#[test]
fn printed_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "2,2\n0.1,0.2\n0.30000000000000004,1e-300\n");
    let out = dir.path().join("s.csv");
    let v = report(&mpmi(&["svd-report", "--matrix", s(&a), "--out", s(&out)]));
    let f = mpmi_core::svd(&mpmi_core::io::read_matrix(&a).unwrap()).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    for (line, sigma) in text.lines().skip(1).zip(f.sigma()) {
        let printed: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(printed.to_bits(), sigma.to_bits());
    }
    assert_eq!(
        v["condition_number"].as_f64().unwrap().to_bits(),
        (f.sigma()[0] / f.sigma()[1]).to_bits()
    );
}
