//! End-to-end tests of the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use greenfix::io::{read_matrix, write_matrix, ReportFile};
use greenfix::{ComplexDenseMatrix, ComplexScalar};
use greenfix_cli::{run_cli, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
use tempfile::TempDir;

fn c(re: f64, im: f64) -> ComplexScalar {
    ComplexScalar::new(re, im)
}

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("greenfix").chain(args.iter().copied()))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes 1×1 matrices `t` and `v`, returning their paths.
fn scalar_files(dir: &TempDir, t: ComplexScalar, v: ComplexScalar) -> (PathBuf, PathBuf) {
    let tp = dir.path().join("t.mtx");
    let vp = dir.path().join("v.mtx");
    write_matrix(&tp, &ComplexDenseMatrix::diag(&[t]).unwrap()).unwrap();
    write_matrix(&vp, &ComplexDenseMatrix::diag(&[v]).unwrap()).unwrap();
    (tp, vp)
}

#[test]
fn solve_scalar_gives_epsilon_i() {
    let dir = TempDir::new().unwrap();
    let (t, v) = scalar_files(&dir, c(2.0, 1.0), c(1.0, 0.0));
    let out = dir.path().join("report.json");
    let code = cli(&["solve", "--t", path_str(&t), "--v", path_str(&v), "--lambda", "2", "--out", path_str(&out)]);
    assert_eq!(code, EXIT_OK);
    let file = ReportFile::read(&out).unwrap();
    let doc = &file.documents()[0];
    assert!(doc.epsilon_re.abs() < 1e-12, "{}", doc.epsilon_re);
    assert!((doc.epsilon_im - 1.0).abs() < 1e-12, "{}", doc.epsilon_im);
    assert!(doc.converged);

    let text = fs::read_to_string(&out).unwrap();
    for key in
        ["epsilon_re", "epsilon_im", "lambda_re", "lambda_im", "residual", "outer_cycles", "converged", "eigenvector"]
    {
        assert!(text.contains(&format!("\"{key}\"")), "report lacks {key}");
    }
}

#[test]
fn scan_magnitude_golden() {
    let dir = TempDir::new().unwrap();
    let (t, v) = scalar_files(&dir, c(2.0, 0.0), c(1.0, 0.0));
    let out = dir.path().join("scan.csv");
    let code = cli(&[
        "scan-magnitude",
        "--t",
        path_str(&t),
        "--v",
        path_str(&v),
        "--lambda",
        "2",
        "--phase",
        "0",
        "--from",
        "0.5",
        "--to",
        "1.5",
        "--step",
        "0.5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "abs_eps,phase_eps,abs_lambda,phase_lambda,inner_iters,converged");
    let abs_lambda: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(abs_lambda.len(), 3);
    for (got, want) in abs_lambda.iter().zip([1.5, 1.0, 0.5]) {
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
    for line in &lines[1..] {
        assert!(line.ends_with(",true"), "{line}");
    }
}

#[test]
fn scan_phase_has_same_columns() {
    let dir = TempDir::new().unwrap();
    let (t, v) = scalar_files(&dir, c(2.0, 0.0), c(1.0, 0.0));
    let out = dir.path().join("phase.csv");
    let code = cli(&[
        "scan-phase",
        "--t",
        path_str(&t),
        "--v",
        path_str(&v),
        "--lambda",
        "2",
        "--mag",
        "1",
        "--from",
        "-1",
        "--to",
        "1",
        "--step",
        "0.5",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "abs_eps,phase_eps,abs_lambda,phase_lambda,inner_iters,converged");
    assert_eq!(lines.count(), 5);
}

#[test]
fn oracle_golden_header() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.mtx");
    let v = dir.path().join("v.mtx");
    write_matrix(&t, &ComplexDenseMatrix::diag(&[c(1.0, 0.0), c(3.0, 1.0)]).unwrap()).unwrap();
    write_matrix(&v, &ComplexDenseMatrix::identity(2)).unwrap();
    let out = dir.path().join("oracle.csv");
    assert_eq!(
        cli(&["oracle", "--t", path_str(&t), "--v", path_str(&v), "--lambda", "1", "--out", path_str(&out)]),
        EXIT_OK
    );
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "eps_re,eps_im,residual");
    let mut roots: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert!(f[2] < 1e-10, "residual {}", f[2]);
            (f[0], f[1])
        })
        .collect();
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(roots.len(), 2);
    assert!((roots[0].0).abs() < 1e-10 && roots[0].1.abs() < 1e-10);
    assert!((roots[1].0 - 2.0).abs() < 1e-10 && (roots[1].1 - 1.0).abs() < 1e-10);
}

#[test]
fn tampered_report_fails_verify() {
    let dir = TempDir::new().unwrap();
    let (t, v) = scalar_files(&dir, c(2.0, 1.0), c(1.0, 0.0));
    let out = dir.path().join("report.json");
    let (ts, vs, os) = (path_str(&t), path_str(&v), path_str(&out));
    assert_eq!(cli(&["solve", "--t", ts, "--v", vs, "--lambda", "2", "--out", os]), EXIT_OK);
    assert_eq!(cli(&["verify", "--report", os, "--t", ts, "--v", vs, "--lambda", "2"]), EXIT_OK);

    let mut file = ReportFile::read(&out).unwrap();
    if let ReportFile::Single(doc) = &mut file {
        doc.epsilon_re += 1e-3;
    } else {
        panic!("expected a single-state report");
    }
    let tampered = dir.path().join("tampered.json");
    file.write(&tampered).unwrap();
    let code = cli(&["verify", "--report", path_str(&tampered), "--t", ts, "--v", vs, "--lambda", "2"]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name);
    for (kind, tag) in [("complex-general", "c"), ("real-symmetric", "r")] {
        for run in 0..2 {
            let t = p(&format!("t{tag}{run}.mtx"));
            let v = p(&format!("v{tag}{run}.mtx"));
            let code = cli(&[
                "generate",
                "--n",
                "6",
                "--seed",
                "11",
                "--kind",
                kind,
                "--out-t",
                path_str(&t),
                "--out-v",
                path_str(&v),
            ]);
            assert_eq!(code, EXIT_OK);
        }
        assert_eq!(fs::read(p(&format!("t{tag}0.mtx"))).unwrap(), fs::read(p(&format!("t{tag}1.mtx"))).unwrap());
        assert_eq!(fs::read(p(&format!("v{tag}0.mtx"))).unwrap(), fs::read(p(&format!("v{tag}1.mtx"))).unwrap());
    }
    let sym = read_matrix(p("tr0.mtx")).unwrap();
    assert_eq!(sym, sym.transpose());
    assert!(sym.as_slice().iter().all(|z| z.im == 0.0));
}

#[test]
fn solve_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let (t, v) = (dir.path().join("t.mtx"), dir.path().join("v.mtx"));
    let gen =
        ["generate", "--n", "6", "--seed", "3", "--out-t", path_str(&t), "--out-v", path_str(&v)].map(str::to_owned);
    assert_eq!(run_cli(std::iter::once("greenfix".to_owned()).chain(gen)), EXIT_OK);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("r{run}.json"));
        let code = cli(&["solve", "--t", path_str(&t), "--v", path_str(&v), "--lambda", "2", "--out", path_str(&out)]);
        assert!(code == EXIT_OK || code == EXIT_NOT_CONVERGED, "exit {code}");
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn input_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.mtx");
    let out = dir.path().join("r.json");
    let m = path_str(&missing);
    assert_eq!(cli(&["solve", "--t", m, "--v", m, "--lambda", "2", "--out", path_str(&out)]), EXIT_INPUT);
    assert_eq!(cli(&["no-such-command"]), EXIT_INPUT);

    let (t, v) = scalar_files(&dir, c(2.0, 1.0), c(1.0, 0.0));
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "[search]\nunknown_key = 1\n").unwrap();
    let code = cli(&[
        "solve",
        "--t",
        path_str(&t),
        "--v",
        path_str(&v),
        "--lambda",
        "2",
        "--config",
        path_str(&bad_cfg),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, EXIT_INPUT);

    let garbage = dir.path().join("garbage.mtx");
    fs::write(&garbage, "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n").unwrap();
    let g = path_str(&garbage);
    assert_eq!(cli(&["solve", "--t", g, "--v", g, "--lambda", "2", "--out", path_str(&out)]), EXIT_INPUT);
}

#[test]
fn config_file_is_applied() {
    let dir = TempDir::new().unwrap();
    let (t, v) = scalar_files(&dir, c(2.0, 1.0), c(1.0, 0.0));
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[inner]\nmax_iterations = 200\n\n[search]\ntol_mag = 1e-11\ntol_phase = 1e-11\n").unwrap();
    let out = dir.path().join("r.json");
    let code = cli(&[
        "solve",
        "--t",
        path_str(&t),
        "--v",
        path_str(&v),
        "--lambda",
        "2",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let doc = ReportFile::read(&out).unwrap().documents()[0].clone();
    assert!((doc.tolerances.lambda - 1e-10).abs() < 1e-24, "{}", doc.tolerances.lambda);
}

#[test]
fn excited_writes_all_states() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.mtx");
    let v = dir.path().join("v.mtx");
    write_matrix(&t, &ComplexDenseMatrix::diag(&[c(1.0, 0.5), c(4.0, 0.0)]).unwrap()).unwrap();
    write_matrix(&v, &ComplexDenseMatrix::diag(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap()).unwrap();
    let out = dir.path().join("states.json");
    let (ts, vs, os) = (path_str(&t), path_str(&v), path_str(&out));
    assert_eq!(cli(&["solve", "--t", ts, "--v", vs, "--lambda", "2", "--excited", "1", "--out", os]), EXIT_OK);
    let file = ReportFile::read(&out).unwrap();
    assert_eq!(file.documents().len(), 2);
    assert_eq!(cli(&["verify", "--report", os, "--t", ts, "--v", vs, "--lambda", "2"]), EXIT_OK);
}
