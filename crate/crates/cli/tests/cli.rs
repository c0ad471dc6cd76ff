use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use openbath_core::{
    assemble_coefficients, build_electronic, diagonalize_joint, format_coefficients, format_operator,
    spectral_matrix_for, BathSpec, CMatrix, Complex64, RateProfile,
};
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn openbath(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_openbath"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

fn floats(csv: &str, name: &str) -> Vec<f64> {
    column(csv, name).iter().map(|s| s.parse().unwrap()).collect()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn mixed_spin_equal_temperatures() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("mixed-spin.toml");
    let out = openbath(&["steady", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = floats(&read(&tmp.path().join("o"), "populations.csv"), "population");
    let e = (-1.0_f64).exp();
    assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
    assert!((p[1] - e / (1.0 + e)).abs() < 1e-12);
    assert!((p[0] - 0.7311).abs() < 1e-4 && (p[1] - 0.2689).abs() < 1e-4);
    let summary = read(&tmp.path().join("o"), "summary.txt");
    assert!(summary.contains("method: ladder-recursion"));
    assert!(summary.contains("unique: true"));
}

#[test]
fn single_level_matches_gibbs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "s.toml",
        "[model]\npreset = \"electronic:N=1,eps=0.8\"\n[[baths]]\nstatistics = \"fermi\"\nbeta = 1.3\nmu = 0.2\nrate = { kind = \"constant\", gamma = 0.4 }\n",
    );
    let out = openbath(&["steady", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    let csv = read(&tmp.path().join("o"), "populations.csv");
    assert_eq!(csv.lines().count(), 3);
    let p = floats(&csv, "population");
    let w = (-1.3_f64 * (0.8 - 0.2)).exp();
    assert!((p[1] - w / (1.0 + w)).abs() < 1e-14);
}

#[test]
fn oscillator_ratios_are_uniform() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "s.toml",
        "[model]\npreset = \"oscillator:Omega=1,N_cut=50\"\n[[baths]]\nstatistics = \"bose\"\nbeta = 0.7\nmu = -0.2\nrate = { kind = \"constant\", gamma = 1.0 }\n",
    );
    let out = openbath(&["steady", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    let csv = read(&tmp.path().join("o"), "ratios.csv");
    let r = floats(&csv, "ratio");
    let pred = floats(&csv, "prediction");
    assert_eq!(r.len(), 50);
    let x = (-0.7_f64 * 1.2).exp();
    for (a, b) in r.iter().zip(&pred) {
        assert!((a - x).abs() <= 1e-12 * x);
        assert!((a - b).abs() <= 1e-12 * x);
    }
}

#[test]
fn solvers_agree_through_the_cli() {
    let tmp = TempDir::new().unwrap();
    let base = std::fs::read_to_string(scenarios().join("electronic-gibbs.toml")).unwrap();
    let mut results = Vec::new();
    for method in ["ladder", "nullspace", "time-evolution"] {
        let text = format!("{base}\n[solver]\nmethod = \"{method}\"\n");
        let cfg = write(tmp.path(), &format!("{method}.toml"), &text);
        let out = openbath(&["steady", "--config", cfg.to_str().unwrap(), "--out", method], tmp.path());
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        results.push(floats(&read(&tmp.path().join(method), "populations.csv"), "population"));
    }
    for (a, b) in results[0].iter().zip(&results[1]) {
        assert!((a - b).abs() < 1e-9);
    }
    for (a, b) in results[0].iter().zip(&results[2]) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn model_flag_replaces_the_model() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("electronic-gibbs.toml");
    let out = openbath(
        &["steady", "--config", cfg.to_str().unwrap(), "--model", "electronic:N=2,eps=1", "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success());
    assert_eq!(read(&tmp.path().join("o"), "populations.csv").lines().count(), 4);
}

#[test]
fn verify_single_bath_presets() {
    let tmp = TempDir::new().unwrap();
    let presets = [
        ("electronic:N=5,eps=1,U=0.3,T=0.1", "fermi", 0.7),
        ("oscillator:Omega=1,N_cut=12", "bose", -0.3),
        ("spin-boson:N=5,Omega=1", "bose", 0.5),
        ("mixed-spin:Omega=1", "bose", 0.0),
        ("mixed-spin:Omega=1", "fermi", 0.4),
    ];
    for (k, (preset, stats, mu)) in presets.iter().enumerate() {
        let cfg = write(
            tmp.path(),
            &format!("{k}.toml"),
            &format!(
                "[model]\npreset = \"{preset}\"\n[[baths]]\nstatistics = \"{stats}\"\nbeta = 1.7\nmu = {mu}\nrate = {{ kind = \"lorentzian\", gamma = 1.0, center = 1.0, width = 0.8 }}\n"
            ),
        );
        let out = openbath(&["verify", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
        assert!(out.status.success(), "{preset}: {}", String::from_utf8_lossy(&out.stderr));
        let report = read(&tmp.path().join("o"), "verify.txt");
        assert!(report.contains("relation: gibbs-stationarity"));
        assert!(report.contains("overall: pass"));
    }
}

#[test]
fn verify_two_baths_skips_gibbs() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("mixed-spin.toml");
    let out = openbath(&["verify", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gibbs-stationarity: skipped"));
    let report = read(&tmp.path().join("o"), "verify.txt");
    assert!(report.contains("bath: 1"));
    assert!(report.contains("overall: pass"));
}

#[test]
fn verify_rejects_corrupted_coefficients() {
    let tmp = TempDir::new().unwrap();
    let bundle = build_electronic(4, 1.0, 0.5, 0.1).unwrap();
    let eig = diagonalize_joint(&bundle.model, 1e-9).unwrap();
    let bath = BathSpec::fermi(1.5, 2.0, RateProfile::Lorentzian { gamma: 1.0, center: 2.0, width: 1.5 }).unwrap();
    let coeff = assemble_coefficients(&eig, &bundle.model, &spectral_matrix_for(&bath).unwrap()).unwrap();
    let mut set = coeff.per_bath[0].clone();
    let key = *set.gamma.keys().find(|&&(a, b, c, d)| a == c && b == d && a > b).unwrap();
    *set.gamma.get_mut(&key).unwrap() *= 1.001;
    let file = write(tmp.path(), "bad.txt", &format_coefficients(&set));
    let cfg = scenarios().join("electronic-gibbs.toml");
    let override_arg = format!("0={}", file.display());
    let out = openbath(
        &["verify", "--config", cfg.to_str().unwrap(), "--debug-coefficients", &override_arg, "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("local-balance"), "{err}");
    assert!(read(&tmp.path().join("o"), "verify.txt").contains("overall: fail"));

    // The untouched set read back through the same path passes.
    let good = write(tmp.path(), "good.txt", &format_coefficients(&coeff.per_bath[0]));
    let override_arg = format!("0={}", good.display());
    let out = openbath(
        &["verify", "--config", cfg.to_str().unwrap(), "--debug-coefficients", &override_arg, "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_tolerance_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("electronic-gibbs.toml");
    let out = openbath(&["verify", "--config", cfg.to_str().unwrap(), "--tol", "1e-30", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = openbath(&["verify", "--config", cfg.to_str().unwrap(), "--tol", "-1", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fig1_defaults() {
    let tmp = TempDir::new().unwrap();
    let out = openbath(&["fig1", "--out", "a"], tmp.path());
    assert!(out.status.success());
    let dir = tmp.path().join("a");
    let occ = read(&dir, "occupation.csv");
    let omega = floats(&occ, "omega");
    let (f1, f2, fbar) = (floats(&occ, "f1"), floats(&occ, "f2"), floats(&occ, "fbar"));
    let at = |w: f64| omega.iter().position(|x| (x - w).abs() < 1e-9).unwrap();
    assert!((fbar[at(1.0)] - f1[at(1.0)]).abs() < 1e-3);
    assert!((fbar[at(9.0)] - f2[at(9.0)]).abs() < 1e-3);
    let crossings = floats(&read(&dir, "crossings.csv"), "omega");
    assert!(crossings.len() >= 2);
    assert!(crossings.iter().all(|w| *w > 1.0 && *w < 10.0));
    let p = floats(&read(&dir, "populations.csv"), "population");
    assert_eq!(p.len(), 11);
    assert!(p.windows(2).any(|w| w[1] > w[0]) && p.windows(2).any(|w| w[1] < w[0]));
    assert!(read(&dir, "summary.txt").contains("threshold_links: 10 of 10"));

    let again = openbath(&["fig1", "--out", "b"], tmp.path());
    assert!(again.status.success());
    for f in ["occupation.csv", "crossings.csv", "populations.csv", "summary.txt"] {
        assert_eq!(read(&dir, f).as_bytes(), read(&tmp.path().join("b"), f).as_bytes(), "{f}");
    }
}

#[test]
fn occupation_scan_needs_a_grid() {
    let tmp = TempDir::new().unwrap();
    let base = std::fs::read_to_string(scenarios().join("mixed-spin.toml")).unwrap();
    let cfg = write(tmp.path(), "s.toml", &base);
    let out = openbath(&["occupation-scan", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(tmp.path(), "g.toml", &format!("{base}\n[grid]\nstart = 0.5\nstop = 2.0\npoints = 4\n"));
    let out = openbath(&["occupation-scan", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    let occ = read(&tmp.path().join("o"), "occupation.csv");
    assert_eq!(occ.lines().next().unwrap(), "omega,f1,f2,fbar");
    assert_eq!(occ.lines().count(), 5);
    // Mixed statistics: no threshold crossings are defined.
    assert_eq!(read(&tmp.path().join("o"), "crossings.csv"), "index,omega\n");
}

#[test]
fn sweep_temperature_mixing() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("oscillator-mixing.toml");
    let out = openbath(
        &["sweep", "--config", cfg.to_str().unwrap(), "--values", "300,0.1", "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&tmp.path().join("o"), "sweep.csv");
    let beta = floats(&csv, "beta_bar");
    assert_eq!(column(&csv, "status"), vec!["ok", "ok"]);
    assert!((1.0 / beta[0] - 200.0).abs() < 2.0);
    // A cold second bath only adds emission; the mode sits near half the first temperature.
    let n1 = 1.0 / ((0.01_f64).exp() - 1.0);
    let n2 = 1.0 / ((10.0_f64).exp() - 1.0);
    let r = (n1 + n2) / (2.0 + n1 + n2);
    assert!((beta[1] + r.ln()).abs() < 1e-10);

    let full = openbath(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "full"], tmp.path());
    assert!(full.status.success());
    assert_eq!(read(&tmp.path().join("full"), "sweep.csv").lines().count(), 42);
}

#[test]
fn sweep_marks_domain_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("bose-domain.toml");
    let out = openbath(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    let csv = read(&tmp.path().join("o"), "sweep.csv");
    assert_eq!(column(&csv, "status"), vec!["ok", "ok", "ok", "ok", "error", "error"]);
    assert!(column(&csv, "message")[5].contains("bose occupation undefined"));
    let rows: Vec<usize> = csv.lines().map(|l| l.split(',').count()).collect();
    assert!(rows.iter().all(|n| *n == rows[0]));
}

#[test]
fn sweep_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let cfg = scenarios().join("bose-domain.toml");
    let c = cfg.to_str().unwrap();
    let out = openbath(&["sweep", "--config", c, "--out", "e", "--values"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&tmp.path().join("e"), "sweep.csv"), "");
    let out = openbath(&["sweep", "--config", c, "--path", "baths.3.mu", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = openbath(&["sweep", "--config", c, "--path", "baths.0.statistics", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn error_codes() {
    let tmp = TempDir::new().unwrap();
    let out = openbath(&["steady", "--config", "missing.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = openbath(&["steady", "--model", "mixed-spin"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = openbath(&["fig1", "--model", "quartic:N=3", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(
        tmp.path(),
        "mode.toml",
        "[model]\npreset = \"mixed-spin\"\n[run]\nmode = \"verify\"\n[[baths]]\nstatistics = \"bose\"\nbeta = 1.0\nrate = { kind = \"constant\", gamma = 1.0 }\n",
    );
    let out = openbath(&["steady", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    // Both rates of every link vanish: the ladder falls apart.
    let cfg = write(
        tmp.path(),
        "dead.toml",
        "[model]\npreset = \"oscillator:N_cut=3\"\n[[baths]]\nstatistics = \"bose\"\nbeta = 1.0\nrate = { kind = \"constant\", gamma = 0.0 }\n[solver]\nmethod = \"ladder\"\n",
    );
    let out = openbath(&["steady", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn operator_file_model() {
    let tmp = TempDir::new().unwrap();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let diag = |a: f64, b: f64| CMatrix::from_row_slice(2, 2, &[c(a, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0)]);
    let r = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let a1 = &r + r.adjoint();
    let a2 = (&r - r.adjoint()) * c(0.0, 1.0);
    write(tmp.path(), "h.txt", &format_operator(&diag(0.0, 1.0)));
    write(tmp.path(), "n.txt", &format_operator(&diag(0.0, 1.0)));
    write(tmp.path(), "a1.txt", &format_operator(&a1));
    write(tmp.path(), "a2.txt", &format_operator(&a2));
    write(tmp.path(), "rate.txt", "# omega gamma\n0 1\n2 1\n");
    let cfg = write(
        tmp.path(),
        "ops.toml",
        "output = \"from-config\"\n[model]\nhamiltonian = \"h.txt\"\nnumber = \"n.txt\"\ncouplings = [\"a1.txt\", \"a2.txt\"]\n[[baths]]\nstatistics = \"fermi\"\nbeta = 2.0\nmu = 0.25\nrate = { kind = \"table\", file = \"rate.txt\" }\n",
    );
    let out = openbath(&["steady", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = floats(&read(&tmp.path().join("from-config"), "populations.csv"), "population");
    let w = (-2.0_f64 * 0.75).exp();
    assert!((p[1] - w / (1.0 + w)).abs() < 1e-12);
    let out = openbath(&["verify", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("factorization: skipped"));
}
