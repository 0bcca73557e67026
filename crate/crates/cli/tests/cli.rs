use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use malab::io::read_field;

fn malab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_malab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_kind(o: &Output) -> String {
    let line = stderr(o).lines().last().unwrap_or_default().to_string();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap_or_else(|_| panic!("error json, got `{line}`"));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

const QUADRATIC: &str = r#"
[domain]
spec = "disk:r=1"

[potential]
kind = "analytic"
descriptor = "isotropicQuadratic:scale=1"

[rhs]
f = "const:c=1"

[exponents]
q = 2.0
p = [2.0]
alpha = 0.3
gamma = 0.5

[mesh]
ladder = [32, 64]
thetas = [0.1]
tolerance = 0.5
"#;

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn solve_quadratic_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", QUADRATIC);
    let out = path(tmp.path(), "out");
    let o = malab(&["solve", "--config", &cfg, "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for mesh in [32, 64] {
        let u = read_field(&Path::new(&out).join(format!("u_m{mesh}_p0.txt"))).unwrap();
        let h = u.grid.h;
        let mut worst: f64 = 0.0;
        for (k, v) in u.values.iter().enumerate() {
            if v.is_finite() {
                let x = u.grid.point(k);
                worst = worst.max((v - (x.x * x.x + x.y * x.y - 1.0) / 4.0).abs());
            }
        }
        assert!(worst <= h * h, "mesh {mesh}: error {worst:e} vs h^2 {:e}", h * h);
    }
    assert!(Path::new(&out).join("phi_m64_p0.txt").exists());
    assert!(Path::new(&out).join("domain_m32.txt").exists());
    assert!(Path::new(&out).join("manifest.json").exists());
}

#[test]
fn solve_rejects_q_at_half_dimension_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", &QUADRATIC.replace("q = 2.0", "q = 1.0"));
    let out = path(tmp.path(), "out");
    let o = malab(&["solve", "--config", &cfg, "--out", &out]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "ExponentOutOfRange");
    assert!(stderr(&o).contains("exponent out of range"));
    assert!(!Path::new(&out).exists());
}

fn read_all(dir: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !skip.contains(&n.as_str()))
        .collect();
    files.sort();
    files.into_iter().map(|n| (n.clone(), fs::read(dir.join(&n)).unwrap())).collect()
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", QUADRATIC);
    let (a, b) = (path(tmp.path(), "a"), path(tmp.path(), "b"));
    for out in [&a, &b] {
        assert_eq!(code(&malab(&["solve", "--config", &cfg, "--out", out])), 0);
    }
    // The manifest carries wall clock times; everything else must match.
    let fa = read_all(Path::new(&a), &["manifest.json"]);
    assert!(fa.len() >= 7);
    assert_eq!(fa, read_all(Path::new(&b), &["manifest.json"]));

    let (c, d) = (path(tmp.path(), "c"), path(tmp.path(), "d"));
    for (out, jobs) in [(&c, "1"), (&d, "4")] {
        let o = malab(&["verify", "--config", &cfg, "--suite", "barrier,green", "--seed", "5", "--jobs", jobs, "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(read_all(Path::new(&c), &["manifest.json"]), read_all(Path::new(&d), &["manifest.json"]));
}

#[test]
fn verify_barrier_passes_with_margin() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", QUADRATIC);
    let out = path(tmp.path(), "out");
    let o = malab(&["verify", "--config", &cfg, "--suite", "barrier", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("schema=1"));
    assert_eq!(lines.next(), Some("suite,trial,potential,mesh,q,qprime,p,alpha,lhs,rhs,c_emp,verdict"));
    assert!(lines.clone().count() > 0);
    assert!(lines.all(|l| l.starts_with("barrier,")));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("summary.json")).unwrap()).unwrap();
    let b = &s["suites"][0];
    assert_eq!(b["name"], "barrier");
    assert_eq!(b["pass"], true);
    assert!(b["metrics"].as_object().unwrap().keys().any(|k| k.contains("margin")));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["suites"][0]["wall_clock_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn unknown_suite_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path(), "out");
    let o = malab(&["verify", "--suite", "barrier,nope", "--out", &out]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "UnknownSuite");
    assert!(!Path::new(&out).exists());
}

#[test]
fn w1p_with_p_at_sobolev_limit_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = QUADRATIC.replace("q = 2.0", "q = 1.5").replace("p = [2.0]", "p = [2.0, 6.0]");
    let cfg = config(tmp.path(), "c.toml", &text);
    let o = malab(&["verify", "--config", &cfg, "--suite", "w1p", "--out", &path(tmp.path(), "out")]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "ExponentOutOfRange");
}

#[test]
fn seed_is_mandatory_for_randomized_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let o = malab(&["verify", "--suite", "harnack", "--out", &path(tmp.path(), "out")]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "ConfigError");
}

#[test]
fn unknown_config_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", &QUADRATIC.replace("tolerance = 0.5", "tolerance = 0.5\ntolerence = 0.4"));
    let o = malab(&["solve", "--config", &cfg, "--out", &path(tmp.path(), "out")]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "ConfigError");
}

#[test]
fn empty_sweep_values_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path(), "out");
    for args in [
        vec!["sweep", "--suite", "barrier", "--axis", "mesh", "--values", "", "--out", &out],
        vec!["sweep", "--suite", "barrier", "--axis", "mesh", "--out", &out],
    ] {
        let o = malab(&args);
        assert_eq!(code(&o), 2);
        assert!(stderr(&o).contains("nonempty"));
    }
    let o = malab(&["sweep", "--suite", "barrier", "--axis", "kappa", "--values", "1", "--out", &out]);
    assert_eq!(code(&o), 2);
}

fn column(header: &str, name: &str) -> usize {
    header.split(',').position(|c| c == name).unwrap()
}

/// Splits a CSV line, honouring double quotes.
fn fields(line: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut quoted = false;
    for ch in line.chars() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(String::new()),
            c => out.last_mut().unwrap().push(c),
        }
    }
    out
}

#[test]
fn mesh_sweep_fits_identity_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path(), "out");
    let o = malab(&["sweep", "--suite", "ma-identity", "--axis", "mesh", "--values", "64,128,256", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    let mut lines = csv.lines().skip(1);
    let header = lines.next().unwrap();
    assert!(header.ends_with(",axis,value,fit"));
    let (lhs, fit, mesh) = (column(header, "lhs"), column(header, "fit"), column(header, "mesh"));
    for potential in ["perturbedQuadratic:eps=0.025,freq=1", "radialPower:a=1,b=0.05,p=4"] {
        let rows: Vec<Vec<String>> = lines
            .clone()
            .map(fields)
            .filter(|f| f[1] == "residual" && f[2] == potential)
            .collect();
        assert_eq!(rows.len(), 3, "{potential}");
        let meshes: Vec<&str> = rows.iter().map(|r| r[mesh].as_str()).collect();
        assert_eq!(meshes, ["64", "128", "256"]);
        let r: Vec<f64> = rows.iter().map(|r| r[lhs].parse().unwrap()).collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{potential}: {r:?}");
        let order: f64 = rows[0][fit].parse().unwrap();
        assert!(order >= 1.8, "{potential}: order {order}");
    }
}

#[test]
fn theta_sweep_cofactor_gap_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path(), "out");
    let o = malab(&[
        "sweep", "--suite", "comparison", "--axis", "theta", "--values", "0.1,0.05,0.01", "--seed", "3", "--out", &out,
    ]);
    let csv = fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    assert!(matches!(code(&o), 0 | 1), "{}", stderr(&o));
    let mut lines = csv.lines().skip(1);
    let header = lines.next().unwrap();
    let lhs = column(header, "lhs");
    let gaps: Vec<f64> = lines.map(|l| fields(l)[lhs].parse().unwrap()).collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn report_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", QUADRATIC);
    let out = path(tmp.path(), "out");

    let o = malab(&["report", "--out", &out]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "MissingOutputs");

    assert_eq!(code(&malab(&["verify", "--config", &cfg, "--suite", "barrier", "--out", &out])), 0);
    let o = malab(&["report", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("barrier"));
    assert!(!stderr(&o).contains("warning"));

    // A config edited after the run is flagged as stale.
    let edited = config(tmp.path(), "d.toml", &QUADRATIC.replace("tolerance = 0.5", "tolerance = 0.4"));
    let o = malab(&["report", "--out", &out, "--config", &edited]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning: config hash"));

    // A failed suite is named and gives exit 1.
    let summary = Path::new(&out).join("summary.json");
    let text = fs::read_to_string(&summary).unwrap().replace("\"pass\": true", "\"pass\": false");
    fs::write(&summary, text).unwrap();
    let o = malab(&["report", "--out", &out]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("failed: barrier"));

    fs::remove_file(Path::new(&out).join("results.csv")).unwrap();
    let o = malab(&["report", "--out", &out]);
    assert_eq!(code(&o), 2);
    assert_eq!(error_kind(&o), "MissingOutputs");
}
