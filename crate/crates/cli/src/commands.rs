//! The four verbs and the files they write.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use malab::functions::FieldSpec;
use malab::grid::fit_order;
use malab::harness::common::solve_local;
use malab::harness::{Check, EstimateReport, SuiteContext, SuiteRegistry, CSV_HEADER, CSV_SCHEMA};
use malab::{io, Error, Point, Result};

use crate::config::ExperimentConfig;

pub const RESULTS: &str = "results.csv";
pub const SUMMARY: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_COPY: &str = "config.toml";
pub const DEFAULT_OUT: &str = "out";

/// Flags shared by the compute verbs.
#[derive(Clone, Debug, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.seed.is_some() {
            cfg.run.seed = self.seed;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.run.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| Error::Io(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteRun {
    pub name: String,
    pub pass: bool,
    pub wall_clock_s: f64,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepInfo {
    pub axis: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub verb: String,
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub outputs: BTreeMap<String, String>,
    pub suites: Vec<SuiteRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepInfo>,
}

/// Per-suite verdict in `summary.json`; timings live in the manifest only.
#[derive(Clone, Debug, Serialize)]
struct SuiteSummary<'a> {
    name: &'a str,
    pass: bool,
    c_emp: Option<f64>,
    spread: Option<f64>,
    tolerance: Option<f64>,
    trials: usize,
    checks: &'a [Check],
    metrics: Option<&'a BTreeMap<String, f64>>,
    notes: &'a [String],
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: u32,
    config_hash: &'a str,
    all_pass: bool,
    suites: Vec<SuiteSummary<'a>>,
}

/// Summary entry as read back by `report`.
#[derive(Deserialize)]
struct SummaryEntry {
    name: String,
    pass: bool,
    c_emp: Option<f64>,
    spread: Option<f64>,
    error: Option<String>,
}

#[derive(Deserialize)]
struct SummaryFile {
    suites: Vec<SummaryEntry>,
}

/// One finished suite run.
struct Run {
    name: String,
    result: Result<EstimateReport>,
    secs: f64,
}

impl Run {
    fn pass(&self) -> bool {
        self.result.as_ref().map(|r| r.passed()).unwrap_or(false)
    }

    fn summary(&self) -> SuiteSummary<'_> {
        let finite = |v: f64| v.is_finite().then_some(v);
        match &self.result {
            Ok(r) => SuiteSummary {
                name: &self.name,
                pass: r.passed(),
                c_emp: finite(r.c_emp()),
                spread: finite(r.verdict.spread),
                tolerance: Some(r.tolerance),
                trials: r.trials.len(),
                checks: &r.checks,
                metrics: Some(&r.metrics),
                notes: &r.notes,
                error: None,
            },
            Err(e) => SuiteSummary {
                name: &self.name,
                pass: false,
                c_emp: None,
                spread: None,
                tolerance: None,
                trials: 0,
                checks: &[],
                metrics: None,
                notes: &[],
                error: Some(format!("{}: {e}", e.kind())),
            },
        }
    }
}

fn run_suite(reg: &SuiteRegistry, name: &str, label: String, ctx: &SuiteContext) -> Run {
    let t = Instant::now();
    let result = reg.run(name, ctx);
    Run {
        name: label,
        result,
        secs: t.elapsed().as_secs_f64(),
    }
}

/// Validation errors abort the whole command; compute errors count as a failed suite.
fn surface_validation(runs: &[Run]) -> Result<()> {
    for r in runs {
        if let Err(e) = &r.result {
            if e.is_validation() {
                return Err(e.clone());
            }
        }
    }
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(dir.join(name), contents).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn dedupe(names: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for n in names {
        let n = n.trim();
        if !n.is_empty() && !out.iter().any(|m| m == n) {
            out.push(n.to_string());
        }
    }
    out
}

fn selected_suites(cfg: &ExperimentConfig, flag: &Option<Vec<String>>) -> Result<Vec<String>> {
    let s = dedupe(flag.as_ref().unwrap_or(&cfg.run.suites));
    if s.is_empty() {
        return Err(Error::Config("no suites selected: pass --suite or set [run] suites".into()));
    }
    Ok(s)
}

fn write_run_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    verb: &str,
    csv: &str,
    runs: &[Run],
    sweep: Option<SweepInfo>,
) -> Result<bool> {
    prepare(dir)?;
    let hash = cfg.hash();
    let all_pass = runs.iter().all(Run::pass);
    write(dir, RESULTS, csv)?;
    let summary = Summary {
        schema: 1,
        config_hash: &hash,
        all_pass,
        suites: runs.iter().map(Run::summary).collect(),
    };
    write(dir, SUMMARY, &json(&summary))?;
    write(dir, CONFIG_COPY, &cfg.canonical())?;
    let outputs: BTreeMap<String, String> = [("results", RESULTS), ("summary", SUMMARY), ("config", CONFIG_COPY)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let manifest = Manifest {
        verb: verb.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        seed: cfg.run.seed,
        outputs,
        suites: runs
            .iter()
            .map(|r| SuiteRun {
                name: r.name.clone(),
                pass: r.pass(),
                wall_clock_s: r.secs,
                outputs: vec![RESULTS.into(), SUMMARY.into()],
            })
            .collect(),
        sweep,
    };
    write(dir, MANIFEST, &json(&manifest))?;
    Ok(all_pass)
}

/// Solves `Phi^{ij} u_ij = f` with zero boundary data for every potential and mesh.
pub fn solve(common: &Common) -> Result<bool> {
    let cfg = common.load()?;
    let reg = SuiteRegistry::standard();
    let ctx = cfg.context(&reg, &cfg.run.suites)?;
    let f_spec = cfg.rhs_spec()?.unwrap_or(FieldSpec::Const(1.0));
    let dir = common.out_dir(&cfg);
    let pool = common.pool()?;
    let t = Instant::now();
    let mut jobs = Vec::new();
    for &mesh in &ctx.meshes {
        for (i, p) in ctx.potentials(mesh)?.into_iter().enumerate() {
            jobs.push((mesh, i, p));
        }
    }
    let solved = pool.install(|| {
        jobs.par_iter()
            .map(|(_, _, p)| {
                let f = f_spec.sample(p.domain().grid(), p.domain().mask());
                let zero = |_: Point| 0.0;
                solve_local(p, None, &f.values, &zero).map(|s| s.u)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    prepare(&dir)?;
    let mut outputs = BTreeMap::new();
    let mut listing = String::new();
    for &mesh in &ctx.meshes {
        let name = format!("domain_m{mesh}.txt");
        io::write_domain(&dir.join(&name), &ctx.domain.build(mesh)?)?;
        outputs.insert(format!("domain m{mesh}"), name);
    }
    for ((mesh, i, p), u) in jobs.iter().zip(&solved) {
        let phi = format!("phi_m{mesh}_p{i}.txt");
        let un = format!("u_m{mesh}_p{i}.txt");
        io::write_field(&dir.join(&phi), p.field())?;
        io::write_field(&dir.join(&un), u)?;
        outputs.insert(format!("phi m{mesh} p{i}"), phi);
        outputs.insert(format!("u m{mesh} p{i}"), un);
        let _ = writeln!(listing, "m{mesh} p{i} {}", p.label());
    }
    write(&dir, "potentials.txt", &listing)?;
    outputs.insert("potentials".into(), "potentials.txt".into());
    write(&dir, CONFIG_COPY, &cfg.canonical())?;
    outputs.insert("config".into(), CONFIG_COPY.into());
    let manifest = Manifest {
        verb: "solve".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        seed: cfg.run.seed,
        outputs,
        suites: vec![SuiteRun {
            name: "solve".into(),
            pass: true,
            wall_clock_s: t.elapsed().as_secs_f64(),
            outputs: vec!["potentials.txt".into()],
        }],
        sweep: None,
    };
    write(&dir, MANIFEST, &json(&manifest))?;
    Ok(true)
}

pub fn verify(common: &Common, suites: &Option<Vec<String>>) -> Result<bool> {
    let mut cfg = common.load()?;
    cfg.run.suites = selected_suites(&cfg, suites)?;
    let reg = SuiteRegistry::standard();
    let ctx = cfg.context(&reg, &cfg.run.suites)?;
    let pool = common.pool()?;
    let runs: Vec<Run> = pool.install(|| {
        cfg.run
            .suites
            .par_iter()
            .map(|s| run_suite(&reg, s, s.clone(), &ctx))
            .collect()
    });
    surface_validation(&runs)?;
    let mut csv = format!("{CSV_SCHEMA}\n{CSV_HEADER}\n");
    for r in &runs {
        if let Ok(rep) = &r.result {
            csv.push_str(&rep.csv_rows());
        }
    }
    write_run_outputs(&common.out_dir(&cfg), &cfg, "verify", &csv, &runs, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Mesh,
    Theta,
    Singularity,
    ExponentP,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "mesh" => Axis::Mesh,
            "theta" => Axis::Theta,
            "singularity" => Axis::Singularity,
            "exponentP" => Axis::ExponentP,
            other => {
                return Err(Error::Config(format!(
                    "unknown axis `{other}` (expected mesh, theta, singularity or exponentP)"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Mesh => "mesh",
            Axis::Theta => "theta",
            Axis::Singularity => "singularity",
            Axis::ExponentP => "exponentP",
        }
    }

    /// Context for one axis value.
    fn apply(self, ctx: &SuiteContext, raw: &str) -> Result<(SuiteContext, String)> {
        let mut c = ctx.clone();
        let bad = |what: &str| Error::Config(format!("axis {} value `{raw}` is not {what}", self.name()));
        let label = if self == Axis::Mesh {
            let m: usize = raw.parse().map_err(|_| bad("a mesh size"))?;
            c.meshes = vec![m];
            m.to_string()
        } else {
            let v: f64 = raw.parse().map_err(|_| bad("a number"))?;
            if !v.is_finite() {
                return Err(bad("finite"));
            }
            match self {
                Axis::Theta => c.thetas = vec![v],
                Axis::Singularity => c.singular = vec![v],
                Axis::ExponentP => c.exponents.p = vec![v],
                Axis::Mesh => unreachable!(),
            }
            v.to_string()
        };
        c.validate()?;
        Ok((c, label))
    }
}

/// Column appended to the sweep CSV after the schema columns.
pub const SWEEP_COLUMNS: &str = "axis,value,fit";

/// Fitted order of `lhs` against `1/mesh` per (suite, trial, potential); mesh axis only.
fn mesh_fits(rows: &[(usize, usize, &malab::harness::Trial)], meshes: &[usize]) -> BTreeMap<(String, String, String), f64> {
    let mut groups: BTreeMap<(String, String, String), BTreeMap<usize, f64>> = BTreeMap::new();
    for &(vi, _, t) in rows {
        let e = groups
            .entry((t.suite.clone(), t.trial.clone(), t.potential.clone()))
            .or_default()
            .entry(vi)
            .or_insert(f64::NEG_INFINITY);
        *e = e.max(t.lhs);
    }
    groups
        .into_iter()
        .map(|(k, by_value)| {
            let (hs, es): (Vec<f64>, Vec<f64>) = by_value
                .iter()
                .filter(|(_, e)| e.is_finite() && **e > 0.0)
                .map(|(&vi, &e)| (1.0 / meshes[vi] as f64, e))
                .unzip();
            let fit = if hs.len() >= 2 { fit_order(&hs, &es) } else { f64::NAN };
            (k, fit)
        })
        .collect()
}

fn fmt_fit(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10e}")
    } else {
        String::new()
    }
}

pub fn sweep(common: &Common, suites: &Option<Vec<String>>, axis: &str, values: &Option<Vec<String>>) -> Result<bool> {
    let axis = Axis::parse(axis)?;
    let values: Vec<String> = values
        .iter()
        .flatten()
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Config("sweep needs a nonempty --values list".into()));
    }
    let mut cfg = common.load()?;
    cfg.run.suites = selected_suites(&cfg, suites)?;
    let reg = SuiteRegistry::standard();
    let base = cfg.context(&reg, &cfg.run.suites)?;
    let points = values
        .iter()
        .map(|v| axis.apply(&base, v))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = points.iter().map(|(_, l)| l.clone()).collect();
    let mut jobs = Vec::new();
    for (vi, (ctx, label)) in points.iter().enumerate() {
        for s in &cfg.run.suites {
            jobs.push((vi, s.clone(), format!("{s} {}={label}", axis.name()), ctx));
        }
    }
    let pool = common.pool()?;
    let runs: Vec<Run> = pool.install(|| {
        jobs.par_iter()
            .map(|(_, s, label, ctx)| run_suite(&reg, s, label.clone(), ctx))
            .collect()
    });
    surface_validation(&runs)?;
    let mut rows = Vec::new();
    for ((vi, _, _, _), r) in jobs.iter().zip(&runs) {
        if let Ok(rep) = &r.result {
            for (ti, t) in rep.trials.iter().enumerate() {
                rows.push((*vi, ti, t));
            }
        }
    }
    let meshes: Vec<usize> = points.iter().map(|(c, _)| c.meshes[0]).collect();
    let fits = if axis == Axis::Mesh { mesh_fits(&rows, &meshes) } else { BTreeMap::new() };
    let mut csv = format!("{CSV_SCHEMA}\n{CSV_HEADER},{SWEEP_COLUMNS}\n");
    for (vi, _, t) in &rows {
        let fit = fits
            .get(&(t.suite.clone(), t.trial.clone(), t.potential.clone()))
            .copied()
            .unwrap_or(f64::NAN);
        let _ = writeln!(csv, "{},{},{},{}", t.csv_row(), axis.name(), labels[*vi], fmt_fit(fit));
    }
    let info = SweepInfo {
        axis: axis.name().into(),
        values: labels,
    };
    write_run_outputs(&common.out_dir(&cfg), &cfg, "sweep", &csv, &runs, Some(info))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MissingOutputs(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into())
}

/// Prints the run table; true iff every suite passed.
pub fn report(out: &Path, config: Option<&Path>) -> Result<bool> {
    let mpath = out.join(MANIFEST);
    if !mpath.exists() {
        return Err(Error::MissingOutputs(format!("no manifest at {}", mpath.display())));
    }
    let manifest: Manifest = read_json(&mpath)?;
    for (key, file) in &manifest.outputs {
        if !out.join(file).exists() {
            return Err(Error::MissingOutputs(format!("{key} output {file} is missing")));
        }
    }
    let current = match config {
        Some(p) => Some(ExperimentConfig::load(p)?),
        None => match std::fs::read_to_string(out.join(CONFIG_COPY)) {
            Ok(text) => ExperimentConfig::parse(&text).ok(),
            Err(_) => None,
        },
    };
    if let Some(cfg) = current {
        let mut cfg = cfg;
        if cfg.run.seed.is_none() {
            cfg.run.seed = manifest.seed;
        }
        let h = cfg.hash();
        if h != manifest.config_hash {
            eprintln!(
                "warning: config hash {} does not match manifest {}; outputs may be stale",
                &h[..12],
                &manifest.config_hash[..manifest.config_hash.len().min(12)]
            );
        }
    }
    let entries: Vec<SummaryEntry> = if manifest.outputs.values().any(|f| f == SUMMARY) {
        read_json::<SummaryFile>(&out.join(SUMMARY))?.suites
    } else {
        manifest
            .suites
            .iter()
            .map(|s| SummaryEntry {
                name: s.name.clone(),
                pass: s.pass,
                c_emp: None,
                spread: None,
                error: None,
            })
            .collect()
    };
    let wall: BTreeMap<&str, f64> = manifest.suites.iter().map(|s| (s.name.as_str(), s.wall_clock_s)).collect();
    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(5).max(5);
    println!("{} run, version {}, config {}", manifest.verb, manifest.version, &manifest.config_hash[..manifest.config_hash.len().min(12)]);
    println!("{:<width$}  {:<7}  {:>11}  {:>11}  {:>9}", "suite", "verdict", "C_emp", "spread", "wall s");
    let mut all = true;
    for e in &entries {
        all &= e.pass;
        let secs = wall.get(e.name.as_str()).map(|s| format!("{s:.1}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<width$}  {:<7}  {:>11}  {:>11}  {:>9}",
            e.name,
            if e.pass { "PASS" } else { "FAIL" },
            cell(e.c_emp),
            cell(e.spread),
            secs
        );
        if let Some(err) = &e.error {
            println!("    error: {err}");
        }
    }
    let failed: Vec<&str> = entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} passed", entries.len());
    } else {
        println!("failed: {}", failed.join(", "));
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use malab::harness::Trial;

    #[test]
    fn axis_names_round_trip() {
        for a in [Axis::Mesh, Axis::Theta, Axis::Singularity, Axis::ExponentP] {
            assert_eq!(Axis::parse(a.name()).unwrap(), a);
        }
        assert!(Axis::parse("alpha").is_err());
    }

    #[test]
    fn axis_values_are_validated() {
        let mut ctx = SuiteContext::default();
        ctx.exponents.q = 1.5;
        ctx.exponents.qprime = 3.0;
        ctx.exponents.inner_q = 1.25;
        assert!(Axis::Mesh.apply(&ctx, "2").is_err());
        assert!(Axis::Mesh.apply(&ctx, "3.5").is_err());
        assert_eq!(Axis::Mesh.apply(&ctx, "32").unwrap().0.meshes, vec![32]);
        assert!(Axis::Theta.apply(&ctx, "1.5").is_err());
        assert_eq!(Axis::ExponentP.apply(&ctx, "6").unwrap_err().kind(), "ExponentOutOfRange");
    }

    #[test]
    fn mesh_fit_recovers_order() {
        let meshes = [16, 32, 64];
        let trials: Vec<Trial> = meshes
            .iter()
            .map(|&m| Trial::new("s", "t", "p", m).ratio(3.0 / (m * m) as f64, 1.0))
            .collect();
        let rows: Vec<_> = trials.iter().enumerate().map(|(i, t)| (i, 0, t)).collect();
        let fits = mesh_fits(&rows, &meshes);
        let f = fits[&("s".to_string(), "t".to_string(), "p".to_string())];
        assert!((f - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dedupe_keeps_first_order() {
        let v = dedupe(&["b".into(), " a".into(), "b".into(), "".into()]);
        assert_eq!(v, vec!["b".to_string(), "a".to_string()]);
    }
}
