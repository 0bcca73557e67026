//! Estimate reports, CSV rows and the verdict function.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

/// Relative variation allowed across meshes and potential families.
pub const DEFAULT_TOLERANCE: f64 = 0.5;

pub const CSV_SCHEMA: &str = "schema=1";
pub const CSV_HEADER: &str = "suite,trial,potential,mesh,q,qprime,p,alpha,lhs,rhs,c_emp,verdict";

/// One evaluated inequality.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Trial {
    pub suite: String,
    pub trial: String,
    pub potential: String,
    pub mesh: usize,
    pub q: f64,
    pub qprime: f64,
    pub p: f64,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub c_emp: f64,
    pub verdict: String,
}

impl Trial {
    pub fn new(suite: &str, trial: impl Into<String>, potential: impl Into<String>, mesh: usize) -> Self {
        Trial {
            suite: suite.into(),
            trial: trial.into(),
            potential: potential.into(),
            mesh,
            q: f64::NAN,
            qprime: f64::NAN,
            p: f64::NAN,
            alpha: f64::NAN,
            lhs: f64::NAN,
            rhs: f64::NAN,
            c_emp: f64::NAN,
            verdict: "info".into(),
        }
    }

    pub fn exponents(mut self, q: f64, qprime: f64, p: f64, alpha: f64) -> Self {
        self.q = q;
        self.qprime = qprime;
        self.p = p;
        self.alpha = alpha;
        self
    }

    /// Sets `lhs`, `rhs` and `c_emp = lhs / rhs` (0 when both vanish).
    pub fn ratio(mut self, lhs: f64, rhs: f64) -> Self {
        self.lhs = lhs;
        self.rhs = rhs;
        self.c_emp = ratio(lhs, rhs);
        self
    }

    pub fn verdict(mut self, pass: bool) -> Self {
        self.verdict = if pass { "pass" } else { "fail" }.into();
        self
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&self.suite),
            csv_field(&self.trial),
            csv_field(&self.potential),
            self.mesh,
            num(self.q),
            num(self.qprime),
            num(self.p),
            num(self.alpha),
            num(self.lhs),
            num(self.rhs),
            num(self.c_emp),
            self.verdict
        )
    }
}

/// `lhs / rhs`, with `0/0 = 0` and a clamp at zero from below.
pub fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.10e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A named pass/fail condition with its measured value and bound.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value >= bound,
        }
    }
}

/// `max/min - 1` over the values (0 for fewer than two, infinite when the
/// minimum is not positive but the maximum is).
pub fn spread(values: &[f64]) -> f64 {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.len() < 2 {
        return 0.0;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= 0.0 {
        0.0
    } else if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo - 1.0
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Verdict {
    pub c_emp: f64,
    pub spread: f64,
    pub pass: bool,
}

/// Pure verdict: `c_emp` is the largest trial constant, the stability
/// spread is taken over `stability` and compared with `tolerance`, and every
/// check must hold.
pub fn verdict(trials: &[Trial], stability: &[f64], tolerance: f64, checks: &[Check]) -> Verdict {
    let c_emp = trials
        .iter()
        .map(|t| t.c_emp)
        .filter(|c| !c.is_nan())
        .fold(0.0, f64::max);
    let s = spread(stability);
    let pass = c_emp.is_finite() && s <= tolerance && checks.iter().all(|c| c.pass) && trials.iter().all(|t| t.verdict != "fail");
    Verdict { c_emp, spread: s, pass }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub suite: String,
    pub trials: Vec<Trial>,
    pub meshes: Vec<usize>,
    /// Constants whose spread decides stability.
    pub stability: Vec<f64>,
    pub tolerance: f64,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
}

impl EstimateReport {
    pub fn new(suite: &str) -> Self {
        EstimateReport {
            suite: suite.into(),
            trials: Vec::new(),
            meshes: Vec::new(),
            stability: Vec::new(),
            tolerance: DEFAULT_TOLERANCE,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            verdict: Verdict {
                c_emp: 0.0,
                spread: 0.0,
                pass: true,
            },
        }
    }

    pub fn push(&mut self, t: Trial) {
        if !self.meshes.contains(&t.mesh) {
            self.meshes.push(t.mesh);
            self.meshes.sort_unstable();
        }
        self.trials.push(t);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    /// Adds a check that `spread(values) <= tolerance` and returns the spread.
    pub fn spread_check(&mut self, name: impl Into<String>, values: &[f64], tolerance: f64) -> f64 {
        let s = spread(values);
        self.check(Check::at_most(name, s, tolerance));
        s
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Sorts trials by key and computes the verdict.
    pub fn finish(mut self) -> Self {
        self.trials
            .sort_by(|a, b| (a.trial.as_str(), a.mesh, a.potential.as_str()).cmp(&(b.trial.as_str(), b.mesh, b.potential.as_str())));
        self.verdict = verdict(&self.trials, &self.stability, self.tolerance, &self.checks);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.pass
    }

    pub fn c_emp(&self) -> f64 {
        self.verdict.c_emp
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for t in &self.trials {
            let _ = writeln!(s, "{}", t.csv_row());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_definition() {
        assert_eq!(spread(&[1.0]), 0.0);
        assert!((spread(&[1.0, 1.5, 1.2]) - 0.5).abs() < 1e-15);
        assert_eq!(spread(&[0.0, 1.0]), f64::INFINITY);
        assert_eq!(spread(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn verdict_is_pure_and_uses_checks() {
        let t = vec![Trial::new("s", "a", "p", 8).ratio(1.0, 2.0), Trial::new("s", "b", "p", 8).ratio(3.0, 4.0)];
        let v1 = verdict(&t, &[0.5, 0.75], 0.5, &[]);
        let v2 = verdict(&t, &[0.5, 0.75], 0.5, &[]);
        assert_eq!(v1, v2);
        assert_eq!(v1.c_emp, 0.75);
        assert!(v1.pass);
        assert!(!verdict(&t, &[0.5, 0.75], 0.4, &[]).pass);
        assert!(!verdict(&t, &[], 0.5, &[Check::at_most("x", 2.0, 1.0)]).pass);
    }

    #[test]
    fn csv_row_shape() {
        let t = Trial::new("green", "a,b", "iso", 16).exponents(2.0, 2.0, f64::NAN, 0.5).ratio(0.0, 0.0);
        let row = t.csv_row();
        assert_eq!(row.matches(',').count(), 12);
        assert!(row.starts_with("green,\"a,b\",iso,16,"));
        assert_eq!(t.c_emp, 0.0);
        assert_eq!(CSV_HEADER.split(',').count(), 12);
    }
}
