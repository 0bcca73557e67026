//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::time::{Duration, Instant};

use malab::harness::exponents::{alpha0, conjugate, validate_p, validate_q};
use malab::harness::{EstimateReport, SuiteContext, SuiteRegistry};

struct Outcome {
    pass: bool,
    detail: String,
}

fn checks_pass(rep: &EstimateReport, filter: impl Fn(&str) -> bool) -> (bool, usize) {
    let sel: Vec<_> = rep.checks.iter().filter(|c| filter(&c.name)).collect();
    (!sel.is_empty() && sel.iter().all(|c| c.pass), sel.len())
}

fn failing(rep: &EstimateReport) -> String {
    let names: Vec<String> = rep
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} = {:.4e} vs {:.4e}", c.name, c.value, c.bound))
        .collect();
    if names.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", names.join(", "))
    }
}

fn run(reg: &SuiteRegistry, suite: &str, ctx: &SuiteContext) -> (Result<EstimateReport, String>, Duration) {
    let t = Instant::now();
    let r = reg.run(suite, ctx).map_err(|e| format!("{} ({})", e, e.kind()));
    (r, t.elapsed())
}

fn report_line(name: &str, limit: Duration, elapsed: Duration, o: Outcome) -> bool {
    let in_time = elapsed <= limit;
    let pass = o.pass && in_time;
    println!(
        "{} {name}: {} [{:.1}s, limit {}s]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn suite_outcome(r: &Result<EstimateReport, String>, filter: impl Fn(&str) -> bool, extra: impl Fn(&EstimateReport) -> (bool, String)) -> Outcome {
    match r {
        Err(e) => Outcome {
            pass: false,
            detail: format!("error: {e}"),
        },
        Ok(rep) => {
            let (ok, n) = checks_pass(rep, &filter);
            let (ok2, msg) = extra(rep);
            Outcome {
                pass: ok && ok2,
                detail: format!("{n} checks, {msg}{}", failing(rep)),
            }
        }
    }
}

fn whole_suite(r: &Result<EstimateReport, String>) -> Outcome {
    suite_outcome(r, |_| true, |rep| (rep.passed(), format!("C_emp {:.4}, spread {:.3}", rep.c_emp(), rep.verdict.spread)))
}

fn metric(rep: &EstimateReport, key: &str) -> f64 {
    rep.metrics.get(key).copied().unwrap_or(f64::NAN)
}

/// Hand-computed admissibility tables; every entry must match exactly.
fn exponent_gates() -> Outcome {
    let mut bad = Vec::new();
    // n/2 < q <= n
    for (q, n, ok) in [
        (1.0, 2.0, false),
        (1.0000001, 2.0, true),
        (1.5, 2.0, true),
        (2.0, 2.0, true),
        (2.0000001, 2.0, false),
        (1.5, 3.0, false),
        (1.6, 3.0, true),
        (3.0, 3.0, true),
    ] {
        if validate_q(q, n).is_ok() != ok {
            bad.push(format!("q={q} n={n}"));
        }
    }
    // 1 <= p < nq/(n-q): limit 6 for q = 1.5, 4 for q = 4/3, none for q = n = 2
    for (p, q, ok) in [
        (1.0, 1.5, true),
        (0.999, 1.5, false),
        (5.5, 1.5, true),
        (5.999, 1.5, true),
        (6.0, 1.5, false),
        (3.99, 4.0 / 3.0, true),
        (4.0, 4.0 / 3.0, false),
        (1e6, 2.0, true),
        (2.0, 1.0, false),
    ] {
        if validate_p(p, q, 2.0).is_ok() != ok {
            bad.push(format!("p={p} q={q}"));
        }
    }
    // q' = q/(q-1) < n/(n-2): no bound in the plane; 3 in space
    for (q, n, expect) in [
        (1.5, 2.0, Some(3.0)),
        (2.0, 2.0, Some(2.0)),
        (1.25, 2.0, Some(5.0)),
        (2.0, 3.0, Some(2.0)),
        (2.5, 3.0, Some(5.0 / 3.0)),
        (1.5, 3.0, None),
        (1.0, 2.0, None),
    ] {
        let got = conjugate(q, n).ok();
        let same = match (got, expect) {
            (Some(a), Some(b)) => a == b,
            (None, None) => true,
            _ => false,
        };
        if !same {
            bad.push(format!("q'({q}, n={n}) = {got:?}"));
        }
    }
    // alpha0 = min{alpha, (3/8)(2 - n/q)}
    for (alpha, q, expect) in [(0.3, 1.5, 0.25), (0.2, 1.5, 0.2), (0.5, 2.0, 0.375), (0.1, 2.0, 0.1), (0.9, 4.0 / 3.0, 0.1875)] {
        let got = alpha0(alpha, q, 2.0);
        if (got - expect).abs() > 4.0 * f64::EPSILON {
            bad.push(format!("alpha0({alpha}, {q}) = {got}"));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "all table entries match".into()
        } else {
            format!("mismatches: {}", bad.join(", "))
        },
    }
}

fn main() {
    let reg = SuiteRegistry::standard();
    let ctx = SuiteContext::default();
    let mut all = true;
    let secs = Duration::from_secs;

    let (r, t) = run(&reg, "ma-identity", &ctx);
    all &= report_line(
        "MA identity",
        secs(30),
        t,
        suite_outcome(&r, |n| n.contains("residual") || n.starts_with("identity order"), |rep| {
            (true, format!("perturbed order {:.3}", metric(rep, "identity order perturbedQuadratic")))
        }),
    );
    all &= report_line(
        "Divergence-free cofactor",
        secs(30),
        t,
        suite_outcome(&r, |n| n.contains("defect"), |rep| {
            (true, format!("perturbed defect order {:.3}", metric(rep, "defect order perturbedQuadratic")))
        }),
    );

    let (r, t) = run(&reg, "green", &ctx);
    all &= report_line(
        "Green oracle",
        secs(60),
        t,
        suite_outcome(&r, |n| n == "oracle relative error" || n == "symmetry defect", |_| (true, String::new())),
    );
    all &= report_line(
        "Green integrability",
        secs(300),
        t,
        suite_outcome(&r, |n| n.starts_with("family spread") || n.starts_with("mesh stability"), |rep| {
            (rep.passed(), format!("C_emp {:.4}", rep.c_emp()))
        }),
    );

    let (r, t) = run(&reg, "max-principle", &ctx);
    all &= report_line("Maximum principles", secs(300), t, whole_suite(&r));

    let (r, t) = run(&reg, "harnack", &ctx);
    let mut o = whole_suite(&r);
    if let Ok(rep) = &r {
        let per_mesh = rep.trials.iter().filter(|x| x.mesh == ctx.coarsest_mesh()).count();
        o.pass &= per_mesh >= 25;
        o.detail = format!("{per_mesh} solutions per mesh, {}", o.detail);
    }
    all &= report_line("Harnack", secs(300), t, o);

    let (r, t) = run(&reg, "barrier", &ctx);
    all &= report_line("Barrier", secs(60), t, whole_suite(&r));

    let (r, t) = run(&reg, "strong-type", &ctx);
    all &= report_line("Strong-type p-p", secs(300), t, whole_suite(&r));

    let t0 = Instant::now();
    let gates = exponent_gates();
    all &= report_line("Exponent arithmetic gates", secs(1), t0.elapsed(), gates);

    let mut w = ctx.fresh();
    w.exponents.q = 1.5;
    w.exponents.qprime = 3.0;
    w.exponents.inner_q = 1.25;
    w.exponents.p = vec![2.0, 4.0, 5.5];
    let (r, t) = run(&reg, "w1p", &w);
    all &= report_line("Global W^{1,p} stability", secs(600), t, whole_suite(&r));

    let (r, t) = run(&reg, "cascade", &ctx);
    all &= report_line(
        "Cascade decay",
        secs(300),
        t,
        suite_outcome(&r, |_| true, |rep| {
            (
                rep.passed(),
                format!("rate {:.3}, levels {}", metric(rep, "poisson rate"), metric(rep, "poisson levels")),
            )
        }),
    );

    let (r, t) = run(&reg, "affine-invariance", &ctx);
    all &= report_line("Affine invariance", secs(120), t, whole_suite(&r));

    println!("{}", if all { "ALL PASS" } else { "SOME FAILED" });
    if !all {
        std::process::exit(1);
    }
}
