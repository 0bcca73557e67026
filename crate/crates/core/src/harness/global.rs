//! Global estimates: W^{1,p} stability over a singular family and Hölder quotients.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::functions::FieldSpec;
use crate::grid::{fit_slope, lp_norm, sup_abs, Point};
use crate::lma::{CrossScheme, LinearizedOperator};
use crate::potential::{AnalyticPotential, ConvexPotential};
use crate::stencil::BoundaryData;

use super::context::{pinched_family_on, DomainSpec, SuiteContext};
use super::exponents::{alpha0, boundary_holder_exponent, conjugate, validate_inner_q, validate_p, validate_q, N};
use super::maximal::mesh_of;
use super::nfunctional::{n_field, NFunctionalSpec};
use super::report::{ratio, Check, EstimateReport, Trial};

/// `sup |g| + sup |Dg| + [Dg]_gamma` over the domain nodes; the seminorm is
/// sampled over at most `SEMINORM_NODES` nodes.
pub fn c1gamma_norm(g: &FieldSpec, domain: &ConvexDomain, gamma: f64) -> f64 {
    let grid = domain.grid();
    let h = grid.h;
    let eps = 1e-5;
    let pts: Vec<Point> = (0..grid.len()).filter(|&k| domain.mask()[k]).map(|k| grid.point(k)).collect();
    let grad = |x: Point| {
        Point::new(
            (g.eval(x + Point::new(eps, 0.0), h) - g.eval(x - Point::new(eps, 0.0), h)) / (2.0 * eps),
            (g.eval(x + Point::new(0.0, eps), h) - g.eval(x - Point::new(0.0, eps), h)) / (2.0 * eps),
        )
    };
    let sup_g = pts.iter().map(|&x| g.eval(x, h).abs()).fold(0.0, f64::max);
    let grads: Vec<Point> = pts.iter().map(|&x| grad(x)).collect();
    let sup_dg = grads.iter().map(|d| d.norm()).fold(0.0, f64::max);
    let stride = pts.len().div_ceil(SEMINORM_NODES).max(1);
    let mut semi: f64 = 0.0;
    for i in (0..pts.len()).step_by(stride) {
        for j in (i + stride..pts.len()).step_by(stride) {
            let d = (grads[i] - grads[j]).norm();
            // differences at rounding level carry no information
            if d > 1e-7 {
                semi = semi.max(d / (pts[i] - pts[j]).norm().powf(gamma));
            }
        }
    }
    sup_g + sup_dg + semi
}

pub const SEMINORM_NODES: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct W1pOutcome {
    pub p: f64,
    /// `||u||_p + ||Du||_p`.
    pub w1p_norm: f64,
    pub bc_norm: f64,
    pub f_norm: f64,
    pub c_emp: f64,
}

impl W1pOutcome {
    pub fn rhs(&self) -> f64 {
        self.bc_norm + self.f_norm
    }
}

/// Gradient magnitude at the unknowns (three-point differences), NaN elsewhere.
pub fn gradient_magnitude(op: &LinearizedOperator, u: &[f64], bd: &dyn BoundaryData) -> Vec<f64> {
    let r = op.region();
    let mut out = vec![f64::NAN; u.len()];
    for i in 0..r.len() {
        out[r.node(i)] = r.gradient(i, u, bd).norm();
    }
    out
}

pub fn w1p_norm(op: &LinearizedOperator, u: &[f64], bd: &dyn BoundaryData, p: f64) -> f64 {
    let mask: Vec<bool> = {
        let r = op.region();
        let mut m = vec![false; u.len()];
        for &k in r.nodes() {
            m[k] = true;
        }
        m
    };
    let h = op.region().grid().h;
    lp_norm(u, &mask, h, p) + lp_norm(&gradient_magnitude(op, u, bd), &mask, h, p)
}

/// Pointwise gradient ratio `max_y |Du(y)| / (||u||_inf + N_{q'}(y))` and `||N||_p / ||f||_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientDiagnostics {
    pub gradient_ratio: f64,
    pub n_ratio: f64,
}

pub fn gradient_diagnostics(
    potential: &ConvexPotential,
    op: &LinearizedOperator,
    u: &[f64],
    f: &[f64],
    bd: &dyn BoundaryData,
    q: f64,
    inner_q: f64,
    p: f64,
    alpha: f64,
) -> Result<GradientDiagnostics> {
    let nodes: Vec<usize> = op.region().nodes().to_vec();
    // heights up to the oscillation of phi
    let (lo, hi) = super::common::extremes(potential.values(), potential.domain().mask());
    let spec = NFunctionalSpec::new(alpha, inner_q, hi - lo)?;
    let nf = n_field(potential, f, &spec, &nodes);
    let du = gradient_magnitude(op, u, bd);
    let mask = potential.domain().mask();
    let sup_u = sup_abs(u, mask);
    let mut gradient_ratio: f64 = 0.0;
    let mut nvals = vec![f64::NAN; u.len()];
    let mut nmask = vec![false; u.len()];
    for (&k, &n) in nodes.iter().zip(&nf) {
        if n.is_finite() {
            gradient_ratio = gradient_ratio.max(ratio(du[k], sup_u + n));
            nvals[k] = n;
            nmask[k] = true;
        }
    }
    let h = potential.h();
    Ok(GradientDiagnostics {
        gradient_ratio,
        n_ratio: ratio(lp_norm(&nvals, &nmask, h, p), lp_norm(f, mask, h, q)),
    })
}

/// Solves `Phi^{ij} u_ij = f`, `u = g` for every member of `family` and
/// returns one outcome per `(f, p)`, in family-major order.
pub fn global_w1p_report(
    potential: &ConvexPotential,
    family: &[(String, Vec<f64>)],
    q: f64,
    ps: &[f64],
    g: &FieldSpec,
    gamma: f64,
) -> Result<Vec<(String, W1pOutcome)>> {
    validate_q(q, N)?;
    for &p in ps {
        validate_p(p, q, N)?;
    }
    let d = potential.domain();
    let op = LinearizedOperator::assemble(&potential.cofactor(), CrossScheme::Corner)?;
    let gg = g.clone();
    let hh = d.h();
    let bd = move |x: Point| gg.eval(x, hh);
    let bc_norm = c1gamma_norm(g, d, gamma);
    let mut out = Vec::new();
    for (name, f) in family {
        let u = op.solve(&|k| f[k], &bd)?;
        let f_norm = lp_norm(f, d.mask(), d.h(), q);
        for &p in ps {
            let w = w1p_norm(&op, &u.values, &bd, p);
            out.push((
                name.clone(),
                W1pOutcome {
                    p,
                    w1p_norm: w,
                    bc_norm,
                    f_norm,
                    c_emp: ratio(w, bc_norm + f_norm),
                },
            ));
        }
    }
    Ok(out)
}

/// Exponents `s` as fractions of `n/q`.
pub const SINGULAR_FRACTIONS: [f64; 7] = [0.3, 0.6, 0.75, 0.825, 0.9, 0.94, 0.975];
pub const W1P_RADIUS: f64 = 0.25;
pub const W1P_BAND: f64 = 2.0;
pub const W1P_GROWTH: f64 = 10.0;
/// Offset of the stronger norm that is logged to show the blow-up.
pub const STRONGER_NORM_OFFSET: f64 = 0.25;

pub fn w1p_boundary_data() -> FieldSpec {
    FieldSpec::Affine {
        c: 1.0,
        a: Point::new(1.0, -0.5),
    }
}

fn w1p_domain(ctx: &SuiteContext) -> DomainSpec {
    if ctx.domain == DomainSpec::default() {
        DomainSpec::Disk {
            center: Point::zeros(),
            radius: W1P_RADIUS,
        }
    } else {
        ctx.domain.clone()
    }
}

/// The singular family runs with zero boundary data so the band isolates the
/// dependence on `f`; the affine data of `w1p_boundary_data` is run alongside
/// and its band is logged.
pub fn w1p_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let ps = ctx.exponents.p.clone();
    validate_q(q, N)?;
    for &p in &ps {
        validate_p(p, q, N)?;
    }
    let inner_q = ctx.exponents.inner_q;
    validate_inner_q(inner_q, q, N)?;
    let gamma = ctx.exponents.gamma;
    let ss: Vec<f64> = if ctx.singular.is_empty() {
        SINGULAR_FRACTIONS.iter().map(|fr| fr * N / q).collect()
    } else {
        ctx.singular.clone()
    };
    let data = [("zero", FieldSpec::Const(0.0)), ("affine", w1p_boundary_data())];
    let spec = w1p_domain(ctx);
    let mut rep = EstimateReport::new("w1p");
    rep.tolerance = ctx.tolerance;
    let mut bands: BTreeMap<(&str, String, usize, String), Vec<f64>> = BTreeMap::new();
    let mut growth = (f64::NAN, f64::NAN);
    for &mesh in &ctx.meshes {
        let dom = Arc::new(spec.build(mesh)?);
        let (lo, hi) = dom.bbox();
        let center = 0.5 * (lo + hi);
        let family: Vec<(String, Vec<f64>)> = ss
            .iter()
            .map(|&s| (format!("s={s:.4}"), FieldSpec::singular(s, center).sample(dom.grid(), dom.mask()).values))
            .collect();
        if mesh == ctx.finest_mesh() {
            let strong = |f: &[f64]| lp_norm(f, dom.mask(), dom.h(), q + STRONGER_NORM_OFFSET);
            growth = (strong(&family[0].1), strong(&family[family.len() - 1].1));
            for (name, f) in &family {
                rep.metric(format!("L^(q+1/4) norm {name}"), strong(f));
            }
        }
        let pots = if ctx.potential == super::context::PotentialChoice::Family {
            pinched_family_on(dom.clone())?
        } else {
            ctx.potential.build(&spec, mesh)?
        };
        for p in &pots {
            for (dname, g) in &data {
                for (name, o) in global_w1p_report(p, &family, q, &ps, g, gamma)? {
                    rep.push(
                        Trial::new("w1p", format!("{dname} {name}"), p.label(), mesh_of(p))
                            .exponents(q, conjugate(q, N)?, o.p, f64::NAN)
                            .ratio(o.w1p_norm, o.rhs()),
                    );
                    bands
                        .entry((dname, p.label().to_string(), mesh, format!("{}", o.p)))
                        .or_default()
                        .push(o.c_emp);
                }
            }
            if mesh == ctx.coarsest_mesh() && p.analytic_form().map(|a| a.is_quadratic()).unwrap_or(false) {
                let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner)?;
                let (name, f) = &family[family.len() / 2];
                let bd = |_: Point| 0.0;
                let u = op.solve(&|k| f[k], &bd)?;
                let pd = ps.iter().copied().fold(1.0, f64::max);
                let alpha = ctx.exponents.alpha_for(pd)?;
                let dg = gradient_diagnostics(p, &op, &u.values, f, &bd, q, inner_q, pd, alpha)?;
                rep.metric(format!("{} {name} gradient ratio", p.label()), dg.gradient_ratio);
                rep.metric(format!("{} {name} ||N||_p/||f||_q", p.label()), dg.n_ratio);
            }
        }
    }
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for ((dname, ..), v) in &bands {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        let w = worst.entry(dname).or_insert(1.0);
        *w = w.max(ratio(hi, lo));
    }
    rep.check(Check::at_most("family band max/min", worst["zero"], W1P_BAND));
    rep.metric("affine data family band max/min", worst["affine"]);
    rep.check(Check::at_least("stronger norm growth", ratio(growth.1, growth.0), W1P_GROWTH));
    Ok(rep.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderOutcome {
    pub beta_emp: f64,
    pub beta_boundary: f64,
    pub quotient_emp: f64,
    pub quotient_boundary: f64,
    /// `||u||_inf + ||g||_{C^alpha} + ||f||_q`.
    pub rhs: f64,
}

impl HolderOutcome {
    pub fn c_emp(&self) -> f64 {
        ratio(self.quotient_emp, self.rhs)
    }

    pub fn c_boundary(&self) -> f64 {
        ratio(self.quotient_boundary, self.rhs)
    }
}

pub const HOLDER_PAIRS: usize = 10_000;
const DISTANCE_BINS: usize = 12;

/// Largest quotient `|u(x) - u(y)| / |x - y|^beta` over the sampled pairs.
pub fn holder_quotient(pairs: &[(Point, Point, f64)], beta: f64) -> f64 {
    pairs
        .iter()
        .map(|(x, y, du)| du / (x - y).norm().powf(beta))
        .fold(0.0, f64::max)
}

/// Samples node pairs, fits `beta_emp` from the upper envelope of `|du|`
/// against distance (clamped to `(0, 1]`) and evaluates both quotients.
pub fn global_holder_report(
    potential: &ConvexPotential,
    u: &[f64],
    f: &[f64],
    g: &FieldSpec,
    q: f64,
    alpha: f64,
    seed: u64,
) -> Result<HolderOutcome> {
    validate_q(q, N)?;
    let d = potential.domain();
    let grid = d.grid();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&k| d.mask()[k] && u[k].is_finite()).collect();
    if nodes.len() < 2 {
        return Err(Error::SectionTooSmall("fewer than two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(HOLDER_PAIRS);
    while pairs.len() < HOLDER_PAIRS {
        let a = nodes[rng.random_range(0..nodes.len())];
        let b = nodes[rng.random_range(0..nodes.len())];
        if a != b {
            pairs.push((grid.point(a), grid.point(b), (u[a] - u[b]).abs()));
        }
    }
    let dmin = pairs.iter().map(|(x, y, _)| (x - y).norm()).fold(f64::INFINITY, f64::min);
    let dmax = pairs.iter().map(|(x, y, _)| (x - y).norm()).fold(0.0, f64::max);
    let mut env = vec![0.0f64; DISTANCE_BINS];
    let w = (dmax / dmin).ln() / DISTANCE_BINS as f64;
    for (x, y, du) in &pairs {
        let b = (((x - y).norm() / dmin).ln() / w).floor() as usize;
        let b = b.min(DISTANCE_BINS - 1);
        env[b] = env[b].max(*du);
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (b, e) in env.iter().enumerate() {
        if *e > 0.0 {
            lx.push(dmin.ln() + (b as f64 + 0.5) * w);
            ly.push(e.ln());
        }
    }
    let beta_emp = if lx.len() >= 3 { fit_slope(&lx, &ly).clamp(1e-3, 1.0) } else { 1.0 };
    let beta_boundary = boundary_holder_exponent(alpha0(alpha, q, N), N);
    let rhs = sup_abs(u, d.mask()) + c1gamma_norm(g, d, alpha) + lp_norm(f, d.mask(), d.h(), q);
    Ok(HolderOutcome {
        beta_emp,
        beta_boundary,
        quotient_emp: holder_quotient(&pairs, beta_emp),
        quotient_boundary: holder_quotient(&pairs, beta_boundary),
        rhs,
    })
}

/// `sup |u(x) - u(y)| / |x - y|^{1/2}` for `u = (|x|^2 - 1)/4` on the unit disk,
/// attained on a radius at `|x| = 1/3`, `|y| = 1`.
pub const POISSON_HALF_QUOTIENT: f64 = 0.272_165_526_975_908_7;

pub fn holder_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let alpha = ctx.exponents.alpha.unwrap_or(0.3);
    let mut rep = EstimateReport::new("holder");
    rep.tolerance = ctx.tolerance;
    let g = FieldSpec::Affine {
        c: 0.0,
        a: Point::new(0.5, 0.25),
    };
    let mut per_potential: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &mesh in &ctx.meshes {
        for p in ctx.potentials(mesh)? {
            let d = p.domain();
            let f = ctx.rhs_or(&FieldSpec::singular(0.5 * N / q, Point::zeros()), &p);
            let gg = g.clone();
            let hh = d.h();
            let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner)?;
            let u = op.solve(&|k| f.values[k], &move |x: Point| gg.eval(x, hh))?;
            let o = global_holder_report(&p, &u.values, &f.values, &g, q, alpha, ctx.seed)?;
            rep.push(
                Trial::new("holder", format!("beta={:.4}", o.beta_boundary), p.label(), mesh_of(&p))
                    .exponents(q, conjugate(q, N)?, f64::NAN, alpha)
                    .ratio(o.quotient_boundary, o.rhs),
            );
            rep.push(
                Trial::new("holder", "beta=fit", p.label(), mesh_of(&p))
                    .exponents(q, conjugate(q, N)?, f64::NAN, alpha)
                    .ratio(o.quotient_emp, o.rhs),
            );
            per_potential.entry(p.label().to_string()).or_default().push(o.c_boundary());
        }
        // Poisson quotient at beta = 1/2.
        let dom = Arc::new(DomainSpec::default().build(mesh)?);
        let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), dom.clone(), None)?;
        let grid = dom.grid();
        let u: Vec<f64> = (0..grid.len()).map(|k| 0.25 * (grid.point(k).norm_squared() - 1.0)).collect();
        let nodes: Vec<usize> = (0..grid.len()).filter(|&k| dom.mask()[k]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let pairs: Vec<(Point, Point, f64)> = (0..HOLDER_PAIRS)
            .filter_map(|_| {
                let a = nodes[rng.random_range(0..nodes.len())];
                let b = nodes[rng.random_range(0..nodes.len())];
                (a != b).then(|| (grid.point(a), grid.point(b), (u[a] - u[b]).abs()))
            })
            .collect();
        let qh = holder_quotient(&pairs, 0.5);
        rep.metric(format!("poisson quotient beta=1/2 mesh={mesh}"), qh);
        rep.check(Check::at_most(
            format!("poisson quotient factor mesh={}", mesh_of(&p)),
            (qh / POISSON_HALF_QUOTIENT).max(POISSON_HALF_QUOTIENT / qh),
            2.0,
        ));
    }
    for (name, v) in &per_potential {
        rep.spread_check(format!("mesh spread {name}"), v, ctx.tolerance);
    }
    Ok(rep.finish())
}
