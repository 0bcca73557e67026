//! Interior regularity: pointwise C^{1,alpha} at the minimum point, the affine
//! cascade over shrinking sections, and the comparison estimate.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::functions::FieldSpec;
use crate::geometry::polygon_depth;
use crate::grid::{fit_slope, lp_norm, Point, ScalarField};
use crate::lma::{rescale_problem, RescaleSpec, Source, MIN_SECTION_NODES};
use crate::potential::{solve_monge_ampere, AnalyticPotential, ConvexPotential, PointFn};
use crate::section::{section_at_node, section_from_support, Support};
use crate::stencil::NodalTrace;

use super::common::{affine_deviation, ball_mask, fit_affine, solve_local, TrigData};
use super::context::{DomainSpec, SuiteContext};
use super::exponents::{conjugate, N};
use super::maximal::mesh_of;
use super::nfunctional::{n_functional_sup, NFunctionalSpec};
use super::report::{Check, EstimateReport, Trial};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C1AlphaSpec {
    pub alpha: f64,
    pub q: f64,
    /// Largest radius of the ladder.
    pub mu_star: f64,
    /// Height cap of the N functional.
    pub r0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct C1AlphaOutcome {
    pub center: Point,
    /// `l(x) = a + b.(x - center)`.
    pub a: f64,
    pub b: Point,
    pub radii: Vec<f64>,
    pub lhs: Vec<f64>,
    pub sup_u: f64,
    pub n_value: f64,
    pub c_emp: f64,
}

impl C1AlphaOutcome {
    pub fn rhs(&self) -> f64 {
        self.sup_u + self.n_value
    }

    pub fn max_lhs(&self) -> f64 {
        self.lhs.iter().copied().fold(0.0, f64::max)
    }
}

/// Nodes within `1e-3 h` of the boundary are Dirichlet nodes, so a minimizer
/// there counts as a boundary minimizer.
pub fn interior_minimizer(potential: &ConvexPotential) -> Result<usize> {
    let z = potential.minimizer();
    if potential.region().unknown_of(z).is_none() {
        return Err(Error::MinimizerOnBoundary);
    }
    Ok(z)
}

/// `l` is the least-squares affine fit on the smallest ball of radius `>= 3h`;
/// the constant is the max over `r = mu* 2^{-k} >= 3h` of
/// `r^{-(1+alpha)} ||u - l||_{L^inf(B_r)} + |l(zbar)| + |Dl|` over `||u||_inf + N(zbar)`.
pub fn pointwise_c1alpha_interior(
    potential: &ConvexPotential,
    u: &[f64],
    f: &[f64],
    spec: &C1AlphaSpec,
) -> Result<C1AlphaOutcome> {
    let z = interior_minimizer(potential)?;
    let grid = potential.domain().grid();
    let h = grid.h;
    let c = grid.point(z);
    let fit = ball_mask(potential, c, 3.0 * h);
    let (a, b) = fit_affine(grid, &fit, u, c).ok_or_else(|| Error::SectionTooSmall("affine fit ball".into()))?;
    let mut radii = Vec::new();
    let mut lhs = Vec::new();
    let mut r = spec.mu_star;
    while r >= 3.0 * h {
        let m = ball_mask(potential, c, r);
        let dev = affine_deviation(grid, &m, u, c, a, b);
        radii.push(r);
        lhs.push(r.powf(-(1.0 + spec.alpha)) * dev + a.abs() + b.norm());
        r *= 0.5;
    }
    if radii.is_empty() {
        return Err(Error::InsufficientLadder { usable: 0, needed: 1 });
    }
    let sup_u = crate::grid::sup_abs(u, potential.domain().mask());
    let nspec = NFunctionalSpec::new(spec.alpha, spec.q, spec.r0)?;
    let n_value = n_functional_sup(potential, f, &nspec, c)?;
    let max_lhs = lhs.iter().copied().fold(0.0, f64::max);
    Ok(C1AlphaOutcome {
        center: c,
        a,
        b,
        radii,
        lhs,
        sup_u,
        n_value,
        c_emp: super::report::ratio(max_lhs, sup_u + n_value),
    })
}

pub fn c1alpha_interior_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let alpha = ctx.exponents.alpha.unwrap_or(0.3);
    let s = ctx.singular.first().copied().unwrap_or(0.5 * N / q);
    let mut rep = EstimateReport::new("c1alpha-interior");
    rep.tolerance = ctx.tolerance;
    let zero = |_: Point| 0.0;
    let mut per_potential: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut finest = Vec::new();
    for &mesh in &ctx.meshes {
        for p in ctx.potentials(mesh)? {
            let zp = p.domain().grid().point(p.minimizer());
            let f = ctx.rhs_or(&FieldSpec::singular(s, zp), &p);
            let sol = solve_local(&p, None, &f.values, &zero)?;
            let spec = C1AlphaSpec {
                alpha,
                q,
                mu_star: 0.5,
                r0: 0.5 * crate::section::maximal_interior_height(&p, zp)?,
            };
            let o = pointwise_c1alpha_interior(&p, &sol.u.values, &f.values, &spec)?;
            rep.push(
                Trial::new("c1alpha-interior", "singular", p.label(), mesh_of(&p))
                    .exponents(q, conjugate(q, N)?, f64::NAN, alpha)
                    .ratio(o.max_lhs(), o.rhs()),
            );
            per_potential.entry(p.label().to_string()).or_default().push(o.c_emp);
            if mesh == ctx.finest_mesh() {
                finest.push(o.c_emp);
            }
        }
        // Poisson: u = (|x|^2 - 1)/4 solves Laplace u = 1 with zero data.
        let d = Arc::new(DomainSpec::default().build(mesh)?);
        let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d, None)?;
        let g = p.domain().grid();
        let u: Vec<f64> = (0..g.len()).map(|k| 0.25 * (g.point(k).norm_squared() - 1.0)).collect();
        let f = vec![1.0; g.len()];
        let spec = C1AlphaSpec {
            alpha,
            q,
            mu_star: 0.5,
            r0: 0.25,
        };
        let o = pointwise_c1alpha_interior(&p, &u, &f, &spec)?;
        rep.push(
            Trial::new("c1alpha-interior", "poisson", p.label(), mesh)
                .exponents(q, conjugate(q, N)?, f64::NAN, alpha)
                .ratio(o.max_lhs(), o.rhs()),
        );
    }
    for (name, v) in &per_potential {
        rep.spread_check(format!("mesh spread {name}"), v, ctx.tolerance);
    }
    rep.stability = finest;
    Ok(rep.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeLevel {
    pub k: usize,
    /// `A_k`, unimodular.
    pub matrix: Matrix2<f64>,
    /// `l_k(x) = a_k + b_k.(x - zbar)`.
    pub a: f64,
    pub b: Point,
    /// `B_{(1-d) sqrt 2} ⊂ mu^{-k/2} A_k (S_k - zbar) ⊂ B_{(1+d) sqrt 2}`.
    pub delta: f64,
    /// `e_k = ||u - l_{k-1}||_{L^inf(S_{mu^k})}`.
    pub error: f64,
    /// `|a_k - a_{k-1}| + mu^{k/2} |A_k^{-T} (b_k - b_{k-1})|`.
    pub drift: f64,
    pub section_nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineCascade {
    pub mu: f64,
    pub alpha: f64,
    pub levels: Vec<CascadeLevel>,
    /// First level that was not resolved.
    pub termination: usize,
}

impl AffineCascade {
    /// Slope of `log e_k` against `k`, in units of `log mu`.
    pub fn rate(&self) -> f64 {
        let ks: Vec<f64> = self.levels.iter().map(|l| l.k as f64).collect();
        let le: Vec<f64> = self.levels.iter().map(|l| l.error.max(1e-300).ln()).collect();
        fit_slope(&ks, &le) / self.mu.ln()
    }

    /// `max_k e_k / mu^{(k-1)(1+alpha)/2}`.
    pub fn c_emp(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.error / self.mu.powf((l.k as f64 - 1.0) * 0.5 * (1.0 + self.alpha)))
            .fold(0.0, f64::max)
    }

    /// Geometric mean of successive drift ratios; below 1 the drift series converges.
    pub fn drift_ratio(&self) -> f64 {
        let d: Vec<f64> = self.levels.iter().skip(1).map(|l| l.drift).collect();
        if d.len() < 2 || d[0] <= 0.0 {
            return 0.0;
        }
        let last = *d.last().unwrap();
        if last <= 0.0 {
            return 0.0;
        }
        (last / d[0]).powf(1.0 / (d.len() - 1) as f64)
    }

    /// Largest `drift_k / (2 c_emp mu^{(k-1)(1+alpha)/2})`.
    pub fn drift_bound_ratio(&self) -> f64 {
        let c = self.c_emp();
        self.levels
            .iter()
            .skip(1)
            .map(|l| super::report::ratio(l.drift, 2.0 * c * self.mu.powf((l.k as f64 - 1.0) * 0.5 * (1.0 + self.alpha))))
            .fold(0.0, f64::max)
    }

    pub fn final_affine(&self) -> Option<(f64, Point)> {
        self.levels.last().map(|l| (l.a, l.b))
    }
}

/// Runs the cascade about the minimizer; each level is rescaled onto a fresh
/// grid with `image_mesh` cells, where `det D^2 w = 1` and `W^{ij} h_ij = 0`
/// are solved.
pub fn affine_cascade(
    potential: &ConvexPotential,
    u: &Source,
    mu: f64,
    alpha: f64,
    max_levels: usize,
    image_mesh: usize,
) -> Result<AffineCascade> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Config(format!("mu = {mu} must lie in (0, 1)")));
    }
    let z = interior_minimizer(potential)?;
    let grid = potential.domain().grid();
    let zp = grid.point(z);
    let zero_f = Source::Analytic(Arc::new(|_| 0.0));
    let mut levels: Vec<CascadeLevel> = Vec::new();
    let (mut a, mut b) = (0.0, Point::zeros());
    let mut termination = max_levels + 1;
    let support = Support::at_node(potential, z);
    for k in 1..=max_levels {
        let t = mu.powi(k as i32);
        let sec = section_from_support(potential, &support, t);
        if sec.count < MIN_SECTION_NODES {
            termination = k;
            break;
        }
        let error = sec
            .nodes()
            .map(|q| (u.eval(grid.point(q)) - a - b.dot(&(grid.point(q) - zp))).abs())
            .fold(0.0, f64::max);
        let mut spec = RescaleSpec::interior(potential, zp, t, alpha)?.with_affine(a, b);
        spec.b = 1.0;
        let rp = match rescale_problem(potential, u, &zero_f, &spec, image_mesh, None) {
            Ok(r) => r,
            Err(Error::SectionTooSmall(_)) => {
                termination = k;
                break;
            }
            Err(e) => return Err(e),
        };
        let dom = rp.potential.domain().clone();
        let ones = ScalarField::from_fn(dom.grid(), dom.mask(), |_| 1.0);
        let w = solve_monge_ampere(dom.clone(), &ones, rp.potential.trace().clone())
            .map_err(|e| Error::ComparisonSolveFailed(format!("level {k}: {e}")))?;
        let f0 = vec![0.0; dom.grid().len()];
        let g = match &rp.u_source {
            Source::Analytic(g) => g.clone(),
            Source::Field(_) => unreachable!("rescaled sources are closures"),
        };
        let bd = move |p: Point| g(p);
        let hsol = solve_local(&w, None, &f0, &bd).map_err(|e| Error::ComparisonSolveFailed(format!("level {k}: {e}")))?;
        let origin = w
            .node_at(Point::zeros())
            .and_then(|q| hsol.region.unknown_of(q).map(|i| (q, i)))
            .ok_or_else(|| Error::ComparisonSolveFailed("image centre is not an unknown".into()))?;
        let h0 = hsol.u.values[origin.0];
        let dh = hsol.region.gradient(origin.1, &hsol.u.values, &bd);
        let ak = spec.matrix;
        let s = mu.powf(0.5 * k as f64);
        let (a_new, b_new) = (a + h0, b + ak.transpose() * dh / s);
        let r_in = polygon_depth(dom.vertices(), Point::zeros());
        let r_out = dom.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let sq2 = std::f64::consts::SQRT_2;
        let delta = (1.0 - r_in / sq2).max(r_out / sq2 - 1.0);
        let ainv_t = ak.try_inverse().map(|m| m.transpose()).unwrap_or(Matrix2::identity());
        let drift = (a_new - a).abs() + s * (ainv_t * (b_new - b)).norm();
        levels.push(CascadeLevel {
            k,
            matrix: ak,
            a: a_new,
            b: b_new,
            delta,
            error,
            drift,
            section_nodes: sec.count,
        });
        a = a_new;
        b = b_new;
    }
    Ok(AffineCascade {
        mu,
        alpha,
        levels,
        termination,
    })
}

pub const CASCADE_MU: f64 = 1.0 / 3.0;
pub const CASCADE_MESH: usize = 256;
pub const CASCADE_IMAGE_MESH: usize = 128;
pub const CASCADE_MIN_LEVELS: usize = 4;

pub fn cascade_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let alpha = ctx.exponents.alpha.unwrap_or(0.3);
    let mut rep = EstimateReport::new("cascade");
    rep.tolerance = ctx.tolerance;
    let mesh = ctx.finest_mesh().max(CASCADE_MESH);
    let d = Arc::new(DomainSpec::default().build(mesh)?);

    // Exact Poisson solution.
    let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d.clone(), None)?;
    let u = Source::Analytic(Arc::new(|x: Point| 0.25 * (x.norm_squared() - 1.0)));
    let c = affine_cascade(&p, &u, CASCADE_MU, alpha, 12, CASCADE_IMAGE_MESH)?;
    record_cascade(&mut rep, &c, &p, "poisson", alpha);
    rep.check(Check::at_least("poisson levels", c.levels.len() as f64, CASCADE_MIN_LEVELS as f64));
    rep.check(Check::at_least("poisson rate", c.rate(), 0.5 * (1.0 + alpha)));
    rep.check(Check::at_most("poisson drift ratio", c.drift_ratio(), 1.0 - 1e-3));
    let det_defect = c.levels.iter().map(|l| (l.matrix.determinant() - 1.0).abs()).fold(0.0, f64::max);
    rep.check(Check::at_most("det A_k defect", det_defect, 1e-10));
    let uv = ScalarField::from_fn(d.grid(), d.mask(), |x| u.eval(x)).values;
    let gap = limit_fit_gap(&p, &c, &uv)?;
    rep.metric("poisson limit vs fit", gap);
    rep.check(Check::at_most("poisson limit vs least-squares fit", gap, LIMIT_FIT_TOL));

    // Perturbed potential with f = 1, solved.
    let p = ConvexPotential::analytic(AnalyticPotential::perturbed(0.025), d, None)?;
    let f = vec![1.0; p.domain().grid().len()];
    let sol = solve_local(&p, None, &f, &|_: Point| 0.0)?;
    let u = Source::Field(sol.u.clone());
    match affine_cascade(&p, &u, CASCADE_MU, alpha, 12, CASCADE_IMAGE_MESH) {
        Ok(c) => {
            record_cascade(&mut rep, &c, &p, "perturbed", alpha);
            rep.metric("perturbed drift ratio", c.drift_ratio());
            let gap = limit_fit_gap(&p, &c, &sol.u.values)?;
            rep.metric("perturbed limit vs fit", gap);
            rep.check(Check::at_most("perturbed limit vs least-squares fit", gap, LIMIT_FIT_TOL));
        }
        Err(e) => rep.note(format!("perturbed cascade: {e}")),
    }
    Ok(rep.finish())
}

/// Relative gap between the cascade limit and the least-squares affine fit at the minimizer.
pub const LIMIT_FIT_TOL: f64 = 0.1;

pub fn limit_fit_gap(potential: &ConvexPotential, c: &AffineCascade, u: &[f64]) -> Result<f64> {
    let (a, b) = c.final_affine().ok_or_else(|| Error::SectionTooSmall("empty cascade".into()))?;
    let grid = potential.domain().grid();
    let z = grid.point(interior_minimizer(potential)?);
    let fit = ball_mask(potential, z, 3.0 * grid.h);
    let (a0, b0) = fit_affine(grid, &fit, u, z).ok_or_else(|| Error::SectionTooSmall("affine fit ball".into()))?;
    Ok(((a - a0).abs() + (b - b0).norm()) / (a0.abs() + b0.norm()))
}

fn record_cascade(rep: &mut EstimateReport, c: &AffineCascade, p: &ConvexPotential, name: &str, alpha: f64) {
    for l in &c.levels {
        let bound = CASCADE_MU.powf((l.k as f64 - 1.0) * 0.5 * (1.0 + alpha));
        rep.push(
            Trial::new("cascade", format!("{name} k={}", l.k), p.label(), mesh_of(p))
                .exponents(f64::NAN, f64::NAN, f64::NAN, alpha)
                .ratio(l.error, bound),
        );
    }
    rep.metric(format!("{name} rate"), c.rate());
    rep.metric(format!("{name} levels"), c.levels.len() as f64);
    rep.metric(format!("{name} drift bound ratio"), c.drift_bound_ratio());
    rep.metric(
        format!("{name} max delta"),
        c.levels.iter().map(|l| l.delta).fold(0.0, f64::max),
    );
    if let Some((a, b)) = c.final_affine() {
        rep.metric(format!("{name} limit a"), a);
        rep.metric(format!("{name} limit |b|"), b.norm());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonOutcome {
    pub sup_diff: f64,
    pub residual_norm: f64,
    pub cofactor_distance: f64,
    pub f_norm: f64,
    pub gamma: f64,
    pub side_bound: f64,
    pub side_ok: bool,
    /// `||Phi - W||_{L^q(B_{1/2})}`.
    pub inner_distance: f64,
}

impl ComparisonOutcome {
    pub fn lhs(&self) -> f64 {
        self.sup_diff + self.residual_norm
    }

    pub fn rhs(&self) -> f64 {
        self.cofactor_distance.powf(self.gamma) + self.f_norm
    }

    pub fn c_emp(&self) -> f64 {
        super::report::ratio(self.lhs(), self.rhs())
    }

    pub fn require_side_condition(&self) -> Result<()> {
        if self.side_ok {
            Ok(())
        } else {
            Err(Error::SideConditionViolated(format!(
                "||Phi - W||_q = {:e} > {:e}",
                self.cofactor_distance, self.side_bound
            )))
        }
    }
}

/// `U_alpha = {phi < (1 - alpha) min phi}` for `phi <= 0` on the boundary.
pub fn level_set(potential: &ConvexPotential, alpha: f64) -> Vec<bool> {
    let z = potential.minimizer();
    let m = potential.values()[z];
    section_at_node(potential, z, -alpha * m).mask
}

/// Spectral norm of each cofactor difference at the unknowns shared by both fields.
fn cofactor_gap(phi: &ConvexPotential, w: &ConvexPotential) -> Vec<f64> {
    let cp = phi.cofactor();
    let cw = w.cofactor();
    let mut out = vec![f64::NAN; phi.domain().grid().len()];
    for (i, m) in cp.values.iter().enumerate() {
        let k = cp.region.node(i);
        if let Some(n) = cw.at_node(k) {
            let d = m.sub(&n);
            let (lo, hi) = d.eigenvalues();
            out[k] = lo.abs().max(hi.abs());
        }
    }
    out
}

/// Comparison: `u` solves `Phi^{ij} u_ij = f` in `U`; `h` solves
/// `W^{ij} h_ij = 0` in `U_{alpha1}` with `h = u` on its boundary.
pub fn comparison_estimate(
    phi: &ConvexPotential,
    w: &ConvexPotential,
    u: &[f64],
    f: &[f64],
    alpha1: f64,
    alpha2: f64,
    q: f64,
    gamma: f64,
) -> Result<ComparisonOutcome> {
    if !(0.0 < alpha2 && alpha2 < alpha1 && alpha1 < 1.0) {
        return Err(Error::Config(format!("need 0 < alpha2 < alpha1 < 1, got {alpha2}, {alpha1}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::ExponentOutOfRange(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    if phi.domain().grid() != w.domain().grid() {
        return Err(Error::GeometryUnsupported("potentials on different grids".into()));
    }
    let h = phi.h();
    let u1 = level_set(phi, alpha1);
    let u2 = level_set(phi, alpha2);
    let trace = NodalTrace {
        values: u,
        fallback: |_: Point| f64::NAN,
    };
    let zero = vec![0.0; u.len()];
    let hsol = solve_local(w, Some(&u1), &zero, &trace)?;
    let hv = &hsol.u.values;
    let diff: Vec<f64> = u.iter().zip(hv).map(|(a, b)| a - b).collect();
    let sup_diff = crate::grid::sup_abs(&diff, &u2);

    let hess = crate::potential::discrete_hessian(&hsol.region, hv, &trace);
    let cp = phi.cofactor();
    let cw = w.cofactor();
    let mut resid = vec![f64::NAN; u.len()];
    for (i, hm) in hess.values.iter().enumerate() {
        let k = hsol.region.node(i);
        if let (Some(a), Some(b)) = (cp.at_node(k), cw.at_node(k)) {
            resid[k] = f[k] - a.sub(&b).frobenius(hm);
        }
    }
    let u2_inner: Vec<bool> = u2.iter().zip(&resid).map(|(m, r)| *m && r.is_finite()).collect();
    let residual_norm = lp_norm(&resid, &u2_inner, h, q);
    let gap = cofactor_gap(phi, w);
    let gap_mask = |m: &[bool]| -> Vec<bool> { m.iter().zip(&gap).map(|(a, g)| *a && g.is_finite()).collect() };
    let cofactor_distance = lp_norm(&gap, &gap_mask(&u1), h, q);
    let inner = ball_mask(phi, Point::zeros(), 0.5);
    let inner_distance = lp_norm(&gap, &gap_mask(&inner), h, q);
    let f_norm = lp_norm(f, phi.domain().mask(), h, q);
    let side_bound = (alpha1 - alpha2).powf(2.0 * N / (1.0 + (N - 1.0) * gamma));
    Ok(ComparisonOutcome {
        sup_diff,
        residual_norm,
        cofactor_distance,
        f_norm,
        gamma,
        side_bound,
        side_ok: cofactor_distance <= side_bound,
        inner_distance,
    })
}

pub const COMPARISON_MESH: usize = 128;

/// `det D^2 phi = 1 + theta x1` on the unit disk, zero boundary values.
pub fn theta_potential(domain: Arc<ConvexDomain>, theta: f64) -> Result<ConvexPotential> {
    let g = ScalarField::from_fn(domain.grid(), domain.mask(), |x| 1.0 + theta * x.x);
    let zero: PointFn = Arc::new(|_| 0.0);
    Ok(solve_monge_ampere(domain, &g, zero)?.with_label(format!("theta={theta}")))
}

pub fn comparison_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let gamma = ctx.exponents.gamma;
    let (alpha1, alpha2) = (0.5, 0.25);
    let mut rep = EstimateReport::new("comparison");
    rep.tolerance = ctx.tolerance;
    let mesh = ctx.finest_mesh().min(COMPARISON_MESH);
    let d = Arc::new(DomainSpec::default().build(mesh)?);
    let w = theta_potential(d.clone(), 0.0)?.with_label("w");
    let data = TrigData::random(ctx.seed, 3, 0.3, Point::zeros());
    let g = |x: Point| data.eval(x) - 1.0;
    let mut thetas = ctx.thetas.clone();
    thetas.sort_by(|a, b| b.total_cmp(a));
    let mut inner = Vec::new();
    for &theta in &thetas {
        let phi = theta_potential(d.clone(), theta)?;
        let f = ScalarField::from_fn(d.grid(), d.mask(), |x| theta * (1.0 + x.y));
        let u = solve_local(&phi, None, &f.values, &g)?;
        let o = comparison_estimate(&phi, &w, &u.u.values, &f.values, alpha1, alpha2, q, gamma)?;
        let mut t = Trial::new("comparison", format!("theta={theta}"), phi.label(), mesh)
            .exponents(q, conjugate(q, N)?, f64::NAN, f64::NAN)
            .ratio(o.lhs(), o.rhs());
        if let Err(e) = o.require_side_condition() {
            rep.note(format!("theta={theta}: {e}"));
            t.verdict = "side-condition".into();
        }
        rep.push(t);
        rep.metric(format!("cofactor distance B_1/2 theta={theta}"), o.inner_distance);
        rep.metric(format!("side bound theta={theta}"), o.side_bound);
        inner.push(o.inner_distance);
        rep.stability.push(o.c_emp());
    }
    let monotone = inner.windows(2).all(|w| w[1] < w[0]);
    rep.check(Check::at_least("cofactor distance decreasing in theta", if monotone { 1.0 } else { 0.0 }, 1.0));
    rep.stability.clear();
    Ok(rep.finish())
}
