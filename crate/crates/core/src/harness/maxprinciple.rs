//! Maximum principles, the Harnack inequality and oscillation decay.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{count, fit_slope, lp_norm, Point, ScalarField};
use crate::lma::{CrossScheme, LinearizedOperator};
use crate::potential::ConvexPotential;
use crate::section::{maximal_interior_height, section_at_node, section_from_support, Support};
use crate::stencil::BoundaryData;

use super::common::{and_mask, ball_mask, boundary_point, extremes, solve_local, TrigData};
use super::context::SuiteContext;
use super::exponents::{ball_exponent, conjugate, volume_exponent, N};
use super::maximal::mesh_of;
use super::report::{Check, EstimateReport, Trial};

#[derive(Clone, Debug, PartialEq)]
pub enum MaxPrincipleKind {
    /// `sup_{V ∩ Omega_alpha} u` against `sup_{∂V} u^+`.
    Interior { alpha: f64, v: Vec<bool> },
    /// `V = S(x0, t)` at a boundary point `x0`.
    BoundarySection { x0: Point, t: f64 },
    Global,
    /// `V = Omega ∩ B_delta(x0)`, exponent `(3/4)(2/n - 1/q)`.
    Ball { x0: Point, delta: f64 },
}

impl MaxPrincipleKind {
    pub fn name(&self) -> &'static str {
        match self {
            MaxPrincipleKind::Interior { .. } => "interior",
            MaxPrincipleKind::BoundarySection { .. } => "boundarySection",
            MaxPrincipleKind::Global => "global",
            MaxPrincipleKind::Ball { .. } => "ball",
        }
    }

    pub fn exponent(&self, q: f64) -> f64 {
        match self {
            MaxPrincipleKind::Ball { .. } => ball_exponent(q, N),
            _ => volume_exponent(q, N),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPrincipleOutcome {
    pub sup_u: f64,
    pub sup_boundary: f64,
    pub volume: f64,
    pub f_norm: f64,
    pub exponent: f64,
    pub c_emp: f64,
}

impl MaxPrincipleOutcome {
    pub fn rhs(&self) -> f64 {
        self.volume.powf(self.exponent) * self.f_norm
    }
}

/// `Omega_alpha = S(zbar, alpha (sup_∂ phi - min phi))`; for zero boundary
/// values this is `{phi < (1 - alpha) min phi}`.
pub fn omega_alpha(potential: &ConvexPotential, alpha: f64) -> Vec<bool> {
    let z = potential.minimizer();
    let top = potential
        .domain()
        .boundary_samples(0.25 * potential.h())
        .into_iter()
        .map(|x| (potential.trace())(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let depth = top - potential.values()[z];
    let s = Support::at_node(potential, z);
    section_from_support(potential, &s, alpha * depth).mask
}

/// Region `V` and evaluation set of a kind.
fn kind_sets(potential: &ConvexPotential, kind: &MaxPrincipleKind) -> Result<(Vec<bool>, Vec<bool>)> {
    let mask = potential.domain().mask().to_vec();
    Ok(match kind {
        MaxPrincipleKind::Global => (mask.clone(), mask),
        MaxPrincipleKind::Interior { alpha, v } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1)")));
            }
            let e = and_mask(v, &omega_alpha(potential, *alpha));
            (v.clone(), e)
        }
        MaxPrincipleKind::BoundarySection { x0, t } => {
            let s = Support::at(potential, *x0)?;
            let m = section_from_support(potential, &s, *t).mask;
            (m.clone(), m)
        }
        MaxPrincipleKind::Ball { x0, delta } => {
            let m = ball_mask(potential, *x0, *delta);
            (m.clone(), m)
        }
    })
}

/// Checks a supplied `u` on `V` (subsolution test, then the constant).
pub fn verify_max_principle_with(
    potential: &ConvexPotential,
    kind: &MaxPrincipleKind,
    u: &ScalarField,
    f: &[f64],
    g: &dyn BoundaryData,
    q: f64,
    tolerance: f64,
) -> Result<MaxPrincipleOutcome> {
    let (v, e) = kind_sets(potential, kind)?;
    let cof = potential.cofactor();
    let region = std::sync::Arc::new(crate::stencil::Region::of_subdomain(potential.domain(), &v));
    let op = LinearizedOperator::assemble_on(&cof, region.clone(), CrossScheme::Corner)?;
    let x: Vec<f64> = region.nodes().iter().map(|&k| u.values[k]).collect();
    let au = op.matrix().matvec(&x);
    let b = op.boundary_terms(g);
    // Phi^{ij} u_ij = -(A u - b); a subsolution has Phi^{ij} u_ij >= f.
    let mut worst: f64 = 0.0;
    for i in 0..region.len() {
        let lu = -(au[i] - b[i]);
        worst = worst.max(f[region.node(i)] - lu);
    }
    if worst > tolerance {
        return Err(Error::NotSubsolution(worst));
    }
    let h = potential.h();
    let (_, sup_u) = extremes(&u.values, &e);
    let sup_b = super::common::boundary_sup(&region, g).max(0.0);
    let volume = count(&v) as f64 * h * h;
    let f_norm = lp_norm(f, &v, h, q);
    let exponent = kind.exponent(q);
    let num = sup_u - sup_b;
    let den = volume.powf(exponent) * f_norm;
    let c_emp = if num <= 0.0 { 0.0 } else { num / den };
    Ok(MaxPrincipleOutcome {
        sup_u,
        sup_boundary: sup_b,
        volume,
        f_norm,
        exponent,
        c_emp,
    })
}

/// Solves `Phi^{ij} u_ij = f` on `V` with `u = g` on `∂V`, then checks the bound.
pub fn verify_max_principle(
    potential: &ConvexPotential,
    kind: &MaxPrincipleKind,
    f: &[f64],
    g: &dyn BoundaryData,
    q: f64,
) -> Result<MaxPrincipleOutcome> {
    let (v, _) = kind_sets(potential, kind)?;
    let sol = solve_local(potential, Some(&v), f, g)?;
    let scale = f.iter().zip(&v).filter(|(_, &m)| m).fold(1.0f64, |a, (x, _)| a.max(x.abs()));
    verify_max_principle_with(potential, kind, &sol.u, f, g, q, 1e-8 * scale)
}

/// The four kinds used by the suite for one potential.
pub fn standard_kinds(potential: &ConvexPotential) -> Result<Vec<MaxPrincipleKind>> {
    let z = potential.minimizer();
    let zp = potential.domain().grid().point(z);
    let x0 = boundary_point(potential, PI);
    let s = Support::at(potential, x0)?;
    let far = potential
        .domain()
        .boundary_samples(0.25 * potential.h())
        .into_iter()
        .map(|y| (potential.trace())(y) - s.eval(y))
        .fold(0.0, f64::max);
    let _ = zp;
    Ok(vec![
        MaxPrincipleKind::Global,
        MaxPrincipleKind::Interior {
            alpha: 0.5,
            v: potential.domain().mask().to_vec(),
        },
        MaxPrincipleKind::BoundarySection { x0, t: 0.25 * far },
        MaxPrincipleKind::Ball { x0, delta: 0.5 },
    ])
}

pub fn max_principle_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let qp = conjugate(q, N)?;
    let mut rep = EstimateReport::new("max-principle");
    rep.tolerance = ctx.tolerance;
    let zero = |_: Point| 0.0;
    let mut by_kind: std::collections::BTreeMap<&'static str, Vec<f64>> = Default::default();
    let mut negative = 0usize;
    for &mesh in &ctx.meshes {
        for p in ctx.potentials(mesh)? {
            let f = ctx.rhs_or(&crate::functions::FieldSpec::Const(-1.0), &p);
            for kind in standard_kinds(&p)? {
                let o = verify_max_principle(&p, &kind, &f.values, &zero, q)?;
                if o.c_emp < 0.0 {
                    negative += 1;
                }
                by_kind.entry(kind.name()).or_default().push(o.c_emp);
                rep.push(
                    Trial::new("max-principle", kind.name(), p.label(), mesh_of(&p))
                        .exponents(q, qp, f64::NAN, f64::NAN)
                        .ratio((o.sup_u - o.sup_boundary).max(0.0), o.rhs()),
                );
            }
        }
        // Exact Poisson case on the unit disk.
        let d = std::sync::Arc::new(super::context::DomainSpec::default().build(mesh)?);
        let p = ConvexPotential::analytic(crate::potential::AnalyticPotential::isotropic(1.0), d, None)?;
        let f = vec![-1.0; p.domain().grid().len()];
        let o = verify_max_principle(&p, &MaxPrincipleKind::Global, &f, &zero, q)?;
        let h = p.h();
        rep.check(Check::at_most(format!("poisson sup error mesh={mesh}"), (o.sup_u - 0.25).abs(), h * h));
        rep.push(
            Trial::new("max-principle", "poisson", p.label(), mesh)
                .exponents(q, qp, f64::NAN, f64::NAN)
                .ratio(o.sup_u, o.rhs()),
        );
        rep.metric(format!("poisson c_emp mesh={mesh}"), o.c_emp);
    }
    rep.metric("poisson c_emp exact", 1.0 / (4.0 * PI));
    rep.check(Check::at_most("negative constants", negative as f64, 0.0));
    for (k, v) in &by_kind {
        rep.spread_check(format!("spread {k}"), v, ctx.tolerance);
    }
    Ok(rep.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarnackOutcome {
    pub sup_half: f64,
    pub inf_half: f64,
    pub volume: f64,
    pub f_norm: f64,
    pub c_emp: f64,
}

/// `sup_{S(x,t/2)} u / (inf_{S(x,t/2)} u + |S(x,t)|^{2/n-1/q} ||f||_{L^q(S(x,t))})`.
pub fn verify_harnack(potential: &ConvexPotential, u: &[f64], f: &[f64], x: usize, t: f64, q: f64) -> Result<HarnackOutcome> {
    let full = section_at_node(potential, x, t);
    let half = section_at_node(potential, x, 0.5 * t);
    let (lo_full, _) = extremes(u, &full.mask);
    if lo_full < -1e-12 {
        return Err(Error::NegativeSolution(lo_full));
    }
    let (lo, hi) = extremes(u, &half.mask);
    let h = potential.h();
    let volume = full.count as f64 * h * h;
    let f_norm = lp_norm(f, &full.mask, h, q);
    let den = lo + volume.powf(volume_exponent(q, N)) * f_norm;
    Ok(HarnackOutcome {
        sup_half: hi,
        inf_half: lo,
        volume,
        f_norm,
        c_emp: super::report::ratio(hi, den),
    })
}

pub const HARNACK_DATA: usize = 5;
pub const HARNACK_MODES: usize = 4;
pub const HARNACK_AMP: f64 = 0.1;

pub fn harnack_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let mut rep = EstimateReport::new("harnack");
    rep.tolerance = ctx.tolerance;
    let mesh = ctx.coarsest_mesh().max(64);
    let mut all = Vec::new();
    for &m in ctx.meshes.iter().filter(|&&m| m >= mesh) {
        let mut consts = Vec::new();
        for p in ctx.potentials(m)? {
            let z = p.minimizer();
            let t = 0.5 * maximal_interior_height(&p, p.domain().grid().point(z))?;
            let f = vec![0.0; p.domain().grid().len()];
            for j in 0..HARNACK_DATA {
                let data = TrigData::random(ctx.seed.wrapping_add(j as u64), HARNACK_MODES, HARNACK_AMP, p.domain().incenter());
                let g = |x: Point| data.eval(x);
                let sol = solve_local(&p, None, &f, &g)?;
                let o = verify_harnack(&p, &sol.u.values, &f, z, t, q)?;
                consts.push(o.c_emp);
                rep.push(Trial::new("harnack", format!("data{j}"), p.label(), m).ratio(o.sup_half, o.inf_half));
            }
        }
        rep.spread_check(format!("spread mesh={m}"), &consts, ctx.tolerance);
        all.extend(consts);
    }
    rep.stability = all;
    Ok(rep.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillationFit {
    pub heights: Vec<f64>,
    pub osc: Vec<f64>,
    pub alpha_emp: f64,
    pub c_emp: f64,
    pub degenerate: bool,
}

/// Fits `osc_{S(x, rho)} u ~ rho^alpha` over `rhos` (all `<= top`).
pub fn oscillation_decay(
    potential: &ConvexPotential,
    u: &[f64],
    f: &[f64],
    x: usize,
    top: f64,
    rhos: &[f64],
    q: f64,
) -> Result<OscillationFit> {
    let h = potential.h();
    let mut hs = Vec::new();
    let mut osc = Vec::new();
    for &r in rhos.iter().filter(|&&r| r <= top) {
        let s = section_at_node(potential, x, r);
        if s.count < 16 {
            continue;
        }
        let (lo, hi) = extremes(u, &s.mask);
        hs.push(r);
        osc.push(hi - lo);
    }
    if hs.len() < 3 {
        return Err(Error::InsufficientLadder { usable: hs.len(), needed: 3 });
    }
    let top_sec = section_at_node(potential, x, top);
    let (lo, hi) = extremes(u, &top_sec.mask);
    let base = (hi - lo) + top.powf(1.0 - N / (2.0 * q)) * lp_norm(f, &top_sec.mask, h, q);
    let scale = osc.iter().copied().fold(0.0, f64::max);
    if scale <= 1e-14 * base.max(1.0) {
        return Ok(OscillationFit {
            heights: hs,
            osc,
            alpha_emp: f64::NAN,
            c_emp: 0.0,
            degenerate: true,
        });
    }
    let lx: Vec<f64> = hs.iter().map(|r| (r / top).ln()).collect();
    let ly: Vec<f64> = osc.iter().map(|o| o.max(1e-300).ln()).collect();
    let alpha = fit_slope(&lx, &ly);
    let c = hs
        .iter()
        .zip(&osc)
        .map(|(r, o)| o / ((r / top).powf(alpha) * base))
        .fold(0.0, f64::max);
    Ok(OscillationFit {
        heights: hs,
        osc,
        alpha_emp: alpha,
        c_emp: c,
        degenerate: false,
    })
}

pub fn oscillation_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let q = ctx.exponents.q;
    let mut rep = EstimateReport::new("oscillation");
    rep.tolerance = ctx.tolerance;
    let s = ctx.singular.first().copied().unwrap_or(0.5 * 2.0 / q);
    for &mesh in &ctx.meshes {
        for p in ctx.potentials(mesh)? {
            let z = p.minimizer();
            let zp = p.domain().grid().point(z);
            let f = ctx.rhs_or(&crate::functions::FieldSpec::singular(s, zp), &p);
            let data = TrigData::random(ctx.seed, 3, 0.2, p.domain().incenter());
            let g = |x: Point| data.eval(x);
            let sol = solve_local(&p, None, &f.values, &g)?;
            let top = 0.5 * maximal_interior_height(&p, zp)?;
            let ladder: Vec<f64> = (0..12).map(|k| top * 0.5f64.powi(k)).collect();
            let fit = oscillation_decay(&p, &sol.u.values, &f.values, z, top, &ladder, q)?;
            rep.push(
                Trial::new("oscillation", "singular", p.label(), mesh_of(&p))
                    .exponents(q, conjugate(q, N)?, f64::NAN, fit.alpha_emp)
                    .ratio(fit.c_emp, 1.0),
            );
            rep.check(Check::at_least(format!("alpha_emp {} mesh={mesh}", p.label()), fit.alpha_emp, 0.0));
            rep.stability.push(fit.c_emp);
        }
    }
    Ok(rep.finish())
}
