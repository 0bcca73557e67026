//! The identity `trace(Phi D^2 phi) = n det D^2 phi` and the divergence-free cofactor.

use crate::domain::ConvexDomain;
use crate::error::Result;
use crate::grid::fit_order;
use crate::grid::Point;
use crate::potential::{divergence_defect, AnalyticKind, AnalyticPotential, ConvexPotential, Sym2};
use std::sync::Arc;

use super::context::SuiteContext;
use super::maximal::mesh_of;
use super::report::{Check, EstimateReport, Trial};

pub const QUADRATIC_RESIDUAL_TOL: f64 = 1e-10;
pub const QUADRATIC_DEFECT_TOL: f64 = 1e-12;
pub const MIN_ORDER: f64 = 1.8;

/// Quadratics with dyadic coefficients: on power-of-two meshes every nodal
/// value and second difference is exact in floating point.
pub fn dyadic_quadratics() -> Vec<AnalyticPotential> {
    vec![
        AnalyticPotential::isotropic(1.0),
        AnalyticPotential::quadratic(Sym2::new(1.5, 0.25, 0.75)),
        AnalyticPotential::quadratic(Sym2::new(2.0, -0.5, 0.625)),
    ]
}

/// Smooth non-quadratic potentials for the convergence orders. The second
/// flag marks potentials whose discrete cofactor is divergence free only up
/// to truncation error; for the quartic the fourth differences are constant
/// and the defect sits at rounding level on every mesh.
pub fn smooth_potentials() -> Vec<(AnalyticPotential, bool)> {
    vec![
        (AnalyticPotential::perturbed(0.025), true),
        (
            AnalyticKind::PerturbedQuadratic { eps: 0.01, freq: 1.5 }.into(),
            true,
        ),
        (AnalyticPotential::radial_power(1.0, 0.05, 4.0), false),
    ]
}

/// Unit disk with spacing exactly `2 / mesh`.
pub fn unit_disk(mesh: usize) -> Result<Arc<ConvexDomain>> {
    Ok(Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh)?.respace(2.0 / mesh as f64)?))
}

/// Max cofactor divergence over nodes at depth `>= 3h`.
pub fn max_divergence_defect(potential: &ConvexPotential) -> f64 {
    let d = divergence_defect(&potential.cofactor());
    let deep = potential.deep_interior(3.0);
    d.values
        .iter()
        .zip(&deep)
        .filter(|(v, &m)| m && v.is_finite())
        .fold(0.0, |a, (v, _)| a.max(*v))
}

fn p_name(a: &AnalyticPotential) -> String {
    match a.kind {
        AnalyticKind::PerturbedQuadratic { freq, .. } if freq != 1.0 => format!("{}(k={freq})", a.name()),
        _ => a.name().to_string(),
    }
}

pub fn identity_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let mut rep = EstimateReport::new("ma-identity");
    rep.tolerance = ctx.tolerance;
    let mut worst_res: f64 = 0.0;
    let mut worst_div: f64 = 0.0;
    let mut worst_def: f64 = 0.0;
    for &mesh in &ctx.meshes {
        let dom = unit_disk(mesh)?;
        for a in dyadic_quadratics() {
            let p = ConvexPotential::analytic(a, dom.clone(), None)?;
            let r = p.ma_identity_residual()?;
            let d = max_divergence_defect(&p);
            worst_res = worst_res.max(r.nondivergence);
            worst_div = worst_div.max(r.divergence);
            worst_def = worst_def.max(d);
            rep.push(Trial::new("ma-identity", "residual", p.label(), mesh).ratio(r.max(), 1.0));
            rep.push(Trial::new("ma-identity", "defect", p.label(), mesh).ratio(d, 1.0));
        }
    }
    // Non-dyadic coefficients: rounding of order eps / h^3 in the defect.
    let mut nd_res: f64 = 0.0;
    let mut nd_def: f64 = 0.0;
    for &mesh in &ctx.meshes {
        let p = ConvexPotential::analytic(AnalyticPotential::quadratic(Sym2::new(1.5, 0.3, 0.8)), unit_disk(mesh)?, None)?;
        let res = p.ma_identity_residual()?;
        let r = res.nondivergence;
        let d = max_divergence_defect(&p);
        nd_res = nd_res.max(r);
        rep.metric(format!("non-dyadic divergence residual mesh={mesh}"), res.divergence);
        nd_def = nd_def.max(d);
        rep.push(Trial::new("ma-identity", "residual", p.label(), mesh).ratio(r, 1.0));
        rep.push(Trial::new("ma-identity", "defect", p.label(), mesh).ratio(d, 1.0));
    }
    rep.metric("non-dyadic quadratic defect", nd_def);
    rep.check(Check::at_most("quadratic identity residual", worst_res.max(nd_res), QUADRATIC_RESIDUAL_TOL));
    rep.check(Check::at_most("dyadic quadratic divergence residual", worst_div, QUADRATIC_RESIDUAL_TOL));
    rep.check(Check::at_most("quadratic divergence defect", worst_def, QUADRATIC_DEFECT_TOL));

    let mut meshes = ctx.meshes.clone();
    meshes.sort_unstable();
    meshes.dedup();
    for (a, truncation) in smooth_potentials() {
        let mut hs = Vec::new();
        let mut res = Vec::new();
        let mut def = Vec::new();
        let mut label = String::new();
        for &mesh in &meshes {
            let dom = unit_disk(mesh)?;
            let p = ConvexPotential::analytic(a.clone(), dom, None)?;
            let r = p.ma_identity_residual()?.divergence;
            let d = max_divergence_defect(&p);
            label = p.label().to_string();
            hs.push(p.h());
            res.push(r);
            def.push(d);
            rep.push(Trial::new("ma-identity", "residual", p.label(), mesh_of(&p)).ratio(r, 1.0));
            rep.push(Trial::new("ma-identity", "defect", p.label(), mesh_of(&p)).ratio(d, 1.0));
        }
        if hs.len() >= 2 {
            let name = p_name(&a);
            let ro = fit_order(&hs, &res);
            let dor = fit_order(&hs, &def);
            rep.metric(format!("identity order {name}"), ro);
            rep.metric(format!("defect order {name}"), dor);
            rep.note(format!("{label}: identity order {ro:.3}, defect order {dor:.3}"));
            if a == AnalyticPotential::perturbed(0.025) {
                rep.check(Check::at_least(format!("identity order {name}"), ro, MIN_ORDER));
            }
            if truncation {
                rep.check(Check::at_least(format!("defect order {name}"), dor, MIN_ORDER));
            } else {
                rep.check(Check::at_most(format!("defect {name}"), def.iter().copied().fold(0.0, f64::max), 1e-8));
            }
        }
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_quadratics_are_exact() {
        let ctx = SuiteContext {
            meshes: vec![32, 64],
            ..SuiteContext::default()
        };
        let rep = identity_report(&ctx).unwrap();
        assert!(rep.check_named("quadratic identity residual").unwrap().pass);
        assert!(rep.check_named("quadratic divergence defect").unwrap().pass);
    }
}
