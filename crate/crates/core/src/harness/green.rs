//! Green function checks: dense-inverse oracle, symmetry, and `L^{q'}` integrability.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lma::{green_functions, green_lq_bound, CrossScheme, LinearizedOperator};
use crate::potential::ConvexPotential;
use crate::section::{maximal_interior_height, section_at_node};
use crate::stencil::Region;

use super::context::SuiteContext;
use super::exponents::{conjugate, N};
use super::maximal::mesh_of;
use super::report::{Check, EstimateReport, Trial};

pub const ORACLE_MAX_MESH: usize = 32;
pub const ORACLE_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-9;
pub const SYMMETRY_PAIRS: usize = 20;
pub const MESH_STABILITY_TOL: f64 = 0.25;
/// Heights of the nested sections, as fractions of the maximal interior height.
pub const NESTED_FRACTIONS: [f64; 3] = [0.2, 0.4, 0.8];

#[derive(Clone, Debug, PartialEq)]
pub struct OracleComparison {
    /// Max over poles of `max |G - G_dense| / max |G_dense|`.
    pub max_relative_error: f64,
    /// Max over sampled pairs of `|G(x,y) - G(y,x)| / max(|G(x,y)|, |G(y,x)|)`.
    pub max_asymmetry: f64,
    pub unknowns: usize,
}

/// Every Green column of `potential` against the inverse of the dense matrix.
pub fn green_oracle(potential: &ConvexPotential, pairs: usize, seed: u64) -> Result<OracleComparison> {
    let op = LinearizedOperator::assemble(&potential.cofactor(), CrossScheme::Corner)?;
    let region = op.region().clone();
    let n = op.len();
    let h = region.grid().h;
    let inv = op
        .matrix()
        .to_dense()
        .try_inverse()
        .ok_or_else(|| Error::SingularOperator("dense matrix not invertible".into()))?;
    let poles: Vec<usize> = region.nodes().to_vec();
    let cols = green_functions(&op, &poles)?;
    let mut err: f64 = 0.0;
    for (j, g) in cols.iter().enumerate() {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            let exact = inv[(i, j)] / (h * h);
            scale = scale.max(exact.abs());
            diff = diff.max((g.at(region.node(i)) - exact).abs());
        }
        err = err.max(diff / scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut asym: f64 = 0.0;
    for _ in 0..pairs {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let gab = cols[a].at(region.node(b));
        let gba = cols[b].at(region.node(a));
        let s = gab.abs().max(gba.abs());
        if s > 0.0 {
            asym = asym.max((gab - gba).abs() / s);
        }
    }
    Ok(OracleComparison {
        max_relative_error: err,
        max_asymmetry: asym,
        unknowns: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrabilityRow {
    pub fraction: f64,
    pub q: f64,
    pub norm: f64,
    pub volume: f64,
    pub ratio: f64,
}

/// `||G_V(z, .)||_{q'} / |V|^{2/n - 1/q}` for `V = S(z, tau H)` with `z` the
/// minimizer and `H` its maximal interior height.
pub fn green_integrability(potential: &ConvexPotential, qs: &[f64], fractions: &[f64]) -> Result<Vec<IntegrabilityRow>> {
    let z = potential.minimizer();
    let zp = potential.domain().grid().point(z);
    let top = maximal_interior_height(potential, zp)?;
    let cof = potential.cofactor();
    let mut out = Vec::new();
    for &tau in fractions {
        let sec = section_at_node(potential, z, tau * top);
        let region = Arc::new(Region::of_subdomain(potential.domain(), &sec.mask));
        let op = LinearizedOperator::assemble_on(&cof, region, CrossScheme::Corner)?;
        let g = green_functions(&op, &[z])?.pop().unwrap();
        for &q in qs {
            let (norm, ratio) = green_lq_bound(&g, q)?;
            out.push(IntegrabilityRow {
                fraction: tau,
                q,
                norm,
                volume: g.volume(),
                ratio,
            });
        }
    }
    Ok(out)
}

pub fn green_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let mut rep = EstimateReport::new("green");
    rep.tolerance = ctx.tolerance;

    // Oracle on small grids.
    let mut oracle_err: f64 = 0.0;
    let mut asym: f64 = 0.0;
    for mesh in [16, ORACLE_MAX_MESH] {
        for p in ctx.potentials(mesh)? {
            let o = green_oracle(&p, SYMMETRY_PAIRS, ctx.seed)?;
            oracle_err = oracle_err.max(o.max_relative_error);
            asym = asym.max(o.max_asymmetry);
            rep.push(Trial::new("green", "oracle", p.label(), mesh).ratio(o.max_relative_error, 1.0));
            rep.push(Trial::new("green", "symmetry", p.label(), mesh).ratio(o.max_asymmetry, 1.0));
        }
    }
    rep.check(Check::at_most("oracle relative error", oracle_err, ORACLE_TOL));
    rep.check(Check::at_most("symmetry defect", asym, SYMMETRY_TOL));

    // Integrability across family, nested sections and meshes.
    let qs = [1.5, 2.0];
    let mut meshes = ctx.meshes.clone();
    meshes.sort_unstable();
    meshes.dedup();
    // ratios[mesh][(potential, fraction, q)]
    let mut by_mesh: Vec<Vec<(String, f64, f64, f64)>> = Vec::new();
    for &mesh in &meshes {
        let mut rows = Vec::new();
        for p in ctx.potentials(mesh)? {
            for r in green_integrability(&p, &qs, &NESTED_FRACTIONS)? {
                let qp = conjugate(r.q, N)?;
                rep.push(
                    Trial::new("green", format!("integrability tau={}", r.fraction), p.label(), mesh_of(&p))
                        .exponents(r.q, qp, f64::NAN, f64::NAN)
                        .ratio(r.norm, r.volume.powf(2.0 / N - 1.0 / r.q)),
                );
                rows.push((p.label().to_string(), r.fraction, r.q, r.ratio));
            }
        }
        by_mesh.push(rows);
    }
    for &q in &qs {
        for (mi, &mesh) in meshes.iter().enumerate() {
            let vals: Vec<f64> = by_mesh[mi].iter().filter(|r| r.2 == q).map(|r| r.3).collect();
            let s = rep.spread_check(format!("family spread q={q} mesh={mesh}"), &vals, ctx.tolerance);
            if mesh == *meshes.last().unwrap() {
                rep.metric(format!("family spread q={q}"), s);
            }
        }
    }
    if meshes.len() >= 2 {
        let (first, last) = (&by_mesh[0], &by_mesh[meshes.len() - 1]);
        let mut worst: f64 = 0.0;
        for (a, b) in first.iter().zip(last) {
            worst = worst.max(super::report::spread(&[a.3, b.3]));
        }
        rep.check(Check::at_most(
            format!("mesh stability {}..{}", meshes[0], meshes[meshes.len() - 1]),
            worst,
            MESH_STABILITY_TOL,
        ));
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::grid::Point;
    use crate::potential::AnalyticPotential;

    #[test]
    fn oracle_agrees_on_small_grid() {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, 12).unwrap());
        let p = ConvexPotential::analytic(AnalyticPotential::perturbed(0.025), d, None).unwrap();
        let o = green_oracle(&p, 20, 1).unwrap();
        assert!(o.max_relative_error < 1e-10, "{o:?}");
        assert!(o.max_asymmetry < 1e-10);
    }

    #[test]
    fn disk_ratio_is_scale_free() {
        // For phi = |x|^2/2 the sections about 0 are disks, where the ratio
        // depends only on q: ||log(R/r)/(2 pi)||_3 / (pi R^2)^{1/3}.
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, 128).unwrap());
        let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d, None).unwrap();
        let rows = green_integrability(&p, &[1.5], &[0.25, 0.5]).unwrap();
        // int_0^1 (ln 1/s)^3 s ds = 6/16
        let exact = (2.0 * std::f64::consts::PI * 6.0 / 16.0).powf(1.0 / 3.0)
            / (2.0 * std::f64::consts::PI)
            / std::f64::consts::PI.powf(1.0 / 3.0);
        for r in rows {
            assert!((r.ratio - exact).abs() < 0.05 * exact, "{r:?} vs {exact}");
        }
    }
}
