//! Section maximal function `M f(x) = sup_t avg_{S(x,t)} |f|` and strong-type ratios.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::FieldSpec;
use crate::grid::{lp_norm, ScalarField};
use crate::potential::ConvexPotential;
use crate::section::SectionProfile;

use super::context::SuiteContext;
use super::report::{spread, Check, EstimateReport, Trial};

#[derive(Clone, Debug)]
pub struct MaximalField {
    pub values: ScalarField,
    /// Smallest ladder height `4 h^2`; heights double until the section is the whole domain.
    pub t0: f64,
    pub levels: usize,
}

/// Averages are `|f(x)| + mean(|f| - |f(x)|)`, so constants are reproduced exactly.
pub fn maximal_function(potential: &ConvexPotential, f: &[f64]) -> MaximalField {
    maximal_functions(potential, &[f]).pop().expect("one field")
}

/// Maximal functions of several fields sharing one section profile per node.
pub fn maximal_functions(potential: &ConvexPotential, fs: &[&[f64]]) -> Vec<MaximalField> {
    let grid = potential.domain().grid();
    let mask = potential.domain().mask();
    let h = grid.h;
    let t0 = 4.0 * h * h;
    let nodes: Vec<usize> = (0..grid.len()).filter(|&k| mask[k]).collect();
    let res: Vec<(usize, Vec<f64>, usize)> = nodes
        .par_iter()
        .map(|&k| {
            let prof = SectionProfile::at_node(potential, k, f64::INFINITY);
            let top = prof.max_excess();
            let mut counts = Vec::new();
            let mut t = t0;
            loop {
                counts.push(prof.count_below(t));
                if t > top {
                    break;
                }
                t *= 2.0;
            }
            let best = fs
                .iter()
                .map(|f| {
                    let m0 = f[k].abs();
                    let mut best = m0;
                    let mut acc = 0.0;
                    let mut done = 0;
                    for &c in &counts {
                        while done < c {
                            acc += f[prof.nodes[done]].abs() - m0;
                            done += 1;
                        }
                        if c > 0 {
                            best = best.max(m0 + acc / c as f64);
                        }
                    }
                    best
                })
                .collect();
            (k, best, counts.len())
        })
        .collect();
    let mut out: Vec<MaximalField> = fs
        .iter()
        .map(|_| MaximalField {
            values: ScalarField::nan(grid),
            t0,
            levels: 0,
        })
        .collect();
    for (k, vals, l) in res {
        for (m, v) in out.iter_mut().zip(vals) {
            m.values.values[k] = v;
            m.levels = m.levels.max(l);
        }
    }
    out
}

/// `max_f ||M f||_p / ||f||_p` over a family of nodal fields.
pub fn strong_type_report(potential: &ConvexPotential, family: &[(String, Vec<f64>)], p: f64) -> Result<EstimateReport> {
    if p <= 1.0 {
        return Err(Error::ExponentOutOfRange(format!("strong type needs p > 1, got {p}")));
    }
    let mask = potential.domain().mask();
    let h = potential.h();
    let mesh = mesh_of(potential);
    let mut rep = EstimateReport::new("strong-type");
    let fields: Vec<&[f64]> = family.iter().map(|(_, f)| f.as_slice()).collect();
    let ms = maximal_functions(potential, &fields);
    for ((name, f), m) in family.iter().zip(&ms) {
        let lhs = lp_norm(&m.values.values, mask, h, p);
        let rhs = lp_norm(f, mask, h, p);
        rep.push(
            Trial::new("strong-type", name.clone(), potential.label(), mesh)
                .exponents(f64::NAN, f64::NAN, p, f64::NAN)
                .ratio(lhs, rhs),
        );
    }
    let c = rep.clone().finish().c_emp();
    rep.check(Check::at_most("c_emp finite", if c.is_finite() { 0.0 } else { 1.0 }, 0.0));
    Ok(rep.finish())
}

/// Exponents always covered by the strong-type suite.
pub const STRONG_TYPE_PS: [f64; 3] = [1.5, 2.0, 4.0];
pub const STRONG_TYPE_SAMPLES: usize = 10;
/// Every section profile is a full sort of the grid, so meshes are capped here.
pub const STRONG_TYPE_MAX_MESH: usize = 128;
const CONSTANT_PROBE: f64 = 1.7;

/// Seeded random fields: trigonometric polynomials with offsets, so `|f|`
/// varies over the domain without vanishing identically.
pub fn strong_type_family(seed: u64, count: usize) -> Vec<FieldSpec> {
    (0..count as u64)
        .map(|i| FieldSpec::fourier(seed.wrapping_mul(1000).wrapping_add(i), 4, 0.5, 0.25 * (i % 4) as f64))
        .collect()
}

/// `||M f||_p / ||f||_p` for `STRONG_TYPE_SAMPLES` random `f` per potential and
/// per `p`, with the family spread of the constants per `(p, mesh)` gated.
pub fn strong_type_suite(ctx: &SuiteContext) -> Result<EstimateReport> {
    let mut ps: Vec<f64> = STRONG_TYPE_PS.to_vec();
    for &p in &ctx.exponents.p {
        if !ps.iter().any(|q| (q - p).abs() < 1e-12) {
            ps.push(p);
        }
    }
    if let Some(p) = ps.iter().find(|p| **p <= 1.0) {
        return Err(Error::ExponentOutOfRange(format!("strong type needs p > 1, got {p}")));
    }
    let mut meshes: Vec<usize> = ctx.meshes.iter().map(|&m| m.min(STRONG_TYPE_MAX_MESH)).collect();
    meshes.sort_unstable();
    meshes.dedup();
    let family = strong_type_family(ctx.seed, STRONG_TYPE_SAMPLES);
    let mut rep = EstimateReport::new("strong-type");
    rep.tolerance = ctx.tolerance;
    let mut worst_const: f64 = 0.0;
    for &mesh in &meshes {
        let pots = ctx.potentials(mesh)?;
        // constants[p][potential]
        let mut constants = vec![Vec::new(); ps.len()];
        for pot in &pots {
            let d = pot.domain();
            let mask = d.mask();
            let h = pot.h();
            let mut fields: Vec<Vec<f64>> = family.iter().map(|f| f.sample(d.grid(), mask).values).collect();
            fields.push(vec![CONSTANT_PROBE; d.grid().len()]);
            let refs: Vec<&[f64]> = fields.iter().map(|f| f.as_slice()).collect();
            let ms = maximal_functions(pot, &refs);
            let (konst, random) = ms.split_last().expect("constant probe");
            for k in 0..mask.len() {
                if mask[k] {
                    worst_const = worst_const.max((konst.values.values[k] - CONSTANT_PROBE).abs());
                }
            }
            for (pi, &p) in ps.iter().enumerate() {
                let mut c: f64 = 0.0;
                for ((spec, f), m) in family.iter().zip(&fields).zip(random) {
                    let lhs = lp_norm(&m.values.values, mask, h, p);
                    let rhs = lp_norm(f, mask, h, p);
                    c = c.max(lhs / rhs);
                    rep.push(
                        Trial::new("strong-type", format!("p={p} f={spec}"), pot.label(), mesh)
                            .exponents(f64::NAN, f64::NAN, p, f64::NAN)
                            .ratio(lhs, rhs),
                    );
                }
                constants[pi].push(c);
            }
        }
        for (pi, &p) in ps.iter().enumerate() {
            rep.spread_check(format!("family spread p={p} mesh={mesh}"), &constants[pi], rep.tolerance);
            rep.metric(format!("C_emp p={p} mesh={mesh}"), constants[pi].iter().copied().fold(0.0, f64::max));
        }
    }
    // Per potential and p, constants should not drift with the mesh.
    for &p in &ps {
        let per_mesh: Vec<f64> = meshes
            .iter()
            .filter_map(|m| rep.metrics.get(&format!("C_emp p={p} mesh={m}")).copied())
            .collect();
        rep.metric(format!("mesh spread p={p}"), spread(&per_mesh));
    }
    rep.check(Check::at_most("M(c) - c", worst_const, 1e-12));
    Ok(rep.finish())
}

/// Cells across the longer side of the bounding box.
pub fn mesh_of(potential: &ConvexPotential) -> usize {
    let (lo, hi) = potential.domain().bbox();
    let d = hi - lo;
    (d.x.max(d.y) / potential.h()).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::grid::Point;
    use crate::potential::AnalyticPotential;
    use std::sync::Arc;

    fn iso(mesh: usize) -> ConvexPotential {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh).unwrap());
        ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d, None).unwrap()
    }

    #[test]
    fn constants_are_fixed_points() {
        let p = iso(24);
        let g = p.domain().grid();
        for c in [0.1, -0.7, 3.0] {
            let f = vec![c; g.len()];
            let m = maximal_function(&p, &f);
            for k in 0..g.len() {
                if p.domain().mask()[k] {
                    assert_eq!(m.values.values[k], f64::abs(c));
                }
            }
        }
    }

    #[test]
    fn dominates_every_ladder_average() {
        let p = iso(24);
        let g = p.domain().grid();
        let f: Vec<f64> = (0..g.len()).map(|k| (3.0 * g.point(k).x).sin()).collect();
        let m = maximal_function(&p, &f);
        let k = g.nearest(Point::new(0.25, 0.0)).unwrap();
        let prof = SectionProfile::at_node(&p, k, f64::INFINITY);
        let mut t = m.t0;
        for _ in 0..m.levels {
            let c = prof.count_below(t);
            let avg = prof.nodes[..c].iter().map(|&q| f[q].abs()).sum::<f64>() / c as f64;
            assert!(m.values.values[k] >= avg - 1e-14);
            t *= 2.0;
        }
        assert!(m.values.values[k] >= f[k].abs());
    }

    #[test]
    fn indicator_decay_against_euclidean_maximal() {
        // Sections of |x|^2/2 are balls; for the indicator of B_r the Euclidean
        // centred maximal function at |x| = d > r is at least (r / (d + r))^2.
        let p = iso(128);
        let g = p.domain().grid();
        let r = 0.1;
        let f: Vec<f64> = (0..g.len()).map(|k| if g.point(k).norm() < r { 1.0 } else { 0.0 }).collect();
        let m = maximal_function(&p, &f);
        for d in [0.3, 0.5] {
            let k = g.nearest(Point::new(d, 0.0)).unwrap();
            let oracle = (r / (d + r)).powi(2);
            let v = m.values.values[k];
            assert!(v >= 0.5 * oracle && v <= 2.0 * oracle, "d {d}: {v} vs {oracle}");
        }
    }

    #[test]
    fn strong_type_of_constant_is_one() {
        let p = iso(16);
        let n = p.domain().grid().len();
        let rep = strong_type_report(&p, &[("one".into(), vec![1.0; n])], 2.0).unwrap();
        assert!((rep.c_emp() - 1.0).abs() < 1e-14);
        assert!(strong_type_report(&p, &[], 1.0).is_err());
    }
}
