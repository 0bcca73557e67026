//! Solves and small helpers shared by the suites.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField};
use nalgebra::{Matrix3, Vector3};
use crate::lma::{CrossScheme, LinearizedOperator};
use crate::potential::ConvexPotential;
use crate::stencil::{Arm, BoundaryData, Region};

/// Solution of `Phi^{ij} u_ij = f` on the unknowns of `mask` (whole domain
/// when `None`), with `u = g` on the rest of the domain.
#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub u: ScalarField,
    pub region: Arc<Region>,
}

impl LocalSolution {
    pub fn unknown_mask(&self) -> Vec<bool> {
        self.region.unknown_mask()
    }

    /// Largest boundary datum seen by the stencil.
    pub fn boundary_sup(&self, g: &dyn BoundaryData) -> f64 {
        boundary_sup(&self.region, g)
    }
}

pub fn solve_local(
    potential: &ConvexPotential,
    mask: Option<&[bool]>,
    f: &[f64],
    g: &dyn BoundaryData,
) -> Result<LocalSolution> {
    let cof = potential.cofactor();
    let region = match mask {
        Some(m) => Arc::new(Region::of_subdomain(potential.domain(), m)),
        None => cof.region.clone(),
    };
    if region.is_empty() {
        return Err(Error::SectionTooSmall("no unknowns in the subdomain".into()));
    }
    let op = LinearizedOperator::assemble_on(&cof, region.clone(), CrossScheme::Corner)?;
    let u = op.solve(&|k| f[k], g)?;
    Ok(LocalSolution { u, region })
}

/// Max of the boundary data over the stencil's boundary points.
pub fn boundary_sup(region: &Region, g: &dyn BoundaryData) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for i in 0..region.len() {
        for a in region.arms(i) {
            if let Arm::Boundary { point, node, .. } = *a {
                m = m.max(g.value(point, node));
            }
        }
    }
    m
}

/// `1 + sum_{k=1..modes} (a_k cos k theta + b_k sin k theta)` about `center`,
/// coefficients uniform in `[-amp, amp]`; positive whenever `2 modes amp < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigData {
    pub center: Point,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigData {
    pub fn random(seed: u64, modes: usize, amp: f64, center: Point) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..modes).map(|_| rng.random_range(-amp..=amp)).collect();
        let b = (0..modes).map(|_| rng.random_range(-amp..=amp)).collect();
        TrigData { center, a, b }
    }

    pub fn eval(&self, x: Point) -> f64 {
        let d = x - self.center;
        let t = d.y.atan2(d.x);
        let mut v = 1.0;
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let kt = (k + 1) as f64 * t;
            v += a * kt.cos() + b * kt.sin();
        }
        v
    }

    /// Lower bound `1 - sum |a_k| - sum |b_k|`.
    pub fn lower_bound(&self) -> f64 {
        1.0 - self.a.iter().chain(&self.b).map(|c| c.abs()).sum::<f64>()
    }
}

/// Masked max and min of a field.
pub fn extremes(values: &[f64], mask: &[bool]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, &m) in values.iter().zip(mask) {
        if m && v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    (lo, hi)
}

pub fn and_mask(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

/// Nodes of the domain inside the closed disk `B(center, r)`.
pub fn ball_mask(potential: &ConvexPotential, center: Point, r: f64) -> Vec<bool> {
    let grid = potential.domain().grid();
    let mask = potential.domain().mask();
    (0..grid.len())
        .map(|k| mask[k] && (grid.point(k) - center).norm() <= r)
        .collect()
}

/// Point of the boundary of the domain in direction `angle` from its incentre.
pub fn boundary_point(potential: &ConvexPotential, angle: f64) -> Point {
    let d = potential.domain();
    let c = d.incenter();
    let dir = Point::new(angle.cos(), angle.sin());
    c + dir * d.exit_parameter(c, dir)
}

pub const TWO_PI: f64 = 2.0 * PI;

/// Least-squares affine fit `a + b.(x - center)` over the masked nodes.
pub fn fit_affine(grid: &Grid, mask: &[bool], values: &[f64], center: Point) -> Option<(f64, Point)> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let mut n = 0;
    for k in 0..grid.len() {
        if !mask[k] || !values[k].is_finite() {
            continue;
        }
        let d = (grid.point(k) - center) / grid.h;
        let row = Vector3::new(1.0, d.x, d.y);
        ata += row * row.transpose();
        atb += row * values[k];
        n += 1;
    }
    if n < 3 {
        return None;
    }
    let c = ata.try_inverse()? * atb;
    Some((c[0], Point::new(c[1], c[2]) / grid.h))
}

/// `max |v - (a + b.(x - center))|` over the masked nodes.
pub fn affine_deviation(grid: &Grid, mask: &[bool], values: &[f64], center: Point, a: f64, b: Point) -> f64 {
    (0..grid.len())
        .filter(|&k| mask[k] && values[k].is_finite())
        .map(|k| (values[k] - a - b.dot(&(grid.point(k) - center))).abs())
        .fold(0.0, f64::max)
}
