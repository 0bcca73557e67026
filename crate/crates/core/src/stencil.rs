//! Cut-cell stencil topology: unknown nodes and their eight arms.
//!
//! Every unknown node looks along the two axes and the two diagonals. An arm
//! ends either at another unknown node or at a boundary point (the polygon
//! crossing, or a node outside the sub-region) at fractional distance `frac`
//! of the full step. Second differences use the nonuniform three-point
//! formula, which is exact for quadratics on every arm configuration.

use crate::domain::ConvexDomain;
use crate::grid::{Grid, Point};

/// Unit steps: pairs `(2k, 2k+1)` are the plus/minus arms of direction `k`
/// (x, y, diagonal (1,1), diagonal (1,-1)).
pub const DIRS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];

/// Nodes closer than `NEAR_BOUNDARY * h` to the boundary are treated as boundary.
pub const NEAR_BOUNDARY: f64 = 1e-3;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arm {
    Node(usize),
    Boundary { frac: f64, point: Point, node: Option<usize> },
}

impl Arm {
    pub fn frac(&self) -> f64 {
        match self {
            Arm::Node(_) => 1.0,
            Arm::Boundary { frac, .. } => *frac,
        }
    }
}

/// Dirichlet data evaluated at a boundary point; `node` is set when the
/// point is itself a grid node (sub-region boundaries).
pub trait BoundaryData: Sync {
    fn value(&self, point: Point, node: Option<usize>) -> f64;
}

impl<F: Fn(Point) -> f64 + Sync> BoundaryData for F {
    fn value(&self, point: Point, _node: Option<usize>) -> f64 {
        self(point)
    }
}

/// Uses nodal values where available, falling back to a closure at polygon crossings.
pub struct NodalTrace<'a, F> {
    pub values: &'a [f64],
    pub fallback: F,
}

impl<F: Fn(Point) -> f64 + Sync> BoundaryData for NodalTrace<'_, F> {
    fn value(&self, point: Point, node: Option<usize>) -> f64 {
        match node {
            Some(k) if self.values[k].is_finite() => self.values[k],
            _ => (self.fallback)(point),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Region {
    grid: Grid,
    nodes: Vec<usize>,
    index: Vec<usize>,
    arms: Vec<[Arm; 8]>,
    domain_mask: Vec<bool>,
}

impl Region {
    /// Unknowns at every interior node of the domain.
    pub fn of_domain(domain: &ConvexDomain) -> Region {
        Self::build(domain, None)
    }

    /// Unknowns restricted to `sub` (a node mask); nodes outside `sub` become boundary nodes.
    pub fn of_subdomain(domain: &ConvexDomain, sub: &[bool]) -> Region {
        Self::build(domain, Some(sub))
    }

    fn build(domain: &ConvexDomain, sub: Option<&[bool]>) -> Region {
        let grid = domain.grid().clone();
        let h = grid.h;
        let mut index = vec![NONE; grid.len()];
        let mut nodes = Vec::new();
        for k in 0..grid.len() {
            let inside = domain.mask()[k]
                && sub.is_none_or(|s| s[k])
                && domain.depth(grid.point(k)) >= NEAR_BOUNDARY * h;
            if inside {
                index[k] = nodes.len();
                nodes.push(k);
            }
        }
        let arms = nodes
            .iter()
            .map(|&k| {
                let p = grid.point(k);
                let mut a = [Arm::Node(0); 8];
                for (d, &(di, dj)) in DIRS.iter().enumerate() {
                    let step = Point::new(di as f64, dj as f64) * h;
                    let t = domain.exit_parameter(p, step);
                    let q = grid.offset(k, di, dj).expect("grid margin");
                    a[d] = if t < 1.0 - 1e-12 {
                        Arm::Boundary { frac: t, point: p + step * t, node: None }
                    } else if index[q] != NONE {
                        Arm::Node(index[q])
                    } else if sub.is_some() && domain.mask()[q] && domain.depth(grid.point(q)) >= NEAR_BOUNDARY * h {
                        Arm::Boundary { frac: 1.0, point: grid.point(q), node: Some(q) }
                    } else {
                        Arm::Boundary { frac: t, point: p + step * t, node: None }
                    };
                }
                a
            })
            .collect();
        Region {
            grid,
            nodes,
            index,
            arms,
            domain_mask: domain.mask().to_vec(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Grid node of unknown `i`.
    pub fn node(&self, i: usize) -> usize {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        let i = self.index[node];
        (i != NONE).then_some(i)
    }

    pub fn arms(&self, i: usize) -> &[Arm; 8] {
        &self.arms[i]
    }

    pub fn domain_mask(&self) -> &[bool] {
        &self.domain_mask
    }

    /// Mask of unknown nodes.
    pub fn unknown_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.grid.len()];
        for &k in &self.nodes {
            m[k] = true;
        }
        m
    }

    /// True when all eight arms of unknown `i` end at unknown nodes.
    pub fn is_full(&self, i: usize) -> bool {
        self.arms[i].iter().all(|a| matches!(a, Arm::Node(_)))
    }

    /// Step length of direction `k` (0..4).
    pub fn step(&self, k: usize) -> f64 {
        if k < 2 {
            self.grid.h
        } else {
            self.grid.h * std::f64::consts::SQRT_2
        }
    }

    #[inline]
    pub fn arm_value(&self, arm: &Arm, values: &[f64], bd: &dyn BoundaryData) -> f64 {
        match *arm {
            Arm::Node(j) => values[self.nodes[j]],
            Arm::Boundary { point, node, .. } => bd.value(point, node),
        }
    }

    /// Weights `(c_plus, c_minus, c_center)` of the second difference along direction `k`.
    pub fn second_difference_weights(&self, i: usize, k: usize) -> (f64, f64, f64) {
        let sp = self.arms[i][2 * k].frac();
        let sm = self.arms[i][2 * k + 1].frac();
        // squared arm length, exact for diagonals
        let l2 = if k < 2 { 1.0 } else { 2.0 } * self.grid.h * self.grid.h;
        let cp = 2.0 / (sp * (sp + sm) * l2);
        let cm = 2.0 / (sm * (sp + sm) * l2);
        (cp, cm, -(cp + cm))
    }

    /// Second differences along x, y, (1,1) and (1,-1).
    pub fn second_differences(&self, i: usize, values: &[f64], bd: &dyn BoundaryData) -> [f64; 4] {
        let u0 = values[self.nodes[i]];
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            let (cp, cm, c0) = self.second_difference_weights(i, k);
            let up = self.arm_value(&self.arms[i][2 * k], values, bd);
            let um = self.arm_value(&self.arms[i][2 * k + 1], values, bd);
            *o = cp * up + cm * um + c0 * u0;
        }
        out
    }

    /// Nonuniform three-point gradient from the axis arms.
    pub fn gradient(&self, i: usize, values: &[f64], bd: &dyn BoundaryData) -> Point {
        let u0 = values[self.nodes[i]];
        let mut g = [0.0; 2];
        for (k, gk) in g.iter_mut().enumerate() {
            let sp = self.arms[i][2 * k].frac();
            let sm = self.arms[i][2 * k + 1].frac();
            let up = self.arm_value(&self.arms[i][2 * k], values, bd);
            let um = self.arm_value(&self.arms[i][2 * k + 1], values, bd);
            let h = self.grid.h;
            *gk = (sm * sm * (up - u0) + sp * sp * (u0 - um)) / (sp * sm * (sp + sm) * h);
        }
        Point::new(g[0], g[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_differences_exact_on_quadratics() {
        let d = ConvexDomain::disk(Point::zeros(), 1.0, 97, 20).unwrap();
        let r = Region::of_domain(&d);
        let q = |p: Point| 1.5 * p.x * p.x + 0.7 * p.x * p.y - 0.4 * p.y * p.y + p.x - 2.0;
        let vals: Vec<f64> = (0..d.grid().len()).map(|k| q(d.grid().point(k))).collect();
        for i in 0..r.len() {
            let s = r.second_differences(i, &vals, &q);
            let (a, b, c) = (3.0, 0.7, -0.8);
            assert!((s[0] - a).abs() < 1e-9, "{}", s[0]);
            assert!((s[1] - c).abs() < 1e-9);
            assert!((s[2] - (a + 2.0 * b + c) / 2.0).abs() < 1e-9);
            assert!((s[3] - (a - 2.0 * b + c) / 2.0).abs() < 1e-9);
            let g = r.gradient(i, &vals, &q);
            let p = d.grid().point(r.node(i));
            assert!((g.x - (a * p.x + b * p.y + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn subdomain_arms_end_on_nodes() {
        let d = ConvexDomain::rectangle(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 16).unwrap();
        let sub: Vec<bool> = (0..d.grid().len()).map(|k| d.grid().point(k).norm() < 0.5).collect();
        let r = Region::of_subdomain(&d, &sub);
        assert!(r.len() > 0);
        for i in 0..r.len() {
            for a in r.arms(i) {
                if let Arm::Boundary { node, frac, .. } = a {
                    assert!(node.is_some());
                    assert_eq!(*frac, 1.0);
                }
            }
        }
    }
}
