//! Convex polygonal domains with their node masks.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point};

/// Convex polygon (counterclockwise) together with a covering grid and the
/// exact point-in-polygon node mask.
#[derive(Clone, Debug)]
pub struct ConvexDomain {
    vertices: Vec<Point>,
    normals: Vec<Point>,
    offsets: Vec<f64>,
    grid: Grid,
    mask: Vec<bool>,
    inradius: f64,
    incenter: Point,
    circumradius: f64,
}

impl ConvexDomain {
    /// `mesh` is the number of cells across the longer side of the bounding box.
    pub fn new(vertices: Vec<Point>, mesh: usize) -> Result<Self> {
        if mesh < 2 {
            return Err(Error::DegenerateDomain(format!("mesh {mesh} < 2")));
        }
        let (lo, hi) = bbox(&vertices);
        let h = (hi.x - lo.x).max(hi.y - lo.y) / mesh as f64;
        Self::with_spacing(vertices, h)
    }

    pub fn with_spacing(mut vertices: Vec<Point>, h: f64) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateDomain("fewer than 3 vertices".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::DegenerateDomain(format!("grid spacing {h}")));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let m = vertices.len();
        for i in 0..m {
            let a = vertices[i];
            let b = vertices[(i + 1) % m];
            let c = vertices[(i + 2) % m];
            if cross(b - a, c - b) < -1e-12 * (b - a).norm() * (c - b).norm() {
                return Err(Error::DegenerateDomain(format!("polygon not convex at vertex {}", (i + 1) % m)));
            }
        }
        let mut normals = Vec::with_capacity(m);
        let mut offsets = Vec::with_capacity(m);
        for i in 0..m {
            let a = vertices[i];
            let e = vertices[(i + 1) % m] - a;
            let len = e.norm();
            if len == 0.0 {
                return Err(Error::DegenerateDomain("repeated vertex".into()));
            }
            let n = Point::new(e.y, -e.x) / len;
            normals.push(n);
            offsets.push(n.dot(&a));
        }
        let (incenter, inradius) = chebyshev_center(&vertices, &normals, &offsets);
        if inradius < 1e-9 {
            return Err(Error::DegenerateDomain(format!("inradius {inradius:e}")));
        }
        let circumradius = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let (lo, hi) = bbox(&vertices);
        let grid = Grid::covering(lo, hi, h);
        let mut d = ConvexDomain {
            vertices,
            normals,
            offsets,
            grid,
            mask: Vec::new(),
            inradius,
            incenter,
            circumradius,
        };
        d.mask = (0..d.grid.len()).map(|k| d.contains(d.grid.point(k))).collect();
        Ok(d)
    }

    pub fn disk(center: Point, radius: f64, count: usize, mesh: usize) -> Result<Self> {
        Self::ellipse(center, radius, radius, count, mesh)
    }

    pub fn ellipse(center: Point, a: f64, b: f64, count: usize, mesh: usize) -> Result<Self> {
        let v = (0..count)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / count as f64;
                center + Point::new(a * t.cos(), b * t.sin())
            })
            .collect();
        Self::new(v, mesh)
    }

    pub fn rectangle(lo: Point, hi: Point, mesh: usize) -> Result<Self> {
        Self::new(
            vec![lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)],
            mesh,
        )
    }

    /// Upper half disk `{|x| < r, x_2 > 0}` with the flat side on `x_2 = 0`.
    pub fn half_disk(radius: f64, count: usize, mesh: usize) -> Result<Self> {
        let mut v: Vec<Point> = (0..=count)
            .map(|i| {
                let t = PI * i as f64 / count as f64;
                Point::new(radius * t.cos(), radius * t.sin())
            })
            .collect();
        v.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
        Self::new(v, mesh)
    }

    pub fn regular_polygon(center: Point, radius: f64, sides: usize, mesh: usize) -> Result<Self> {
        Self::disk(center, radius, sides, mesh)
    }

    /// Same polygon on a different mesh.
    pub fn remesh(&self, mesh: usize) -> Result<Self> {
        Self::new(self.vertices.clone(), mesh)
    }

    pub fn respace(&self, h: f64) -> Result<Self> {
        Self::with_spacing(self.vertices.clone(), h)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Centre of the largest inscribed disk.
    pub fn incenter(&self) -> Point {
        self.incenter
    }

    /// Largest vertex norm (radius of the smallest origin-centred disk containing the polygon).
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    /// Closed point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, &c)| n.dot(&p) <= c + 1e-12)
    }

    /// Signed distance to the boundary, positive inside.
    pub fn depth(&self, p: Point) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, &c)| c - n.dot(&p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Parameter `t >= 0` where the ray `p + t d` leaves the polygon.
    pub fn exit_parameter(&self, p: Point, d: Point) -> f64 {
        let mut t = f64::INFINITY;
        for (n, &c) in self.normals.iter().zip(&self.offsets) {
            let nd = n.dot(&d);
            if nd > 0.0 {
                t = t.min(((c - n.dot(&p)) / nd).max(0.0));
            }
        }
        t
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        let m = self.vertices.len();
        (0..m)
            .map(|i| (self.vertices[(i + 1) % m] - self.vertices[i]).norm())
            .sum()
    }

    /// Points along the boundary with spacing at most `spacing` (vertices included).
    pub fn boundary_samples(&self, spacing: f64) -> Vec<Point> {
        let m = self.vertices.len();
        let mut out = Vec::new();
        for i in 0..m {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % m];
            let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
            for s in 0..k {
                out.push(a + (b - a) * (s as f64 / k as f64));
            }
        }
        out
    }

    /// Bounding box of the polygon.
    pub fn bbox(&self) -> (Point, Point) {
        bbox(&self.vertices)
    }

    /// Image of the polygon under `x -> m x + shift`.
    pub fn map_vertices(&self, m: &nalgebra::Matrix2<f64>, shift: &Point) -> Vec<Point> {
        let mut v: Vec<Point> = self.vertices.iter().map(|p| m * p + shift).collect();
        if m.determinant() < 0.0 {
            v.reverse();
        }
        v
    }
}

pub fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn signed_area(v: &[Point]) -> f64 {
    let m = v.len();
    0.5 * (0..m).map(|i| cross(v[i], v[(i + 1) % m])).sum::<f64>()
}

fn bbox(v: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in v {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Convex hull by monotone chain, counterclockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut p: Vec<Point> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 1] - lower[lower.len() - 2], q - lower[lower.len() - 1]) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 1] - upper[upper.len() - 2], q - upper[upper.len() - 1]) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

// The depth function is concave, so nested ternary searches find its maximum.
fn chebyshev_center(v: &[Point], normals: &[Point], offsets: &[f64]) -> (Point, f64) {
    let depth = |p: Point| {
        normals
            .iter()
            .zip(offsets)
            .map(|(n, &c)| c - n.dot(&p))
            .fold(f64::INFINITY, f64::min)
    };
    let (lo, hi) = bbox(v);
    let best_y = |x: f64| {
        let (mut a, mut b) = (lo.y, hi.y);
        for _ in 0..100 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if depth(Point::new(x, m1)) < depth(Point::new(x, m2)) {
                a = m1;
            } else {
                b = m2;
            }
        }
        let y = 0.5 * (a + b);
        (y, depth(Point::new(x, y)))
    };
    let (mut a, mut b) = (lo.x, hi.x);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if best_y(m1).1 < best_y(m2).1 {
            a = m1;
        } else {
            b = m2;
        }
    }
    let x = 0.5 * (a + b);
    let (y, r) = best_y(x);
    (Point::new(x, y), r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_mask_matches_point_in_polygon() {
        let d = ConvexDomain::disk(Point::zeros(), 1.0, 360, 32).unwrap();
        let g = d.grid();
        for k in 0..g.len() {
            assert_eq!(d.mask()[k], d.contains(g.point(k)));
        }
        assert!((d.h() - 2.0 / 32.0).abs() < 1e-15);
        assert!((d.inradius() - (PI / 360.0).cos()).abs() < 1e-8);
        assert!((d.area() - PI).abs() < 1e-3);
    }

    #[test]
    fn nonconvex_rejected() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.3),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        assert!(matches!(ConvexDomain::new(v, 8), Err(Error::DegenerateDomain(_))));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let d = ConvexDomain::new(v, 8).unwrap();
        assert!((d.area() - 1.0).abs() < 1e-15);
        assert!((d.inradius() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exit_parameter_on_square() {
        let d = ConvexDomain::rectangle(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 8).unwrap();
        let t = d.exit_parameter(Point::new(0.5, 0.0), Point::new(1.0, 1.0));
        assert!((t - 0.5).abs() < 1e-14);
    }

    #[test]
    fn hull_of_square_grid() {
        let pts: Vec<Point> = (0..5)
            .flat_map(|i| (0..5).map(move |j| Point::new(i as f64, j as f64)))
            .collect();
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((signed_area(&h) - 16.0).abs() < 1e-12);
    }
}
