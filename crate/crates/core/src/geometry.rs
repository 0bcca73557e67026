//! Affine maps, ellipsoids and John normalization.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::Point;
use crate::potential::Sym2;

/// `x -> matrix * x + shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub matrix: Matrix2<f64>,
    pub shift: Point,
}

impl AffineMap {
    pub fn new(matrix: Matrix2<f64>, shift: Point) -> Self {
        AffineMap { matrix, shift }
    }

    pub fn identity() -> Self {
        AffineMap::new(Matrix2::identity(), Point::zeros())
    }

    pub fn linear(matrix: Matrix2<f64>) -> Self {
        AffineMap::new(matrix, Point::zeros())
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn is_unimodular(&self, tol: f64) -> bool {
        (self.det().abs() - 1.0).abs() <= tol
    }

    pub fn apply(&self, x: Point) -> Point {
        self.matrix * x + self.shift
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let inv = self
            .matrix
            .try_inverse()
            .ok_or_else(|| Error::DegenerateDomain("singular affine map".into()))?;
        Ok(AffineMap::new(inv, -(inv * self.shift)))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap::new(self.matrix * other.matrix, self.matrix * other.shift + self.shift)
    }
}

/// `{center + shape u : |u| <= 1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub center: Point,
    pub shape: Sym2,
}

impl Ellipsoid {
    pub fn new(center: Point, shape: Sym2) -> Result<Self> {
        if shape.eigenvalues().0 <= 0.0 {
            return Err(Error::DegenerateDomain("ellipsoid shape not positive definite".into()));
        }
        Ok(Ellipsoid { center, shape })
    }

    /// `|shape^{-1}(p - center)|`; at most 1 inside.
    pub fn gauge(&self, p: Point) -> f64 {
        let inv = self.shape.matrix().try_inverse().expect("positive definite");
        (inv * (p - self.center)).norm()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.gauge(p) <= 1.0
    }

    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.shape.det()
    }
}

/// Minimum-volume enclosing ellipse of a point set by Khachiyan's ascent.
///
/// Stops once the largest lifted leverage exceeds `n + 1` by at most a
/// relative `tol`.
pub fn mvee(points: &[Point], tol: f64, max_iter: usize) -> Result<(Ellipsoid, usize)> {
    let m = points.len();
    if m < 3 {
        return Err(Error::DegenerateDomain("need at least 3 points".into()));
    }
    let d = 2.0;
    let q: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::new(p.x, p.y, 1.0)).collect();
    let mut u = vec![1.0 / m as f64; m];
    let mut iters = 0;
    loop {
        let mut x = Matrix3::zeros();
        for (qi, &ui) in q.iter().zip(&u) {
            x += qi * qi.transpose() * ui;
        }
        let xinv = x
            .try_inverse()
            .ok_or_else(|| Error::DegenerateDomain("collinear points".into()))?;
        let m_all: Vec<f64> = q.iter().map(|qi| (qi.transpose() * xinv * qi)[(0, 0)]).collect();
        let (j, mj) = m_all
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if (mj - (d + 1.0)) / (d + 1.0) <= tol {
            break;
        }
        if iters >= max_iter {
            return Err(Error::NoConvergence {
                what: "Khachiyan ellipsoid".into(),
                iterations: iters,
                residual: mj - d - 1.0,
                history: vec![],
            });
        }
        // Away step on the least covered support point (Todd-Yildiz).
        let (i, mi) = m_all
            .iter()
            .copied()
            .enumerate()
            .filter(|&(k, _)| u[k] > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if mj / (d + 1.0) - 1.0 >= 1.0 - mi / (d + 1.0) || u[i] >= 1.0 {
            let step = (mj - d - 1.0) / ((d + 1.0) * (mj - 1.0));
            for ui in u.iter_mut() {
                *ui *= 1.0 - step;
            }
            u[j] += step;
        } else {
            let step = ((d + 1.0 - mi) / ((d + 1.0) * (mi - 1.0))).min(u[i] / (1.0 - u[i]));
            for ui in u.iter_mut() {
                *ui *= 1.0 + step;
            }
            u[i] = (u[i] - step).max(0.0);
        }
        iters += 1;
    }
    let c: Point = points.iter().zip(&u).map(|(p, &w)| p * w).sum();
    let mut s = Matrix2::zeros();
    for (p, &w) in points.iter().zip(&u) {
        s += p * p.transpose() * w;
    }
    s -= c * c.transpose();
    // E = {x : (x-c)^T A (x-c) <= 1}, A = (d S)^{-1}; the shape is A^{-1/2}.
    // The ascent leaves points slightly outside; enlarge so every point is covered.
    let shape = Sym2::from_matrix(&(s * d)).sqrt();
    let mut e = Ellipsoid::new(c, shape)?;
    let worst = points.iter().map(|p| e.gauge(*p)).fold(0.0, f64::max);
    if worst > 1.0 {
        e.shape = e.shape.scale(worst);
    }
    Ok((e, iters))
}

#[derive(Clone, Debug)]
pub struct NormalizationResult {
    pub map: AffineMap,
    /// Distance from the origin to the boundary of `T(Omega)`.
    pub inner_radius: f64,
    /// Largest norm over `T(Omega)`.
    pub outer_radius: f64,
    /// Smallest and largest ray exit radius over the sampled directions.
    pub sampled_radii: (f64, f64),
    pub iterations: usize,
}

impl NormalizationResult {
    /// `B_1 ⊂ T(Omega) ⊂ B_n` within `tol`.
    pub fn certified(&self, tol: f64) -> bool {
        self.inner_radius >= 1.0 - tol
            && self.outer_radius <= 2.0 + tol
            && self.sampled_radii.0 >= 1.0 - tol
            && self.sampled_radii.1 <= 2.0 + tol
    }
}

pub const NORMALIZATION_DIRECTIONS: usize = 720;

/// John normalization: the enclosing-ellipse map, rescaled so the inscribed
/// radius about the image centre is exactly 1.
pub fn normalize_domain(domain: &ConvexDomain) -> Result<NormalizationResult> {
    if domain.inradius() < 1e-9 {
        return Err(Error::DegenerateDomain(format!("inradius {:e}", domain.inradius())));
    }
    let (e, iterations) = mvee(domain.vertices(), 1e-7, 100_000)?;
    let l = e
        .shape
        .matrix()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateDomain("degenerate ellipsoid".into()))?;
    let pre = AffineMap::new(l, -(l * e.center));
    let image: Vec<Point> = domain.vertices().iter().map(|v| pre.apply(*v)).collect();
    let depth = polygon_depth(&image, Point::zeros());
    if depth <= 0.0 {
        return Err(Error::DegenerateDomain("ellipse centre outside domain".into()));
    }
    let map = AffineMap::new(pre.matrix / depth, pre.shift / depth);
    let verts: Vec<Point> = domain.vertices().iter().map(|v| map.apply(*v)).collect();
    let inner_radius = polygon_depth(&verts, Point::zeros());
    let outer_radius = verts.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut rmin = f64::INFINITY;
    let mut rmax: f64 = 0.0;
    for i in 0..NORMALIZATION_DIRECTIONS {
        let t = 2.0 * std::f64::consts::PI * i as f64 / NORMALIZATION_DIRECTIONS as f64;
        let r = ray_exit(&verts, Point::new(t.cos(), t.sin()));
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    Ok(NormalizationResult {
        map,
        inner_radius,
        outer_radius,
        sampled_radii: (rmin, rmax),
        iterations,
    })
}

/// Applies `map` to the polygon of `domain` and meshes the image.
pub fn transform_domain(domain: &ConvexDomain, map: &AffineMap, mesh: usize) -> Result<ConvexDomain> {
    ConvexDomain::new(domain.map_vertices(&map.matrix, &map.shift), mesh)
}

/// Min signed distance from `p` to the edge lines of a polygon (either orientation).
pub fn polygon_depth(v: &[Point], p: Point) -> f64 {
    let m = v.len();
    let orient = crate::domain::signed_area(v).signum();
    (0..m)
        .map(|i| {
            let a = v[i];
            let e = v[(i + 1) % m] - a;
            let n = Point::new(e.y, -e.x) * orient / e.norm();
            n.dot(&(a - p))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Distance from the origin to the polygon boundary along unit direction `d`.
fn ray_exit(v: &[Point], d: Point) -> f64 {
    let m = v.len();
    let orient = crate::domain::signed_area(v).signum();
    let mut t = f64::INFINITY;
    for i in 0..m {
        let a = v[i];
        let e = v[(i + 1) % m] - a;
        let n = Point::new(e.y, -e.x) * orient;
        let nd = n.dot(&d);
        if nd > 0.0 {
            t = t.min(n.dot(&a) / nd);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_normalization_is_identity() {
        let d = ConvexDomain::disk(Point::zeros(), 1.0, 360, 16).unwrap();
        let n = normalize_domain(&d).unwrap();
        assert!((n.map.matrix - Matrix2::identity()).norm() < 1e-3);
        assert!(n.map.shift.norm() < 1e-6);
        assert!(n.certified(1e-6));
        assert!((n.outer_radius - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ellipse_normalization_is_diagonal() {
        let d = ConvexDomain::ellipse(Point::zeros(), 4.0, 0.25, 360, 16).unwrap();
        let n = normalize_domain(&d).unwrap();
        let m = n.map.matrix;
        assert!((m[(0, 0)] - 0.25).abs() < 1e-3, "{m}");
        assert!((m[(1, 1)] - 4.0).abs() < 1e-2, "{m}");
        assert!(m[(0, 1)].abs() < 1e-6 && m[(1, 0)].abs() < 1e-6);
        assert!(n.certified(1e-6));
    }

    #[test]
    fn square_certificate_by_sampling() {
        let d = ConvexDomain::rectangle(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 16).unwrap();
        let n = normalize_domain(&d).unwrap();
        assert!(n.certified(1e-6));
        let image = transform_domain(&d, &n.map, 16).unwrap();
        for p in d.boundary_samples(8.0 / 10_000.0) {
            let r = n.map.apply(p).norm();
            assert!(r >= 1.0 - 1e-6 && r <= 2.0 + 1e-6);
        }
        for i in 0..1000 {
            let t = i as f64 * 0.00628;
            assert!(image.contains(Point::new(t.cos(), t.sin()) * (1.0 - 1e-9)));
        }
    }

    #[test]
    fn normalization_idempotent() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.5),
            Point::new(2.5, 2.0),
            Point::new(0.2, 1.0),
        ];
        let d = ConvexDomain::new(v, 16).unwrap();
        let n1 = normalize_domain(&d).unwrap();
        let d2 = transform_domain(&d, &n1.map, 16).unwrap();
        let n2 = normalize_domain(&d2).unwrap();
        assert!((n2.map.matrix - Matrix2::identity()).norm() < 1e-3);
        assert!(n2.certified(1e-6));
    }

    #[test]
    fn affine_inverse_and_compose() {
        let a = AffineMap::new(Matrix2::new(2.0, 1.0, 0.0, 0.5), Point::new(1.0, -1.0));
        let id = a.compose(&a.inverse().unwrap());
        assert!((id.matrix - Matrix2::identity()).norm() < 1e-14);
        assert!(id.shift.norm() < 1e-14);
        assert!(a.is_unimodular(1e-12));
    }
}
