//! Affine rescaling `phi~ = phi(Tx)/a`, `u~ = u(Tx)/b`, `Tx = x0 + s A^{-1} x`.

use std::sync::Arc;

use nalgebra::Matrix2;

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::geometry::{mvee, AffineMap};
use crate::grid::{count, Point, ScalarField};
use crate::lma::{CrossScheme, LinearizedOperator};
use crate::potential::{ConvexPotential, PointFn};
use crate::section::{section_from_support, Support};

/// Minimum number of source-section nodes for a rescale.
pub const MIN_SECTION_NODES: usize = 256;

/// A function on the source domain.
#[derive(Clone)]
pub enum Source {
    Analytic(PointFn),
    /// Bilinear interpolation, nearest finite corner near the boundary.
    Field(ScalarField),
}

impl Source {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Source::Analytic(f) => f(p),
            Source::Field(f) => interpolate(f, p),
        }
    }
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Analytic(_) => write!(f, "Source::Analytic"),
            Source::Field(_) => write!(f, "Source::Field"),
        }
    }
}

pub(crate) fn interpolate(f: &ScalarField, p: Point) -> f64 {
    if let Some(v) = f.bilinear(p) {
        return v;
    }
    let g = &f.grid;
    let Some((i, j, fx, fy)) = g.locate(p) else { return f64::NAN };
    let corners = [
        (g.index(i, j), (1.0 - fx) * (1.0 - fy)),
        (g.index(i + 1, j), fx * (1.0 - fy)),
        (g.index(i, j + 1), (1.0 - fx) * fy),
        (g.index(i + 1, j + 1), fx * fy),
    ];
    let (mut s, mut w) = (0.0, 0.0);
    for (k, wk) in corners {
        if f.values[k].is_finite() {
            s += wk * f.values[k];
            w += wk;
        }
    }
    if w > 0.0 {
        s / w
    } else {
        f64::NAN
    }
}

#[derive(Clone, Debug)]
pub struct RescaleSpec {
    pub x0: Point,
    /// The matrix `A` (unimodular in the normalized cases).
    pub matrix: Matrix2<f64>,
    pub scale: f64,
    pub a: f64,
    pub b: f64,
    /// Height of the source section whose image is the new domain.
    pub height: f64,
    /// Affine function `c + g.(x - x0)` subtracted from `u` before rescaling.
    pub affine: (f64, Point),
    /// Shear vector for boundary rescalings.
    pub shear: Option<Point>,
}

impl RescaleSpec {
    pub fn identity(height: f64) -> Self {
        RescaleSpec {
            x0: Point::zeros(),
            matrix: Matrix2::identity(),
            scale: 1.0,
            a: 1.0,
            b: 1.0,
            height,
            affine: (0.0, Point::zeros()),
            shear: None,
        }
    }

    /// `T x = x0 + A^{-1} x` with `a = b = 1`.
    pub fn linear(x0: Point, matrix: Matrix2<f64>, height: f64) -> Self {
        RescaleSpec {
            x0,
            matrix,
            ..RescaleSpec::identity(height)
        }
    }

    /// Interior normalization: `A` unimodular from the enclosing ellipse of
    /// `S(x0, h)`, `s = h^{1/2}`, `a = h`, `b = h^{(1+alpha)/2}`.
    pub fn interior(potential: &ConvexPotential, x0: Point, h: f64, alpha: f64) -> Result<Self> {
        let sec = section_from_support(potential, &Support::at(potential, x0)?, h);
        if sec.hull.len() < 3 {
            return Err(Error::SectionTooSmall(format!("section at height {h} has {} nodes", sec.count)));
        }
        let (e, _) = mvee(&sec.hull, 1e-7, 100_000)?;
        let q = e.shape.matrix();
        let qi = q
            .try_inverse()
            .ok_or_else(|| Error::DegenerateDomain("flat section".into()))?;
        Ok(RescaleSpec {
            x0,
            matrix: qi * q.determinant().sqrt(),
            scale: h.sqrt(),
            a: h,
            b: h.powf(0.5 * (1.0 + alpha)),
            height: h,
            affine: (0.0, Point::zeros()),
            shear: None,
        })
    }

    /// Boundary normalization at `x0` on an edge with inner normal `e_n`:
    /// `A_h x = x - tau x_n` with `tau` chosen so the section centroid lies
    /// on the normal axis, composed with the rotation onto the edge frame.
    pub fn boundary(potential: &ConvexPotential, x0: Point, h: f64, alpha: f64) -> Result<Self> {
        let domain = potential.domain();
        if domain.depth(x0).abs() > 1e-9 {
            return Err(Error::GeometryUnsupported(format!(
                "({}, {}) is not a boundary point",
                x0.x, x0.y
            )));
        }
        let normal = inner_normal(domain, x0);
        let tangent = Point::new(normal.y, -normal.x);
        let rot = Matrix2::from_columns(&[tangent, normal]);
        let sec = section_from_support(potential, &Support::at(potential, x0)?, h);
        if sec.count == 0 {
            return Err(Error::EmptySection(h));
        }
        let grid = domain.grid();
        let c: Point = sec.nodes().map(|k| grid.point(k) - x0).sum::<Point>() / sec.count as f64;
        let local = rot.transpose() * c;
        if local.y <= 0.0 {
            return Err(Error::GeometryCheckFailed("section centroid not inside".into()));
        }
        let tau = local.x / local.y;
        // A_h^{-1} in the edge frame is x -> x + tau x_n.
        let ainv_local = Matrix2::new(1.0, tau, 0.0, 1.0);
        let ainv = rot * ainv_local;
        let matrix = ainv
            .try_inverse()
            .ok_or_else(|| Error::DegenerateDomain("singular shear".into()))?;
        Ok(RescaleSpec {
            x0,
            matrix,
            scale: h.sqrt(),
            a: h,
            b: h.powf(0.5 * (1.0 + alpha)),
            height: h,
            affine: (0.0, Point::zeros()),
            shear: Some(Point::new(tau, 0.0)),
        })
    }

    pub fn with_affine(mut self, c: f64, g: Point) -> Self {
        self.affine = (c, g);
        self
    }

    /// `T`.
    pub fn map(&self) -> Result<AffineMap> {
        let ainv = self
            .matrix
            .try_inverse()
            .ok_or_else(|| Error::DegenerateDomain("singular rescaling matrix".into()))?;
        Ok(AffineMap::new(ainv * self.scale, self.x0))
    }

    /// `(det T)^2 / (a^{n-1} b)`, the factor multiplying `f(Tx)`.
    pub fn rhs_factor(&self) -> Result<f64> {
        let t = self.map()?;
        Ok(t.det().powi(2) / (self.a * self.b))
    }
}

fn inner_normal(domain: &ConvexDomain, x: Point) -> Point {
    let v = domain.vertices();
    let m = v.len();
    let mut best = (f64::INFINITY, Point::new(0.0, 1.0));
    for i in 0..m {
        let a = v[i];
        let e = v[(i + 1) % m] - a;
        let t = ((x - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        let dist = (a + e * t - x).norm();
        if dist < best.0 - 1e-12 {
            // counterclockwise polygon: interior on the left
            best = (dist, Point::new(-e.y, e.x) / e.norm());
        }
    }
    best.1
}

pub struct RescaledProblem {
    pub spec: RescaleSpec,
    pub map: AffineMap,
    pub potential: ConvexPotential,
    pub u: ScalarField,
    pub u_source: Source,
    pub f: ScalarField,
    pub f_source: Source,
    /// `(det T)^2 / (a^{n-1} b)`.
    pub factor: f64,
    /// Nodes of the source section.
    pub source_nodes: usize,
}

/// Rescales `(phi, u, f)` over the image of `S(x0, height)`, meshed with `mesh`
/// cells across (or with spacing `spacing` when given).
pub fn rescale_problem(
    potential: &ConvexPotential,
    u: &Source,
    f: &Source,
    spec: &RescaleSpec,
    mesh: usize,
    spacing: Option<f64>,
) -> Result<RescaledProblem> {
    let support = Support::at(potential, spec.x0)?;
    let sec = section_from_support(potential, &support, spec.height);
    if sec.count < MIN_SECTION_NODES {
        return Err(Error::SectionTooSmall(format!(
            "section at height {} has {} nodes (< {MIN_SECTION_NODES})",
            spec.height, sec.count
        )));
    }
    let map = spec.map()?;
    let inv = map.inverse()?;
    let whole = sec.count == count(potential.domain().mask());
    let src_poly: Vec<Point> = if whole {
        potential.domain().vertices().to_vec()
    } else {
        sec.hull.clone()
    };
    let image: Vec<Point> = src_poly.iter().map(|p| inv.apply(*p)).collect();
    let domain = Arc::new(match spacing {
        Some(h) => ConvexDomain::with_spacing(image, h)?,
        None => ConvexDomain::new(image, mesh)?,
    });
    let grid = domain.grid().clone();
    if count(domain.mask()) < 16 * 16 {
        return Err(Error::SectionTooSmall(format!("image grid has {} nodes", count(domain.mask()))));
    }

    let factor = spec.rhs_factor()?;
    let a = spec.a;
    let b = spec.b;
    let (uc, ug) = spec.affine;
    let x0 = spec.x0;

    let phi_src: PointFn = match potential.analytic_form() {
        Some(ap) => {
            let ap = ap.clone();
            Arc::new(move |p| ap.value(p))
        }
        None => {
            let fld = potential.field().clone();
            let tr = potential.trace().clone();
            let dom = potential.domain().clone();
            Arc::new(move |p| {
                let v = interpolate(&fld, p);
                if v.is_finite() || !dom.contains(p) {
                    v
                } else {
                    tr(p)
                }
            })
        }
    };
    let l0 = support;
    let phi_t: PointFn = {
        let src = phi_src.clone();
        Arc::new(move |x| {
            let y = map.apply(x);
            (src(y) - l0.eval(y)) / a
        })
    };
    let values: Vec<f64> = (0..grid.len())
        .map(|k| if domain.mask()[k] { phi_t(grid.point(k)) } else { f64::NAN })
        .collect();
    let jac2 = map.det().powi(2) / a.powi(2);
    let det_src = match potential.analytic_form() {
        Some(ap) => Source::Analytic({
            let ap = ap.clone();
            Arc::new(move |p| ap.det(p))
        }),
        None => Source::Field(potential.det_field().clone()),
    };
    let det_field = ScalarField::from_fn(&grid, domain.mask(), |x| jac2 * det_src.eval(map.apply(x)));
    let (lo, hi) = potential.pinching();
    let phi_tilde = ConvexPotential::from_parts(
        domain.clone(),
        values,
        phi_t,
        det_field,
        (lo * jac2, hi * jac2),
        format!("{}~", potential.label()),
    );

    let u_src = u.clone();
    let u_t: PointFn = Arc::new(move |x| {
        let y = map.apply(x);
        (u_src.eval(y) - uc - ug.dot(&(y - x0))) / b
    });
    let u_field = ScalarField::from_fn(&grid, domain.mask(), |x| u_t(x));
    let f_src = f.clone();
    let f_t: PointFn = Arc::new(move |x| factor * f_src.eval(map.apply(x)));
    let f_field = ScalarField::from_fn(&grid, domain.mask(), |x| f_t(x));
    Ok(RescaledProblem {
        spec: spec.clone(),
        map,
        potential: phi_tilde,
        u: u_field,
        u_source: Source::Analytic(u_t),
        f: f_field,
        f_source: Source::Analytic(f_t),
        factor,
        source_nodes: sec.count,
    })
}

impl RescaledProblem {
    /// `max |Phi~^{ij} u~_ij - f~|` over nodes at depth `>= 3h`, using the
    /// divergence-form operator of the rescaled potential.
    pub fn equation_residual(&self) -> Result<f64> {
        let cof = self.potential.cofactor();
        let op = LinearizedOperator::assemble(&cof, CrossScheme::Corner)?;
        let bd = match &self.u_source {
            Source::Analytic(g) => g.clone(),
            Source::Field(_) => unreachable!(),
        };
        let r = op.apply(&self.u.values, &move |p: Point| bd(p));
        let deep = self.potential.deep_interior(3.0);
        let mut worst: f64 = 0.0;
        for i in 0..op.len() {
            let k = op.region().node(i);
            if deep[k] {
                worst = worst.max((-r[i] - self.f.values[k]).abs());
            }
        }
        Ok(worst)
    }

    /// `c a^{-(1-alpha)/2}`: `N_{phi~, f~, q, r}(y) = ratio * N_{phi, f, q, a r}(T y)`.
    pub fn n_ratio(&self, alpha: f64) -> f64 {
        self.factor.abs() * self.spec.a.powf(-(1.0 - alpha) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{AnalyticPotential, Sym2};

    fn disk_pot(a: AnalyticPotential, mesh: usize) -> ConvexPotential {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh).unwrap());
        ConvexPotential::analytic(a, d, None).unwrap()
    }

    #[test]
    fn identity_leaves_fields_unchanged() {
        let p = disk_pot(AnalyticPotential::isotropic(1.0), 32);
        let u = Source::Analytic(Arc::new(|x: Point| x.x * x.y + 1.0));
        let f = Source::Analytic(Arc::new(|x: Point| x.norm()));
        let spec = RescaleSpec::identity(10.0);
        let r = rescale_problem(&p, &u, &f, &spec, 32, Some(p.h())).unwrap();
        assert_eq!(r.factor, 1.0);
        let g = r.potential.domain().grid();
        for k in 0..g.len() {
            if r.potential.domain().mask()[k] {
                let x = g.point(k);
                assert!((r.potential.values()[k] - 0.5 * x.norm_squared()).abs() < 1e-14);
                assert!((r.u.values[k] - (x.x * x.y + 1.0)).abs() < 1e-14);
                assert!((r.f.values[k] - x.norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadratic_maps_to_isotropic() {
        let m = Sym2::new(4.0, 0.0, 0.25);
        let p = disk_pot(AnalyticPotential::quadratic(m), 64);
        let spec = RescaleSpec::linear(Point::zeros(), m.sqrt().matrix(), 0.1);
        let u = Source::Analytic(Arc::new(|x: Point| x.x * x.x - 3.0 * x.y * x.y));
        // f = Phi^{ij} u_ij with Phi = cof(M) = diag(1/4, 4)
        let f = Source::Analytic(Arc::new(|_| 0.25 * 2.0 - 4.0 * 6.0));
        let r = rescale_problem(&p, &u, &f, &spec, 32, None).unwrap();
        assert!(r.map.is_unimodular(1e-12));
        let g = r.potential.domain().grid();
        for k in 0..g.len() {
            if r.potential.domain().mask()[k] {
                let x = g.point(k);
                assert!((r.potential.values()[k] - 0.5 * x.norm_squared()).abs() < 1e-12);
            }
        }
        assert!(r.equation_residual().unwrap() < 1e-9);
    }

    #[test]
    fn too_small_section_rejected() {
        let p = disk_pot(AnalyticPotential::isotropic(1.0), 16);
        let u = Source::Analytic(Arc::new(|_| 0.0));
        let spec = RescaleSpec::identity(1e-3);
        assert!(matches!(
            rescale_problem(&p, &u, &u, &spec, 16, None),
            Err(Error::SectionTooSmall(_))
        ));
    }

    #[test]
    fn boundary_shear_is_unimodular_and_centres_section() {
        let d = Arc::new(ConvexDomain::half_disk(1.0, 180, 64).unwrap());
        let m = Sym2::new(1.0, 0.4, 1.0);
        let p = ConvexPotential::analytic(AnalyticPotential::quadratic(m), d, None).unwrap();
        let spec = RescaleSpec::boundary(&p, Point::zeros(), 0.05, 0.3).unwrap();
        let t = spec.map().unwrap();
        assert!((t.det() - 0.05).abs() < 1e-12);
        assert!((spec.matrix.determinant() - 1.0).abs() < 1e-12);
        let tau = spec.shear.unwrap().x;
        assert!(tau.abs() > 0.1);
    }
}
