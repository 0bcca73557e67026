//! Convex potentials, their discrete Hessians and cofactor fields.

mod analytic;
mod solver;
mod sym2;

use std::sync::{Arc, OnceLock};

pub use analytic::{AnalyticKind, AnalyticPotential};
pub use solver::{solve_monge_ampere, solve_monge_ampere_with, MongeAmpereOptions, NewtonReport};
pub use sym2::Sym2;

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField};
use crate::stencil::{BoundaryData, Region};

/// Shared point function (boundary traces, analytic data).
pub type PointFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Convexity tolerance for second differences.
pub const CONVEXITY_TOL: f64 = 1e-8;

#[derive(Clone)]
pub struct ConvexPotential {
    domain: Arc<ConvexDomain>,
    region: Arc<Region>,
    field: ScalarField,
    trace: PointFn,
    det_field: ScalarField,
    pinching: (f64, f64),
    analytic: Option<AnalyticPotential>,
    label: String,
    gradient: Arc<OnceLock<Vec<Point>>>,
    hessian: Arc<OnceLock<HessianField>>,
}

impl std::fmt::Debug for ConvexPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexPotential")
            .field("label", &self.label)
            .field("pinching", &self.pinching)
            .field("h", &self.domain.h())
            .finish()
    }
}

impl ConvexPotential {
    /// Potential from nodal values; `trace` supplies values at boundary crossings.
    pub fn from_parts(
        domain: Arc<ConvexDomain>,
        values: Vec<f64>,
        trace: PointFn,
        det_field: ScalarField,
        pinching: (f64, f64),
        label: impl Into<String>,
    ) -> Self {
        let region = Arc::new(Region::of_domain(&domain));
        let field = ScalarField::new(domain.grid().clone(), values);
        ConvexPotential {
            domain,
            region,
            field,
            trace,
            det_field,
            pinching,
            analytic: None,
            label: label.into(),
            gradient: Arc::default(),
            hessian: Arc::default(),
        }
    }

    /// Samples a closed-form potential. With `pinching = Some((l, L))` the
    /// certified determinant interval must lie in `[l, L]`; otherwise the
    /// certified interval itself is used.
    pub fn analytic(
        potential: AnalyticPotential,
        domain: Arc<ConvexDomain>,
        pinching: Option<(f64, f64)>,
    ) -> Result<Self> {
        let (lo, hi) = potential.det_bounds(&domain);
        let pinching = match pinching {
            Some((l, big)) => {
                if lo < l - 1e-12 || hi > big + 1e-12 {
                    return Err(Error::PinchingViolated {
                        lo,
                        hi,
                        lambda: l,
                        big_lambda: big,
                    });
                }
                (l, big)
            }
            None => {
                if lo <= 0.0 {
                    return Err(Error::PinchingViolated {
                        lo,
                        hi,
                        lambda: f64::MIN_POSITIVE,
                        big_lambda: f64::INFINITY,
                    });
                }
                (lo, hi)
            }
        };
        let grid = domain.grid();
        let values = (0..grid.len())
            .map(|k| if domain.mask()[k] { potential.value(grid.point(k)) } else { f64::NAN })
            .collect();
        let det_field = ScalarField::from_fn(grid, domain.mask(), |x| potential.det(x));
        let p2 = potential.clone();
        let trace: PointFn = Arc::new(move |x| p2.value(x));
        let mut out = Self::from_parts(domain, values, trace, det_field, pinching, potential.descriptor());
        out.analytic = Some(potential);
        Ok(out)
    }

    pub fn domain(&self) -> &Arc<ConvexDomain> {
        &self.domain
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn h(&self) -> f64 {
        self.domain.h()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn trace(&self) -> &PointFn {
        &self.trace
    }

    pub fn det_field(&self) -> &ScalarField {
        &self.det_field
    }

    pub fn pinching(&self) -> (f64, f64) {
        self.pinching
    }

    pub fn analytic_form(&self) -> Option<&AnalyticPotential> {
        self.analytic.as_ref()
    }

    pub fn boundary_data(&self) -> impl BoundaryData + '_ {
        let t = self.trace.clone();
        move |p: Point| t(p)
    }

    /// Gradient at every domain node: three-point differences at unknowns,
    /// a local least-squares quadratic at boundary nodes.
    pub fn gradient_field(&self) -> &[Point] {
        self.gradient.get_or_init(|| {
            let grid = self.domain.grid();
            let mask = self.domain.mask();
            let v = self.values();
            let bd = self.boundary_data();
            (0..grid.len())
                .map(|k| {
                    if !mask[k] {
                        return Point::new(f64::NAN, f64::NAN);
                    }
                    if let Some(i) = self.region.unknown_of(k) {
                        return self.region.gradient(i, v, &bd);
                    }
                    if let Some(a) = &self.analytic {
                        return a.gradient(grid.point(k));
                    }
                    quadratic_fit_gradient(grid, mask, v, k)
                })
                .collect()
        })
    }

    /// Value at a point: exact for closed forms, bilinear otherwise.
    pub fn value_at(&self, x: Point) -> Result<f64> {
        if let Some(a) = &self.analytic {
            return Ok(a.value(x));
        }
        if let Some(k) = self.node_at(x) {
            return Ok(self.values()[k]);
        }
        self.field
            .bilinear(x)
            .or_else(|| self.domain.contains(x).then(|| (self.trace)(x)))
            .ok_or(Error::OutsideDomain(x.x, x.y))
    }

    /// Computed gradient at a point (nodal, or bilinear in the gradient field).
    pub fn gradient_at(&self, x: Point) -> Result<Point> {
        let g = self.gradient_field();
        if let Some(k) = self.node_at(x) {
            return Ok(g[k]);
        }
        let grid = self.domain.grid();
        let (i, j, fx, fy) = grid.locate(x).ok_or(Error::OutsideDomain(x.x, x.y))?;
        let c = [grid.index(i, j), grid.index(i + 1, j), grid.index(i, j + 1), grid.index(i + 1, j + 1)];
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        let mut out = Point::zeros();
        let mut wsum = 0.0;
        for (k, wk) in c.iter().zip(w) {
            if g[*k].x.is_finite() {
                out += g[*k] * wk;
                wsum += wk;
            }
        }
        if wsum == 0.0 {
            return Err(Error::OutsideDomain(x.x, x.y));
        }
        Ok(out / wsum)
    }

    /// Grid node coinciding with `x` (to 1e-9 h), if any and inside the domain.
    pub fn node_at(&self, x: Point) -> Option<usize> {
        let grid = self.domain.grid();
        let k = grid.nearest(x)?;
        ((grid.point(k) - x).norm() <= 1e-9 * grid.h && self.domain.mask()[k]).then_some(k)
    }

    /// Domain node where the potential is smallest.
    pub fn minimizer(&self) -> usize {
        let mask = self.domain.mask();
        let v = self.values();
        (0..v.len())
            .filter(|&k| mask[k])
            .min_by(|&a, &b| v[a].total_cmp(&v[b]))
            .expect("nonempty domain")
    }

    pub fn hessian(&self) -> &HessianField {
        self.hessian
            .get_or_init(|| discrete_hessian(&self.region, self.values(), &self.boundary_data()))
    }

    pub fn cofactor(&self) -> CofactorField {
        self.hessian().cofactor()
    }

    /// Second differences along axes and diagonals are all `>= -tol`.
    pub fn is_discretely_convex(&self, tol: f64) -> bool {
        self.hessian().min_directional >= -tol
    }

    /// Nodes at distance at least `layers * h` from the boundary.
    pub fn deep_interior(&self, layers: f64) -> Vec<bool> {
        let grid = self.domain.grid();
        (0..grid.len())
            .map(|k| self.domain.mask()[k] && self.domain.depth(grid.point(k)) >= layers * grid.h)
            .collect()
    }

    /// Both forms of the residual of `L phi = -n det D^2 phi` over nodes at
    /// distance `>= 3h` from the boundary.
    pub fn ma_identity_residual(&self) -> Result<MaIdentityResidual> {
        let hess = self.hessian();
        let cof = hess.cofactor();
        let op = crate::lma::LinearizedOperator::assemble(&cof, crate::lma::CrossScheme::Corner)?;
        let action = op.apply(self.values(), &self.boundary_data());
        let deep = self.deep_interior(3.0);
        let mut out = MaIdentityResidual::default();
        for i in 0..self.region.len() {
            let k = self.region.node(i);
            if !deep[k] {
                continue;
            }
            let h = hess.values[i];
            let d = h.det();
            out.nondivergence = out.nondivergence.max((cof.values[i].frobenius(&h) - 2.0 * d).abs());
            out.divergence = out.divergence.max((action[i] + 2.0 * d).abs());
        }
        Ok(out)
    }
}

/// Gradient at node `k` of the least-squares quadratic through the domain
/// nodes within a few cells; exact for quadratics.
fn quadratic_fit_gradient(grid: &crate::grid::Grid, mask: &[bool], v: &[f64], k: usize) -> Point {
    let h = grid.h;
    let x = grid.point(k);
    for reach in [2i32, 3, 4] {
        let mut ata = nalgebra::Matrix6::<f64>::zeros();
        let mut atb = nalgebra::Vector6::<f64>::zeros();
        let mut n = 0;
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let Some(q) = grid.offset(k, di, dj) else { continue };
                if !mask[q] || !v[q].is_finite() {
                    continue;
                }
                let d = (grid.point(q) - x) / h;
                let row = nalgebra::Vector6::new(1.0, d.x, d.y, 0.5 * d.x * d.x, d.x * d.y, 0.5 * d.y * d.y);
                ata += row * row.transpose();
                atb += row * v[q];
                n += 1;
            }
        }
        if n < 6 {
            continue;
        }
        if let Some(c) = ata.try_inverse().map(|inv| inv * atb) {
            return Point::new(c[1], c[2]) / h;
        }
    }
    Point::zeros()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MaIdentityResidual {
    /// `max |trace(Phi D^2 phi) - n det D^2 phi|` with nodal matrices.
    pub nondivergence: f64,
    /// `max |L_h phi + n det D^2 phi|` with the assembled divergence-form operator.
    pub divergence: f64,
}

impl MaIdentityResidual {
    pub fn max(&self) -> f64 {
        self.nondivergence.max(self.divergence)
    }
}

/// Symmetric matrix per unknown of a [`Region`].
#[derive(Clone, Debug)]
pub struct MatrixField {
    pub region: Arc<Region>,
    pub values: Vec<Sym2>,
    /// Smallest second difference seen along axes/diagonals (Hessians only).
    pub min_directional: f64,
}

pub type HessianField = MatrixField;
pub type CofactorField = MatrixField;

impl MatrixField {
    pub fn at_node(&self, k: usize) -> Option<Sym2> {
        self.region.unknown_of(k).map(|i| self.values[i])
    }

    pub fn cofactor(&self) -> MatrixField {
        MatrixField {
            region: self.region.clone(),
            values: self.values.iter().map(Sym2::cofactor).collect(),
            min_directional: f64::NAN,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.iter().map(|m| m.eigenvalues().0).fold(f64::INFINITY, f64::min)
    }

    /// Max over unknowns of `|Phi H - det(H) Id|` relative to `max(1, |det|)`.
    pub fn cofactor_identity_defect(&self, hessian: &MatrixField) -> f64 {
        self.values
            .iter()
            .zip(&hessian.values)
            .map(|(c, h)| {
                let p = c.matrix() * h.matrix();
                let d = h.det();
                (p - nalgebra::Matrix2::identity() * d).abs().max() / d.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Entry `(a, b)` as a nodal field.
    pub fn component(&self, f: impl Fn(&Sym2) -> f64) -> ScalarField {
        let mut s = ScalarField::nan(self.region.grid());
        for (i, m) in self.values.iter().enumerate() {
            s.values[self.region.node(i)] = f(m);
        }
        s
    }
}

/// Hessian from second differences along axes and diagonals; the mixed
/// entry is half the difference of the two diagonal second differences.
pub fn discrete_hessian(region: &Arc<Region>, values: &[f64], bd: &dyn BoundaryData) -> HessianField {
    let mut min_dir = f64::INFINITY;
    let hs = (0..region.len())
        .map(|i| {
            let d = region.second_differences(i, values, bd);
            min_dir = d.iter().copied().fold(min_dir, f64::min);
            Sym2::new(d[0], 0.5 * (d[2] - d[3]), d[1])
        })
        .collect();
    MatrixField {
        region: region.clone(),
        values: hs,
        min_directional: min_dir,
    }
}

/// Per-node `max_j |sum_i D_i Phi^{ij}|` by central differences; `NaN` where
/// an axis neighbour is not an unknown.
pub fn divergence_defect(cof: &CofactorField) -> ScalarField {
    let r = &cof.region;
    let grid = r.grid();
    let h = grid.h;
    let mut out = ScalarField::nan(grid);
    for i in 0..r.len() {
        let k = r.node(i);
        let nb = |di, dj| grid.offset(k, di, dj).and_then(|q| r.unknown_of(q));
        if let (Some(e), Some(w), Some(n), Some(s)) = (nb(1, 0), nb(-1, 0), nb(0, 1), nb(0, -1)) {
            let v = &cof.values;
            let d1 = (v[e].xx - v[w].xx + v[n].xy - v[s].xy) / (2.0 * h);
            let d2 = (v[e].xy - v[w].xy + v[n].yy - v[s].yy) / (2.0 * h);
            out.values[k] = d1.abs().max(d2.abs());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(mesh: usize) -> Arc<ConvexDomain> {
        Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh).unwrap())
    }

    #[test]
    fn quadratic_hessian_and_cofactor_exact() {
        let m = Sym2::new(4.0, 0.0, 0.25);
        let p = ConvexPotential::analytic(AnalyticPotential::quadratic(m), disk(32), None).unwrap();
        let h = p.hessian();
        for v in &h.values {
            assert!(v.sub(&m).norm() < 1e-9);
        }
        let c = p.cofactor();
        for v in &c.values {
            assert!(v.sub(&Sym2::new(0.25, 0.0, 4.0)).norm() < 1e-9);
        }
        assert!(c.cofactor_identity_defect(h) < 1e-10);
        assert!(p.is_discretely_convex(CONVEXITY_TOL));
    }

    #[test]
    fn quartic_hessian_vanishes_at_origin() {
        let d = disk(64);
        let region = Arc::new(Region::of_domain(&d));
        let f = |x: Point| x.norm_squared().powi(2);
        let vals: Vec<f64> = (0..d.grid().len()).map(|k| f(d.grid().point(k))).collect();
        let hs = discrete_hessian(&region, &vals, &f);
        let k0 = d.grid().nearest(Point::zeros()).unwrap();
        let h0 = hs.at_node(k0).unwrap();
        let hg = d.h();
        assert!(h0.norm() <= 10.0 * hg * hg, "{h0:?}");
    }

    #[test]
    fn pinching_violation_reported() {
        let p = AnalyticPotential::isotropic(2.0);
        assert!(matches!(
            ConvexPotential::analytic(p, disk(16), Some((0.5, 2.0))),
            Err(Error::PinchingViolated { .. })
        ));
    }

    #[test]
    fn quadratic_divergence_defect_vanishes() {
        let p = ConvexPotential::analytic(
            AnalyticPotential::quadratic(Sym2::new(2.0, 0.5, 1.0)),
            disk(32),
            None,
        )
        .unwrap();
        let d = divergence_defect(&p.cofactor());
        let m = d.values.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, &b| a.max(b));
        assert!(m <= 1e-12 * 32.0, "{m}");
    }

    #[test]
    fn gradient_exact_for_quadratics_everywhere() {
        let m = Sym2::new(1.5, 0.2, 0.5);
        let a = AnalyticPotential::quadratic(m);
        let d = disk(24);
        let v: Vec<f64> = (0..d.grid().len())
            .map(|k| if d.mask()[k] { a.value(d.grid().point(k)) } else { f64::NAN })
            .collect();
        let t = a.clone();
        let p = ConvexPotential::from_parts(
            d.clone(),
            v,
            Arc::new(move |x| t.value(x)),
            ScalarField::nan(d.grid()),
            (0.7, 0.7),
            "q",
        );
        let g = p.gradient_field();
        for k in 0..d.grid().len() {
            if d.mask()[k] {
                let e = g[k] - m.apply(d.grid().point(k));
                assert!(e.norm() < 1e-9, "{k} {e:?}");
            }
        }
    }
}
