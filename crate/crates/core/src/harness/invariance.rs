//! Unimodular invariance of sections, N functionals and engulfing constants,
//! and the geometry checks on domains and sections.

use std::sync::Arc;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::functions::FieldSpec;
use crate::geometry::{normalize_domain, AffineMap};
use crate::grid::{Point, ScalarField};
use crate::lma::{rescale_problem, RescaleSpec, Source};
use crate::potential::{AnalyticPotential, ConvexPotential, PointFn, Sym2};
use crate::section::{
    check_quadratic_separation, excess, height_ladder, maximal_interior_height, section_from_support,
    volume_growth_scan, Support,
};

use super::context::{solved_potential, DomainSpec, SuiteContext, FAMILY_PINCHING};
use super::nfunctional::NFunctionalSpec;
use super::report::{spread, Check, EstimateReport, Trial};

/// The unimodular test map `A`.
pub fn invariance_matrix() -> Matrix2<f64> {
    Matrix2::new(2.0, 0.5, 0.0, 0.5)
}

pub const VOLUME_TOL: f64 = 0.02;
pub const N_TOL: f64 = 0.05;
pub const ENGULFING_TOL: f64 = 0.05;
pub const GROWTH_SLOPE_TOL: f64 = 0.05;
pub const GROWTH_VOLUME_TOL: f64 = 0.03;
/// Slope band for non-quadratic members of the pinched family.
pub const FAMILY_SLOPE_BAND: (f64, f64) = (0.9, 1.1);

const INVARIANCE_MESH: usize = 128;
const SAMPLE_POINTS: [[f64; 2]; 3] = [[0.0, 0.0], [0.2, 0.1], [-0.25, 0.15]];
const SAMPLE_HEIGHTS: [f64; 3] = [0.01, 0.03, 0.06];

/// `psi = phi o A` on `A^{-1} Omega`.
#[derive(Clone, Debug)]
pub struct Composed {
    pub potential: ConvexPotential,
    pub matrix: Matrix2<f64>,
}

impl Composed {
    /// Support of `psi` at `A^{-1} x` from the support of `phi` at `x`.
    pub fn support(&self, s: &Support) -> Result<Support> {
        let inv = AffineMap::linear(self.matrix).inverse()?;
        Ok(Support {
            x: inv.apply(s.x),
            value: s.value,
            gradient: self.matrix.transpose() * s.gradient,
        })
    }

    /// `f o A` sampled on the grid of `psi`.
    pub fn pull_back(&self, f: &FieldSpec) -> Vec<f64> {
        let d = self.potential.domain();
        let a = self.matrix;
        let h = self.potential.h();
        ScalarField::from_fn(d.grid(), d.mask(), |y| f.eval(a * y, h)).values
    }
}

/// Composes `phi` with a unimodular `A`, meshing `A^{-1} Omega` with `mesh` cells.
pub fn compose_unimodular(phi: &ConvexPotential, a: Matrix2<f64>, mesh: usize) -> Result<Composed> {
    let map = AffineMap::linear(a);
    if !map.is_unimodular(1e-12) {
        return Err(Error::GeometryUnsupported(format!("det A = {} is not 1", map.det())));
    }
    let inv = map.inverse()?;
    let domain = Arc::new(ConvexDomain::new(phi.domain().map_vertices(&inv.matrix, &inv.shift), mesh)?);
    let grid = domain.grid();
    let src = phi.clone();
    let trace: PointFn = {
        let t = phi.trace().clone();
        Arc::new(move |y| t(a * y))
    };
    let values = (0..grid.len())
        .map(|k| {
            if !domain.mask()[k] {
                return Ok(f64::NAN);
            }
            let x = a * grid.point(k);
            src.value_at(x).or_else(|_| Ok(trace(grid.point(k))))
        })
        .collect::<Result<Vec<f64>>>()?;
    let det_field = ScalarField::from_fn(grid, domain.mask(), |y| {
        let x = a * y;
        match src.analytic_form() {
            Some(ap) => ap.det(x),
            None => src.det_field().bilinear(x).unwrap_or(f64::NAN),
        }
    });
    let potential = ConvexPotential::from_parts(
        domain.clone(),
        values,
        trace,
        det_field,
        phi.pinching(),
        format!("{}oA", phi.label()),
    );
    Ok(Composed { potential, matrix: a })
}

/// `r^{(1-alpha)/2} (avg_{S} |f|^q)^{1/q}` over the section of the given support.
pub fn n_from_support(potential: &ConvexPotential, f: &[f64], spec: &NFunctionalSpec, s: &Support, r: f64) -> Result<f64> {
    let psi = excess(potential, s);
    let (mut sum, mut n) = (0.0, 0usize);
    for (k, &p) in psi.iter().enumerate() {
        if p < r && f[k].is_finite() {
            sum += f[k].abs().powf(spec.q);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptySection(r));
    }
    Ok(spec.weight(r) * (sum / n as f64).powf(1.0 / spec.q))
}

/// Engulfing constant from explicit supports: smallest `theta` with
/// `S(x,t) ⊂ S(y, theta t)` on the grid, maximized over the triples.
pub fn engulfing_from_supports(potential: &ConvexPotential, triples: &[(Support, f64, Support)]) -> f64 {
    let mut theta: f64 = 0.0;
    for (sx, t, sy) in triples {
        let px = excess(potential, sx);
        let py = excess(potential, sy);
        for k in 0..px.len() {
            if px[k] < *t {
                theta = theta.max(py[k] / t);
            }
        }
    }
    theta
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Triples `(x, t, y)` with `y` on the ray from `x` at a fraction of the
/// isotropic section radius, `x` over the sample points.
fn engulfing_triples(phi: &ConvexPotential) -> Result<Vec<(Support, f64, Support)>> {
    let mut out = Vec::new();
    for p in SAMPLE_POINTS {
        let x = Point::new(p[0], p[1]);
        let sx = Support::at(phi, x)?;
        for &t in &SAMPLE_HEIGHTS[1..] {
            for (frac, ang) in [(0.5, 0.0), (0.8, 2.0)] {
                let y = x + Point::new(f64::cos(ang), f64::sin(ang)) * (frac * (2.0 * t).sqrt());
                if !phi.domain().contains(y) || excess_at(phi, &sx, y)? >= t {
                    continue;
                }
                out.push((sx, t, Support::at(phi, y)?));
            }
        }
    }
    Ok(out)
}

fn excess_at(phi: &ConvexPotential, s: &Support, y: Point) -> Result<f64> {
    Ok(phi.value_at(y)? - s.eval(y))
}

/// Section volumes, N functionals and engulfing constants of `phi` and `phi o A`.
#[derive(Clone, Debug, Default)]
pub struct InvarianceOutcome {
    pub volume_defect: f64,
    pub n_defect: f64,
    pub engulfing: (f64, f64),
}

impl InvarianceOutcome {
    pub fn engulfing_defect(&self) -> f64 {
        rel(self.engulfing.0, self.engulfing.1)
    }
}

pub fn unimodular_invariance(phi: &ConvexPotential, composed: &Composed, f: &FieldSpec, spec: &NFunctionalSpec) -> Result<InvarianceOutcome> {
    let psi = &composed.potential;
    let fp = f.sample(phi.domain().grid(), phi.domain().mask()).values;
    let fq = composed.pull_back(f);
    let mut out = InvarianceOutcome::default();
    for p in SAMPLE_POINTS {
        let s = Support::at(phi, Point::new(p[0], p[1]))?;
        let s2 = composed.support(&s)?;
        for &t in &SAMPLE_HEIGHTS {
            let v1 = section_from_support(phi, &s, t).volume;
            let v2 = section_from_support(psi, &s2, t).volume;
            out.volume_defect = out.volume_defect.max(rel(v1, v2));
            let n1 = n_from_support(phi, &fp, spec, &s, t)?;
            let n2 = n_from_support(psi, &fq, spec, &s2, t)?;
            out.n_defect = out.n_defect.max(rel(n1, n2));
        }
    }
    let triples = engulfing_triples(phi)?;
    let mapped = triples
        .iter()
        .map(|(a, t, b)| Ok((composed.support(a)?, *t, composed.support(b)?)))
        .collect::<Result<Vec<_>>>()?;
    out.engulfing = (engulfing_from_supports(phi, &triples), engulfing_from_supports(psi, &mapped));
    Ok(out)
}

/// Two sides of `N_{phi_h, f_h, q, r}(0) = N_{phi, f, q, r h}(x0)` over `radii`.
pub fn n_rescaling_sides(
    phi: &ConvexPotential,
    f: &FieldSpec,
    spec_of: &RescaleSpec,
    n_spec: &NFunctionalSpec,
    radii: &[f64],
    image_mesh: usize,
) -> Result<Vec<(f64, f64)>> {
    let fs = f.clone();
    let h = phi.h();
    let src = Source::Analytic(Arc::new(move |p| fs.eval(p, h)));
    let zero = Source::Analytic(Arc::new(|_| 0.0));
    let rp = rescale_problem(phi, &zero, &src, spec_of, image_mesh, None)?;
    let ratio = rp.n_ratio(n_spec.alpha);
    let fv = f.sample(phi.domain().grid(), phi.domain().mask()).values;
    let s0 = Support::at(phi, spec_of.x0)?;
    let image_support = Support::at(&rp.potential, Point::zeros())?;
    radii
        .iter()
        .map(|&r| {
            let left = n_from_support(&rp.potential, &rp.f.values, n_spec, &image_support, r)?;
            let right = ratio * n_from_support(phi, &fv, n_spec, &s0, r * spec_of.height)?;
            Ok((left, right))
        })
        .collect()
}

pub const RESCALE_HEIGHT: f64 = 0.1;
pub const RESCALE_RADII: [f64; 3] = [0.2, 0.5, 0.9];

fn abs_field() -> FieldSpec {
    FieldSpec::Abs {
        x0: Point::zeros(),
        scale: 1.0,
    }
}

pub fn affine_invariance_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let mut rep = EstimateReport::new("affine-invariance");
    rep.tolerance = ctx.tolerance;
    let mesh = ctx.finest_mesh().min(INVARIANCE_MESH);
    let a = invariance_matrix();
    let q = ctx.exponents.q;
    let alpha = ctx.exponents.alpha.unwrap_or(0.5);
    let spec = NFunctionalSpec::new(alpha, q, 1.0)?;
    let fields = [abs_field(), FieldSpec::fourier(ctx.seed, 3, 0.3, 1.0)];

    let (mut worst_v, mut worst_n, mut worst_e): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for phi in ctx.potentials(mesh)? {
        // A^{-1} Omega is twice as tall, so double the mesh to keep h.
        let comp = compose_unimodular(&phi, a, 2 * mesh)?;
        for f in &fields {
            let o = unimodular_invariance(&phi, &comp, f, &spec)?;
            worst_v = worst_v.max(o.volume_defect);
            worst_n = worst_n.max(o.n_defect);
            worst_e = worst_e.max(o.engulfing_defect());
            let ok = o.volume_defect <= VOLUME_TOL && o.n_defect <= N_TOL && o.engulfing_defect() <= ENGULFING_TOL;
            rep.push(
                Trial::new("affine-invariance", format!("unimodular f={f}"), phi.label(), mesh)
                    .exponents(q, 0.0, 0.0, alpha)
                    .ratio(o.engulfing.1, o.engulfing.0)
                    .verdict(ok),
            );
        }
    }
    rep.metric("section volume defect", worst_v);
    rep.metric("N functional defect", worst_n);
    rep.metric("engulfing defect", worst_e);
    rep.check(Check::at_most("section volume invariance", worst_v, VOLUME_TOL));
    rep.check(Check::at_most("N functional invariance", worst_n, N_TOL));
    rep.check(Check::at_most("engulfing invariance", worst_e, ENGULFING_TOL));

    // An anisotropic quadratic is the unimodular image of the isotropic one.
    let iso_dom = Arc::new(ctx.domain.build(mesh)?);
    let iso = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), iso_dom.clone(), None)?;
    let m = a.transpose() * a;
    let inv = AffineMap::linear(a).inverse()?;
    let aniso_dom = Arc::new(ConvexDomain::new(iso_dom.map_vertices(&inv.matrix, &inv.shift), 2 * mesh)?);
    let aniso = ConvexPotential::analytic(
        AnalyticPotential::quadratic(Sym2::new(m[(0, 0)], m[(0, 1)], m[(1, 1)])),
        aniso_dom,
        None,
    )?;
    let triples = engulfing_triples(&iso)?;
    let mapped: Vec<_> = triples
        .iter()
        .map(|(x, t, y)| Ok((Support::at(&aniso, inv.apply(x.x))?, *t, Support::at(&aniso, inv.apply(y.x))?)))
        .collect::<Result<_>>()?;
    let (ti, ta) = (engulfing_from_supports(&iso, &triples), engulfing_from_supports(&aniso, &mapped));
    rep.metric("isotropic engulfing", ti);
    rep.metric("anisotropic engulfing", ta);
    rep.check(Check::at_most("anisotropic vs isotropic engulfing", rel(ti, ta), ENGULFING_TOL));

    // N rescaling identity at an interior point and at a flat boundary point.
    let mut worst_r: f64 = 0.0;
    let fine = ctx.finest_mesh().max(mesh);
    for phi in ctx.potentials(fine)? {
        for x0 in [Point::zeros(), Point::new(0.2, 0.1)] {
            let rs = RescaleSpec::interior(&phi, x0, RESCALE_HEIGHT, alpha)?;
            for f in &fields {
                for (l, r) in n_rescaling_sides(&phi, f, &rs, &spec, &RESCALE_RADII, mesh)? {
                    worst_r = worst_r.max(rel(l, r));
                }
            }
        }
    }
    let half = Arc::new(DomainSpec::HalfDisk { radius: 1.0 }.build(fine)?);
    let mut boundary_pots = Vec::new();
    for a in [AnalyticPotential::isotropic(1.0), AnalyticPotential::quadratic(Sym2::new(1.5, 0.3, 0.8))] {
        boundary_pots.push(ConvexPotential::analytic(a, half.clone(), None)?);
    }
    boundary_pots.push(solved_potential(
        half.clone(),
        &FieldSpec::Const(1.0),
        &super::context::family_boundary(&half),
    )?);
    for phi in &boundary_pots {
        let rs = RescaleSpec::boundary(phi, Point::zeros(), RESCALE_HEIGHT, alpha)?;
        for (l, r) in n_rescaling_sides(phi, &abs_field(), &rs, &spec, &RESCALE_RADII, mesh)? {
            worst_r = worst_r.max(rel(l, r));
        }
    }
    rep.metric("N rescaling defect", worst_r);
    rep.check(Check::at_most("N rescaling identity", worst_r, N_TOL));
    Ok(rep.finish())
}

/// Domains checked by the normalization certificate.
pub fn normalization_domains() -> Vec<DomainSpec> {
    vec![
        DomainSpec::default(),
        DomainSpec::Ellipse {
            center: Point::new(0.3, -0.2),
            a: 2.0,
            b: 0.5,
        },
        DomainSpec::Rectangle {
            lo: Point::new(-1.0, -0.25),
            hi: Point::new(1.0, 0.25),
        },
        DomainSpec::HalfDisk { radius: 1.0 },
        DomainSpec::Polygon(vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.5, 1.0)]),
    ]
}

pub const NORMALIZATION_TOL: f64 = 1e-6;
const GROWTH_MESH: usize = 256;
const RESOLVED_CELLS: f64 = 2.0;

fn quad_hessian_max(m: &Matrix2<f64>) -> f64 {
    Sym2::new(m[(0, 0)], m[(0, 1)], m[(1, 1)]).eigenvalues().1
}
const ENGULFING_SAMPLES: usize = 24;

/// Random triples `(x, t, y)` with `y ∈ S(x, t)` drawn from the grid.
pub fn random_triples(phi: &ConvexPotential, count: usize, seed: u64) -> Result<Vec<(Point, f64, Point)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = phi.domain();
    let grid = d.grid();
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&k| d.mask()[k] && d.depth(grid.point(k)) > 0.25 * d.inradius())
        .collect();
    if nodes.is_empty() {
        return Err(Error::DegenerateDomain("no deep nodes".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let x = grid.point(nodes[rng.random_range(0..nodes.len())]);
        let top = maximal_interior_height(phi, x)?;
        let t = top * rng.random_range(0.1..0.9);
        let s = Support::at(phi, x)?;
        let psi = excess(phi, &s);
        let inside: Vec<usize> = (0..psi.len()).filter(|&k| psi[k] < t).collect();
        if inside.is_empty() {
            continue;
        }
        let y = grid.point(inside[rng.random_range(0..inside.len())]);
        out.push((x, t, y));
    }
    Ok(out)
}

pub fn geometry_report(ctx: &SuiteContext) -> Result<EstimateReport> {
    let mut rep = EstimateReport::new("geometry");
    rep.tolerance = ctx.tolerance;

    let mut all_certified = true;
    for d in normalization_domains() {
        let n = normalize_domain(&d.build(64)?)?;
        let ok = n.certified(NORMALIZATION_TOL);
        all_certified &= ok;
        rep.metric(format!("normalization inner radius {d}"), n.inner_radius);
        rep.metric(format!("normalization outer radius {d}"), n.outer_radius);
    }
    rep.check(Check::at_least("normalization certified", if all_certified { 1.0 } else { 0.0 }, 1.0));

    // Volume growth of |x|^2/2 and of a det-one quadratic.
    let mesh = ctx.finest_mesh().min(GROWTH_MESH);
    let dom = Arc::new(ctx.domain.build(mesh)?);
    let iso = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), dom.clone(), None)?;
    let m = invariance_matrix().transpose() * invariance_matrix();
    let quad = ConvexPotential::analytic(
        AnalyticPotential::quadratic(Sym2::new(m[(0, 0)], m[(0, 1)], m[(1, 1)])),
        dom.clone(),
        None,
    )?;
    let x = dom.incenter();
    let top = maximal_interior_height(&quad, x)?.min(maximal_interior_height(&iso, x)?);
    let ladder = height_ladder(dom.h(), top);
    let gi = volume_growth_scan(&iso, x, &ladder)?;
    let gq = volume_growth_scan(&quad, x, &ladder)?;
    // Compare only sections whose narrow semi-axis `sqrt(2t / lambda_max)` spans
    // RESOLVED_CELLS cells; below that the piecewise-linear area is off by O(h^2/t).
    let lambda_max = quad_hessian_max(&m);
    let mut vol_defect: f64 = 0.0;
    for (t, v) in gq.heights.iter().zip(&gq.volumes) {
        if (2.0 * t / lambda_max).sqrt() < RESOLVED_CELLS * dom.h() {
            continue;
        }
        if let Some(i) = gi.heights.iter().position(|s| s == t) {
            vol_defect = vol_defect.max(rel(*v, gi.volumes[i]));
        }
    }
    rep.metric("isotropic growth slope", gi.slope);
    rep.metric("det-one quadratic growth slope", gq.slope);
    rep.metric("det-one quadratic volume defect", vol_defect);
    rep.check(Check::at_most("isotropic slope - 1", (gi.slope - 1.0).abs(), GROWTH_SLOPE_TOL));
    rep.check(Check::at_most("det-one quadratic slope - 1", (gq.slope - 1.0).abs(), GROWTH_SLOPE_TOL));
    rep.check(Check::at_most("det-one quadratic volume vs isotropic", vol_defect, GROWTH_VOLUME_TOL));

    // Family: growth slopes, separation and engulfing per mesh.
    let mut slope_ok = true;
    let mut monotone = true;
    let mut thetas: Vec<(String, Vec<f64>)> = Vec::new();
    for &mesh in &ctx.meshes {
        for phi in ctx.potentials(mesh)? {
            let z = phi.domain().grid().point(phi.minimizer());
            let top = maximal_interior_height(&phi, z)?;
            let g = volume_growth_scan(&phi, z, &height_ladder(phi.h(), top))?;
            let in_band = g.slope >= FAMILY_SLOPE_BAND.0 && g.slope <= FAMILY_SLOPE_BAND.1;
            slope_ok &= in_band;
            rep.metric(format!("growth slope {} mesh={mesh}", phi.label()), g.slope);

            let triples = random_triples(&phi, ENGULFING_SAMPLES, ctx.seed)?;
            let mut running = Vec::with_capacity(triples.len());
            for k in 1..=triples.len() {
                running.push(crate::section::engulfing_constant(&phi, &triples[..k])?);
            }
            monotone &= running.windows(2).all(|w| w[1] >= w[0]);
            let theta = running.last().copied().unwrap_or(1.0);
            rep.push(
                Trial::new("geometry", "engulfing", phi.label(), mesh)
                    .ratio(theta, 1.0)
                    .verdict(in_band && theta >= 1.0 - 1e-12),
            );
            match thetas.iter_mut().find(|(l, _)| *l == phi.label()) {
                Some((_, v)) => v.push(theta),
                None => thetas.push((phi.label().to_string(), vec![theta])),
            }
        }
    }
    rep.check(Check::at_least("family growth slopes in band", if slope_ok { 1.0 } else { 0.0 }, 1.0));
    rep.check(Check::at_least("engulfing monotone in the sample set", if monotone { 1.0 } else { 0.0 }, 1.0));
    for (label, v) in &thetas {
        rep.metric(format!("engulfing spread {label}"), spread(v));
        rep.stability.push(v.iter().copied().fold(0.0, f64::max));
    }

    // Quadratic separation: exact for |x|^2/2, logged for a solved potential on the square.
    let sep = check_quadratic_separation(&iso, 0.5)?;
    rep.check(Check::at_most("isotropic separation ratio - 1/2", (sep.min_ratio - 0.5).abs().max((sep.max_ratio - 0.5).abs()), 1e-9));
    let square = Arc::new(DomainSpec::Rectangle {
        lo: Point::new(-1.0, -1.0),
        hi: Point::new(1.0, 1.0),
    }
    .build(64)?);
    let data = FieldSpec::Quadratic {
        c: 0.0,
        m: [1.0, 0.0, 1.0],
        x0: Point::zeros(),
    };
    let solved = solved_potential(square, &FieldSpec::Const(1.0), &data)?;
    let s = check_quadratic_separation(&solved, FAMILY_PINCHING.0)?;
    rep.metric("solved square separation min", s.min_ratio);
    rep.metric("solved square separation max", s.max_ratio);
    rep.note(format!(
        "solved det=1 on the square with |x|^2/2 data: separation ratios [{:.4}, {:.4}], rho={} {}",
        s.min_ratio,
        s.max_ratio,
        s.rho,
        if s.pass { "passes" } else { "fails" }
    ));
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::nfunctional::n_functional;

    fn disk(mesh: usize) -> Arc<ConvexDomain> {
        Arc::new(DomainSpec::default().build(mesh).unwrap())
    }

    #[test]
    fn composed_quadratic_matches_closed_form() {
        let d = disk(32);
        let phi = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d, None).unwrap();
        let a = invariance_matrix();
        let c = compose_unimodular(&phi, a, 64).unwrap();
        let m = a.transpose() * a;
        let g = c.potential.domain().grid();
        for k in 0..g.len() {
            if c.potential.domain().mask()[k] {
                let y = g.point(k);
                let exact = 0.5 * (y.transpose() * m * y)[(0, 0)];
                assert!((c.potential.values()[k] - exact).abs() < 1e-12);
            }
        }
        // supports map to supports of the composition
        let s = Support::at(&phi, Point::new(0.2, 0.1)).unwrap();
        let s2 = c.support(&s).unwrap();
        let expect = m * s2.x;
        assert!((s2.gradient - expect).norm() < 1e-12);
    }

    #[test]
    fn non_unimodular_map_rejected() {
        let phi = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), disk(16), None).unwrap();
        assert!(compose_unimodular(&phi, Matrix2::new(2.0, 0.0, 0.0, 1.0), 32).is_err());
    }

    #[test]
    fn engulfing_of_identical_points_is_one() {
        let phi = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), disk(48), None).unwrap();
        let s = Support::at(&phi, Point::zeros()).unwrap();
        let th = engulfing_from_supports(&phi, &[(s, 0.1, s)]);
        assert!(th <= 1.0 && th > 0.9, "{th}");
    }

    #[test]
    fn isotropic_engulfing_below_four() {
        // brute force over pairs inside one ball section
        let phi = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), disk(48), None).unwrap();
        let tr = random_triples(&phi, 12, 3).unwrap();
        let th = crate::section::engulfing_constant(&phi, &tr).unwrap();
        assert!((1.0..=4.0).contains(&th), "{th}");
    }

    #[test]
    fn n_from_support_of_constant() {
        let phi = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), disk(32), None).unwrap();
        let spec = NFunctionalSpec::new(0.5, 1.5, 1.0).unwrap();
        let f = vec![3.0; phi.domain().grid().len()];
        let s = Support::at(&phi, Point::zeros()).unwrap();
        let v = n_from_support(&phi, &f, &spec, &s, 0.16).unwrap();
        assert!((v - 3.0 * 0.16f64.powf(0.25)).abs() < 1e-12);
        let direct = n_functional(&phi, &f, &spec, Point::zeros(), 0.16).unwrap();
        assert!((v - direct).abs() < 1e-12);
    }
}
