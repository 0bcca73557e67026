use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField};
use crate::linalg::{Factorization, SparseMatrix};
use crate::potential::{CofactorField, Sym2};
use crate::stencil::{Arm, BoundaryData, Region};

/// How the mixed coefficient is split over the two diagonals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CrossScheme {
    /// Symmetric four-point corner scheme: diagonal weights `+Phi12`, `-Phi12`.
    #[default]
    Corner,
    /// Adds `|Phi12|` to both diagonals and removes it from the axes; an
    /// M-matrix whenever `Phi` is diagonally dominant.
    Dominant,
}

/// Directional weights `w` with `Phi = sum_k w_k e_k e_k^T` over x, y, (1,1)/sqrt2, (1,-1)/sqrt2.
pub fn directional_weights(m: &Sym2, scheme: CrossScheme) -> [f64; 4] {
    let c = match scheme {
        CrossScheme::Corner => 0.0,
        CrossScheme::Dominant => m.xy.abs(),
    };
    [m.xx - c, m.yy - c, c + m.xy, c - m.xy]
}

/// Symmetric divergence-form discretization of `-d_i(Phi^{ij} d_j u)` with
/// Dirichlet elimination.
pub struct LinearizedOperator {
    region: Arc<Region>,
    matrix: SparseMatrix,
    /// Per unknown: `(coefficient, boundary arm)` couplings eliminated into the rhs.
    couplings: Vec<Vec<(f64, Arm)>>,
    coefficients: Vec<Sym2>,
    factor: OnceLock<std::result::Result<Arc<Factorization>, Error>>,
}

impl LinearizedOperator {
    /// Assembles on the cofactor field's own region.
    pub fn assemble(cof: &CofactorField, scheme: CrossScheme) -> Result<Self> {
        Self::assemble_on(cof, cof.region.clone(), scheme)
    }

    /// Assembles on `region`, which must be a sub-region of the cofactor's region.
    pub fn assemble_on(cof: &CofactorField, region: Arc<Region>, scheme: CrossScheme) -> Result<Self> {
        let n = region.len();
        let h = region.grid().h;
        let mut coefficients = Vec::with_capacity(n);
        for i in 0..n {
            let k = region.node(i);
            let m = cof
                .at_node(k)
                .ok_or_else(|| Error::GeometryUnsupported(format!("no cofactor at node {k}")))?;
            let (lo, _) = m.eigenvalues();
            if lo < -1e-8 * m.norm().max(1.0) {
                return Err(Error::NotPsd { node: k, eig: lo });
            }
            coefficients.push(m);
        }
        let weights: Vec<[f64; 4]> = coefficients.iter().map(|m| directional_weights(m, scheme)).collect();
        let mut t = Vec::with_capacity(9 * n);
        let mut couplings = vec![Vec::new(); n];
        for i in 0..n {
            let arms = region.arms(i);
            for k in 0..4 {
                let l2 = if k < 2 { 1.0 } else { 2.0 } * h * h;
                for arm in [&arms[2 * k], &arms[2 * k + 1]] {
                    match *arm {
                        Arm::Node(j) => {
                            let kappa = 0.5 * (weights[i][k] + weights[j][k]) / l2;
                            if kappa != 0.0 {
                                t.push((i, i, kappa));
                                t.push((i, j, -kappa));
                            }
                        }
                        Arm::Boundary { frac, node, .. } => {
                            // A subdomain edge through an interior node keeps the averaged weight,
                            // so restricting a solution to a subdomain reproduces it.
                            let w = match node.and_then(|q| cof.at_node(q)) {
                                Some(m) if frac == 1.0 => 0.5 * (weights[i][k] + directional_weights(&m, scheme)[k]),
                                _ => weights[i][k],
                            };
                            let kappa = w / (frac * l2);
                            if kappa != 0.0 {
                                t.push((i, i, kappa));
                                couplings[i].push((kappa, *arm));
                            }
                        }
                    }
                }
            }
        }
        Ok(LinearizedOperator {
            region,
            matrix: SparseMatrix::from_triplets(n, t),
            couplings,
            coefficients,
            factor: OnceLock::new(),
        })
    }

    pub fn region(&self) -> &Arc<Region> {
        &self.region
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn coefficients(&self) -> &[Sym2] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.region.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region.is_empty()
    }

    /// Eliminated boundary terms `sum kappa g(arm)` per unknown.
    pub fn boundary_terms(&self, bd: &dyn BoundaryData) -> Vec<f64> {
        self.couplings
            .iter()
            .map(|c| {
                c.iter()
                    .map(|(kappa, arm)| match *arm {
                        Arm::Boundary { point, node, .. } => kappa * bd.value(point, node),
                        Arm::Node(_) => 0.0,
                    })
                    .sum()
            })
            .collect()
    }

    /// `L_h u` at every unknown, approximating `-Phi^{ij} u_ij`.
    pub fn apply(&self, values: &[f64], bd: &dyn BoundaryData) -> Vec<f64> {
        let x: Vec<f64> = self.region.nodes().iter().map(|&k| values[k]).collect();
        let ax = self.matrix.matvec(&x);
        let b = self.boundary_terms(bd);
        ax.iter().zip(&b).map(|(a, b)| a - b).collect()
    }

    /// Cached factorization (Cholesky, LU fallback, CG for very large systems).
    pub fn factorization(&self) -> Result<Arc<Factorization>> {
        self.factor
            .get_or_init(|| Factorization::symmetric(&self.matrix).map(Arc::new))
            .clone()
    }

    /// Solves `Phi^{ij} u_ij = f` with `u = g` on the boundary.
    pub fn solve(&self, f: &dyn Fn(usize) -> f64, bd: &dyn BoundaryData) -> Result<ScalarField> {
        Ok(self.solve_many(&[f], bd)?.pop().unwrap())
    }

    pub fn solve_many(&self, fs: &[&dyn Fn(usize) -> f64], bd: &dyn BoundaryData) -> Result<Vec<ScalarField>> {
        let b = self.boundary_terms(bd);
        let rhs: Vec<Vec<f64>> = fs
            .iter()
            .map(|f| (0..self.len()).map(|i| -f(self.region.node(i)) + b[i]).collect())
            .collect();
        let sols = self.factorization()?.solve_many(&rhs)?;
        Ok(sols.into_iter().map(|s| self.to_field(&s, bd)).collect())
    }

    /// Unknown vector to a nodal field, boundary data on the remaining domain nodes.
    pub fn to_field(&self, x: &[f64], bd: &dyn BoundaryData) -> ScalarField {
        let grid = self.region.grid();
        let mask = self.region.domain_mask();
        let mut v = vec![f64::NAN; grid.len()];
        for k in 0..grid.len() {
            if mask[k] {
                v[k] = match self.region.unknown_of(k) {
                    Some(i) => x[i],
                    None => bd.value(grid.point(k), Some(k)),
                };
            }
        }
        ScalarField::new(grid.clone(), v)
    }
}

/// Dirichlet problem `Phi^{ij} u_ij = f`, `u = g` on the boundary.
pub struct DirichletProblem<'a> {
    pub operator: &'a LinearizedOperator,
    pub rhs: &'a ScalarField,
    pub boundary: &'a dyn BoundaryData,
}

pub fn solve_dirichlet(problem: &DirichletProblem<'_>) -> Result<ScalarField> {
    let f = &problem.rhs.values;
    if problem.operator.region.nodes().iter().any(|&k| !f[k].is_finite()) {
        return Err(Error::Config("rhs not finite on the region".into()));
    }
    problem.operator.solve(&|k| f[k], problem.boundary)
}

/// Matrix `M` and boundary vector `b` with `(M u)_i + b_i = sum A^{ij} D_ij u`
/// (three-point second differences, mixed term via diagonals).
pub fn nondivergence_system(region: &Region, coeffs: &[Sym2], bd: &dyn BoundaryData) -> (SparseMatrix, Vec<f64>) {
    let n = region.len();
    let mut t = Vec::with_capacity(9 * n);
    let mut b = vec![0.0; n];
    for i in 0..n {
        let a = &coeffs[i];
        let w = [a.xx, a.yy, a.xy, -a.xy];
        let arms = region.arms(i);
        for k in 0..4 {
            if w[k] == 0.0 {
                continue;
            }
            let (cp, cm, c0) = region.second_difference_weights(i, k);
            t.push((i, i, w[k] * c0));
            for (arm, c) in [(&arms[2 * k], cp), (&arms[2 * k + 1], cm)] {
                match *arm {
                    Arm::Node(j) => t.push((i, j, w[k] * c)),
                    Arm::Boundary { point, node, .. } => b[i] += w[k] * c * bd.value(point, node),
                }
            }
        }
    }
    (SparseMatrix::from_triplets(n, t), b)
}

/// `sum A^{ij} D_ij u` per unknown with three-point differences.
pub fn nondivergence_apply(region: &Region, coeffs: &[Sym2], values: &[f64], bd: &dyn BoundaryData) -> Vec<f64> {
    (0..region.len())
        .map(|i| {
            let d = region.second_differences(i, values, bd);
            let a = &coeffs[i];
            a.xx * d[0] + a.yy * d[1] + a.xy * (d[2] - d[3])
        })
        .collect()
}

/// Convenience: boundary data from a closure.
pub fn closure_data(f: impl Fn(Point) -> f64 + Sync) -> impl BoundaryData {
    move |p: Point| f(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::grid::fit_order;
    use crate::potential::{AnalyticPotential, ConvexPotential};

    fn potential(a: AnalyticPotential, mesh: usize) -> ConvexPotential {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh).unwrap());
        ConvexPotential::analytic(a, d, None).unwrap()
    }

    #[test]
    fn identity_cofactor_gives_five_point_laplacian() {
        let d = Arc::new(ConvexDomain::rectangle(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 8).unwrap());
        let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d.clone(), None).unwrap();
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        let h2 = d.h() * d.h();
        let a = op.matrix();
        for i in 0..op.len() {
            let row: Vec<(usize, f64)> = a.row(i).filter(|(_, v)| v.abs() * h2 > 1e-12).collect();
            assert!(row.len() <= 5);
            assert!((a.get(i, i) * h2 - 4.0).abs() < 1e-9);
            for (j, v) in row {
                if j != i {
                    assert!((v * h2 + 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn anisotropic_weights() {
        let d = Arc::new(ConvexDomain::rectangle(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 8).unwrap());
        let p = ConvexPotential::analytic(AnalyticPotential::quadratic(Sym2::new(4.0, 0.0, 0.25)), d.clone(), None)
            .unwrap();
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        let h2 = d.h() * d.h();
        let k = d.grid().nearest(Point::zeros()).unwrap();
        let i = op.region().unknown_of(k).unwrap();
        let east = op.region().unknown_of(d.grid().offset(k, 1, 0).unwrap()).unwrap();
        let north = op.region().unknown_of(d.grid().offset(k, 0, 1).unwrap()).unwrap();
        assert!((op.matrix().get(i, east) * h2 + 0.25).abs() < 1e-12);
        assert!((op.matrix().get(i, north) * h2 + 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_exact_on_affine_data() {
        let p = potential(AnalyticPotential::perturbed(0.05), 32);
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        assert!(op.matrix().symmetry_defect() < 1e-14);
        let q = potential(AnalyticPotential::quadratic(Sym2::new(2.0, 0.4, 0.7)), 32);
        let opq = LinearizedOperator::assemble(&q.cofactor(), CrossScheme::Corner).unwrap();
        let aff = |x: Point| 0.3 + 1.7 * x.x - 0.4 * x.y;
        let g = q.domain().grid();
        let vals: Vec<f64> = (0..g.len()).map(|k| aff(g.point(k))).collect();
        let r = opq.apply(&vals, &aff);
        assert!(r.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn poisson_on_disk() {
        let p = potential(AnalyticPotential::isotropic(1.0), 64);
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        let u = op.solve(&|_| 1.0, &|_: Point| 0.0).unwrap();
        let g = p.domain().grid();
        let err = (0..g.len())
            .filter(|&k| p.domain().mask()[k])
            .map(|k| (u.values[k] - (g.point(k).norm_squared() - 1.0) / 4.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn affine_boundary_data_reproduced_exactly() {
        let p = potential(AnalyticPotential::quadratic(Sym2::new(1.5, 0.3, 0.8)), 32);
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        let aff = |x: Point| 1.0 - 0.5 * x.x + 2.0 * x.y;
        let u = op.solve(&|_| 0.0, &aff).unwrap();
        let g = p.domain().grid();
        for k in 0..g.len() {
            if p.domain().mask()[k] {
                assert!((u.values[k] - aff(g.point(k))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        let m = Sym2::new(1.6, 0.3, 0.7);
        let ustar = |x: Point| (std::f64::consts::PI * x.x).sin() * (std::f64::consts::PI * x.y).sin();
        let pi2 = std::f64::consts::PI.powi(2);
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for mesh in [16, 32, 64] {
            let p = potential(AnalyticPotential::quadratic(m), mesh);
            let cof = m.cofactor();
            let f = move |x: Point| {
                let (s1, c1) = (std::f64::consts::PI * x.x).sin_cos();
                let (s2, c2) = (std::f64::consts::PI * x.y).sin_cos();
                let d2 = Sym2::new(-pi2 * s1 * s2, pi2 * c1 * c2, -pi2 * s1 * s2);
                cof.frobenius(&d2)
            };
            let g = p.domain().grid().clone();
            let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
            let u = op.solve(&|k| f(g.point(k)), &ustar).unwrap();
            let e = (0..g.len())
                .filter(|&k| p.domain().mask()[k])
                .map(|k| (u.values[k] - ustar(g.point(k))).abs())
                .fold(0.0, f64::max);
            errs.push(e);
            hs.push(g.h);
        }
        assert!(fit_order(&hs, &errs) > 1.8, "{errs:?}");
    }

    #[test]
    fn action_consistent_with_nondivergence_form() {
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        let u = |x: Point| (x.x + 0.5 * x.y).sin() + x.x * x.y * x.y;
        let d2u = |x: Point| {
            let s = (x.x + 0.5 * x.y).sin();
            Sym2::new(-s, -0.5 * s + 2.0 * x.y, -0.25 * s + 2.0 * x.x)
        };
        for mesh in [32, 64, 128] {
            let p = potential(AnalyticPotential::perturbed(0.05), mesh);
            let a = p.analytic_form().unwrap().clone();
            let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
            let g = p.domain().grid().clone();
            let vals: Vec<f64> = (0..g.len()).map(|k| u(g.point(k))).collect();
            let r = op.apply(&vals, &u);
            let deep = p.deep_interior(3.0);
            let mut e = 0.0f64;
            for i in 0..op.len() {
                let k = op.region().node(i);
                if deep[k] {
                    let x = g.point(k);
                    let exact = -a.hessian(x).cofactor().frobenius(&d2u(x));
                    e = e.max((r[i] - exact).abs());
                }
            }
            errs.push(e);
            hs.push(g.h);
        }
        assert!(fit_order(&hs, &errs) > 1.8, "{errs:?}");
    }
}
