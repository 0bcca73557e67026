//! Damped Newton solver for the Dirichlet problem `det D^2 phi = g`.

use std::sync::Arc;

use super::{discrete_hessian, ConvexPotential, PointFn, Sym2, CONVEXITY_TOL};
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::linalg::Factorization;
use crate::lma::nondivergence_system;
use crate::stencil::Region;

#[derive(Clone, Debug)]
pub struct MongeAmpereOptions {
    /// Stop when `max |det D_h^2 phi - g| <= tol`.
    pub tol: f64,
    pub max_steps: usize,
    /// Eigenvalue floor of the Hessian used in the linearization.
    pub convexity_floor: f64,
    /// Armijo constant on the squared residual norm.
    pub armijo: f64,
}

impl Default for MongeAmpereOptions {
    fn default() -> Self {
        MongeAmpereOptions {
            tol: 1e-8,
            max_steps: 200,
            convexity_floor: 1e-6,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct NewtonReport {
    pub steps: usize,
    /// Max-norm residual before each step (last entry is the final residual).
    pub residual_history: Vec<f64>,
}

pub fn solve_monge_ampere(domain: Arc<ConvexDomain>, g: &ScalarField, boundary: PointFn) -> Result<ConvexPotential> {
    solve_monge_ampere_with(domain, g, boundary, &MongeAmpereOptions::default()).map(|(p, _)| p)
}

pub fn solve_monge_ampere_with(
    domain: Arc<ConvexDomain>,
    g: &ScalarField,
    boundary: PointFn,
    opts: &MongeAmpereOptions,
) -> Result<(ConvexPotential, NewtonReport)> {
    let region = Arc::new(Region::of_domain(&domain));
    let grid = domain.grid().clone();
    let n = region.len();
    let gv: Vec<f64> = region.nodes().iter().map(|&k| g.values[k]).collect();
    if gv.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::PinchingViolated {
            lo: gv.iter().copied().fold(f64::INFINITY, f64::min),
            hi: gv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            lambda: 0.0,
            big_lambda: f64::INFINITY,
        });
    }
    let bfn = boundary.clone();
    let bd = move |p| bfn(p);

    let mut values: Vec<f64> = (0..grid.len())
        .map(|k| if domain.mask()[k] { boundary(grid.point(k)) } else { f64::NAN })
        .collect();

    // Initial guess: Laplace phi = 2 sqrt(g), the isotropic guess.
    let (lap, lap_b) = nondivergence_system(&region, &vec![Sym2::identity(); n], &bd);
    let rhs: Vec<f64> = (0..n).map(|i| 2.0 * gv[i].sqrt() - lap_b[i]).collect();
    let u0 = Factorization::general(&lap)?.solve(&rhs)?;
    for i in 0..n {
        values[region.node(i)] = u0[i];
    }

    let residual = |vals: &[f64]| -> Vec<f64> {
        let hs = discrete_hessian(&region, vals, &bd);
        hs.values.iter().zip(&gv).map(|(h, g)| h.det() - g).collect()
    };
    let norm2 = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let maxabs = |r: &[f64]| r.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let mut report = NewtonReport::default();
    let mut r = residual(&values);
    loop {
        let rmax = maxabs(&r);
        report.residual_history.push(rmax);
        if rmax <= opts.tol {
            break;
        }
        if report.steps >= opts.max_steps {
            return Err(Error::NoConvergence {
                what: "Monge-Ampere Newton".into(),
                iterations: report.steps,
                residual: rmax,
                history: report.residual_history,
            });
        }
        let hs = discrete_hessian(&region, &values, &bd);
        let coeffs: Vec<Sym2> = hs.values.iter().map(|h| h.project(opts.convexity_floor).cofactor()).collect();
        let (jac, _) = nondivergence_system(&region, &coeffs, &bd);
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = Factorization::general(&jac)?.solve(&neg)?;

        let r2 = norm2(&r);
        let mut alpha = 1.0;
        loop {
            let mut trial = values.clone();
            for i in 0..n {
                trial[region.node(i)] += alpha * delta[i];
            }
            let rt = residual(&trial);
            if norm2(&rt) <= (1.0 - 2.0 * opts.armijo * alpha) * r2 {
                values = trial;
                r = rt;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(Error::NoConvergence {
                    what: "Monge-Ampere line search".into(),
                    iterations: report.steps,
                    residual: rmax,
                    history: report.residual_history,
                });
            }
        }
        report.steps += 1;
    }

    let hs = discrete_hessian(&region, &values, &bd);
    if hs.min_directional < -CONVEXITY_TOL {
        return Err(Error::NonConvexIterate(format!(
            "second difference {:e} after convergence",
            hs.min_directional
        )));
    }
    let gmin = gv.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = gv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pot = ConvexPotential::from_parts(domain, values, boundary, g.clone(), (gmin, gmax), "solved");
    Ok((pot, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{fit_order, Point};

    fn disk(mesh: usize) -> Arc<ConvexDomain> {
        Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh).unwrap())
    }

    #[test]
    fn constant_density_on_disk_gives_paraboloid() {
        for (gval, c) in [(1.0, 0.5), (4.0, 1.0)] {
            let d = disk(32);
            let g = ScalarField::from_fn(d.grid(), d.mask(), |_| gval);
            let exact = move |x: Point| c * (x.norm_squared() - 1.0);
            let (p, rep) = solve_monge_ampere_with(d.clone(), &g, Arc::new(exact), &Default::default()).unwrap();
            assert!(rep.steps < 30);
            // zero data on the 360-gon differs from the disk solution by O(1/360^2)
            let p0 = solve_monge_ampere(d.clone(), &g, Arc::new(|_| 0.0)).unwrap();
            for k in 0..d.grid().len() {
                if d.mask()[k] {
                    let x = d.grid().point(k);
                    assert!((p.values()[k] - exact(x)).abs() < 1e-8);
                    assert!((p0.values()[k] - exact(x)).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn residual_history_decreases() {
        let d = disk(24);
        let g = ScalarField::from_fn(d.grid(), d.mask(), |x| 1.0 + 0.5 * x.x);
        let (p, rep) = solve_monge_ampere_with(d, &g, Arc::new(|_| 0.0), &Default::default()).unwrap();
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * 1.0001 + 1e-14 || w[1] < 1e-8);
        }
        assert!(p.is_discretely_convex(CONVEXITY_TOL));
    }

    #[test]
    fn manufactured_solution_converges_second_order() {
        let exact = |x: Point| 0.5 * x.norm_squared() + 0.05 * (x.x.powi(4) + x.y.powi(4));
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for mesh in [16, 32, 64] {
            let d = disk(mesh);
            let g = ScalarField::from_fn(d.grid(), d.mask(), |x| (1.0 + 0.6 * x.x * x.x) * (1.0 + 0.6 * x.y * x.y));
            let p = solve_monge_ampere(d.clone(), &g, Arc::new(exact)).unwrap();
            let e = (0..d.grid().len())
                .filter(|&k| d.mask()[k])
                .map(|k| (p.values()[k] - exact(d.grid().point(k))).abs())
                .fold(0.0, f64::max);
            errs.push(e);
            hs.push(d.h());
        }
        let order = fit_order(&hs, &errs);
        assert!(order >= 1.8, "order {order}, errors {errs:?}");
    }

    #[test]
    fn comparison_principle() {
        let d = disk(24);
        let g1 = ScalarField::from_fn(d.grid(), d.mask(), |x| 1.5 + 0.2 * x.y);
        let g2 = ScalarField::from_fn(d.grid(), d.mask(), |x| 1.0 + 0.2 * x.y);
        let p1 = solve_monge_ampere(d.clone(), &g1, Arc::new(|_| 0.0)).unwrap();
        let p2 = solve_monge_ampere(d.clone(), &g2, Arc::new(|_| 0.0)).unwrap();
        for k in 0..d.grid().len() {
            if d.mask()[k] {
                assert!(p1.values()[k] <= p2.values()[k] + 1e-8);
            }
        }
    }
}
