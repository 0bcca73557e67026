//! `N_{phi,f,q,r}(z) = r^{(1-alpha)/2} (avg_{S(z,r)} |f|^q)^{1/q}` and its supremum over heights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::potential::ConvexPotential;
use crate::section::{excess, height_ladder, SectionProfile, Support};

use super::exponents::{validate_alpha, N};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NFunctionalSpec {
    pub alpha: f64,
    pub q: f64,
    /// Height cap of the supremum.
    pub r0: f64,
}

impl NFunctionalSpec {
    pub fn new(alpha: f64, q: f64, r0: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        if q <= N / 2.0 {
            return Err(Error::ExponentOutOfRange(format!("q = {q} must exceed n/2")));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Config(format!("height cap r0 = {r0} must be positive and finite")));
        }
        Ok(NFunctionalSpec { alpha, q, r0 })
    }

    /// `r^{(1-alpha)/2}`.
    pub fn weight(&self, r: f64) -> f64 {
        r.powf(0.5 * (1.0 - self.alpha))
    }

    /// Ladder `4h^2 2^k` below `r0`, with `r0` appended.
    pub fn heights(&self, h: f64) -> Vec<f64> {
        let mut l = height_ladder(h, self.r0);
        if l.last().is_none_or(|&t| t < self.r0 * (1.0 - 1e-12)) {
            l.push(self.r0);
        }
        l
    }
}

/// Single-height value at an arbitrary point `z`; `f` holds nodal values.
pub fn n_functional(potential: &ConvexPotential, f: &[f64], spec: &NFunctionalSpec, z: Point, r: f64) -> Result<f64> {
    let s = Support::at(potential, z)?;
    let psi = excess(potential, &s);
    let (mut sum, mut n) = (0.0, 0usize);
    for (k, &p) in psi.iter().enumerate() {
        if p < r {
            sum += f[k].abs().powf(spec.q);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptySection(r));
    }
    Ok(spec.weight(r) * (sum / n as f64).powf(1.0 / spec.q))
}

/// Supremum over the height ladder up to `r0`.
pub fn n_functional_sup(potential: &ConvexPotential, f: &[f64], spec: &NFunctionalSpec, z: Point) -> Result<f64> {
    let mut best: Option<f64> = None;
    for r in spec.heights(potential.h()) {
        match n_functional(potential, f, spec, z, r) {
            Ok(v) => best = Some(best.map_or(v, |b: f64| b.max(v))),
            Err(Error::EmptySection(_)) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::EmptySection(spec.r0))
}

/// Section averages `avg_{S(x,t)} |f|^q` for every ladder height, from one sorted profile.
pub fn profile_averages(profile: &SectionProfile, f: &[f64], q: f64, heights: &[f64]) -> Vec<Option<f64>> {
    let mut prefix = Vec::with_capacity(profile.nodes.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &k in &profile.nodes {
        acc += f[k].abs().powf(q);
        prefix.push(acc);
    }
    heights
        .iter()
        .map(|&t| {
            let c = profile.count_below(t);
            (c > 0).then(|| prefix[c] / c as f64)
        })
        .collect()
}

/// Supremum variant at each of `nodes`, in parallel.
pub fn n_field(potential: &ConvexPotential, f: &[f64], spec: &NFunctionalSpec, nodes: &[usize]) -> Vec<f64> {
    let heights = spec.heights(potential.h());
    nodes
        .par_iter()
        .map(|&k| {
            let prof = SectionProfile::at_node(potential, k, spec.r0);
            profile_averages(&prof, f, spec.q, &heights)
                .into_iter()
                .zip(&heights)
                .filter_map(|(a, &t)| a.map(|a| spec.weight(t) * a.powf(1.0 / spec.q)))
                .fold(0.0, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::potential::AnalyticPotential;
    use std::sync::Arc;

    fn iso(mesh: usize) -> ConvexPotential {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, mesh).unwrap());
        ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d, None).unwrap()
    }

    #[test]
    fn constant_and_zero_data() {
        let p = iso(32);
        let spec = NFunctionalSpec::new(0.3, 1.5, 0.2).unwrap();
        let ones = vec![1.0; p.domain().grid().len()];
        let v = n_functional(&p, &ones, &spec, Point::zeros(), 0.1).unwrap();
        assert!((v - 0.1f64.powf(0.35)).abs() < 1e-14);
        let zeros = vec![0.0; ones.len()];
        assert_eq!(n_functional(&p, &zeros, &spec, Point::zeros(), 0.1).unwrap(), 0.0);
        assert!(matches!(
            n_functional(&p, &ones, &spec, Point::new(0.013, 0.0), 0.0),
            Err(Error::EmptySection(_))
        ));
    }

    #[test]
    fn homogeneous_in_f() {
        let p = iso(32);
        let spec = NFunctionalSpec::new(0.3, 1.5, 0.2).unwrap();
        let g = p.domain().grid();
        let f: Vec<f64> = (0..g.len()).map(|k| g.point(k).x.sin() + 0.3).collect();
        let f3: Vec<f64> = f.iter().map(|v| -3.0 * v).collect();
        let a = n_functional_sup(&p, &f, &spec, Point::new(0.1, 0.2)).unwrap();
        let b = n_functional_sup(&p, &f3, &spec, Point::new(0.1, 0.2)).unwrap();
        assert!((b - 3.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn radial_singularity_matches_quadrature() {
        // S(0, r) = B_R with R = sqrt(2r); avg of |x|^{-3/4} over B_R is (8/5) R^{-3/4}.
        let p = iso(256);
        let spec = NFunctionalSpec::new(0.3, 1.5, 0.5).unwrap();
        let g = p.domain().grid();
        let h = g.h;
        let f: Vec<f64> = (0..g.len()).map(|k| g.point(k).norm().max(h).powf(-0.5)).collect();
        let r = 0.2;
        let big_r = (2.0 * r as f64).sqrt();
        let exact = spec.weight(r) * (1.6 * big_r.powf(-0.75)).powf(1.0 / 1.5);
        let v = n_functional(&p, &f, &spec, Point::zeros(), r).unwrap();
        assert!((v - exact).abs() <= 0.05 * exact, "{v} vs {exact}");
    }

    #[test]
    fn field_matches_pointwise_sup() {
        let p = iso(32);
        let spec = NFunctionalSpec::new(0.5, 2.0, 0.3).unwrap();
        let g = p.domain().grid();
        let f: Vec<f64> = (0..g.len()).map(|k| 1.0 + g.point(k).x).collect();
        let k = g.nearest(Point::new(0.25, -0.125)).unwrap();
        let a = n_field(&p, &f, &spec, &[k])[0];
        let b = n_functional_sup(&p, &f, &spec, g.point(k)).unwrap();
        assert!((a - b).abs() <= 1e-12 * b, "{a} {b}");
    }
}
