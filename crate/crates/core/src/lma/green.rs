use crate::error::{Error, Result};
use crate::grid::{count, lp_norm, ScalarField};
use crate::lma::LinearizedOperator;

/// Discrete Green function `G_V(., y)`: `L_h G = delta_y / h^2` in `V`, zero outside.
#[derive(Clone, Debug)]
pub struct GreenField {
    pub pole: usize,
    pub values: ScalarField,
    /// Unknown nodes of `V`.
    pub support: Vec<bool>,
}

impl GreenField {
    pub fn at(&self, node: usize) -> f64 {
        self.values.values[node]
    }

    /// `|V|` as node count times cell area.
    pub fn volume(&self) -> f64 {
        let h = self.values.grid.h;
        count(&self.support) as f64 * h * h
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values.values, &self.support, self.values.grid.h, p)
    }

    pub fn min(&self) -> f64 {
        self.values.min_over(&self.support)
    }

    pub fn max(&self) -> f64 {
        self.values.max_over(&self.support)
    }
}

pub fn green_function(op: &LinearizedOperator, pole: usize) -> Result<GreenField> {
    Ok(green_functions(op, &[pole])?.pop().unwrap())
}

/// Green columns for several poles with one factorization.
pub fn green_functions(op: &LinearizedOperator, poles: &[usize]) -> Result<Vec<GreenField>> {
    let region = op.region();
    let h = region.grid().h;
    let mut ids = Vec::with_capacity(poles.len());
    for &p in poles {
        ids.push(region.unknown_of(p).ok_or(Error::PoleOnBoundary(p))?);
    }
    let rhs: Vec<Vec<f64>> = ids
        .iter()
        .map(|&i| {
            let mut b = vec![0.0; op.len()];
            b[i] = 1.0 / (h * h);
            b
        })
        .collect();
    let sols = op.factorization()?.solve_many(&rhs)?;
    let zero = |_: crate::grid::Point| 0.0;
    let support = region.unknown_mask();
    Ok(poles
        .iter()
        .zip(sols)
        .map(|(&pole, s)| GreenField {
            pole,
            values: op.to_field(&s, &zero),
            support: support.clone(),
        })
        .collect())
}

/// `(t, |{G > t}|)` for each level, by cell counting.
pub fn green_tail_statistics(green: &GreenField, levels: &[f64]) -> Vec<(f64, f64)> {
    let h = green.values.grid.h;
    levels
        .iter()
        .map(|&t| {
            let c = green
                .values
                .values
                .iter()
                .zip(&green.support)
                .filter(|(v, &m)| m && **v > t)
                .count();
            (t, c as f64 * h * h)
        })
        .collect()
}

/// `(||G||_{q'}, ||G||_{q'} / |V|^{2/n - 1/q})` with `q' = q/(q-1)`.
pub fn green_lq_bound(green: &GreenField, q: f64) -> Result<(f64, f64)> {
    let n = 2.0;
    if !(q > n / 2.0) {
        return Err(Error::ExponentOutOfRange(format!("q = {q} must exceed n/2 = 1")));
    }
    let qp = q / (q - 1.0);
    let norm = green.lp_norm(qp);
    let ratio = norm / green.volume().powf(2.0 / n - 1.0 / q);
    Ok((norm, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::grid::Point;
    use crate::lma::CrossScheme;
    use crate::potential::{AnalyticPotential, ConvexPotential};
    use std::sync::Arc;

    #[test]
    fn disk_green_function_matches_log_kernel() {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 360, 128).unwrap());
        let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d.clone(), None).unwrap();
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        let k0 = d.grid().nearest(Point::zeros()).unwrap();
        let g = green_function(&op, k0).unwrap();
        assert!(g.min() >= -1e-12);
        for k in 0..d.grid().len() {
            let r = d.grid().point(k).norm();
            if g.support[k] && r > 0.2 && r < 0.9 {
                let exact = -(r.ln()) / (2.0 * std::f64::consts::PI);
                assert!((g.at(k) - exact).abs() <= 0.03 * exact, "r {r}: {} vs {exact}", g.at(k));
            }
        }
    }

    #[test]
    fn exponent_range_enforced() {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), 1.0, 64, 8).unwrap());
        let p = ConvexPotential::analytic(AnalyticPotential::isotropic(1.0), d.clone(), None).unwrap();
        let op = LinearizedOperator::assemble(&p.cofactor(), CrossScheme::Corner).unwrap();
        let g = green_function(&op, d.grid().nearest(Point::zeros()).unwrap()).unwrap();
        assert!(green_lq_bound(&g, 1.0).is_err());
        let (n2, r2) = green_lq_bound(&g, 2.0).unwrap();
        assert!((r2 - n2 / g.volume().sqrt()).abs() < 1e-14);
        let tail = green_tail_statistics(&g, &[g.max() + 1.0]);
        assert_eq!(tail[0].1, 0.0);
        let outside = d.grid().index(0, 0);
        assert!(matches!(green_function(&op, outside), Err(Error::PoleOnBoundary(_))));
    }
}
