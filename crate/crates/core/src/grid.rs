//! Uniform node grids and nodal scalar fields.

use nalgebra::Vector2;

pub type Point = Vector2<f64>;

/// Uniform grid with nodes at `origin + (i, j) * h`.
///
/// Grids built by [`Grid::covering`] put nodes at integer multiples of `h`,
/// so the origin of the plane is a node whenever it is covered.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Smallest lattice grid `h * Z^2` covering the box, plus one ring of margin.
    pub fn covering(min: Point, max: Point, h: f64) -> Grid {
        let i0 = (min.x / h).floor() as i64 - 1;
        let j0 = (min.y / h).floor() as i64 - 1;
        let i1 = (max.x / h).ceil() as i64 + 1;
        let j1 = (max.y / h).ceil() as i64 + 1;
        Grid {
            origin: Point::new(i0 as f64 * h, j0 as f64 * h),
            h,
            nx: (i1 - i0 + 1) as usize,
            ny: (j1 - j0 + 1) as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn point(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        Point::new(
            self.origin.x + i as f64 * self.h,
            self.origin.y + j as f64 * self.h,
        )
    }

    #[inline]
    pub fn offset(&self, k: usize, di: i32, dj: i32) -> Option<usize> {
        let (i, j) = self.coords(k);
        let i2 = i as i64 + di as i64;
        let j2 = j as i64 + dj as i64;
        if i2 < 0 || j2 < 0 || i2 >= self.nx as i64 || j2 >= self.ny as i64 {
            None
        } else {
            Some(self.index(i2 as usize, j2 as usize))
        }
    }

    /// Cell containing `p` and the local coordinates in `[0,1]^2`.
    pub fn locate(&self, p: Point) -> Option<(usize, usize, f64, f64)> {
        let s = (p - self.origin) / self.h;
        if s.x < 0.0 || s.y < 0.0 {
            return None;
        }
        let i = (s.x.floor() as usize).min(self.nx.saturating_sub(2));
        let j = (s.y.floor() as usize).min(self.ny.saturating_sub(2));
        let fx = s.x - i as f64;
        let fy = s.y - j as f64;
        if fx > 1.0 + 1e-9 || fy > 1.0 + 1e-9 {
            return None;
        }
        Some((i, j, fx.clamp(0.0, 1.0), fy.clamp(0.0, 1.0)))
    }

    /// Node nearest to `p`, if `p` is within the grid box.
    pub fn nearest(&self, p: Point) -> Option<usize> {
        let s = (p - self.origin) / self.h;
        let i = s.x.round();
        let j = s.y.round();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some(self.index(i as usize, j as usize))
    }
}

/// Nodal values on a grid; `NaN` marks nodes outside the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "field length mismatch");
        ScalarField { grid, values }
    }

    pub fn nan(grid: &Grid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![f64::NAN; grid.len()],
        }
    }

    /// Samples `f` on the nodes where `mask` is set.
    pub fn from_fn(grid: &Grid, mask: &[bool], f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| if mask[k] { f(grid.point(k)) } else { f64::NAN })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear interpolation; needs all four cell corners finite.
    pub fn bilinear(&self, p: Point) -> Option<f64> {
        let (i, j, fx, fy) = self.grid.locate(p)?;
        let g = &self.grid;
        let v00 = self.values[g.index(i, j)];
        let v10 = self.values[g.index(i + 1, j)];
        let v01 = self.values[g.index(i, j + 1)];
        let v11 = self.values[g.index(i + 1, j + 1)];
        let v = (1.0 - fx) * (1.0 - fy) * v00
            + fx * (1.0 - fy) * v10
            + (1.0 - fx) * fy * v01
            + fx * fy * v11;
        v.is_finite().then_some(v)
    }

    /// Cell-area weighted `L^p` norm over the masked nodes.
    pub fn lp_norm(&self, mask: &[bool], p: f64) -> f64 {
        lp_norm(&self.values, mask, self.grid.h, p)
    }

    /// Max of `|v|` over the masked nodes.
    pub fn sup_norm(&self, mask: &[bool]) -> f64 {
        sup_abs(&self.values, mask)
    }

    pub fn max_over(&self, mask: &[bool]) -> f64 {
        masked(&self.values, mask).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_over(&self, mask: &[bool]) -> f64 {
        masked(&self.values, mask).fold(f64::INFINITY, f64::min)
    }
}

fn masked<'a>(values: &'a [f64], mask: &'a [bool]) -> impl Iterator<Item = f64> + 'a {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
}

pub fn lp_norm(values: &[f64], mask: &[bool], h: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return sup_abs(values, mask);
    }
    let s: f64 = masked(values, mask).map(|v| v.abs().powf(p)).sum();
    (s * h * h).powf(1.0 / p)
}

pub fn sup_abs(values: &[f64], mask: &[bool]) -> f64 {
    masked(values, mask).fold(0.0, |a, v| a.max(v.abs()))
}

pub fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Order of convergence fitted from errors at spacings `hs`.
pub fn fit_order(hs: &[f64], errors: &[f64]) -> f64 {
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    fit_slope(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid_has_origin_node() {
        let g = Grid::covering(Point::new(-1.0, -1.0), Point::new(1.0, 1.0), 0.25);
        let k = g.nearest(Point::zeros()).unwrap();
        assert!(g.point(k).norm() < 1e-15);
        assert_eq!(g.nx, 11);
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let g = Grid::covering(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 0.1);
        let mask = vec![true; g.len()];
        let f = ScalarField::from_fn(&g, &mask, |p| 1.0 + 2.0 * p.x - p.y + 3.0 * p.x * p.y);
        let p = Point::new(0.437, 0.611);
        let v = f.bilinear(p).unwrap();
        assert!((v - (1.0 + 2.0 * p.x - p.y + 3.0 * p.x * p.y)).abs() < 1e-12);
    }

    #[test]
    fn order_fit_recovers_power() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h * h).collect();
        assert!((fit_order(&hs, &es) - 2.0).abs() < 1e-12);
    }
}
