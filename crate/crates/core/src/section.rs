//! Sections `S(x, t) = {y : phi(y) < phi(x) + Dphi(x).(y - x) + t}` on the grid.

use rayon::prelude::*;

use crate::domain::convex_hull;
use crate::error::{Error, Result};
use crate::grid::{fit_slope, Grid, Point};
use crate::potential::ConvexPotential;

#[derive(Clone, Debug)]
pub struct Section {
    pub center: Point,
    pub height: f64,
    pub mask: Vec<bool>,
    pub count: usize,
    pub hull: Vec<Point>,
    pub volume: f64,
}

impl Section {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k)
    }
}

/// Supporting affine function `l_x(y) = phi(x) + Dphi(x).(y - x)` at `x`.
#[derive(Clone, Copy, Debug)]
pub struct Support {
    pub x: Point,
    pub value: f64,
    pub gradient: Point,
}

impl Support {
    pub fn at(potential: &ConvexPotential, x: Point) -> Result<Support> {
        if !potential.domain().contains(x) {
            return Err(Error::OutsideDomain(x.x, x.y));
        }
        Ok(Support {
            x,
            value: potential.value_at(x)?,
            gradient: potential.gradient_at(x)?,
        })
    }

    pub fn at_node(potential: &ConvexPotential, k: usize) -> Support {
        Support {
            x: potential.domain().grid().point(k),
            value: potential.values()[k],
            gradient: potential.gradient_field()[k],
        }
    }

    pub fn eval(&self, y: Point) -> f64 {
        self.value + self.gradient.dot(&(y - self.x))
    }
}

/// `psi(y) = phi(y) - l_x(y)` at every domain node (`NaN` outside).
pub fn excess(potential: &ConvexPotential, s: &Support) -> Vec<f64> {
    let grid = potential.domain().grid();
    let mask = potential.domain().mask();
    let v = potential.values();
    (0..grid.len())
        .map(|k| if mask[k] { v[k] - s.eval(grid.point(k)) } else { f64::NAN })
        .collect()
}

pub fn section(potential: &ConvexPotential, x: Point, height: f64) -> Result<Section> {
    let s = Support::at(potential, x)?;
    Ok(section_from_support(potential, &s, height))
}

pub fn section_at_node(potential: &ConvexPotential, k: usize, height: f64) -> Section {
    section_from_support(potential, &Support::at_node(potential, k), height)
}

pub fn section_from_support(potential: &ConvexPotential, s: &Support, height: f64) -> Section {
    let psi = excess(potential, s);
    section_from_excess(potential.domain().grid(), &psi, s.x, height)
}

pub fn section_from_excess(grid: &Grid, psi: &[f64], center: Point, height: f64) -> Section {
    let mask: Vec<bool> = psi.iter().map(|&p| p < height).collect();
    let pts: Vec<Point> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(k, _)| grid.point(k))
        .collect();
    let count = pts.len();
    let hull = convex_hull(&pts);
    let volume = if count == 0 { 0.0 } else { sublevel_area(grid, psi, height) };
    Section {
        center,
        height,
        mask,
        count,
        hull,
        volume,
    }
}

pub fn section_volume(s: &Section) -> f64 {
    s.volume
}

/// Area of `{psi < t}` for the piecewise-linear interpolant of `psi` on the
/// two-triangle split of each cell. Triangles with a corner outside the
/// domain (`NaN`) contribute the fraction of their corners inside the set.
pub fn sublevel_area(grid: &Grid, psi: &[f64], t: f64) -> f64 {
    let tri = 0.5 * grid.h * grid.h;
    let mut area = 0.0;
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let c = [
                psi[grid.index(i, j)] - t,
                psi[grid.index(i + 1, j)] - t,
                psi[grid.index(i + 1, j + 1)] - t,
                psi[grid.index(i, j + 1)] - t,
            ];
            for (a, b, d) in [(c[0], c[1], c[2]), (c[0], c[2], c[3])] {
                area += tri * negative_fraction(a, b, d);
            }
        }
    }
    area
}

fn negative_fraction(a: f64, b: f64, c: f64) -> f64 {
    let v = [a, b, c];
    if v.iter().all(|x| x.is_nan()) {
        return 0.0;
    }
    if v.iter().any(|x| x.is_nan()) {
        return v.iter().filter(|x| **x < 0.0).count() as f64 / 3.0;
    }
    let neg = v.iter().filter(|x| **x < 0.0).count();
    match neg {
        0 => 0.0,
        3 => 1.0,
        1 => {
            let i = v.iter().position(|x| *x < 0.0).unwrap();
            let (p, q, r) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
            (p / (p - q)) * (p / (p - r))
        }
        _ => {
            let i = v.iter().position(|x| *x >= 0.0).unwrap();
            let (p, q, r) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
            1.0 - (p / (p - q)) * (p / (p - r))
        }
    }
}

/// `sup{t : S(x, t) stays inside the domain}`, i.e. the smallest excess of
/// the boundary trace over the supporting plane at `x`.
pub fn maximal_interior_height(potential: &ConvexPotential, x: Point) -> Result<f64> {
    let s = Support::at(potential, x)?;
    Ok(maximal_interior_height_from(potential, &s))
}

pub fn maximal_interior_height_from(potential: &ConvexPotential, s: &Support) -> f64 {
    let d = potential.domain();
    let trace = potential.trace();
    d.boundary_samples(0.25 * d.h())
        .into_iter()
        .map(|b| trace(b) - s.eval(b))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Smallest `theta` with `S(x,t) ⊂ S(y, theta t)` on the grid, maximized over the triples.
pub fn engulfing_constant(potential: &ConvexPotential, triples: &[(Point, f64, Point)]) -> Result<f64> {
    let mut theta: f64 = 0.0;
    for &(x, t, y) in triples {
        let sx = Support::at(potential, x)?;
        let sy = Support::at(potential, y)?;
        let psi_x = excess(potential, &sx);
        let psi_y = excess(potential, &sy);
        let mut th: f64 = 0.0;
        for k in 0..psi_x.len() {
            if psi_x[k] < t {
                th = th.max(psi_y[k] / t);
            }
        }
        theta = theta.max(th);
    }
    Ok(theta)
}

#[derive(Clone, Debug)]
pub struct SeparationReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub rho: f64,
    pub pass: bool,
}

/// Ratios `(phi(x) - phi(x0) - Dphi(x0).(x - x0)) / |x - x0|^2` over boundary sample pairs.
pub fn check_quadratic_separation(potential: &ConvexPotential, rho: f64) -> Result<SeparationReport> {
    let d = potential.domain();
    let spacing = (d.perimeter() / 360.0).max(d.h());
    let pts = d.boundary_samples(spacing);
    let trace = potential.trace();
    let vals: Vec<f64> = pts.iter().map(|p| trace(*p)).collect();
    let grads: Vec<Point> = pts
        .iter()
        .map(|p| match potential.analytic_form() {
            Some(a) => Ok(a.gradient(*p)),
            None => potential.gradient_at(*p),
        })
        .collect::<Result<_>>()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, x0) in pts.iter().enumerate() {
        for (j, x) in pts.iter().enumerate() {
            let dx = x - x0;
            let r2 = dx.norm_squared();
            if i == j || r2 < 1e-12 {
                continue;
            }
            let q = (vals[j] - vals[i] - grads[i].dot(&dx)) / r2;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    Ok(SeparationReport {
        min_ratio: lo,
        max_ratio: hi,
        rho,
        pass: lo >= rho * (1.0 - 1e-9) && hi <= (1.0 + 1e-9) / rho,
    })
}

#[derive(Clone, Debug)]
pub struct GrowthFit {
    pub slope: f64,
    pub heights: Vec<f64>,
    pub volumes: Vec<f64>,
}

/// Geometric ladder `t0 * 2^k <= top` with `t0 = 4 h^2`.
pub fn height_ladder(h: f64, top: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 4.0 * h * h;
    while t <= top * (1.0 + 1e-12) {
        out.push(t);
        t *= 2.0;
    }
    out
}

/// Fitted exponent of `|S(x,t)| ~ t^{n/2}` over the usable heights.
pub fn volume_growth_scan(potential: &ConvexPotential, x: Point, heights: &[f64]) -> Result<GrowthFit> {
    let s = Support::at(potential, x)?;
    let interior = potential.domain().depth(x) > potential.h();
    let hbar = if interior { maximal_interior_height_from(potential, &s) } else { f64::INFINITY };
    let psi = excess(potential, &s);
    let grid = potential.domain().grid();
    let mut hs = Vec::new();
    let mut vs = Vec::new();
    for &t in heights {
        if t > hbar {
            continue;
        }
        let sec = section_from_excess(grid, &psi, x, t);
        if sec.count < 16 {
            continue;
        }
        hs.push(t);
        vs.push(sec.volume);
    }
    if hs.len() < 4 {
        return Err(Error::InsufficientLadder { usable: hs.len(), needed: 4 });
    }
    let lx: Vec<f64> = hs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    Ok(GrowthFit {
        slope: fit_slope(&lx, &ly),
        heights: hs,
        volumes: vs,
    })
}

/// Nodes of the sections centred at one node, sorted by excess.
#[derive(Clone, Debug)]
pub struct SectionProfile {
    pub psi: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl SectionProfile {
    /// Section nodes `{psi < cap}`; with a finite cap only the 8-connected
    /// component of the centre is scanned.
    pub fn at_node(potential: &ConvexPotential, k: usize, cap: f64) -> SectionProfile {
        let s = Support::at_node(potential, k);
        let grid = potential.domain().grid();
        let mask = potential.domain().mask();
        let v = potential.values();
        let mut pairs: Vec<(f64, usize)> = Vec::new();
        if cap.is_infinite() {
            for q in 0..grid.len() {
                if mask[q] {
                    pairs.push((v[q] - s.eval(grid.point(q)), q));
                }
            }
        } else {
            let mut seen = vec![false; grid.len()];
            let mut stack = vec![k];
            seen[k] = true;
            while let Some(q) = stack.pop() {
                let p = v[q] - s.eval(grid.point(q));
                if p >= cap && q != k {
                    continue;
                }
                pairs.push((p, q));
                for (di, dj) in crate::stencil::DIRS {
                    if let Some(r) = grid.offset(q, di, dj) {
                        if mask[r] && !seen[r] {
                            seen[r] = true;
                            stack.push(r);
                        }
                    }
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        SectionProfile {
            psi: pairs.iter().map(|p| p.0).collect(),
            nodes: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Number of nodes in `S(x, t)`.
    pub fn count_below(&self, t: f64) -> usize {
        self.psi.partition_point(|&p| p < t)
    }

    pub fn max_excess(&self) -> f64 {
        self.psi.last().copied().unwrap_or(0.0)
    }
}

/// Profiles for many nodes in parallel.
pub fn profiles(potential: &ConvexPotential, nodes: &[usize], cap: f64) -> Vec<SectionProfile> {
    nodes
        .par_iter()
        .map(|&k| SectionProfile::at_node(potential, k, cap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConvexDomain;
    use crate::potential::{AnalyticPotential, Sym2};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn pot(a: AnalyticPotential, r: f64, mesh: usize) -> ConvexPotential {
        let d = Arc::new(ConvexDomain::disk(Point::zeros(), r, 360, mesh).unwrap());
        ConvexPotential::analytic(a, d, None).unwrap()
    }

    #[test]
    fn isotropic_section_is_unit_disk() {
        let p = pot(AnalyticPotential::isotropic(1.0), 2.0, 256);
        let s = section(&p, Point::zeros(), 0.5).unwrap();
        assert!((s.volume - PI).abs() < 0.02 * PI);
        let e = section(&p, Point::zeros(), 0.0).unwrap();
        assert!(e.is_empty());
        assert_eq!(section_volume(&e), 0.0);
    }

    #[test]
    fn anisotropic_section_area() {
        let p = pot(AnalyticPotential::quadratic(Sym2::new(4.0, 0.0, 0.25)), 2.5, 256);
        let s = section(&p, Point::zeros(), 0.5).unwrap();
        assert!((s.volume - PI).abs() < 0.02 * PI, "{}", s.volume);
    }

    #[test]
    fn nesting_and_centre_membership() {
        let p = pot(AnalyticPotential::perturbed(0.05), 1.0, 48);
        let k = p.domain().grid().nearest(Point::new(0.1, -0.2)).unwrap();
        let mut prev: Option<Section> = None;
        for t in [1e-4, 0.01, 0.05, 0.2] {
            let s = section_at_node(&p, k, t);
            assert!(s.mask[k]);
            if let Some(q) = prev {
                assert!(q.mask.iter().zip(&s.mask).all(|(a, b)| !a || *b));
            }
            prev = Some(s);
        }
    }

    #[test]
    fn interior_height_of_paraboloid() {
        let p = pot(AnalyticPotential::isotropic(1.0), 1.0, 64);
        let h0 = maximal_interior_height(&p, Point::zeros()).unwrap();
        assert!((h0 - 0.5).abs() < 1e-4);
        let x = Point::new(0.6, 0.0);
        let h1 = maximal_interior_height(&p, x).unwrap();
        assert!((h1 - 0.5 * 0.4f64.powi(2)).abs() < 1e-4);
    }

    #[test]
    fn engulfing_on_balls() {
        let p = pot(AnalyticPotential::isotropic(1.0), 1.0, 64);
        let x = Point::new(0.0, 0.0);
        let t = 0.1;
        let y = Point::new(0.4, 0.0);
        let th = engulfing_constant(&p, &[(x, t, y)]).unwrap();
        assert!(th <= 4.0 && th > 1.0);
        let same = engulfing_constant(&p, &[(x, t, x)]).unwrap();
        assert!(same <= 1.0 && same > 0.9);
    }

    #[test]
    fn separation_of_paraboloid() {
        let p = pot(AnalyticPotential::isotropic(1.0), 1.0, 32);
        let r = check_quadratic_separation(&p, 0.5).unwrap();
        assert!((r.min_ratio - 0.5).abs() < 1e-9 && (r.max_ratio - 0.5).abs() < 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn growth_exponent_is_one() {
        let p = pot(AnalyticPotential::isotropic(1.0), 1.0, 128);
        let fit = volume_growth_scan(&p, Point::zeros(), &height_ladder(p.h(), 0.5)).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn flood_fill_matches_full_scan() {
        let p = pot(AnalyticPotential::perturbed(0.05), 1.0, 48);
        let k = p.domain().grid().nearest(Point::new(0.2, 0.1)).unwrap();
        let full = SectionProfile::at_node(&p, k, f64::INFINITY);
        let capped = SectionProfile::at_node(&p, k, 0.05);
        let n = full.count_below(0.05);
        assert_eq!(capped.count_below(0.05), n);
        assert_eq!(&full.nodes[..n], &capped.nodes[..n]);
    }

    #[test]
    fn triangle_fraction_cases() {
        assert_eq!(negative_fraction(1.0, 1.0, 1.0), 0.0);
        assert_eq!(negative_fraction(-1.0, -1.0, -1.0), 1.0);
        assert!((negative_fraction(-1.0, 1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((negative_fraction(1.0, -1.0, -1.0) - 0.75).abs() < 1e-15);
    }
}
