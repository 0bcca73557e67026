//! Closed-form convex potentials with known determinants.

use std::f64::consts::PI;

use super::Sym2;
use crate::descriptor::Descriptor;
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::Point;

#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticKind {
    /// `scale * |x|^2 / 2`
    IsotropicQuadratic { scale: f64 },
    /// `x.M x / 2 + b.x`
    GeneralQuadratic { m: Sym2, b: Point },
    /// `a |x|^2 / 2 + b |x|^p`, `p >= 2`
    RadialPower { a: f64, b: f64, p: f64 },
    /// `|x|^2 / 2 + eps cos(k pi x1) cos(k pi x2)`
    PerturbedQuadratic { eps: f64, freq: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticPotential {
    pub kind: AnalyticKind,
    /// Additive constant.
    pub shift: f64,
}

impl AnalyticPotential {
    pub fn isotropic(scale: f64) -> Self {
        AnalyticKind::IsotropicQuadratic { scale }.into()
    }

    pub fn quadratic(m: Sym2) -> Self {
        AnalyticKind::GeneralQuadratic { m, b: Point::zeros() }.into()
    }

    pub fn radial_power(a: f64, b: f64, p: f64) -> Self {
        AnalyticKind::RadialPower { a, b, p }.into()
    }

    pub fn perturbed(eps: f64) -> Self {
        AnalyticKind::PerturbedQuadratic { eps, freq: 1.0 }.into()
    }

    pub fn shifted(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AnalyticKind::IsotropicQuadratic { .. } => "isotropicQuadratic",
            AnalyticKind::GeneralQuadratic { .. } => "generalQuadratic",
            AnalyticKind::RadialPower { .. } => "radialPower",
            AnalyticKind::PerturbedQuadratic { .. } => "perturbedQuadratic",
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(
            self.kind,
            AnalyticKind::IsotropicQuadratic { .. } | AnalyticKind::GeneralQuadratic { .. }
        )
    }

    pub fn parse(s: &str) -> Result<Self> {
        let d = Descriptor::parse(s)?;
        let shift = d.get("shift", 0.0);
        let kind = match d.kind.as_str() {
            "isotropicQuadratic" => {
                d.check_keys(&["scale", "shift"])?;
                AnalyticKind::IsotropicQuadratic { scale: d.get("scale", 1.0) }
            }
            "generalQuadratic" => {
                d.check_keys(&["m11", "m12", "m22", "b1", "b2", "shift"])?;
                AnalyticKind::GeneralQuadratic {
                    m: Sym2::new(d.get("m11", 1.0), d.get("m12", 0.0), d.get("m22", 1.0)),
                    b: Point::new(d.get("b1", 0.0), d.get("b2", 0.0)),
                }
            }
            "radialPower" => {
                d.check_keys(&["a", "b", "p", "shift"])?;
                AnalyticKind::RadialPower {
                    a: d.get("a", 1.0),
                    b: d.require("b")?,
                    p: d.require("p")?,
                }
            }
            "perturbedQuadratic" => {
                d.check_keys(&["eps", "freq", "shift"])?;
                AnalyticKind::PerturbedQuadratic {
                    eps: d.require("eps")?,
                    freq: d.get("freq", 1.0),
                }
            }
            other => return Err(Error::Parse(format!("unknown analytic potential `{other}`"))),
        };
        if let AnalyticKind::RadialPower { p, .. } = kind {
            if p < 2.0 {
                return Err(Error::Parse(format!("radialPower needs p >= 2, got {p}")));
            }
        }
        Ok(AnalyticPotential { kind, shift })
    }

    pub fn descriptor(&self) -> String {
        let d = match &self.kind {
            AnalyticKind::IsotropicQuadratic { scale } => Descriptor::new("isotropicQuadratic").with("scale", *scale),
            AnalyticKind::GeneralQuadratic { m, b } => Descriptor::new("generalQuadratic")
                .with("m11", m.xx)
                .with("m12", m.xy)
                .with("m22", m.yy)
                .with("b1", b.x)
                .with("b2", b.y),
            AnalyticKind::RadialPower { a, b, p } => {
                Descriptor::new("radialPower").with("a", *a).with("b", *b).with("p", *p)
            }
            AnalyticKind::PerturbedQuadratic { eps, freq } => {
                Descriptor::new("perturbedQuadratic").with("eps", *eps).with("freq", *freq)
            }
        };
        if self.shift != 0.0 {
            d.with("shift", self.shift).to_string()
        } else {
            d.to_string()
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        self.shift
            + match &self.kind {
                AnalyticKind::IsotropicQuadratic { scale } => 0.5 * scale * x.norm_squared(),
                AnalyticKind::GeneralQuadratic { m, b } => 0.5 * m.quad(x) + b.dot(&x),
                AnalyticKind::RadialPower { a, b, p } => 0.5 * a * x.norm_squared() + b * x.norm().powf(*p),
                AnalyticKind::PerturbedQuadratic { eps, freq } => {
                    let k = freq * PI;
                    0.5 * x.norm_squared() + eps * (k * x.x).cos() * (k * x.y).cos()
                }
            }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match &self.kind {
            AnalyticKind::IsotropicQuadratic { scale } => x * *scale,
            AnalyticKind::GeneralQuadratic { m, b } => m.apply(x) + b,
            AnalyticKind::RadialPower { a, b, p } => {
                let r = x.norm();
                let s = if r > 0.0 { b * p * r.powf(p - 2.0) } else if *p == 2.0 { 2.0 * b } else { 0.0 };
                x * (a + s)
            }
            AnalyticKind::PerturbedQuadratic { eps, freq } => {
                let k = freq * PI;
                let (s1, c1) = (k * x.x).sin_cos();
                let (s2, c2) = (k * x.y).sin_cos();
                Point::new(x.x - eps * k * s1 * c2, x.y - eps * k * c1 * s2)
            }
        }
    }

    pub fn hessian(&self, x: Point) -> Sym2 {
        match &self.kind {
            AnalyticKind::IsotropicQuadratic { scale } => Sym2::identity().scale(*scale),
            AnalyticKind::GeneralQuadratic { m, .. } => *m,
            AnalyticKind::RadialPower { a, b, p } => {
                let r = x.norm();
                if r == 0.0 {
                    let s = if *p == 2.0 { 2.0 * b } else { 0.0 };
                    return Sym2::identity().scale(a + s);
                }
                let t = b * p * r.powf(p - 2.0);
                let rr = b * p * (p - 2.0) * r.powf(p - 4.0);
                Sym2::new(a + t + rr * x.x * x.x, rr * x.x * x.y, a + t + rr * x.y * x.y)
            }
            AnalyticKind::PerturbedQuadratic { eps, freq } => {
                let k = freq * PI;
                let e = eps * k * k;
                let (s1, c1) = (k * x.x).sin_cos();
                let (s2, c2) = (k * x.y).sin_cos();
                Sym2::new(1.0 - e * c1 * c2, e * s1 * s2, 1.0 - e * c1 * c2)
            }
        }
    }

    pub fn det(&self, x: Point) -> f64 {
        match &self.kind {
            AnalyticKind::RadialPower { a, b, p } => {
                let r = x.norm();
                let rp = if r > 0.0 { r.powf(p - 2.0) } else if *p == 2.0 { 1.0 } else { 0.0 };
                (a + b * p * rp) * (a + b * p * (p - 1.0) * rp)
            }
            AnalyticKind::PerturbedQuadratic { eps, freq } => {
                let k = freq * PI;
                let e = eps * k * k;
                (1.0 - e * (k * (x.x - x.y)).cos()) * (1.0 - e * (k * (x.x + x.y)).cos())
            }
            _ => self.hessian(x).det(),
        }
    }

    /// Certified interval containing `det D^2 phi` on the domain.
    pub fn det_bounds(&self, domain: &ConvexDomain) -> (f64, f64) {
        match &self.kind {
            AnalyticKind::IsotropicQuadratic { scale } => (scale * scale, scale * scale),
            AnalyticKind::GeneralQuadratic { m, .. } => (m.det(), m.det()),
            AnalyticKind::RadialPower { .. } => {
                let rmin = (-domain.depth(Point::zeros())).max(0.0);
                let rmax = domain.circumradius();
                let d0 = self.det(Point::new(rmin, 0.0));
                let d1 = self.det(Point::new(rmax, 0.0));
                (d0.min(d1), d0.max(d1))
            }
            AnalyticKind::PerturbedQuadratic { eps, freq } => {
                let e = (eps * freq * freq * PI * PI).abs();
                ((1.0 - e).max(0.0).powi(2), (1.0 + e).powi(2))
            }
        }
    }
}

impl From<AnalyticKind> for AnalyticPotential {
    fn from(kind: AnalyticKind) -> Self {
        AnalyticPotential { kind, shift: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_hessian(p: &AnalyticPotential, x: Point) -> Sym2 {
        let e = 1e-4;
        let g = |y: Point| p.gradient(y);
        let gx = (g(x + Point::new(e, 0.0)) - g(x - Point::new(e, 0.0))) / (2.0 * e);
        let gy = (g(x + Point::new(0.0, e)) - g(x - Point::new(0.0, e))) / (2.0 * e);
        Sym2::new(gx.x, 0.5 * (gx.y + gy.x), gy.y)
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let pots = [
            AnalyticPotential::parse("generalQuadratic:m11=2,m12=0.3,m22=1,b1=0.5").unwrap(),
            AnalyticPotential::parse("radialPower:a=1,b=0.0833333333,p=4").unwrap(),
            AnalyticPotential::parse("perturbedQuadratic:eps=0.05").unwrap(),
        ];
        let x = Point::new(0.31, -0.47);
        for p in &pots {
            let e = 1e-5;
            let gx = (p.value(x + Point::new(e, 0.0)) - p.value(x - Point::new(e, 0.0))) / (2.0 * e);
            assert!((gx - p.gradient(x).x).abs() < 1e-7, "{}", p.name());
            let h = p.hessian(x);
            assert!(h.sub(&fd_hessian(p, x)).norm() < 1e-6, "{}", p.name());
            assert!((h.det() - p.det(x)).abs() < 1e-12, "{}", p.name());
        }
    }

    #[test]
    fn perturbed_det_interval_holds_on_dense_samples() {
        let p = AnalyticPotential::perturbed(0.05);
        let d = ConvexDomain::disk(Point::zeros(), 1.0, 360, 16).unwrap();
        let (lo, hi) = p.det_bounds(&d);
        let n = 1000;
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for j in 0..n {
                let x = Point::new(-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.0 + 2.0 * j as f64 / (n - 1) as f64);
                let v = p.hessian(x).det();
                mn = mn.min(v);
                mx = mx.max(v);
            }
        }
        assert!(mn >= lo - 1e-12 && mx <= hi + 1e-12);
        assert!(mx - hi > -1e-3 && lo - mn > -1e-3, "interval is tight");
    }

    #[test]
    fn descriptor_round_trip() {
        let p = AnalyticPotential::parse("radialPower:a=1,b=0.25,p=3,shift=-1").unwrap();
        assert_eq!(AnalyticPotential::parse(&p.descriptor()).unwrap(), p);
        assert!(AnalyticPotential::parse("radialPower:b=1,p=1.5").is_err());
        assert!(AnalyticPotential::parse("cubic:a=1").is_err());
    }
}
