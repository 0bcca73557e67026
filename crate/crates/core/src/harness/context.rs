//! Inputs shared by every suite: domain, potentials, exponents, mesh ladder and seed.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::descriptor::Descriptor;
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::functions::FieldSpec;
use crate::grid::{Point, ScalarField};
use crate::potential::{solve_monge_ampere, AnalyticPotential, ConvexPotential, PointFn, Sym2};

use super::exponents::Exponents;
use super::report::DEFAULT_TOLERANCE;

/// Pinching bounds of the default family.
pub const FAMILY_PINCHING: (f64, f64) = (0.5, 2.0);

pub const DISK_VERTICES: usize = 360;

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Disk { center: Point, radius: f64 },
    Ellipse { center: Point, a: f64, b: f64 },
    Rectangle { lo: Point, hi: Point },
    /// Upper half of the disk of radius `radius` about the origin.
    HalfDisk { radius: f64 },
    Polygon(Vec<Point>),
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::Disk {
            center: Point::zeros(),
            radius: 1.0,
        }
    }
}

impl DomainSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let d = Descriptor::parse(s)?;
        let c = || Point::new(d.get("x0", 0.0), d.get("y0", 0.0));
        Ok(match d.kind.as_str() {
            "disk" => {
                d.check_keys(&["r", "x0", "y0"])?;
                DomainSpec::Disk {
                    center: c(),
                    radius: d.get("r", 1.0),
                }
            }
            "ellipse" => {
                d.check_keys(&["a", "b", "x0", "y0"])?;
                DomainSpec::Ellipse {
                    center: c(),
                    a: d.require("a")?,
                    b: d.require("b")?,
                }
            }
            "rectangle" => {
                d.check_keys(&["x0", "y0", "x1", "y1"])?;
                DomainSpec::Rectangle {
                    lo: Point::new(d.get("x0", -1.0), d.get("y0", -1.0)),
                    hi: Point::new(d.get("x1", 1.0), d.get("y1", 1.0)),
                }
            }
            "halfdisk" => {
                d.check_keys(&["r"])?;
                DomainSpec::HalfDisk { radius: d.get("r", 1.0) }
            }
            other => return Err(Error::Parse(format!("unknown domain kind `{other}`"))),
        })
    }

    pub fn build(&self, mesh: usize) -> Result<ConvexDomain> {
        match self {
            DomainSpec::Disk { center, radius } => {
                ConvexDomain::disk(*center, *radius, DISK_VERTICES, mesh)?.respace(2.0 * radius / mesh as f64)
            }
            DomainSpec::Ellipse { center, a, b } => {
                ConvexDomain::ellipse(*center, *a, *b, DISK_VERTICES, mesh)?.respace(2.0 * a.max(*b) / mesh as f64)
            }
            DomainSpec::Rectangle { lo, hi } => ConvexDomain::rectangle(*lo, *hi, mesh),
            DomainSpec::HalfDisk { radius } => {
                ConvexDomain::half_disk(*radius, DISK_VERTICES, mesh)?.respace(2.0 * radius / mesh as f64)
            }
            DomainSpec::Polygon(v) => ConvexDomain::new(v.clone(), mesh),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self {
            DomainSpec::Disk { center, radius } => Descriptor::new("disk")
                .with("r", *radius)
                .with("x0", center.x)
                .with("y0", center.y),
            DomainSpec::Ellipse { center, a, b } => Descriptor::new("ellipse")
                .with("a", *a)
                .with("b", *b)
                .with("x0", center.x)
                .with("y0", center.y),
            DomainSpec::Rectangle { lo, hi } => Descriptor::new("rectangle")
                .with("x0", lo.x)
                .with("y0", lo.y)
                .with("x1", hi.x)
                .with("y1", hi.y),
            DomainSpec::HalfDisk { radius } => Descriptor::new("halfdisk").with("r", *radius),
            DomainSpec::Polygon(v) => return write!(f, "polygon:{}", v.len()),
        };
        write!(f, "{d}")
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum PotentialChoice {
    /// The five-member pinched family.
    #[default]
    Family,
    Analytic(AnalyticPotential),
    /// `det D^2 phi = g`, `phi = boundary` on the boundary.
    Solved { g: FieldSpec, boundary: FieldSpec },
}

impl PotentialChoice {
    pub fn build(&self, domain: &DomainSpec, mesh: usize) -> Result<Vec<ConvexPotential>> {
        let dom = Arc::new(domain.build(mesh)?);
        match self {
            PotentialChoice::Family => pinched_family_on(dom),
            PotentialChoice::Analytic(a) => Ok(vec![ConvexPotential::analytic(a.clone(), dom, None)?]),
            PotentialChoice::Solved { g, boundary } => Ok(vec![solved_potential(dom, g, boundary)?]),
        }
    }
}

pub fn solved_potential(domain: Arc<ConvexDomain>, g: &FieldSpec, boundary: &FieldSpec) -> Result<ConvexPotential> {
    let gf = g.sample(domain.grid(), domain.mask());
    let b = boundary.clone();
    let trace: PointFn = Arc::new(move |x| b.eval(x, 0.0));
    Ok(solve_monge_ampere(domain, &gf, trace)?.with_label(format!("solved[{g}]")))
}

/// Members of the pinched family (`1/2 <= det D^2 phi <= 2` on the unit disk).
pub fn family_members() -> Vec<AnalyticPotential> {
    vec![
        AnalyticPotential::isotropic(1.0),
        AnalyticPotential::quadratic(Sym2::new(1.5, 0.3, 0.8)),
        AnalyticPotential::radial_power(1.0, 0.05, 4.0),
        AnalyticPotential::perturbed(0.025),
    ]
}

/// Density of the solved member.
pub fn family_density() -> FieldSpec {
    FieldSpec::Affine {
        c: 1.0,
        a: Point::new(0.5, 0.0),
    }
}

/// Zero data on domains without corners. At a corner zero data forces a
/// degenerate Hessian, so cornered domains get the trace of `|x|^2/2`.
pub fn family_boundary(domain: &ConvexDomain) -> FieldSpec {
    let v = domain.vertices();
    let m = v.len();
    let cornered = (0..m).any(|i| {
        let a = v[(i + m - 1) % m] - v[i];
        let b = v[(i + 1) % m] - v[i];
        a.angle(&b) < CORNER_ANGLE
    });
    if cornered {
        FieldSpec::Quadratic {
            c: 0.0,
            m: [1.0, 0.0, 1.0],
            x0: Point::zeros(),
        }
    } else {
        FieldSpec::Const(0.0)
    }
}

/// Interior angles below this count as corners.
pub const CORNER_ANGLE: f64 = 0.9 * std::f64::consts::PI;

pub fn pinched_family(mesh: usize) -> Result<Vec<ConvexPotential>> {
    pinched_family_on(Arc::new(DomainSpec::default().build(mesh)?))
}

pub fn pinched_family_on(domain: Arc<ConvexDomain>) -> Result<Vec<ConvexPotential>> {
    let mut out = Vec::with_capacity(5);
    for a in family_members() {
        out.push(ConvexPotential::analytic(a, domain.clone(), Some(FAMILY_PINCHING))?);
    }
    let boundary = family_boundary(&domain);
    let solved = solved_potential(domain, &family_density(), &boundary)?;
    let (lo, hi) = solved.pinching();
    if lo < FAMILY_PINCHING.0 || hi > FAMILY_PINCHING.1 {
        return Err(Error::PinchingViolated {
            lo,
            hi,
            lambda: FAMILY_PINCHING.0,
            big_lambda: FAMILY_PINCHING.1,
        });
    }
    out.push(solved);
    Ok(out)
}

/// Potentials built per mesh, shared between clones of a context.
pub type PotentialCache = Arc<Mutex<BTreeMap<usize, Vec<ConvexPotential>>>>;

#[derive(Clone, Debug)]
pub struct SuiteContext {
    pub domain: DomainSpec,
    pub potential: PotentialChoice,
    /// Right-hand side override; suites fall back to their own defaults.
    pub rhs: Option<FieldSpec>,
    pub exponents: Exponents,
    pub meshes: Vec<usize>,
    pub thetas: Vec<f64>,
    /// Exponents `s` of the singular family `|x - x0|^{-s}`.
    pub singular: Vec<f64>,
    pub tolerance: f64,
    pub seed: u64,
    pub cache: PotentialCache,
}

impl Default for SuiteContext {
    fn default() -> Self {
        SuiteContext {
            domain: DomainSpec::default(),
            potential: PotentialChoice::Family,
            rhs: None,
            exponents: Exponents::default(),
            meshes: vec![64, 128, 256],
            thetas: vec![0.1, 0.05, 0.01],
            singular: vec![],
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            cache: PotentialCache::default(),
        }
    }
}

impl SuiteContext {
    /// Potentials on `mesh`; built once per context and shared by its clones.
    pub fn potentials(&self, mesh: usize) -> Result<Vec<ConvexPotential>> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&mesh) {
            return Ok(v.clone());
        }
        let v = self.potential.build(&self.domain, mesh)?;
        self.cache.lock().expect("cache lock").insert(mesh, v.clone());
        Ok(v)
    }

    /// Same settings with an empty potential cache (needed after changing
    /// the domain or potential).
    pub fn fresh(&self) -> Self {
        SuiteContext {
            cache: PotentialCache::default(),
            ..self.clone()
        }
    }

    pub fn finest_mesh(&self) -> usize {
        self.meshes.iter().copied().max().unwrap_or(64)
    }

    pub fn coarsest_mesh(&self) -> usize {
        self.meshes.iter().copied().min().unwrap_or(64)
    }

    /// Default-or-override right-hand side sampled on a potential's grid.
    pub fn rhs_or(&self, default: &FieldSpec, potential: &ConvexPotential) -> ScalarField {
        let d = potential.domain();
        self.rhs.as_ref().unwrap_or(default).sample(d.grid(), d.mask())
    }

    pub fn validate(&self) -> Result<()> {
        self.exponents.validate()?;
        if self.meshes.is_empty() || self.meshes.iter().any(|&m| m < 4) {
            return Err(Error::Config(format!("mesh ladder {:?} needs entries >= 4", self.meshes)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tolerance)));
        }
        if let Some(t) = self.thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("theta {t} must lie in (0, 1)")));
        }
        let limit = 2.0 / self.exponents.q;
        if let Some(s) = self.singular.iter().find(|s| !(**s >= 0.0 && **s < limit)) {
            return Err(Error::ExponentOutOfRange(format!(
                "singular exponent {s} must lie in [0, n/q = {limit}) to keep f in L^q"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_is_pinched() {
        let fam = pinched_family(32).unwrap();
        assert_eq!(fam.len(), 5);
        for p in &fam {
            let (lo, hi) = p.pinching();
            assert!(lo >= 0.5 && hi <= 2.0, "{}: {lo} {hi}", p.label());
        }
    }

    #[test]
    fn domain_round_trip() {
        for s in ["disk:r=1,x0=0,y0=0", "halfdisk:r=0.5", "rectangle:x0=0,x1=2,y0=0,y1=1"] {
            let d = DomainSpec::parse(s).unwrap();
            assert_eq!(DomainSpec::parse(&d.to_string()).unwrap(), d);
        }
        assert!(DomainSpec::parse("disk:r=1,q=2").is_err());
    }

    #[test]
    fn singular_exponent_checked() {
        let ctx = SuiteContext {
            singular: vec![0.5, 1.5],
            ..SuiteContext::default()
        };
        assert!(matches!(ctx.validate(), Err(Error::ExponentOutOfRange(_))));
    }
}
