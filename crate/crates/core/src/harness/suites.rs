//! Registry of estimate suites, looked up by name.

use crate::error::{Error, Result};

use super::context::SuiteContext;
use super::report::EstimateReport;
use super::{boundary, global, green, identity, interior, invariance, maximal, maxprinciple};

pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Whether the suite draws random data, so a seed must be configured.
    fn randomized(&self) -> bool;
    fn run(&self, ctx: &SuiteContext) -> Result<EstimateReport>;
}

type Runner = fn(&SuiteContext) -> Result<EstimateReport>;

/// A suite backed by a report function.
pub struct FnSuite {
    pub name: &'static str,
    pub description: &'static str,
    pub randomized: bool,
    pub runner: Runner,
}

impl Suite for FnSuite {
    fn name(&self) -> &'static str {
        self.name
    }

    fn description(&self) -> &'static str {
        self.description
    }

    fn randomized(&self) -> bool {
        self.randomized
    }

    fn run(&self, ctx: &SuiteContext) -> Result<EstimateReport> {
        ctx.validate()?;
        (self.runner)(ctx)
    }
}

pub struct SuiteRegistry {
    suites: Vec<Box<dyn Suite>>,
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

const STANDARD: [(&str, &str, bool, Runner); 16] = [
    ("ma-identity", "Trace identity and divergence-free cofactor rows", false, identity::identity_report),
    ("max-principle", "Maximum principles on balls, sections and the whole domain", false, maxprinciple::max_principle_report),
    ("harnack", "Harnack ratios of positive homogeneous solutions", true, maxprinciple::harnack_report),
    ("oscillation", "Oscillation decay and interior Holder exponent", true, maxprinciple::oscillation_report),
    ("c1alpha-interior", "Pointwise interior C^{1,alpha} at the minimum point", false, interior::c1alpha_interior_report),
    ("cascade", "Affine approximation cascade over shrinking sections", false, interior::cascade_report),
    ("comparison", "Comparison estimate against det D^2 w = 1", true, interior::comparison_report),
    ("c1alpha-boundary", "Pointwise boundary C^{1,alpha} on a flat piece", false, boundary::c1alpha_boundary_report),
    ("boundary-gradient", "Holder modulus of the boundary gradient", false, boundary::boundary_gradient_report),
    ("barrier", "Supersolution barrier on a flat boundary piece", false, boundary::barrier_report),
    ("green", "Green function oracle and integrability", true, green::green_report),
    ("strong-type", "Strong-type p-p bounds for the section maximal function", true, maximal::strong_type_suite),
    ("w1p", "Global W^{1,p} stability over the singular family", false, global::w1p_report),
    ("holder", "Global Holder quotients", true, global::holder_report),
    ("geometry", "Normalization, volume growth, separation and engulfing", true, invariance::geometry_report),
    ("affine-invariance", "Invariance under unimodular maps and rescaling", true, invariance::affine_invariance_report),
];

impl SuiteRegistry {
    pub fn empty() -> Self {
        SuiteRegistry { suites: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        for (name, description, randomized, runner) in STANDARD {
            r.register(Box::new(FnSuite {
                name,
                description,
                randomized,
                runner,
            }));
        }
        r
    }

    /// Adds a suite, replacing any with the same name.
    pub fn register(&mut self, suite: Box<dyn Suite>) {
        self.suites.retain(|s| s.name() != suite.name());
        self.suites.push(suite);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Suite> {
        self.suites
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownSuite(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.iter().map(|s| s.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Suite> {
        self.suites.iter().map(|s| s.as_ref())
    }

    pub fn run(&self, name: &str, ctx: &SuiteContext) -> Result<EstimateReport> {
        self.get(name)?.run(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_every_suite() {
        let r = SuiteRegistry::standard();
        for name in [
            "max-principle",
            "harnack",
            "oscillation",
            "c1alpha-interior",
            "cascade",
            "comparison",
            "c1alpha-boundary",
            "boundary-gradient",
            "barrier",
            "green",
            "strong-type",
            "w1p",
            "holder",
            "geometry",
        ] {
            assert!(r.get(name).is_ok(), "{name}");
        }
        assert_eq!(r.names().len(), 16);
    }

    #[test]
    fn unknown_suite_is_an_error() {
        let r = SuiteRegistry::standard();
        assert!(matches!(r.get("nope"), Err(Error::UnknownSuite(_))));
    }

    struct Fixed;

    impl Suite for Fixed {
        fn name(&self) -> &'static str {
            "barrier"
        }
        fn description(&self) -> &'static str {
            "stub"
        }
        fn randomized(&self) -> bool {
            false
        }
        fn run(&self, _: &SuiteContext) -> Result<EstimateReport> {
            Ok(EstimateReport::new("stub").finish())
        }
    }

    #[test]
    fn register_replaces_by_name() {
        let mut r = SuiteRegistry::standard();
        r.register(Box::new(Fixed));
        assert_eq!(r.names().len(), 16);
        let rep = r.run("barrier", &SuiteContext::default()).unwrap();
        assert_eq!(rep.suite, "stub");
    }

    #[test]
    fn invalid_context_rejected_before_compute() {
        let r = SuiteRegistry::standard();
        let mut ctx = SuiteContext::default();
        ctx.meshes.clear();
        assert!(r.run("barrier", &ctx).is_err());
    }
}
