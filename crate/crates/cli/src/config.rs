//! Experiment configuration: a TOML file with typed sections, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use malab::functions::FieldSpec;
use malab::harness::exponents::{conjugate, default_inner_q, N};
use malab::harness::{DomainSpec, Exponents, PotentialChoice, SuiteContext, SuiteRegistry};
use malab::{AnalyticPotential, Error, Result};

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub rhs: RhsSection,
    #[serde(default)]
    pub exponents: ExponentsSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Domain descriptor, e.g. `disk:r=1` or `ellipse:a=2,b=1`.
    pub spec: String,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { spec: "disk:r=1".into() }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// `family`, `analytic` or `solved`.
    pub kind: String,
    /// Analytic descriptor when `kind = "analytic"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<String>,
    /// Density `g` when `kind = "solved"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    /// Boundary data when `kind = "solved"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            kind: "family".into(),
            descriptor: None,
            g: None,
            boundary: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RhsSection {
    /// Right-hand side descriptor overriding the suite defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Exponents `s` of the singular family `|x - x0|^{-s}`.
    #[serde(default)]
    pub singular: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    pub q: f64,
    /// Defaults to `q/(q-1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qprime: Option<f64>,
    /// Defaults to `(n/2 + q)/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_q: Option<f64>,
    pub p: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for ExponentsSection {
    fn default() -> Self {
        let e = Exponents::default();
        ExponentsSection {
            q: e.q,
            qprime: None,
            inner_q: None,
            p: e.p,
            alpha: e.alpha.unwrap_or(0.3),
            gamma: e.gamma,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub ladder: Vec<usize>,
    pub thetas: Vec<f64>,
    pub tolerance: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        let c = SuiteContext::default();
        MeshSection {
            ladder: c.meshes,
            thetas: c.thetas,
            tolerance: c.tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serialization of the parsed config; equal configs give equal bytes.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, in hex.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn rhs_spec(&self) -> Result<Option<FieldSpec>> {
        self.rhs.f.as_deref().map(FieldSpec::parse).transpose()
    }

    pub fn potential_choice(&self) -> Result<PotentialChoice> {
        let p = &self.potential;
        let reject = |field: &str| Error::Config(format!("potential kind `{}` does not take `{field}`", p.kind));
        match p.kind.as_str() {
            "family" => {
                if p.descriptor.is_some() {
                    return Err(reject("descriptor"));
                }
                if p.g.is_some() || p.boundary.is_some() {
                    return Err(reject("g/boundary"));
                }
                Ok(PotentialChoice::Family)
            }
            "analytic" => {
                if p.g.is_some() || p.boundary.is_some() {
                    return Err(reject("g/boundary"));
                }
                let d = p
                    .descriptor
                    .as_deref()
                    .ok_or_else(|| Error::Config("analytic potential needs `descriptor`".into()))?;
                Ok(PotentialChoice::Analytic(AnalyticPotential::parse(d)?))
            }
            "solved" => {
                if p.descriptor.is_some() {
                    return Err(reject("descriptor"));
                }
                let g = FieldSpec::parse(p.g.as_deref().unwrap_or("const:c=1"))?;
                let boundary = FieldSpec::parse(p.boundary.as_deref().unwrap_or("const:c=0"))?;
                Ok(PotentialChoice::Solved { g, boundary })
            }
            other => Err(Error::Config(format!("unknown potential kind `{other}`"))),
        }
    }

    pub fn exponents(&self) -> Result<Exponents> {
        let e = &self.exponents;
        let qprime = match e.qprime {
            Some(v) => v,
            None => conjugate(e.q, N)?,
        };
        Ok(Exponents {
            q: e.q,
            qprime,
            inner_q: e.inner_q.unwrap_or_else(|| default_inner_q(e.q, N)),
            p: e.p.clone(),
            alpha: Some(e.alpha),
            gamma: e.gamma,
        })
    }

    /// Suite context after full validation: exponents, meshes, suite names and the seed rule.
    pub fn context(&self, registry: &SuiteRegistry, suites: &[String]) -> Result<SuiteContext> {
        let rhs = self.rhs_spec()?;
        let ctx = SuiteContext {
            domain: DomainSpec::parse(&self.domain.spec)?,
            potential: self.potential_choice()?,
            rhs: rhs.clone(),
            exponents: self.exponents()?,
            meshes: self.mesh.ladder.clone(),
            thetas: self.mesh.thetas.clone(),
            singular: self.rhs.singular.clone(),
            tolerance: self.mesh.tolerance,
            seed: self.run.seed.unwrap_or(0),
            ..SuiteContext::default()
        };
        ctx.validate()?;
        let mut randomized = matches!(rhs, Some(FieldSpec::Fourier { .. }));
        for s in suites {
            randomized |= registry.get(s)?.randomized();
        }
        if randomized && self.run.seed.is_none() {
            return Err(Error::Config("a seed is required for randomized suites and data (set [run] seed or --seed)".into()));
        }
        Ok(ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[domain]
spec = "disk:r=1"

[potential]
kind = "analytic"
descriptor = "isotropicQuadratic:scale=1"

[rhs]
f = "const:c=1"

[exponents]
q = 1.5
p = [2.0, 4.0]
alpha = 0.3
gamma = 0.5

[mesh]
ladder = [16, 32]
thetas = [0.1]
tolerance = 0.5

[run]
suites = ["barrier"]
seed = 7
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::parse(FULL).unwrap();
        let reg = SuiteRegistry::standard();
        let ctx = c.context(&reg, &c.run.suites).unwrap();
        assert_eq!(ctx.exponents.qprime, 3.0);
        assert_eq!(ctx.exponents.inner_q, 1.25);
        assert_eq!(ctx.meshes, vec![16, 32]);
        assert_eq!(ctx.seed, 7);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = FULL.replace("gamma = 0.5", "gamma = 0.5\ngama = 0.4");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = FULL.replace("[run]", "[runs]");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn exponent_rules_checked_before_compute() {
        let reg = SuiteRegistry::standard();
        let c = ExperimentConfig::parse(&FULL.replace("q = 1.5", "q = 1.0")).unwrap();
        let e = c.context(&reg, &[]).unwrap_err();
        assert_eq!(e.kind(), "ExponentOutOfRange");
        let c = ExperimentConfig::parse(&FULL.replace("p = [2.0, 4.0]", "p = [6.0]")).unwrap();
        assert_eq!(c.context(&reg, &[]).unwrap_err().kind(), "ExponentOutOfRange");
    }

    #[test]
    fn seed_required_for_randomized_suites() {
        let reg = SuiteRegistry::standard();
        let c = ExperimentConfig::parse(&FULL.replace("seed = 7", "")).unwrap();
        assert!(c.context(&reg, &["barrier".into()]).is_ok());
        assert!(c.context(&reg, &["green".into()]).is_err());
        assert!(c.context(&reg, &["nope".into()]).is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = ExperimentConfig::parse(FULL).unwrap();
        let b = ExperimentConfig::parse(&FULL.replace("q = 1.5", "q   =   1.5  # comment")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&FULL.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
