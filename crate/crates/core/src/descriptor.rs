//! `kind:param=value,...` strings used in configs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Descriptor {
    pub kind: String,
    params: BTreeMap<String, f64>,
}

impl Descriptor {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (s, ""),
        };
        if kind.is_empty() {
            return Err(Error::Parse(format!("empty descriptor kind in `{s}`")));
        }
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number `{v}` for `{k}`")))?;
            if params.insert(k.trim().to_string(), v).is_some() {
                return Err(Error::Parse(format!("duplicate parameter `{k}`")));
            }
        }
        Ok(Descriptor {
            kind: kind.to_string(),
            params,
        })
    }

    pub fn new(kind: &str) -> Self {
        Descriptor {
            kind: kind.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.params.insert(key.into(), v);
        self
    }

    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Parse(format!("`{}` needs parameter `{key}`", self.kind)))
    }

    /// Errors on any parameter not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse(format!("unknown parameter `{k}` for `{}`", self.kind)));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.kind)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let d = Descriptor::parse("generalQuadratic: m11=4, m22=0.25").unwrap();
        assert_eq!(d.kind, "generalQuadratic");
        assert_eq!(d.get("m11", 0.0), 4.0);
        assert_eq!(d.get("m12", 0.0), 0.0);
        let again = Descriptor::parse(&d.to_string()).unwrap();
        assert_eq!(again, d);
        assert!(d.check_keys(&["m11"]).is_err());
    }

    #[test]
    fn malformed() {
        assert!(Descriptor::parse("x:a").is_err());
        assert!(Descriptor::parse("x:a=b").is_err());
        assert!(Descriptor::parse(":a=1").is_err());
        assert!(Descriptor::parse("x:a=1,a=2").is_err());
    }
}
