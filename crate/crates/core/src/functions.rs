//! Right-hand sides and boundary data built from descriptors.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::descriptor::Descriptor;
use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Const(f64),
    Affine { c: f64, a: Point },
    /// `c + (x - x0)^T M (x - x0) / 2`.
    Quadratic { c: f64, m: [f64; 3], x0: Point },
    /// `scale |x - x0|^{-s}`, clamped at distance `h`.
    Singular { s: f64, x0: Point, scale: f64 },
    /// `c + amp cos(pi (k1 x + k2 y))`.
    Cosine { c: f64, amp: f64, k: Point },
    /// `scale |x - x0|`.
    Abs { x0: Point, scale: f64 },
    /// Seeded random trigonometric polynomial plus an offset.
    Fourier {
        seed: u64,
        modes: usize,
        amp: f64,
        offset: f64,
        terms: Vec<([f64; 2], f64, f64)>,
    },
    /// `value` on the disk `|x - x0| < r`, zero elsewhere.
    Indicator { x0: Point, r: f64, value: f64 },
}

impl FieldSpec {
    pub fn fourier(seed: u64, modes: usize, amp: f64, offset: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for kx in 0..=modes {
            for ky in 0..=modes {
                if kx + ky == 0 {
                    continue;
                }
                let a = rng.random_range(-amp..=amp);
                let b = rng.random_range(-amp..=amp);
                terms.push(([kx as f64, ky as f64], a, b));
            }
        }
        FieldSpec::Fourier {
            seed,
            modes,
            amp,
            offset,
            terms,
        }
    }

    pub fn singular(s: f64, x0: Point) -> Self {
        FieldSpec::Singular { s, x0, scale: 1.0 }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let d = Descriptor::parse(s)?;
        let x0 = || Point::new(d.get("x0", 0.0), d.get("y0", 0.0));
        Ok(match d.kind.as_str() {
            "const" => {
                d.check_keys(&["c"])?;
                FieldSpec::Const(d.get("c", 1.0))
            }
            "affine" => {
                d.check_keys(&["c", "a1", "a2"])?;
                FieldSpec::Affine {
                    c: d.get("c", 0.0),
                    a: Point::new(d.get("a1", 0.0), d.get("a2", 0.0)),
                }
            }
            "quadratic" => {
                d.check_keys(&["c", "m11", "m12", "m22", "x0", "y0"])?;
                FieldSpec::Quadratic {
                    c: d.get("c", 0.0),
                    m: [d.get("m11", 1.0), d.get("m12", 0.0), d.get("m22", 1.0)],
                    x0: x0(),
                }
            }
            "singular" => {
                d.check_keys(&["s", "x0", "y0", "scale"])?;
                let s = d.require("s")?;
                if s < 0.0 {
                    return Err(Error::Parse(format!("singular exponent {s} < 0")));
                }
                FieldSpec::Singular {
                    s,
                    x0: x0(),
                    scale: d.get("scale", 1.0),
                }
            }
            "cosine" => {
                d.check_keys(&["c", "amp", "k1", "k2"])?;
                FieldSpec::Cosine {
                    c: d.get("c", 0.0),
                    amp: d.get("amp", 1.0),
                    k: Point::new(d.get("k1", 1.0), d.get("k2", 0.0)),
                }
            }
            "abs" => {
                d.check_keys(&["x0", "y0", "scale"])?;
                FieldSpec::Abs {
                    x0: x0(),
                    scale: d.get("scale", 1.0),
                }
            }
            "fourier" => {
                d.check_keys(&["seed", "modes", "amp", "offset"])?;
                let seed = d.require("seed")?;
                if seed < 0.0 || seed.fract() != 0.0 {
                    return Err(Error::Parse(format!("seed must be a nonnegative integer, got {seed}")));
                }
                FieldSpec::fourier(
                    seed as u64,
                    d.get("modes", 3.0) as usize,
                    d.get("amp", 0.2),
                    d.get("offset", 1.0),
                )
            }
            "indicator" => {
                d.check_keys(&["x0", "y0", "r", "value"])?;
                FieldSpec::Indicator {
                    x0: x0(),
                    r: d.require("r")?,
                    value: d.get("value", 1.0),
                }
            }
            other => return Err(Error::Parse(format!("unknown field kind `{other}`"))),
        })
    }

    /// Value at `p`; `h` is the clamp distance of singular kinds.
    pub fn eval(&self, p: Point, h: f64) -> f64 {
        match self {
            FieldSpec::Const(c) => *c,
            FieldSpec::Affine { c, a } => c + a.dot(&p),
            FieldSpec::Quadratic { c, m, x0 } => {
                let d = p - x0;
                c + 0.5 * (m[0] * d.x * d.x + 2.0 * m[1] * d.x * d.y + m[2] * d.y * d.y)
            }
            FieldSpec::Singular { s, x0, scale } => scale * (p - x0).norm().max(h).powf(-s),
            FieldSpec::Cosine { c, amp, k } => c + amp * (PI * k.dot(&p)).cos(),
            FieldSpec::Abs { x0, scale } => scale * (p - x0).norm(),
            FieldSpec::Fourier { offset, terms, .. } => {
                offset
                    + terms
                        .iter()
                        .map(|(k, a, b)| {
                            let t = PI * (k[0] * p.x + k[1] * p.y);
                            a * t.cos() + b * t.sin()
                        })
                        .sum::<f64>()
            }
            FieldSpec::Indicator { x0, r, value } => {
                if (p - x0).norm() < *r {
                    *value
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(&self, grid: &Grid, mask: &[bool]) -> ScalarField {
        ScalarField::from_fn(grid, mask, |p| self.eval(p, grid.h))
    }

    pub fn scaled(&self, factor: f64) -> FieldSpec {
        match self.clone() {
            FieldSpec::Const(c) => FieldSpec::Const(c * factor),
            FieldSpec::Affine { c, a } => FieldSpec::Affine {
                c: c * factor,
                a: a * factor,
            },
            FieldSpec::Quadratic { c, m, x0 } => FieldSpec::Quadratic {
                c: c * factor,
                m: m.map(|v| v * factor),
                x0,
            },
            FieldSpec::Singular { s, x0, scale } => FieldSpec::Singular {
                s,
                x0,
                scale: scale * factor,
            },
            FieldSpec::Cosine { c, amp, k } => FieldSpec::Cosine {
                c: c * factor,
                amp: amp * factor,
                k,
            },
            FieldSpec::Abs { x0, scale } => FieldSpec::Abs {
                x0,
                scale: scale * factor,
            },
            FieldSpec::Fourier {
                seed,
                modes,
                amp,
                offset,
                terms,
            } => FieldSpec::Fourier {
                seed,
                modes,
                amp: amp * factor,
                offset: offset * factor,
                terms: terms.into_iter().map(|(k, a, b)| (k, a * factor, b * factor)).collect(),
            },
            FieldSpec::Indicator { x0, r, value } => FieldSpec::Indicator {
                x0,
                r,
                value: value * factor,
            },
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self {
            FieldSpec::Const(c) => Descriptor::new("const").with("c", *c),
            FieldSpec::Affine { c, a } => Descriptor::new("affine").with("c", *c).with("a1", a.x).with("a2", a.y),
            FieldSpec::Quadratic { c, m, x0 } => Descriptor::new("quadratic")
                .with("c", *c)
                .with("m11", m[0])
                .with("m12", m[1])
                .with("m22", m[2])
                .with("x0", x0.x)
                .with("y0", x0.y),
            FieldSpec::Singular { s, x0, scale } => Descriptor::new("singular")
                .with("s", *s)
                .with("x0", x0.x)
                .with("y0", x0.y)
                .with("scale", *scale),
            FieldSpec::Cosine { c, amp, k } => Descriptor::new("cosine")
                .with("c", *c)
                .with("amp", *amp)
                .with("k1", k.x)
                .with("k2", k.y),
            FieldSpec::Abs { x0, scale } => Descriptor::new("abs")
                .with("x0", x0.x)
                .with("y0", x0.y)
                .with("scale", *scale),
            FieldSpec::Fourier {
                seed,
                modes,
                amp,
                offset,
                ..
            } => Descriptor::new("fourier")
                .with("seed", *seed as f64)
                .with("modes", *modes as f64)
                .with("amp", *amp)
                .with("offset", *offset),
            FieldSpec::Indicator { x0, r, value } => Descriptor::new("indicator")
                .with("x0", x0.x)
                .with("y0", x0.y)
                .with("r", *r)
                .with("value", *value),
        };
        write!(f, "{d}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in [
            "const:c=2",
            "affine:a1=1,a2=-0.5,c=3",
            "singular:s=0.5,scale=1,x0=0.1,y0=0",
            "fourier:amp=0.2,modes=2,offset=1,seed=7",
            "indicator:r=0.1,value=1,x0=0,y0=0",
        ] {
            let f = FieldSpec::parse(s).unwrap();
            assert_eq!(FieldSpec::parse(&f.to_string()).unwrap(), f);
        }
        assert!(FieldSpec::parse("const:c=1,zz=2").is_err());
        assert!(FieldSpec::parse("bogus").is_err());
        assert!(FieldSpec::parse("fourier:seed=1.5").is_err());
    }

    #[test]
    fn singular_is_capped() {
        let f = FieldSpec::singular(1.0, Point::zeros());
        assert_eq!(f.eval(Point::zeros(), 0.01), 100.0);
        assert!((f.eval(Point::new(0.5, 0.0), 0.01) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fourier_is_seeded() {
        let a = FieldSpec::fourier(3, 2, 0.2, 1.0);
        let b = FieldSpec::fourier(3, 2, 0.2, 1.0);
        let c = FieldSpec::fourier(4, 2, 0.2, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let p = Point::new(0.3, -0.1);
        assert!((a.scaled(-2.0).eval(p, 0.0) + 2.0 * a.eval(p, 0.0)).abs() < 1e-14);
    }
}
