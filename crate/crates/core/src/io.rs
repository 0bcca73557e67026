//! Text formats `malab-field v1` and `malab-domain v1`.
//!
//! Both start with the header line, then `dims nx ny`, `origin x y` and
//! `spacing h`, then one node value per line in row-major order (`k = j nx + i`).
//! Reals are written with 17 significant digits; nodes outside the domain are `nan`.
//! Domains list their vertices (`vertices m` plus `m` lines of `x y`) before the
//! grid block, and their node values are the mask bits `0`/`1`.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField};

pub const FIELD_HEADER: &str = "malab-field v1";
pub const DOMAIN_HEADER: &str = "malab-domain v1";

fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

fn write_grid(out: &mut String, g: &Grid) {
    let _ = writeln!(out, "dims {} {}", g.nx, g.ny);
    let _ = writeln!(out, "origin {} {}", real(g.origin.x), real(g.origin.y));
    let _ = writeln!(out, "spacing {}", real(g.h));
}

pub fn field_to_string(f: &ScalarField) -> String {
    let mut s = String::with_capacity(24 * f.values.len() + 64);
    let _ = writeln!(s, "{FIELD_HEADER}");
    write_grid(&mut s, &f.grid);
    for v in &f.values {
        let _ = writeln!(s, "{}", real(*v));
    }
    s
}

pub fn domain_to_string(d: &ConvexDomain) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{DOMAIN_HEADER}");
    let _ = writeln!(s, "vertices {}", d.vertices().len());
    for v in d.vertices() {
        let _ = writeln!(s, "{} {}", real(v.x), real(v.y));
    }
    write_grid(&mut s, d.grid());
    for &m in d.mask() {
        let _ = writeln!(s, "{}", u8::from(m));
    }
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Lines { it: s.lines().enumerate() }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.it
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::Parse("unexpected end of file".into()))
    }

    /// Next line split as `key a b ...`, checking the key.
    fn keyed(&mut self, key: &str, count: usize) -> Result<Vec<&'a str>> {
        let (n, l) = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse(format!("line {n}: expected `{key}`")));
        }
        let rest: Vec<&str> = parts.collect();
        if rest.len() != count {
            return Err(Error::Parse(format!("line {n}: `{key}` needs {count} values")));
        }
        Ok(rest)
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

fn read_grid(lines: &mut Lines) -> Result<Grid> {
    let d = lines.keyed("dims", 2)?;
    let o = lines.keyed("origin", 2)?;
    let h = lines.keyed("spacing", 1)?;
    let grid = Grid {
        origin: Point::new(num(o[0])?, num(o[1])?),
        h: num(h[0])?,
        nx: num(d[0])?,
        ny: num(d[1])?,
    };
    if !(grid.h > 0.0 && grid.h.is_finite()) {
        return Err(Error::Parse(format!("spacing {} must be positive", grid.h)));
    }
    Ok(grid)
}

fn header(lines: &mut Lines, expect: &str) -> Result<()> {
    let (_, l) = lines.next()?;
    if l != expect {
        return Err(Error::Parse(format!("expected header `{expect}`, got `{l}`")));
    }
    Ok(())
}

fn expect_end(lines: &mut Lines) -> Result<()> {
    match lines.it.find(|(_, l)| !l.trim().is_empty()) {
        Some((n, _)) => Err(Error::Parse(format!("line {}: trailing data", n + 1))),
        None => Ok(()),
    }
}

pub fn field_from_str(s: &str) -> Result<ScalarField> {
    let mut lines = Lines::new(s);
    header(&mut lines, FIELD_HEADER)?;
    let grid = read_grid(&mut lines)?;
    let values = (0..grid.len())
        .map(|_| lines.next().and_then(|(_, l)| num::<f64>(l)))
        .collect::<Result<Vec<_>>>()?;
    expect_end(&mut lines)?;
    Ok(ScalarField::new(grid, values))
}

/// Rebuilds the domain from its vertices and spacing and checks the stored grid and mask.
pub fn domain_from_str(s: &str) -> Result<ConvexDomain> {
    let mut lines = Lines::new(s);
    header(&mut lines, DOMAIN_HEADER)?;
    let m: usize = num(lines.keyed("vertices", 1)?[0])?;
    let mut vertices = Vec::with_capacity(m);
    for _ in 0..m {
        let (n, l) = lines.next()?;
        let xy: Vec<&str> = l.split_whitespace().collect();
        if xy.len() != 2 {
            return Err(Error::Parse(format!("line {n}: vertex needs 2 values")));
        }
        vertices.push(Point::new(num(xy[0])?, num(xy[1])?));
    }
    let grid = read_grid(&mut lines)?;
    let mask = (0..grid.len())
        .map(|_| {
            lines.next().and_then(|(n, l)| match l {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::Parse(format!("line {n}: mask bit must be 0 or 1"))),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    expect_end(&mut lines)?;
    let d = ConvexDomain::with_spacing(vertices, grid.h)?;
    if d.grid() != &grid || d.mask() != mask.as_slice() {
        return Err(Error::Parse("stored grid or mask disagrees with the vertices".into()));
    }
    Ok(d)
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    Ok(std::fs::write(path, field_to_string(f))?)
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    field_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_domain(path: &Path, d: &ConvexDomain) -> Result<()> {
    Ok(std::fs::write(path, domain_to_string(d))?)
}

pub fn read_domain(path: &Path) -> Result<ConvexDomain> {
    domain_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(mesh: usize) -> ConvexDomain {
        ConvexDomain::disk(Point::zeros(), 1.0, 64, mesh).unwrap()
    }

    #[test]
    fn field_round_trip_is_bit_exact() {
        let d = disk(12);
        let f = ScalarField::from_fn(d.grid(), d.mask(), |p| (p.x * 3.1).sin() / 7.0 + p.y * 1e-300);
        let s = field_to_string(&f);
        let back = field_from_str(&s).unwrap();
        assert_eq!(back.grid, f.grid);
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        assert_eq!(field_to_string(&back), s);
    }

    #[test]
    fn domain_round_trip() {
        let d = disk(10);
        let s = domain_to_string(&d);
        assert!(s.starts_with("malab-domain v1\nvertices 64\n"));
        let back = domain_from_str(&s).unwrap();
        assert_eq!(back.vertices(), d.vertices());
        assert_eq!(back.mask(), d.mask());
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(field_from_str("malab-field v2\n").is_err());
        assert!(field_from_str("malab-field v1\ndims 1 1\norigin 0 0\nspacing 1\n").is_err());
        assert!(field_from_str("malab-field v1\ndims 1 1\norigin 0 0\nspacing 1\n2\n3\n").is_err());
        assert!(field_from_str("malab-field v1\ndims 1 1\norigin 0 0\nspacing 0\n2\n").is_err());
        let mut s = domain_to_string(&disk(6));
        s = s.replacen("\n1\n", "\n0\n", 1);
        assert!(domain_from_str(&s).is_err());
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(f64::NAN), "nan");
    }
}
