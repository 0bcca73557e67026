//! Exponent admissibility rules, checked before any computation.

use crate::error::{Error, Result};

/// Space dimension of every grid in this crate.
pub const N: f64 = 2.0;

/// `n/2 < q <= n`.
pub fn validate_q(q: f64, n: f64) -> Result<()> {
    if q > n / 2.0 && q <= n {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(format!("q = {q} must satisfy {} < q <= {n}", n / 2.0)))
    }
}

/// `q' = q/(q-1)`; requires `q > 1` and `q' < n/(n-2)` (no bound when `n = 2`).
pub fn conjugate(q: f64, n: f64) -> Result<f64> {
    if q <= 1.0 {
        return Err(Error::ExponentOutOfRange(format!("q = {q} has no finite conjugate")));
    }
    let qp = q / (q - 1.0);
    if n > 2.0 && qp >= n / (n - 2.0) {
        return Err(Error::ExponentOutOfRange(format!("q' = {qp} must be < n/(n-2) = {}", n / (n - 2.0))));
    }
    Ok(qp)
}

/// `nq/(n-q)`, infinite at `q = n`.
pub fn sobolev_limit(q: f64, n: f64) -> f64 {
    if q >= n {
        f64::INFINITY
    } else {
        n * q / (n - q)
    }
}

/// `1 <= p < nq/(n-q)` together with the admissibility of `q`.
pub fn validate_p(p: f64, q: f64, n: f64) -> Result<()> {
    validate_q(q, n)?;
    let lim = sobolev_limit(q, n);
    if p >= 1.0 && p < lim {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(format!("p = {p} must satisfy 1 <= p < nq/(n-q) = {lim}")))
    }
}

/// `0 < alpha < 1`.
pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

/// `(1 - n/q + n/p) / 2`, the midpoint of the admissible range of `alpha` for target `p`.
pub fn default_alpha(q: f64, p: f64, n: f64) -> Result<f64> {
    validate_p(p, q, n)?;
    let a = 0.5 * (1.0 - n / q + n / p);
    validate_alpha(a)?;
    Ok(a)
}

/// Inner exponent of the gradient bound, `n/2 < q_inner < q`; default `(n/2 + q)/2`.
pub fn validate_inner_q(qi: f64, q: f64, n: f64) -> Result<()> {
    if qi > n / 2.0 && qi < q {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(format!("inner exponent {qi} must satisfy {} < q' < {q}", n / 2.0)))
    }
}

pub fn default_inner_q(q: f64, n: f64) -> f64 {
    0.5 * (n / 2.0 + q)
}

/// `alpha0 = min{alpha, (3/8)(2 - n/q)}`.
pub fn alpha0(alpha: f64, q: f64, n: f64) -> f64 {
    alpha.min(0.375 * (2.0 - n / q))
}

/// `alpha0 / (alpha0 + 3n)`.
pub fn boundary_holder_exponent(alpha0: f64, n: f64) -> f64 {
    alpha0 / (alpha0 + 3.0 * n)
}

/// `2/n - 1/q`.
pub fn volume_exponent(q: f64, n: f64) -> f64 {
    2.0 / n - 1.0 / q
}

/// `(3/4)(2/n - 1/q)`.
pub fn ball_exponent(q: f64, n: f64) -> f64 {
    0.75 * volume_exponent(q, n)
}

/// Validated exponent set of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Exponents {
    pub q: f64,
    pub qprime: f64,
    pub inner_q: f64,
    pub p: Vec<f64>,
    pub alpha: Option<f64>,
    pub gamma: f64,
}

impl Exponents {
    pub fn validate(&self) -> Result<()> {
        validate_q(self.q, N)?;
        let qp = conjugate(self.q, N)?;
        if (qp - self.qprime).abs() > 1e-12 * qp {
            return Err(Error::ExponentOutOfRange(format!("q' = {} but q/(q-1) = {qp}", self.qprime)));
        }
        validate_inner_q(self.inner_q, self.q, N)?;
        for &p in &self.p {
            validate_p(p, self.q, N)?;
        }
        if let Some(a) = self.alpha {
            validate_alpha(a)?;
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::ExponentOutOfRange(format!("gamma = {} must lie in (0, 1)", self.gamma)));
        }
        Ok(())
    }

    /// `alpha` if set, else the default for target `p`.
    pub fn alpha_for(&self, p: f64) -> Result<f64> {
        match self.alpha {
            Some(a) => Ok(a),
            None => default_alpha(self.q, p, N),
        }
    }
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents {
            q: 2.0,
            qprime: 2.0,
            inner_q: default_inner_q(2.0, N),
            p: vec![2.0],
            alpha: Some(0.3),
            gamma: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_table() {
        for (q, ok) in [(1.0, false), (1.0000001, true), (1.5, true), (2.0, true), (2.0000001, false), (0.5, false)] {
            assert_eq!(validate_q(q, 2.0).is_ok(), ok, "q = {q}");
        }
    }

    #[test]
    fn p_table() {
        assert_eq!(sobolev_limit(1.5, 2.0), 6.0);
        for (p, ok) in [(1.0, true), (2.0, true), (4.0, true), (5.5, true), (5.999, true), (6.0, false), (0.9, false)] {
            assert_eq!(validate_p(p, 1.5, 2.0).is_ok(), ok, "p = {p}");
        }
        assert!(validate_p(1e9, 2.0, 2.0).is_ok());
    }

    #[test]
    fn conjugate_table() {
        assert_eq!(conjugate(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(conjugate(1.5, 2.0).unwrap(), 3.0);
        assert!(conjugate(1.0, 2.0).is_err());
        assert!(conjugate(1.5, 3.0).is_err());
        assert_eq!(conjugate(2.0, 3.0).unwrap(), 2.0);
    }

    #[test]
    fn alpha0_table() {
        assert_eq!(alpha0(0.5, 2.0, 2.0), 0.375);
        assert_eq!(alpha0(0.2, 2.0, 2.0), 0.2);
        assert_eq!(alpha0(0.5, 1.5, 2.0), 0.375 * (2.0 - 2.0 / 1.5));
        assert_eq!(boundary_holder_exponent(0.375, 2.0), 0.375 / 6.375);
        assert_eq!(ball_exponent(2.0, 2.0), 0.375);
        assert_eq!(volume_exponent(1.5, 2.0), 1.0 - 1.0 / 1.5);
    }

    #[test]
    fn default_alpha_rule() {
        assert!((default_alpha(1.5, 2.0, 2.0).unwrap() - (1.0 - 2.0 / 1.5 + 1.0) / 2.0).abs() < 1e-15);
        assert!(default_alpha(1.5, 6.0, 2.0).is_err());
        assert_eq!(default_inner_q(1.5, 2.0), 1.25);
    }
}
