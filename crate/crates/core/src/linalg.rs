//! Sparse matrices and factorizations.

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Above this many unknowns the symmetric solver switches to preconditioned CG.
pub const DIRECT_LIMIT: usize = 100_000;

/// Compressed sparse row matrix with merged duplicates.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Max `|a_ij - a_ji|` relative to the max entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::SingularOperator(format!("assembly: {e:?}")))
    }
}

pub enum Factorization {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
    Cg(SparseMatrix),
}

impl Factorization {
    /// Cholesky, falling back to LU; preconditioned CG beyond [`DIRECT_LIMIT`].
    pub fn symmetric(a: &SparseMatrix) -> Result<Self> {
        if a.dim() > DIRECT_LIMIT {
            return Ok(Factorization::Cg(a.clone()));
        }
        let m = a.to_faer()?;
        match m.sp_cholesky(Side::Lower) {
            Ok(llt) => Ok(Factorization::Cholesky(llt)),
            Err(_) => m
                .sp_lu()
                .map(Factorization::Lu)
                .map_err(|e| Error::SingularOperator(format!("{e:?}"))),
        }
    }

    pub fn general(a: &SparseMatrix) -> Result<Self> {
        let m = a.to_faer()?;
        m.sp_lu()
            .map(Factorization::Lu)
            .map_err(|e| Error::SingularOperator(format!("{e:?}")))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[b.to_vec()])?.pop().unwrap())
    }

    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rhs.is_empty() {
            return Ok(Vec::new());
        }
        let n = rhs[0].len();
        let out: Vec<Vec<f64>> = match self {
            Factorization::Cg(a) => rhs
                .iter()
                .map(|b| conjugate_gradient(a, b, 1e-11, 20 * n.max(100)))
                .collect::<Result<_>>()?,
            _ => {
                let b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
                let x = match self {
                    Factorization::Cholesky(f) => f.solve(&b),
                    Factorization::Lu(f) => f.solve(&b),
                    Factorization::Cg(_) => unreachable!(),
                };
                (0..rhs.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect()
            }
        };
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::SingularOperator("non-finite solution".into()));
        }
        Ok(out)
    }

    pub fn method(&self) -> &'static str {
        match self {
            Factorization::Cholesky(_) => "cholesky",
            Factorization::Lu(_) => "lu",
            Factorization::Cg(_) => "cg",
        }
    }
}

/// Jacobi-preconditioned conjugate gradients to relative residual `tol`.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SingularOperator("CG met a non-positive direction".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = dot(&r, &r).sqrt();
        if rn <= tol * bnorm {
            return Ok(x);
        }
        if it + 1 == max_iter {
            return Err(Error::NoConvergence {
                what: "conjugate gradient".into(),
                iterations: max_iter,
                residual: rn / bnorm,
                history: vec![rn / bnorm],
            });
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (1, 1, 1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn direct_and_cg_agree() {
        let a = laplacian_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let x1 = Factorization::symmetric(&a).unwrap().solve(&b).unwrap();
        let x2 = conjugate_gradient(&a, &b, 1e-13, 1000).unwrap();
        let x3 = Factorization::general(&a).unwrap().solve(&b).unwrap();
        for i in 0..50 {
            assert!((x1[i] - x2[i]).abs() < 1e-9);
            assert!((x1[i] - x3[i]).abs() < 1e-9);
        }
        let r = a.matvec(&x1);
        for i in 0..50 {
            assert!((r[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        let f = Factorization::symmetric(&a).unwrap();
        assert_eq!(f.method(), "lu");
        assert_eq!(f.solve(&[2.0, 3.0]).unwrap(), vec![2.0, -3.0]);
    }
}
