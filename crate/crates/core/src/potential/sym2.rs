use nalgebra::Matrix2;

use crate::grid::Point;

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub const fn identity() -> Self {
        Sym2::new(1.0, 0.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// In the plane: swap the diagonal, negate the off-diagonal.
    pub fn cofactor(&self) -> Sym2 {
        Sym2::new(self.yy, -self.xy, self.xx)
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - r, m + r)
    }

    /// `trace(self * other)`.
    pub fn frobenius(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn apply(&self, v: Point) -> Point {
        Point::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    pub fn quad(&self, v: Point) -> f64 {
        v.dot(&self.apply(v))
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn sub(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.xx, self.xy, self.xy, self.yy)
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Sym2 {
        Sym2::new(m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)])
    }

    /// Same eigenvectors, eigenvalues raised to at least `floor`.
    pub fn project(&self, floor: f64) -> Sym2 {
        let (l1, _) = self.eigenvalues();
        if l1 >= floor {
            return *self;
        }
        let m = self.matrix().symmetric_eigen();
        let d = m.eigenvalues.map(|l| l.max(floor));
        let r = m.eigenvectors * Matrix2::from_diagonal(&d) * m.eigenvectors.transpose();
        Sym2::from_matrix(&r)
    }

    /// Symmetric square root of a positive definite matrix.
    pub fn sqrt(&self) -> Sym2 {
        let m = self.matrix().symmetric_eigen();
        let d = m.eigenvalues.map(|l| l.max(0.0).sqrt());
        Sym2::from_matrix(&(m.eigenvectors * Matrix2::from_diagonal(&d) * m.eigenvectors.transpose()))
    }
}
