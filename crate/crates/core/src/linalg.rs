//! Small dense-matrix kit: just enough linear algebra for the Gaussian
//! machinery in this crate (covariances up to a few hundred rows).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;

/// Row-major dense square-or-rectangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Max absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Extract the sub-matrix with the given row and column index sets.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive semidefinite
/// matrix, together with the jitter that was added to reach it.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub factor: Matrix,
    pub jitter: f64,
    /// Indices of pivots that collapsed to zero (semidefinite directions).
    zero_pivots: Vec<usize>,
}

/// Jitter escalation ladder: start at 1e-8 on the diagonal, multiply by 10
/// up to 1e-4, then give up.
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

/// Factor a symmetric PSD matrix, escalating diagonal jitter on failure.
///
/// Pivots that collapse to zero are tolerated (rank-deficient directions
/// draw as exact zeros), which makes this the right factorization for
/// sampling. Density evaluation wants [`cholesky_pd`] instead.
pub fn cholesky(a: &Matrix) -> Result<Cholesky> {
    debug_assert!(a.is_square());
    if let Some(c) = try_factor(a, 0.0, true) {
        return Ok(c);
    }
    let mut jitter = JITTER_START;
    loop {
        if let Some(c) = try_factor(a, jitter, true) {
            return Ok(c);
        }
        if jitter >= JITTER_MAX {
            return Err(CoreError::Factorization { jitter });
        }
        jitter *= 10.0;
    }
}

/// Strictly positive-definite factorization with the same jitter ladder.
///
/// Any pivot at or below tolerance triggers the next jitter level, so the
/// factor is always full rank and log-determinants are well defined.
pub fn cholesky_pd(a: &Matrix) -> Result<Cholesky> {
    debug_assert!(a.is_square());
    if let Some(c) = try_factor(a, 0.0, false) {
        return Ok(c);
    }
    let mut jitter = JITTER_START;
    loop {
        if let Some(c) = try_factor(a, jitter, false) {
            return Ok(c);
        }
        if jitter >= JITTER_MAX {
            return Err(CoreError::Factorization { jitter });
        }
        jitter *= 10.0;
    }
}

/// One factorization attempt. With `allow_semidefinite`, pivots within a
/// scaled tolerance of zero are clamped to exact zero; without it any
/// pivot at or below tolerance aborts the attempt. Negative pivots beyond
/// tolerance always abort.
fn try_factor(a: &Matrix, jitter: f64, allow_semidefinite: bool) -> Option<Cholesky> {
    let n = a.rows;
    let scale = (0..n).fold(1.0f64, |acc, i| acc.max(a[(i, i)].abs()));
    let tol = 1e-12 * scale;
    let mut l = Matrix::zeros(n, n);
    let mut zero_pivots = Vec::new();
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            if !allow_semidefinite || d < -tol {
                return None;
            }
            zero_pivots.push(j);
            continue; // column stays zero
        }
        let dj = math::sqrt(d);
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(Cholesky {
        factor: l,
        jitter,
        zero_pivots,
    })
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.factor.rows
    }

    /// Whether any pivot collapsed to zero (the matrix was semidefinite).
    pub fn is_singular(&self) -> bool {
        !self.zero_pivots.is_empty()
    }

    /// Solve `L y = b` (forward substitution). Zero-pivot rows yield zero.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let d = self.factor[(i, i)];
            if d == 0.0 {
                continue;
            }
            let mut s = b[i];
            for k in 0..i {
                s -= self.factor[(i, k)] * y[k];
            }
            y[i] = s / d;
        }
        y
    }

    /// Solve `L^T x = y` (back substitution).
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(y.len(), n);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let d = self.factor[(i, i)];
            if d == 0.0 {
                continue;
            }
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.factor[(k, i)] * x[k];
            }
            x[i] = s / d;
        }
        x
    }

    /// Solve `A x = b` with `A = L L^T`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `log det A`, with zero pivots skipped (pseudo-determinant).
    pub fn log_det(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            let d = self.factor[(i, i)];
            if d > 0.0 {
                s += 2.0 * math::ln(d);
            }
        }
        s
    }

    /// Quadratic form `x^T A^{-1} x`.
    pub fn quad_form_inv(&self, x: &[f64]) -> f64 {
        let y = self.solve_lower(x);
        y.iter().map(|v| v * v).sum()
    }

    /// `L z` for a standard-normal vector `z`: a draw factor for sampling.
    pub fn lower_times(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(z.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.factor[(i, k)] * z[k];
            }
            out[i] = s;
        }
        out
    }
}

/// Log-density of a zero-mean multivariate normal with the factored
/// covariance, omitting nothing: `-n/2 log 2pi - 1/2 log det - 1/2 x'C^{-1}x`.
pub fn mvn_logpdf_centered(chol: &Cholesky, x: &[f64]) -> f64 {
    let n = chol.dim() as f64;
    -0.5 * n * math::ln(2.0 * core::f64::consts::PI) - 0.5 * chol.log_det()
        - 0.5 * chol.quad_form_inv(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> Matrix {
        // A = B B^T + I for a fixed B: guaranteed SPD.
        let b = Matrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.3);
        let mut a = b.matmul(&b.transpose());
        for i in 0..3 {
            a[(i, i)] += 1.0;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd3();
        let c = cholesky(&a).unwrap();
        assert_eq!(c.jitter, 0.0);
        let back = c.factor.matmul(&c.factor.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_matches_direct() {
        let a = spd3();
        let c = cholesky(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let ax = a.matvec(&x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_matrix_factors_as_semidefinite() {
        let c = cholesky(&Matrix::zeros(4, 4)).unwrap();
        assert!(c.is_singular());
        assert_eq!(c.jitter, 0.0);
        let z = c.lower_times(&[1.0, 1.0, 1.0, 1.0]);
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn indefinite_matrix_fails_even_with_jitter() {
        let mut a = Matrix::identity(2);
        a[(1, 1)] = -1.0;
        assert!(matches!(
            cholesky(&a),
            Err(CoreError::Factorization { .. })
        ));
    }

    #[test]
    fn near_singular_recovers_with_jitter() {
        // Rank-1 plus a sliver of noise that breaks exact semidefiniteness.
        let mut a = Matrix::from_fn(3, 3, |_, _| 1.0);
        a[(0, 1)] += 1e-10;
        a[(1, 0)] += 1e-10;
        a[(2, 2)] -= 1e-10;
        let c = cholesky(&a).unwrap();
        assert!(c.jitter <= 1e-4);
    }
}
