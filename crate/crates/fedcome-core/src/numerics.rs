//! Dense vector/matrix kernels.
//!
//! Everything downstream (model gradients, Gram matrices, the QP solver)
//! reduces to the handful of operations defined here, implemented over plain
//! `f64` storage:
//!
//! ```text
//! dot(x, y)   = Σ_k x_k y_k
//! gram(G)     = GᵀG          (columns g_1..g_M, entries g_i·g_j)
//! matvec(A,x) = A x           (row-major)
//! axpy(a,x,y) : y ← y + a·x
//! norm2(x)    = √(x·x)
//! ```
//!
//! The Gram matrix is assembled from column dot products — each off-diagonal
//! entry is computed once and mirrored, so `K` is symmetric to exact bit
//! equality and no `d×d` intermediate is ever formed. Summation order is
//! fixed (index order), which keeps every kernel bit-deterministic.

use crate::error::{Error, Result};

/// Dense column vector over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    /// Standard basis vector `e_i` of length `len`.
    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = Vector::zeros(len);
        v.data[i] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    /// Panics with a diagnostic if any entry is NaN or infinite. Called at
    /// module boundaries so a numeric blow-up fails fast at its source
    /// instead of propagating through later rounds.
    pub fn assert_finite(&self, context: &str) {
        for (k, v) in self.data.iter().enumerate() {
            assert!(
                v.is_finite(),
                "non-finite value {v} at index {k} in {context}"
            );
        }
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector::new(data)
    }
}

/// Dense row-major matrix over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Errors if the element count does
    /// not equal `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(format!(
                "matrix data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copies column `c` out of the row-major storage.
    pub fn col(&self, c: usize) -> Vector {
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            out.push(self.data[r * self.cols + c]);
        }
        Vector::new(out)
    }

    pub fn assert_finite(&self, context: &str) {
        for (k, v) in self.data.iter().enumerate() {
            assert!(
                v.is_finite(),
                "non-finite value {v} at flat index {k} in {context}"
            );
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Inner product `x·y`. Errors on length mismatch.
pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dimension(format!(
            "dot: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut acc = 0.0;
    for k in 0..x.len() {
        acc += x[k] * y[k];
    }
    Ok(acc)
}

/// Euclidean norm `‖x‖₂`.
pub fn norm2(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in x {
        acc += v * v;
    }
    acc.sqrt()
}

/// `y ← y + alpha·x`. Errors on length mismatch.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::dimension(format!(
            "axpy: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    for k in 0..x.len() {
        y[k] += alpha * x[k];
    }
    Ok(())
}

/// Matrix-vector product `A x`. Errors when `x.len() != A.cols()`.
pub fn matvec(a: &Matrix, x: &[f64]) -> Result<Vector> {
    if x.len() != a.cols() {
        return Err(Error::dimension(format!(
            "matvec: matrix is {}x{}, vector has {}",
            a.rows(),
            a.cols(),
            x.len()
        )));
    }
    let mut out = Vec::with_capacity(a.rows());
    for r in 0..a.rows() {
        // row slices keep the inner loop contiguous
        out.push(dot(a.row(r), x)?);
    }
    Ok(Vector::new(out))
}

/// Gram matrix `K` with `K[i][j] = g_i·g_j` for the given columns.
///
/// Each off-diagonal entry is computed once and mirrored, so the result is
/// symmetric to exact bit equality. Errors when the column list is empty or
/// the columns disagree in length.
pub fn gram(columns: &[Vector]) -> Result<Matrix> {
    if columns.is_empty() {
        return Err(Error::dimension("gram: no columns".to_string()));
    }
    let d = columns[0].len();
    for (i, c) in columns.iter().enumerate() {
        if c.len() != d {
            return Err(Error::dimension(format!(
                "gram: column 0 has length {d}, column {i} has {}",
                c.len()
            )));
        }
    }
    let m = columns.len();
    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = dot(columns[i].as_slice(), columns[j].as_slice())?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Linear combination `Σ_j coeffs[j] · columns[j]`.
///
/// This is `G a` for a column-stacked `G` without materializing the matrix.
pub fn linear_combination(columns: &[Vector], coeffs: &[f64]) -> Result<Vector> {
    if columns.len() != coeffs.len() {
        return Err(Error::dimension(format!(
            "linear_combination: {} columns vs {} coefficients",
            columns.len(),
            coeffs.len()
        )));
    }
    if columns.is_empty() {
        return Err(Error::dimension(
            "linear_combination: no columns".to_string(),
        ));
    }
    let mut out = vec![0.0; columns[0].len()];
    for (c, &a) in columns.iter().zip(coeffs) {
        axpy(a, c.as_slice(), &mut out)?;
    }
    Ok(Vector::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dot_basic() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 32.0);
        assert_eq!(dot(&[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn dot_rejects_mismatched_lengths() {
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(crate::Error::Dimension(_))
        ));
    }

    #[test]
    fn norm2_pythagorean() {
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2(&[]), 0.0);
    }

    #[test]
    fn axpy_accumulates() {
        let mut y = vec![1.0, 1.0];
        axpy(2.0, &[3.0, -1.0], &mut y).unwrap();
        assert_eq!(y, vec![7.0, -1.0]);
        assert!(axpy(1.0, &[1.0], &mut y).is_err());
    }

    #[test]
    fn matvec_identity_and_mismatch() {
        let id = Matrix::identity(3);
        let x = [1.5, -2.0, 0.5];
        assert_eq!(matvec(&id, &x).unwrap().as_slice(), &x);
        assert!(matvec(&id, &[1.0]).is_err());
    }

    #[test]
    fn gram_hand_computed() {
        // columns (1,0) and (-1,1): K = [[1,-1],[-1,2]]
        let cols = vec![
            Vector::new(vec![1.0, 0.0]),
            Vector::new(vec![-1.0, 1.0]),
        ];
        let k = gram(&cols).unwrap();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(0, 1)], -1.0);
        assert_eq!(k[(1, 0)], -1.0);
        assert_eq!(k[(1, 1)], 2.0);
    }

    #[test]
    fn gram_empty_is_error() {
        assert!(gram(&[]).is_err());
    }

    fn random_columns(rng: &mut ChaCha8Rng, d: usize, m: usize) -> Vec<Vector> {
        (0..m)
            .map(|_| Vector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect()
    }

    #[test]
    fn gram_symmetric_to_the_bit_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let d = rng.gen_range(1..40);
            let m = rng.gen_range(1..12);
            let cols = random_columns(&mut rng, d, m);
            let k = gram(&cols).unwrap();
            let mut trace = 0.0;
            for i in 0..m {
                trace += k[(i, i)];
                for j in 0..m {
                    assert_eq!(k[(i, j)].to_bits(), k[(j, i)].to_bits());
                }
            }
            // quadratic form stays above the roundoff floor for random a
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ka = matvec(&k, &a).unwrap();
            let quad = dot(&a, ka.as_slice()).unwrap();
            let norm_sq = dot(&a, &a).unwrap();
            assert!(quad >= -1e-10 * norm_sq * trace.max(1.0));
        }
    }

    #[test]
    fn gram_matches_column_dots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols = random_columns(&mut rng, 17, 5);
        let k = gram(&cols).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = dot(cols[i].as_slice(), cols[j].as_slice()).unwrap();
                // mirrored entries were computed with i<=j, so compare to
                // the same orientation rather than bitwise
                assert!((k[(i, j)] - expect).abs() <= 1e-15 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn linear_combination_matches_manual_expansion() {
        let cols = vec![
            Vector::new(vec![1.0, 0.0]),
            Vector::new(vec![-1.0, 1.0]),
        ];
        let v = linear_combination(&cols, &[1.0, 0.5]).unwrap();
        assert_eq!(v.as_slice(), &[0.5, 0.5]);
        assert!(linear_combination(&cols, &[1.0]).is_err());
    }

    #[test]
    fn basis_and_indexing() {
        let e1 = Vector::basis(3, 1);
        assert_eq!(e1.as_slice(), &[0.0, 1.0, 0.0]);
        let mut m = Matrix::zeros(2, 2);
        m[(0, 1)] = 3.0;
        assert_eq!(m.row(0), &[0.0, 3.0]);
        assert_eq!(m.col(1).as_slice(), &[3.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn assert_finite_panics_on_nan() {
        Vector::new(vec![0.0, f64::NAN]).assert_finite("test vector");
    }
}
