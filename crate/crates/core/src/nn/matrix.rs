//! Dense row-major `f64` matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("{op}: incompatible shapes {}x{} and {}x{}", .left.0, .left.1, .right.0, .right.1)]
    Mismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("{op}: {message}")]
    Invalid { op: &'static str, message: String },
}

impl ShapeError {
    pub(crate) fn mismatch(op: &'static str, a: &Matrix, b: &Matrix) -> Self {
        ShapeError::Mismatch { op, left: a.shape(), right: b.shape() }
    }

    pub(crate) fn invalid(op: &'static str, message: impl Into<String>) -> Self {
        ShapeError::Invalid { op, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// `C = beta * C + op(A) * op(B)` where `op` optionally transposes.
/// `a` is stored `m x k` (or `k x m` when `ta`), `b` is `k x n` (or `n x k` when `tb`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold exactly the element counts implied by the
    // dimensions and strides above, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        if data.len() != rows * cols {
            return Err(ShapeError::invalid("from_vec", format!("{} values for {rows}x{cols}", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(ShapeError::invalid("from_vec", "non-finite value"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ShapeError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ShapeError::invalid("from_rows", "ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Matrix { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&self, b: &Matrix) -> Result<Matrix, ShapeError> {
        if self.cols != b.rows {
            return Err(ShapeError::mismatch("matmul", self, b));
        }
        let mut out = Matrix::zeros(self.rows, b.cols);
        gemm(self.rows, self.cols, b.cols, &self.data, false, &b.data, false, 0.0, &mut out.data);
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn add(&self, b: &Matrix) -> Result<Matrix, ShapeError> {
        if self.shape() != b.shape() {
            return Err(ShapeError::mismatch("add", self, b));
        }
        Ok(self.zip_map(b, |x, y| x + y))
    }

    pub(crate) fn zip_map(&self, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let data = self.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| f(*x)).collect() }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub(crate) fn add_assign(&mut self, b: &Matrix) {
        debug_assert_eq!(self.shape(), b.shape());
        self.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Softmax along each row, stabilized by subtracting the row maximum.
    pub fn softmax_rows(&self) -> Matrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            softmax_in_place(out.row_mut(r));
        }
        out
    }

    /// Softmax down each column, stabilized by subtracting the column maximum.
    pub fn softmax_columns(&self) -> Matrix {
        self.transpose().softmax_rows().transpose()
    }

    /// Horizontal concatenation of two row vectors.
    pub fn concat(a: &Matrix, b: &Matrix) -> Result<Matrix, ShapeError> {
        let is_row = |m: &Matrix| m.rows == 1 || m.data.is_empty();
        if !is_row(a) || !is_row(b) {
            return Err(ShapeError::mismatch("concat", a, b));
        }
        let mut data = a.data.clone();
        data.extend_from_slice(&b.data);
        Ok(Matrix { rows: 1, cols: data.len(), data })
    }

    /// Stacks matrices vertically.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix, ShapeError> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(ShapeError::mismatch("vstack", parts[0], p));
            }
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Rows `start..start + len` as a new matrix.
    pub fn slice_rows(&self, start: usize, len: usize) -> Matrix {
        Matrix {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        }
    }

    /// Mean of the rows as a `1 x cols` matrix.
    pub fn mean_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        if self.rows == 0 {
            return out;
        }
        for r in 0..self.rows {
            for (o, x) in out.data.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out.scale(1.0 / self.rows as f64)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn identity_product() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(Matrix::identity(3).matmul(&x).unwrap(), x);
    }

    #[test]
    fn hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap(), Matrix::from_rows(&[vec![3.0], vec![7.0]]).unwrap());
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 5, 4);
        let b = random(&mut rng, 4, 3);
        assert!(a.matmul(&b).unwrap().max_abs_diff(&naive_matmul(&a, &b)) < 1e-12);
    }

    #[test]
    fn transposed_gemm_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 4, 6);
        let b = random(&mut rng, 4, 3);
        let mut out = vec![0.0; 18];
        gemm(6, 4, 3, a.data(), true, b.data(), false, 0.0, &mut out);
        let expect = naive_matmul(&a.transpose(), &b);
        assert!(Matrix::from_vec(6, 3, out).unwrap().max_abs_diff(&expect) < 1e-12);
        let c = random(&mut rng, 5, 6);
        let mut out = vec![0.0; 20];
        gemm(4, 6, 5, a.data(), false, c.data(), true, 0.0, &mut out);
        let expect = naive_matmul(&a, &c.transpose());
        assert!(Matrix::from_vec(4, 5, out).unwrap().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn shape_mismatch_names_shapes() {
        let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(4, 5)).unwrap_err();
        assert_eq!(err.to_string(), "matmul: incompatible shapes 2x3 and 4x5");
    }

    #[test]
    fn softmax_columns_cases() {
        let z = Matrix::zeros(2, 1).softmax_columns();
        assert_eq!(z.data(), &[0.5, 0.5]);
        let big = Matrix::filled(2, 1, 1000.0).softmax_columns();
        assert_eq!(big.data(), &[0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random(&mut rng, 6, 2).scale(10.0).softmax_columns();
        for c in 0..2 {
            let total: f64 = (0..6).map(|r| s.get(r, c)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn concat_rows() {
        let a = Matrix::row_vector(&[1.0]);
        let b = Matrix::row_vector(&[2.0]);
        assert_eq!(Matrix::concat(&a, &b).unwrap().data(), &[1.0, 2.0]);
        let e = Matrix::row_vector(&[]);
        assert_eq!(Matrix::concat(&e, &b).unwrap(), b);
        let wide = Matrix::concat(&Matrix::zeros(1, 8), &Matrix::zeros(1, 8)).unwrap();
        assert_eq!(wide.shape(), (1, 16));
        assert!(Matrix::concat(&Matrix::zeros(2, 2), &b).is_err());
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 1, vec![f64::NAN]).is_err());
    }
}
