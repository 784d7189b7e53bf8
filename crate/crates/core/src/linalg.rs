//! Dense row-major matrices and the few linear-algebra routines the
//! engine needs: GEMM (delegated to `matrixmultiply`), inner products,
//! and a Cholesky solver for the normal equations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::default(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec: shape mismatch");
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

impl Mat<f32> {
    /// Widen to f64 element-wise.
    pub fn to_f64(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

impl Mat<f64> {
    /// Narrow to f32 element-wise.
    pub fn to_f32(&self) -> Mat<f32> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// Operand orientation for [`gemm_f64`] / [`gemm_f32`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

#[inline]
fn dims(rows: usize, cols: usize, t: Trans) -> (usize, usize, isize, isize) {
    // Returns (op rows, op cols, row stride, col stride) of the possibly
    // transposed operand stored row-major as rows x cols.
    match t {
        Trans::No => (rows, cols, cols as isize, 1),
        Trans::Yes => (cols, rows, 1, cols as isize),
    }
}

/// c = alpha * op(a) * op(b) + beta * c, all matrices row-major.
pub fn gemm_f64(
    alpha: f64,
    a: &Mat<f64>,
    ta: Trans,
    b: &Mat<f64>,
    tb: Trans,
    beta: f64,
    c: &mut Mat<f64>,
) {
    let (m, ka, rsa, csa) = dims(a.rows, a.cols, ta);
    let (kb, n, rsb, csb) = dims(b.rows, b.cols, tb);
    assert_eq!(ka, kb, "gemm_f64: inner dimensions differ");
    assert_eq!(c.rows, m, "gemm_f64: output rows");
    assert_eq!(c.cols, n, "gemm_f64: output cols");
    unsafe {
        matrixmultiply::dgemm(
            m,
            ka,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// c = alpha * op(a) * op(b) + beta * c, all matrices row-major.
pub fn gemm_f32(
    alpha: f32,
    a: &Mat<f32>,
    ta: Trans,
    b: &Mat<f32>,
    tb: Trans,
    beta: f32,
    c: &mut Mat<f32>,
) {
    let (m, ka, rsa, csa) = dims(a.rows, a.cols, ta);
    let (kb, n, rsb, csb) = dims(b.rows, b.cols, tb);
    assert_eq!(ka, kb, "gemm_f32: inner dimensions differ");
    assert_eq!(c.rows, m, "gemm_f32: output rows");
    assert_eq!(c.cols, n, "gemm_f32: output cols");
    unsafe {
        matrixmultiply::sgemm(
            m,
            ka,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Inner product with four independent accumulators; the fixed evaluation
/// order keeps results identical across call sites.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0f32;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0f64;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// In-place Cholesky factorization A = L Lᵀ of a symmetric positive
/// definite matrix; only the lower triangle of `a` is referenced and
/// overwritten with L. Fails on a non-positive pivot.
pub fn cholesky_factor(a: &mut Mat<f64>) -> Result<()> {
    let n = a.rows;
    assert_eq!(a.cols, n, "cholesky_factor: matrix must be square");
    for j in 0..n {
        let mut diag = a.row(j)[j];
        for k in 0..j {
            let v = a.row(j)[k];
            diag -= v * v;
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Singular(alloc::format!(
                "Cholesky pivot {j} is {diag:e}; the Gram matrix is not positive definite \
                 (set ridge_eps > 0)"
            )));
        }
        let ljj = libm::sqrt(diag);
        a.row_mut(j)[j] = ljj;
        for i in j + 1..n {
            let mut s = a.row(i)[j];
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                s -= a.as_slice()[ri + k] * a.as_slice()[rj + k];
            }
            a.row_mut(i)[j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve L Lᵀ x = b in place given the factor from [`cholesky_factor`].
pub fn cholesky_solve(l: &Mat<f64>, b: &mut [f64]) {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    // forward: L y = b
    for i in 0..n {
        let row = l.row(i);
        let mut s = b[i];
        for k in 0..i {
            s -= row[k] * b[k];
        }
        b[i] = s / row[i];
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l.row(k)[i] * b[k];
        }
        b[i] = s / l.row(i)[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_triple_loop() {
        let a = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let mut c = Mat::<f64>::zeros(2, 2);
        gemm_f64(1.0, &a, Trans::No, &b, Trans::No, 0.0, &mut c);
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn gemm_transpose_variants() {
        let a = Mat::from_vec(3, 2, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]); // aᵀ of above
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let mut c = Mat::<f64>::zeros(2, 2);
        gemm_f64(1.0, &a, Trans::Yes, &b, Trans::No, 0.0, &mut c);
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);

        let bt = Mat::from_vec(2, 3, vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        let mut c2 = Mat::<f64>::zeros(2, 2);
        gemm_f64(1.0, &a, Trans::Yes, &bt, Trans::Yes, 0.0, &mut c2);
        assert_eq!(c2.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn cholesky_round_trip() {
        // A = M Mᵀ + I is SPD.
        let m = Mat::from_vec(3, 3, vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let mut a = Mat::<f64>::zeros(3, 3);
        gemm_f64(1.0, &m, Trans::No, &m, Trans::Yes, 0.0, &mut a);
        for i in 0..3 {
            a.row_mut(i)[i] += 1.0;
        }
        let a_orig = a.clone();
        cholesky_factor(&mut a).unwrap();
        let mut x = vec![1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| dot_f64(a_orig.row(i), &x)).collect();
        x.copy_from_slice(&b);
        cholesky_solve(&a, &mut x);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] + 2.0).abs() < 1e-12);
        assert!((x[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        let err = cholesky_factor(&mut a).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f32> = (0..7).map(|i| i as f32).collect();
        let b = vec![1.0f32; 7];
        assert_eq!(dot_f32(&a, &b), 21.0);
        let a64: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let b64 = vec![2.0f64; 9];
        assert_eq!(dot_f64(&a64, &b64), 72.0);
    }
}
