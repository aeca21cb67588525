//! Complex dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Operand form for [`gemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// Use the matrix as is.
    N,
    /// Use the conjugate transpose.
    H,
}

/// `op(a) * op(b)` through a blocked complex kernel.
pub fn gemm(op_a: Op, a: &CMat, op_b: Op, b: &CMat) -> CMat {
    let a_owned;
    let a = match op_a {
        Op::N => a,
        Op::H => {
            a_owned = a.adjoint();
            &a_owned
        }
    };
    let b_owned;
    let b = match op_b {
        Op::N => b,
        Op::H => {
            b_owned = b.adjoint();
            &b_owned
        }
    };
    assert_eq!(a.ncols(), b.nrows(), "gemm inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex<f64> is repr(C) with layout [re, im]; nalgebra dense
    // storage is column-major and contiguous, and the strides below describe
    // exactly that layout for buffers of the asserted sizes.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// Plain product `a * b`.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    gemm(Op::N, a, Op::N, b)
}

/// Kronecker product of two matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

pub fn norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn fro_norm_sqr(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖a − b‖ / ‖b‖`, or the absolute error when `b` is zero.
pub fn rel_error(a: &CMat, b: &CMat) -> f64 {
    let diff = fro_norm_sqr(&(a - b)).sqrt();
    let base = fro_norm_sqr(b).sqrt();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

pub fn rel_error_vec(a: &CVec, b: &CVec) -> f64 {
    let diff = norm_sqr(&(a - b)).sqrt();
    let base = norm_sqr(b).sqrt();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

/// Inner product `a^H b`.
pub fn dotc(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Matrix of i.i.d. complex Gaussian entries, filled column by column.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng, variance);
        }
    }
    m
}

/// Haar-distributed unitary matrix: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let z = complex_normal_matrix(rng, n, n, 1.0);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Least-squares solution of `a x ≈ y` through the SVD pseudo-inverse, so a
/// rank-deficient `a` still yields the minimum-norm minimiser.
pub fn lstsq(a: &CMat, y: &CVec) -> CVec {
    if a.ncols() == 0 {
        return CVec::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CVec::zeros(a.ncols());
    }
    let eps = smax * f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    svd.solve(y, eps).expect("svd computed with both factors")
}

/// Extracts the listed columns.
pub fn select_columns(a: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])])
}

/// `Diag(d) * m` without forming the diagonal matrix.
pub fn scale_rows(d: &CVec, m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |r, c| d[r] * m[(r, c)])
}
