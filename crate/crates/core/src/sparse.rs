//! Greedy sparse recovery shared by the estimation stages and baselines.

use crate::error::{dim_check, Error, Result};
use crate::linalg::{gemm, lstsq, norm_sqr, select_columns, CMat, CVec, Op, C64};

/// When orthogonal matching pursuit stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Exactly this many atoms (fewer if the residual vanishes first).
    Sparsity(usize),
    /// Until the residual norm drops to `threshold`, with at most `max_atoms`.
    Residual { threshold: f64, max_atoms: usize },
}

impl StopRule {
    fn cap(&self) -> usize {
        match *self {
            StopRule::Sparsity(s) => s,
            StopRule::Residual { max_atoms, .. } => max_atoms,
        }
    }
}

/// Output of a sparse solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub support: Vec<usize>,
    pub coefficients: CVec,
    pub residual_norm: f64,
    /// Residual norm after each iteration, starting with `‖y‖`.
    pub residual_history: Vec<f64>,
}

/// Anything that can act as a dictionary for matching pursuit.
pub trait Dictionary {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `A^H r`.
    fn correlate(&self, r: &CVec) -> Vec<C64>;
    /// Selected columns as a dense matrix.
    fn columns(&self, idx: &[usize]) -> CMat;
    fn column_norms(&self) -> Vec<f64>;
}

impl Dictionary for CMat {
    fn rows(&self) -> usize {
        self.nrows()
    }
    fn cols(&self) -> usize {
        self.ncols()
    }
    fn correlate(&self, r: &CVec) -> Vec<C64> {
        let rm = CMat::from_column_slice(r.len(), 1, r.as_slice());
        gemm(Op::H, self, Op::N, &rm).iter().copied().collect()
    }
    fn columns(&self, idx: &[usize]) -> CMat {
        select_columns(self, idx)
    }
    fn column_norms(&self) -> Vec<f64> {
        self.column_iter().map(|c| c.norm()).collect()
    }
}

/// Scales every column to unit norm; returns the scaled matrix and the
/// original norms.
pub fn column_normalize(matrix: &CMat) -> Result<(CMat, Vec<f64>)> {
    let norms = matrix.column_norms();
    if let Some(c) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn(c));
    }
    let mut out = matrix.clone();
    for (c, &n) in norms.iter().enumerate() {
        out.column_mut(c).scale_mut(1.0 / n);
    }
    Ok((out, norms))
}

/// Least-squares coefficients on the given support.
pub fn ls_on_support<D: Dictionary + ?Sized>(dictionary: &D, measurement: &CVec, support: &[usize]) -> Result<CVec> {
    dim_check(!support.is_empty(), || "least squares needs a non-empty support".into())?;
    dim_check(measurement.len() == dictionary.rows(), || "measurement length differs from dictionary rows".into())?;
    dim_check(support.iter().all(|&c| c < dictionary.cols()), || "support index out of range".into())?;
    Ok(lstsq(&dictionary.columns(support), measurement))
}

/// Orthogonal matching pursuit with correlations on unit-norm columns,
/// least-squares refit every iteration and lowest-index tie breaking.
pub fn omp<D: Dictionary + ?Sized>(dictionary: &D, measurement: &CVec, stop: StopRule) -> Result<SparseSolution> {
    dim_check(dictionary.rows() >= 1 && dictionary.cols() >= 1, || "empty dictionary".into())?;
    dim_check(measurement.len() == dictionary.rows(), || {
        format!("measurement length {} differs from dictionary rows {}", measurement.len(), dictionary.rows())
    })?;
    let norms = dictionary.column_norms();
    if let Some(c) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn(c));
    }
    let y_norm = norm_sqr(measurement).sqrt();
    let cap = stop.cap().min(dictionary.cols()).min(dictionary.rows());
    let mut support: Vec<usize> = Vec::new();
    let mut coefficients = CVec::zeros(0);
    let mut residual = measurement.clone();
    let mut residual_norm = y_norm;
    let mut history = vec![residual_norm];
    let exhausted = |r: f64| r <= 1e-13 * y_norm || y_norm == 0.0;
    loop {
        if support.len() >= cap || exhausted(residual_norm) {
            break;
        }
        if let StopRule::Residual { threshold, .. } = stop {
            if residual_norm <= threshold {
                break;
            }
        }
        let corr = dictionary.correlate(&residual);
        let mut best = (-1.0, usize::MAX);
        for (c, z) in corr.iter().enumerate() {
            let v = z.norm() / norms[c];
            if v > best.0 && !support.contains(&c) {
                best = (v, c);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        support.push(best.1);
        let sub = dictionary.columns(&support);
        coefficients = lstsq(&sub, measurement);
        residual = measurement - &sub * &coefficients;
        residual_norm = norm_sqr(&residual).sqrt();
        history.push(residual_norm);
    }
    Ok(SparseSolution { support, coefficients, residual_norm, residual_history: history })
}

impl SparseSolution {
    pub fn empty(measurement_norm: f64) -> Self {
        SparseSolution {
            support: vec![],
            coefficients: CVec::zeros(0),
            residual_norm: measurement_norm,
            residual_history: vec![measurement_norm],
        }
    }

    /// Dense `n`-vector with the coefficients placed on the support.
    pub fn to_dense(&self, n: usize) -> CVec {
        let mut x = CVec::zeros(n);
        for (i, &c) in self.support.iter().enumerate() {
            x[c] = self.coefficients[i];
        }
        x
    }
}
