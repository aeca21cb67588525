//! Comparison estimators: OMP on the vectorised cascaded model and sparse
//! Bayesian learning on the per-column equivalent measurement.

use nalgebra::Cholesky;

use crate::bdris::TrainingSchedule;
use crate::error::{dim_check, Error, Result};
use crate::geometry::{build_upa_dictionary, AngularDictionary, GroupLayout, UpaShape};
use crate::linalg::{gemm, kron_vec, matmul, CMat, CVec, Op, C64};
use crate::sparse::{omp, Dictionary, SparseSolution, StopRule};
use crate::stage1::AoaEstimate;
use crate::stage2::{equivalent_dictionary, project_out_bs_aoa, RisDictionaries};

/// Implicit dictionary for `vec(Y) = (Θ^T ⊗ I_N) vec(G)` with
/// `G = Σ s·a_bs d^H`. Atom `(i, c)` sits at column `c·B + i` and equals
/// `vec(a_i e_c^T)` where `e_c[t] = d_c^H θ_t`.
#[derive(Debug, Clone)]
pub struct VectorizedOperator {
    pub bs: AngularDictionary,
    /// Slot-by-atom products `θ_t^H d_c`, `τ × P`.
    pub slot_atoms: CMat,
}

impl VectorizedOperator {
    pub fn new(bs: AngularDictionary, schedule: &TrainingSchedule, dicts: &RisDictionaries) -> Self {
        let slot_atoms = equivalent_dictionary(schedule, &dicts.user, &dicts.ris);
        VectorizedOperator { bs, slot_atoms }
    }

    /// Complex entries an explicit dictionary would hold.
    pub fn element_count(&self) -> usize {
        self.rows().saturating_mul(self.cols())
    }

    fn split(&self, col: usize) -> (usize, usize) {
        (col % self.bs.len(), col / self.bs.len())
    }
}

impl Dictionary for VectorizedOperator {
    fn rows(&self) -> usize {
        self.bs.atoms.nrows() * self.slot_atoms.nrows()
    }
    fn cols(&self) -> usize {
        self.bs.len() * self.slot_atoms.ncols()
    }
    fn correlate(&self, r: &CVec) -> Vec<C64> {
        let rm = CMat::from_column_slice(self.bs.atoms.nrows(), self.slot_atoms.nrows(), r.as_slice());
        let left = gemm(Op::H, &self.bs.atoms, Op::N, &rm);
        matmul(&left, &self.slot_atoms).iter().copied().collect()
    }
    fn columns(&self, idx: &[usize]) -> CMat {
        let mut out = CMat::zeros(self.rows(), idx.len());
        for (k, &col) in idx.iter().enumerate() {
            let (i, c) = self.split(col);
            let e = self.slot_atoms.column(c).map(|z| z.conj());
            out.set_column(k, &kron_vec(&e, &self.bs.atom(i)));
        }
        out
    }
    fn column_norms(&self) -> Vec<f64> {
        let e: Vec<f64> = self.slot_atoms.column_iter().map(|c| c.norm()).collect();
        let a: Vec<f64> = self.bs.atoms.column_iter().map(|c| c.norm()).collect();
        (0..self.cols()).map(|col| a[col % a.len()] * e[col / a.len()]).collect()
    }
}

/// BS dictionary with twice the array dimension along each axis.
pub fn direct_bs_dictionary(shape: &UpaShape) -> Result<AngularDictionary> {
    build_upa_dictionary(shape, 2 * shape.vertical, 2 * shape.horizontal)
}

/// Direct-OMP output for one user.
#[derive(Debug, Clone)]
pub struct DirectOmpEstimate {
    pub cascaded: CMat,
    pub solution: SparseSolution,
}

/// Sparse recovery of `vec(G_k)` from `Y_k` over the implicit vectorised
/// dictionary. Refuses operators larger than `element_budget`.
pub fn direct_omp(
    yk: &CMat,
    schedule: &TrainingSchedule,
    bs: &AngularDictionary,
    dicts: &RisDictionaries,
    stop: StopRule,
    transmit_power: f64,
    element_budget: usize,
) -> Result<DirectOmpEstimate> {
    dim_check(yk.nrows() == bs.atoms.nrows() && yk.ncols() == schedule.slots(), || {
        format!("measurement is {}x{}, expected {}x{}", yk.nrows(), yk.ncols(), bs.atoms.nrows(), schedule.slots())
    })?;
    let explicit = bs.len() as u128 * (dicts.user.len() * dicts.ris.len()) as u128 * yk.len() as u128;
    if explicit > element_budget as u128 {
        return Err(Error::Budget(format!(
            "direct OMP dictionary would hold {explicit} entries, above the budget of {element_budget}; use a smaller array"
        )));
    }
    let op = VectorizedOperator::new(bs.clone(), schedule, dicts);
    let y = CVec::from_column_slice(yk.as_slice()) / C64::new(transmit_power.sqrt(), 0.0);
    let solution = omp(&op, &y, stop)?;
    let mut cascaded = CMat::zeros(bs.atoms.nrows(), dicts.layout.vec_len());
    let grouped = |c: usize| {
        let p2 = dicts.ris.len();
        crate::stage2::grouped_atom(&dicts.user.atom(c / p2), &dicts.ris.atom(c % p2), &dicts.layout)
    };
    for (k, &col) in solution.support.iter().enumerate() {
        let (i, c) = op.split(col);
        cascaded += bs.atom(i) * grouped(c).adjoint() * solution.coefficients[k];
    }
    Ok(DirectOmpEstimate { cascaded, solution })
}

/// EM settings for sparse Bayesian learning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SblOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SblOptions {
    fn default() -> Self {
        SblOptions { max_iterations: 50, tolerance: 1e-6 }
    }
}

/// Posterior mean and EM trace.
#[derive(Debug, Clone)]
pub struct SblSolution {
    pub mean: CVec,
    pub prior_variances: Vec<f64>,
    pub noise_variance: f64,
    /// Log evidence of the hyperparameters entering each iteration, then of
    /// the final ones.
    pub evidence_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Posterior {
    mean: CVec,
    diag: Vec<f64>,
    evidence: f64,
}

/// Posterior of `x` under `y = D x + n`, `x ~ CN(0, diag(γ))`,
/// `n ~ CN(0, σ²I)`, via the `m × m` marginal covariance.
fn posterior(d: &CMat, y: &CVec, gamma: &[f64], sigma2: f64) -> Result<Posterior> {
    let m = d.nrows();
    let dg = CMat::from_fn(m, d.ncols(), |r, c| d[(r, c)] * gamma[c]);
    let mut cov = gemm(Op::N, &dg, Op::H, d);
    for i in 0..m {
        cov[(i, i)] += sigma2;
    }
    let chol = Cholesky::new(cov).ok_or(Error::Singular { block: 0 })?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    let w = chol.solve(y);
    let quad = crate::linalg::dotc(y, &w).re;
    let evidence = -(m as f64 * std::f64::consts::PI.ln() + logdet + quad);
    let sd = chol.solve(d);
    let proj = gemm(Op::H, d, Op::N, &CMat::from_column_slice(m, 1, w.as_slice()));
    let mean = CVec::from_fn(d.ncols(), |c, _| proj[(c, 0)] * gamma[c]);
    let diag = (0..d.ncols())
        .map(|c| {
            let q: C64 = d.column(c).iter().zip(sd.column(c).iter()).map(|(a, b)| a.conj() * b).sum();
            (gamma[c] - gamma[c] * gamma[c] * q.re).max(0.0)
        })
        .collect();
    Ok(Posterior { mean, diag, evidence })
}

/// Expectation-maximisation SBL with the noise variance learned alongside
/// the prior variances. Stops when the largest change of a prior variance,
/// relative to the largest variance, falls below the tolerance. Without
/// convergence the iterate with the highest evidence is returned.
pub fn sbl_estimate(y: &CVec, dictionary: &CMat, opts: SblOptions) -> Result<SblSolution> {
    dim_check(y.len() == dictionary.nrows(), || "measurement length differs from dictionary rows".into())?;
    if dictionary.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Degenerate("dictionary has non-finite entries".into()));
    }
    if opts.max_iterations == 0 || opts.tolerance.is_nan() || opts.tolerance <= 0.0 {
        return Err(Error::Config("SBL needs a positive iteration cap and tolerance".into()));
    }
    let (m, n) = dictionary.shape();
    let energy = y.norm_squared();
    if energy == 0.0 {
        return Ok(SblSolution {
            mean: CVec::zeros(n),
            prior_variances: vec![0.0; n],
            noise_variance: 0.0,
            evidence_history: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }
    let atom_energy: f64 = dictionary.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    let noise_floor = 1e-12 * energy / m as f64;
    let mut gamma = vec![energy / (atom_energy.max(f64::MIN_POSITIVE) * n.min(m) as f64); n];
    let mut sigma2 = 0.1 * energy / m as f64;
    let mut history = Vec::new();
    let mut best: Option<(f64, CVec, Vec<f64>, f64)> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let post = posterior(dictionary, y, &gamma, sigma2)?;
        history.push(post.evidence);
        if best.as_ref().is_none_or(|b| post.evidence > b.0) {
            best = Some((post.evidence, post.mean.clone(), gamma.clone(), sigma2));
        }
        let next: Vec<f64> = (0..n).map(|i| post.mean[i].norm_sqr() + post.diag[i]).collect();
        let resid = (y - dictionary * &post.mean).norm_squared();
        let explained: f64 = (0..n).filter(|&i| gamma[i] > 0.0).map(|i| 1.0 - post.diag[i] / gamma[i]).sum();
        sigma2 = ((resid + sigma2 * explained) / m as f64).max(noise_floor);
        let scale = next.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let change = gamma.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        gamma = next;
        iterations += 1;
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    let last = posterior(dictionary, y, &gamma, sigma2)?;
    history.push(last.evidence);
    if converged || best.as_ref().is_none_or(|b| last.evidence >= b.0) {
        return Ok(SblSolution {
            mean: last.mean,
            prior_variances: gamma,
            noise_variance: sigma2,
            evidence_history: history,
            iterations,
            converged,
        });
    }
    let (_, mean, gamma, sigma2) = best.expect("at least one iteration");
    Ok(SblSolution { mean, prior_variances: gamma, noise_variance: sigma2, evidence_history: history, iterations, converged })
}

/// Column `q = Σ x[c_user·P_ris + c_ris]·grouped_atom(c_user, c_ris)`
/// evaluated group by group as `conj(A_user,g) X A_ris,g^T`.
pub fn grouped_combination(x: &CVec, dicts: &RisDictionaries) -> CVec {
    let layout: &GroupLayout = &dicts.layout;
    let n = layout.group_size();
    let (p1, p2) = (dicts.user.len(), dicts.ris.len());
    let xm = CMat::from_fn(p1, p2, |c1, c2| x[c1 * p2 + c2]);
    let mut out = CVec::zeros(layout.vec_len());
    for g in 0..layout.group_count() {
        let u = dicts.user.atoms.rows(g * n, n).map(|z| z.conj());
        let r = dicts.ris.atoms.rows(g * n, n).into_owned();
        let block = gemm(Op::N, &matmul(&u, &xm), Op::H, &r.map(|z| z.conj()));
        for i1 in 0..n {
            for i2 in 0..n {
                out[g * n * n + i1 * n + i2] = block[(i1, i2)];
            }
        }
    }
    out
}

/// SBL output for one user.
#[derive(Debug, Clone)]
pub struct SblCascadedEstimate {
    pub cascaded: CMat,
    pub columns: Vec<SblSolution>,
}

impl SblCascadedEstimate {
    pub fn converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }
}

/// Runs SBL on every column of the projected measurement and rebuilds
/// `Ĝ_k = Â_N Q̂^H`.
pub fn sbl_cascaded(
    yk: &CMat,
    aoa: &AoaEstimate,
    schedule: &TrainingSchedule,
    dicts: &RisDictionaries,
    opts: SblOptions,
    transmit_power: f64,
) -> Result<SblCascadedEstimate> {
    let ytilde = project_out_bs_aoa(yk, &aoa.steering, transmit_power)?;
    let equiv = equivalent_dictionary(schedule, &dicts.user, &dicts.ris);
    let mut q = CMat::zeros(dicts.layout.vec_len(), ytilde.ncols());
    let mut columns = Vec::with_capacity(ytilde.ncols());
    for l in 0..ytilde.ncols() {
        let sol = sbl_estimate(&ytilde.column(l).into_owned(), &equiv, opts)?;
        q.set_column(l, &grouped_combination(&sol.mean, dicts));
        columns.push(sol);
    }
    Ok(SblCascadedEstimate { cascaded: gemm(Op::N, &aoa.steering, Op::H, &q), columns })
}
