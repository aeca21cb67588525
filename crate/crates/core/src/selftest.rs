//! Fixed-seed oracle suite behind the `selftest` subcommand.
//!
//! Every check runs serially from its own seed, so the CSV it produces is
//! byte-identical across runs and thread counts.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{sbl_estimate, SblOptions};
use crate::bdris::{bernoulli_training_schedule, random_unitary_block_matrix, row_selection_blocks};
use crate::channel::{
    cascaded_columns, cascaded_direct, cascaded_matrix, sample_realization, synthesize_measurements, vectorized_form,
    ChannelRealization,
};
use crate::config::SystemConfig;
use crate::error::Result;
use crate::geometry::{rearranged_upa_response, wrap_frequency, SpatialFrequencyPair, UpaShape};
use crate::harness::{run_trial, Estimator, TrialSeeds};
use crate::linalg::{complex_normal, complex_normal_matrix, haar_unitary, kron_vec, rel_error_vec, CMat, CVec, C64};
use crate::sparse::{omp, StopRule};
use crate::stage1::{dft_peak_detect, estimate_common_aoa, PeakMode, RotationGrid, Stage1Options};
use crate::stage2::{delta_compensation, RisDictionaries};
use crate::stage3::{hbomp, stack_measurement, CommonPart, HbompDictionary};

/// Outcome of one oracle check. `worst` is the largest error over all cases
/// and passes when it does not exceed `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// All checks in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,cases,worst,tolerance,pass\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{},{:e},{:e},{}", c.name, c.cases, c.worst, c.tolerance, c.passed());
        }
        s
    }
}

fn variant(i: usize) -> SystemConfig {
    let mut c = SystemConfig::desk();
    match i % 5 {
        0 => {}
        1 => c.ris.groups = 1,
        2 => c.ris.groups = 16,
        3 => {
            c.ris.horizontal = 6;
            c.ris.vertical = 6;
            c.ris.groups = 4;
        }
        _ => {
            c.ris.horizontal = 6;
            c.ris.vertical = 6;
            c.ris.groups = 9;
        }
    }
    c
}

fn realization(c: &SystemConfig, rng: &mut ChaCha8Rng) -> Result<ChannelRealization> {
    sample_realization(c, rng)
}

/// Direct block form, vectorised form and steering factorisation of the
/// cascaded response agree.
pub fn model_equivalence(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let c = variant(i);
        let r = realization(&c, &mut rng)?;
        let phi = random_unitary_block_matrix(&r.layout, &mut rng);
        let p = phi.vec_stack();
        let k = i % r.users.len();
        let direct = cascaded_direct(&r, &phi, k)?;
        worst = worst.max(rel_error_vec(&(vectorized_form(&r, k) * &p), &direct));
        worst = worst.max(rel_error_vec(&(cascaded_matrix(&r, k).matrix * &p), &direct));
    }
    Ok(CheckResult { name: "model_equivalence", cases, worst, tolerance: 1e-9 })
}

/// Every cascaded column follows from the reference column by a gain ratio
/// and a path-difference compensation.
pub fn delta_identity(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let r = realization(&variant(i), &mut rng)?;
        let k = i % r.users.len();
        let q = cascaded_columns(&r, k);
        let rr = i % r.path_count();
        for l in 0..r.path_count() {
            let delta = r.ris_aod[l] - r.ris_aod[rr];
            let gamma_conj = (r.bs_ris_gains[l] / r.bs_ris_gains[rr]).conj();
            let prop = delta_compensation(&r.layout, delta).component_mul(&q.column(rr)) * gamma_conj;
            worst = worst.max(rel_error_vec(&prop, &q.column(l).into_owned()));
        }
    }
    Ok(CheckResult { name: "delta_identity", cases, worst, tolerance: 1e-12 })
}

fn true_common(r: &ChannelRealization, reference: usize, beta_bar: C64) -> Result<CommonPart> {
    let deltas = r.ris_aod.iter().map(|&p| p - r.ris_aod[reference]).collect();
    let lambda = r.bs_ris_gains.iter().map(|a| beta_bar * a).collect();
    CommonPart::from_parts(r.bs_steering.clone(), lambda, deltas, r.ris_aod[reference], &r.layout)
}

/// The cascaded response factors through the common part and the row
/// selected scattering blocks, including one group and one element per group.
pub fn common_factorization(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let c = variant(i);
        let r = realization(&c, &mut rng)?;
        let reference = i % r.path_count();
        let beta_bar = r.users[0].gains[0];
        let cp = true_common(&r, reference, beta_bar)?;
        let phi = random_unitary_block_matrix(&r.layout, &mut rng);
        let blocks = row_selection_blocks(&phi);
        let a = rearranged_upa_response(&r.layout, -r.ris_aod[reference]);
        let k = (i + 1) % r.users.len();
        let h = r.user_channel(k);
        let n = r.layout.group_size();
        let mut inner = CVec::zeros(r.layout.element_count());
        for (g, b) in blocks.iter().enumerate() {
            let v = b * kron_vec(&a.rows(g * n, n).into_owned(), &h.rows(g * n, n).into_owned());
            inner.rows_mut(g * n, n).copy_from(&v);
        }
        let rhs = &cp.h_s * inner / beta_bar;
        worst = worst.max(rel_error_vec(&rhs, &cascaded_direct(&r, &phi, k)?));
    }
    Ok(CheckResult { name: "common_factorization", cases, worst, tolerance: 1e-9 })
}

/// OMP on a random unitary dictionary returns the exact support and
/// coefficients; a wrong support counts as an infinite error.
pub fn omp_orthonormal(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let q = haar_unitary(&mut rng, 16);
        let s = 1 + i % 5;
        let mut idx = sample(&mut rng, 16, s).into_vec();
        let mut x = CVec::zeros(16);
        for &j in &idx {
            x[j] = complex_normal(&mut rng, 1.0) + C64::new(0.5, 0.0);
        }
        let sol = omp(&q, &(&q * &x), StopRule::Sparsity(s))?;
        let mut got = sol.support.clone();
        got.sort_unstable();
        idx.sort_unstable();
        let err = if got == idx { rel_error_vec(&sol.to_dense(16), &x) } else { f64::INFINITY };
        worst = worst.max(err);
    }
    Ok(CheckResult { name: "omp_orthonormal", cases, worst, tolerance: 1e-10 })
}

fn dft_row(pair: SpatialFrequencyPair, shape: &UpaShape) -> usize {
    let o = ((pair.vertical * shape.vertical as f64).round() as isize).rem_euclid(shape.vertical as isize) as usize;
    let i = ((pair.horizontal * shape.horizontal as f64).round() as isize).rem_euclid(shape.horizontal as isize) as usize;
    o * shape.horizontal + i
}

/// Peak rows for paths on distinct DFT bins; the metric counts wrong rows.
pub fn dft_peaks_on_grid(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = UpaShape::half_wave(8, 8)?;
    let mut misses = 0usize;
    for i in 0..cases {
        let l = 1 + i % 4;
        let rows = sample(&mut rng, shape.len(), l).into_vec();
        let pairs: Vec<SpatialFrequencyPair> = rows
            .iter()
            .map(|&r| {
                SpatialFrequencyPair::new(
                    wrap_frequency((r / 8) as f64 / 8.0),
                    wrap_frequency((r % 8) as f64 / 8.0),
                )
            })
            .collect();
        let y = steering(&shape, &pairs) * complex_normal_matrix(&mut rng, l, 8, 1.0);
        let mut got = dft_peak_detect(&y, &shape, PeakMode::KnownCount(l))?.rows;
        got.sort_unstable();
        let mut want: Vec<usize> = pairs.iter().map(|&p| dft_row(p, &shape)).collect();
        want.sort_unstable();
        misses += got.iter().zip(&want).filter(|(a, b)| a != b).count();
    }
    Ok(CheckResult { name: "dft_peaks_on_grid", cases, worst: misses as f64, tolerance: 0.0 })
}

fn steering(shape: &UpaShape, pairs: &[SpatialFrequencyPair]) -> CMat {
    let mut m = CMat::zeros(shape.len(), pairs.len());
    for (c, &p) in pairs.iter().enumerate() {
        m.set_column(c, &crate::geometry::upa_response(shape, p));
    }
    m
}

/// A path half a DFT bin off grid on the outer axis; the metric is the
/// recovered-frequency error in units of one rotation-grid step.
pub fn rotation_half_bin(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = UpaShape::half_wave(8, 8)?;
    let grid = RotationGrid { outer_points: 64, inner_points: 64 };
    let opts = Stage1Options { peak_mode: PeakMode::KnownCount(1), grid, joint_search: false, leakage_cancellation: true };
    let step = 2.0 * PI / (8.0 * 64.0);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let truth = SpatialFrequencyPair::new(
            wrap_frequency((i % 8) as f64 / 8.0 + 0.5 / 8.0),
            wrap_frequency(((3 * i) % 8) as f64 / 8.0),
        );
        let y = steering(&shape, &[truth]) * complex_normal_matrix(&mut rng, 1, 6, 1.0);
        let est = estimate_common_aoa(&y, &shape, &opts)?;
        let err = wrap_frequency(est.pairs[0].vertical - truth.vertical).abs() * 2.0 * PI;
        worst = worst.max(err / step);
    }
    Ok(CheckResult { name: "rotation_half_bin", cases, worst, tolerance: 1.0 + 1e-9 })
}

/// Noiseless on-grid macro-block selection with the true common part; the
/// metric counts wrong blocks.
pub fn hbomp_block(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut c = SystemConfig::desk();
    c.channel.on_grid = true;
    c.channel.snr_db = None;
    let (dv, dh) = c.ris_grid();
    let d = RisDictionaries::new(&c.ris_layout()?, dv, dh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut misses = 0usize;
    for i in 0..cases {
        let r = realization(&c, &mut rng)?;
        let reference = i % r.path_count();
        let cp = true_common(&r, reference, r.users[0].gains[0])?;
        let s = bernoulli_training_schedule(&d.layout, c.users.other_pilots, &mut rng)?;
        let k = 1 + i % (r.users.len() - 1);
        let y = synthesize_measurements(&cascaded_matrix(&r, k), &s, 1.0, 0.0, &mut rng)?;
        let ys = stack_measurement(&y, &r.bs_steering, 1.0)?;
        let dict = HbompDictionary::new(&cp, &s, &d)?;
        let stop = StopRule::Sparsity(c.user_paths(k));
        let sol = hbomp(&ys, &dict, stop, c.estimation.macro_block_candidates)?;
        if sol.block != d.ris.nearest_index(-r.ris_aod[reference]) {
            misses += 1;
        }
    }
    Ok(CheckResult { name: "hbomp_block", cases, worst: misses as f64, tolerance: 0.0 })
}

/// Largest relative drop of the SBL evidence between iterations.
pub fn sbl_evidence(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let d = complex_normal_matrix(&mut rng, 12, 30, 1.0);
        let noise = 0.05 * (i % 4) as f64;
        let mut y = CVec::from_column_slice(complex_normal_matrix(&mut rng, 12, 1, noise * noise).as_slice());
        for j in 0..1 + i % 3 {
            y += d.column(j * 7) * C64::new(1.0 + j as f64, 0.5);
        }
        let sol = sbl_estimate(&y, &d, SblOptions::default())?;
        for w in sol.evidence_history.windows(2) {
            worst = worst.max((w[0] - w[1]) / w[0].abs().max(1.0));
        }
    }
    Ok(CheckResult { name: "sbl_evidence", cases, worst, tolerance: 1e-9 })
}

/// Median NMSE of the full protocol on noiseless on-grid desk trials.
pub fn end_to_end_noiseless(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut c = SystemConfig::desk();
    c.channel.on_grid = true;
    c.channel.snr_db = None;
    let mut errors = Vec::with_capacity(cases);
    for t in 0..cases as u64 {
        let r = run_trial(&c, &[Estimator::Proposed], TrialSeeds::derive(seed, t))?;
        errors.push(r.outcomes[0].nmse);
    }
    errors.sort_by(f64::total_cmp);
    let worst = errors.get(errors.len() / 2).copied().unwrap_or(f64::INFINITY);
    Ok(CheckResult { name: "end_to_end_noiseless_median", cases, worst, tolerance: 1e-6 })
}

/// Runs every check from `seed`.
pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let checks = vec![
        model_equivalence(seed, 100)?,
        delta_identity(seed.wrapping_add(1), 100)?,
        common_factorization(seed.wrapping_add(2), 100)?,
        omp_orthonormal(seed.wrapping_add(3), 50)?,
        dft_peaks_on_grid(seed.wrapping_add(4), 50)?,
        rotation_half_bin(seed.wrapping_add(5), 16)?,
        hbomp_block(seed.wrapping_add(6), 30)?,
        sbl_evidence(seed.wrapping_add(7), 30)?,
        end_to_end_noiseless(seed.wrapping_add(8), 11)?,
    ];
    Ok(SelftestReport { seed, checks })
}
