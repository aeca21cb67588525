//! Common BS-side angle-of-arrival estimation: DFT peak search followed by
//! angle-rotation refinement.
//!
//! The BS array index is `outer·N_inner + inner`; the outer axis carries the
//! first spatial frequency (`SpatialFrequencyPair::vertical`).

use std::f64::consts::PI;

use crate::config::{PeakSelection, SystemConfig};
use crate::error::{dim_check, Error, Result};
use crate::geometry::{dft_transform_matrix, upa_response, wrap_frequency, SpatialFrequencyPair, UpaShape};
use crate::linalg::{gemm, lstsq, matmul, CMat, C64, Op};

/// How many peaks to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakMode {
    KnownCount(usize),
    /// Keep local maxima whose power is at least this fraction of the largest.
    Threshold(f64),
}

/// Rows of `Ũ^H Y` chosen as path peaks, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    /// 0-based row indices.
    pub rows: Vec<usize>,
    /// Squared norm of every row of `Ũ^H Y`.
    pub row_power: Vec<f64>,
}

impl PeakSet {
    pub fn path_count(&self) -> usize {
        self.rows.len()
    }
}

/// A DFT bin with 1-based axis indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseBin {
    pub outer: usize,
    pub inner: usize,
    pub pair: SpatialFrequencyPair,
}

fn neighbours(row: usize, shape: &UpaShape) -> Vec<usize> {
    let (no, ni) = (shape.vertical as isize, shape.horizontal as isize);
    let (o, i) = ((row / shape.horizontal) as isize, (row % shape.horizontal) as isize);
    let mut out = Vec::with_capacity(8);
    for d_o in -1..=1 {
        for d_i in -1..=1 {
            if d_o == 0 && d_i == 0 {
                continue;
            }
            let r = (((o + d_o).rem_euclid(no)) * ni + (i + d_i).rem_euclid(ni)) as usize;
            if r != row && !out.contains(&r) {
                out.push(r);
            }
        }
    }
    out
}

/// Finds peak rows of `Ũ^H Y1` with local-maximum suppression over the
/// cyclic 8-neighbourhood. In known-count mode, missing peaks are filled with
/// the strongest remaining rows.
pub fn dft_peak_detect(y1: &CMat, shape: &UpaShape, mode: PeakMode) -> Result<PeakSet> {
    dim_check(y1.nrows() == shape.len(), || format!("Y1 has {} rows for a {}-element array", y1.nrows(), shape.len()))?;
    let u = dft_transform_matrix(shape);
    let z = gemm(Op::H, &u, Op::N, y1);
    let row_power: Vec<f64> = (0..z.nrows()).map(|r| z.row(r).iter().map(|v| v.norm_sqr()).sum()).collect();
    let max = row_power.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return Err(Error::Degenerate("BS measurement has no power".into()));
    }
    let mut order: Vec<usize> = (0..row_power.len()).collect();
    order.sort_by(|&a, &b| row_power[b].total_cmp(&row_power[a]).then(a.cmp(&b)));
    // rows at round-off level are not peaks even when their neighbours are too
    let floor = 1e-12 * max;
    let is_peak = |r: usize| row_power[r] > floor && neighbours(r, shape).iter().all(|&q| row_power[r] >= row_power[q]);
    let peaks: Vec<usize> = order.iter().copied().filter(|&r| is_peak(r)).collect();
    let rows = match mode {
        PeakMode::KnownCount(l) => {
            let l = l.min(row_power.len());
            let mut rows: Vec<usize> = peaks.into_iter().take(l).collect();
            for &r in &order {
                if rows.len() >= l {
                    break;
                }
                if !rows.contains(&r) {
                    rows.push(r);
                }
            }
            rows
        }
        PeakMode::Threshold(frac) => {
            let rows: Vec<usize> = peaks.into_iter().filter(|&r| row_power[r] >= frac * max).collect();
            if rows.is_empty() {
                return Err(Error::Degenerate("no row passed the power threshold".into()));
            }
            rows
        }
    };
    Ok(PeakSet { rows, row_power })
}

fn coarse_component(n: usize, size: usize, spacing: f64) -> f64 {
    let f = (n - 1) as f64 / size as f64;
    if n as f64 > size as f64 * spacing {
        f - 1.0
    } else {
        f
    }
}

/// Maps a 1-based DFT row index to its axis indices and coarse frequencies.
pub fn index_to_coarse_freq(n: usize, shape: &UpaShape) -> Result<CoarseBin> {
    if n == 0 || n > shape.len() {
        return Err(Error::Dimension(format!("DFT index {n} outside 1..={}", shape.len())));
    }
    let outer = n.div_ceil(shape.horizontal);
    let inner = n - shape.horizontal * (outer - 1);
    let pair = SpatialFrequencyPair::new(
        coarse_component(outer, shape.vertical, shape.spacing),
        coarse_component(inner, shape.horizontal, shape.spacing),
    );
    Ok(CoarseBin { outer, inner, pair })
}

/// Rotation search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationGrid {
    pub outer_points: usize,
    pub inner_points: usize,
}

/// Grid `-π/N + 2πi/(N·g)`, `i = 0..g`, which contains zero for even `g`.
pub fn rotation_grid(size: usize, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| (2.0 * i as f64 / points as f64 - 1.0) * PI / size as f64)
        .collect()
}

/// Outer-axis objective `‖[Ũ]_{:,n̄₁}^H (R₁(Δ) ⊗ J) Y‖²`: only the elements
/// with inner index zero take part.
pub fn outer_objective(y: &CMat, bin: &CoarseBin, shape: &UpaShape, delta: f64) -> f64 {
    let (no, ni) = (shape.vertical, shape.horizontal);
    let k = bin.outer - 1;
    let scale = 1.0 / ((no * ni) as f64).sqrt();
    let w: Vec<C64> = (0..no)
        .map(|a| C64::from_polar(scale, 2.0 * PI * ((a * k) % no) as f64 / no as f64 - a as f64 * delta))
        .collect();
    (0..y.ncols())
        .map(|t| w.iter().enumerate().map(|(a, wa)| wa * y[(a * ni, t)]).sum::<C64>().norm_sqr())
        .sum()
}

/// Inner-axis objective `‖[Ũ]_{:,n̄₂}^H (J ⊗ R₂(Δ)) Y‖²`: only the elements
/// with outer index zero take part.
pub fn inner_objective(y: &CMat, bin: &CoarseBin, shape: &UpaShape, delta: f64) -> f64 {
    let (no, ni) = (shape.vertical, shape.horizontal);
    let k = bin.inner - 1;
    let scale = 1.0 / ((no * ni) as f64).sqrt();
    let w: Vec<C64> = (0..ni)
        .map(|b| C64::from_polar(scale, 2.0 * PI * ((b * k) % ni) as f64 / ni as f64 - b as f64 * delta))
        .collect();
    (0..y.ncols())
        .map(|t| w.iter().enumerate().map(|(b, wb)| wb * y[(b, t)]).sum::<C64>().norm_sqr())
        .sum()
}

/// Full objective `‖[Ũ]_{:,n}^H (R₁(Δo) ⊗ R₂(Δi)) Y‖²`.
pub fn joint_objective(y: &CMat, bin: &CoarseBin, shape: &UpaShape, d_outer: f64, d_inner: f64) -> f64 {
    let (no, ni) = (shape.vertical, shape.horizontal);
    let (ko, ki) = (bin.outer - 1, bin.inner - 1);
    let scale = 1.0 / ((no * ni) as f64).sqrt();
    let mut w = Vec::with_capacity(no * ni);
    for a in 0..no {
        for b in 0..ni {
            let ph = 2.0 * PI * (((a * ko) % no) as f64 / no as f64 + ((b * ki) % ni) as f64 / ni as f64)
                - a as f64 * d_outer
                - b as f64 * d_inner;
            w.push(C64::from_polar(scale, ph));
        }
    }
    (0..y.ncols())
        .map(|t| w.iter().enumerate().map(|(r, wr)| wr * y[(r, t)]).sum::<C64>().norm_sqr())
        .sum()
}

fn argmax_on(grid: &[f64], f: impl Fn(f64) -> f64, counter: &mut usize) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &d in grid {
        *counter += 1;
        let v = f(d);
        if v > best.0 {
            best = (v, d);
        }
    }
    best.1
}

/// Decomposed rotation search: two independent 1-D maximisations. Adds the
/// number of objective evaluations to `counter`.
pub fn angle_rotation_refine(y1: &CMat, bin: &CoarseBin, shape: &UpaShape, grid: RotationGrid, counter: &mut usize) -> (f64, f64) {
    let go = rotation_grid(shape.vertical, grid.outer_points);
    let gi = rotation_grid(shape.horizontal, grid.inner_points);
    let d_o = argmax_on(&go, |d| outer_objective(y1, bin, shape, d), counter);
    let d_i = argmax_on(&gi, |d| inner_objective(y1, bin, shape, d), counter);
    (d_o, d_i)
}

/// Exhaustive 2-D rotation search over the same grids.
pub fn joint_rotation_refine(y1: &CMat, bin: &CoarseBin, shape: &UpaShape, grid: RotationGrid, counter: &mut usize) -> (f64, f64) {
    let go = rotation_grid(shape.vertical, grid.outer_points);
    let gi = rotation_grid(shape.horizontal, grid.inner_points);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for &a in &go {
        for &b in &gi {
            *counter += 1;
            let v = joint_objective(y1, bin, shape, a, b);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    (best.1, best.2)
}

/// Stage I settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Options {
    pub peak_mode: PeakMode,
    pub grid: RotationGrid,
    pub joint_search: bool,
    /// Remove the other paths before each rotation search: successive
    /// cancellation with a known count, the coarse DFT fit with a threshold.
    pub leakage_cancellation: bool,
}

impl Stage1Options {
    pub fn from_config(c: &SystemConfig) -> Self {
        let e = &c.estimation;
        Stage1Options {
            peak_mode: match e.peak_selection {
                PeakSelection::KnownCount => PeakMode::KnownCount(c.channel.bs_ris_paths),
                PeakSelection::Threshold => PeakMode::Threshold(e.peak_threshold),
            },
            grid: RotationGrid { outer_points: e.rotation_points_outer, inner_points: e.rotation_points_inner },
            joint_search: e.joint_rotation,
            leakage_cancellation: e.leakage_cancellation,
        }
    }
}

/// Stage I output.
#[derive(Debug, Clone)]
pub struct AoaEstimate {
    pub peaks: PeakSet,
    pub bins: Vec<CoarseBin>,
    /// Selected rotation `(Δ_outer, Δ_inner)` per path, radians.
    pub rotations: Vec<(f64, f64)>,
    pub pairs: Vec<SpatialFrequencyPair>,
    /// `N × L̂` responses at the refined pairs.
    pub steering: CMat,
    /// Objective evaluations spent in the rotation searches.
    pub evaluations: usize,
}

impl AoaEstimate {
    pub fn path_count(&self) -> usize {
        self.pairs.len()
    }

    /// Estimate built directly from known pairs, bypassing the search.
    pub fn from_pairs(shape: &UpaShape, pairs: Vec<SpatialFrequencyPair>) -> Self {
        let steering = steering_for(shape, &pairs);
        AoaEstimate {
            peaks: PeakSet { rows: vec![], row_power: vec![] },
            bins: vec![],
            rotations: vec![(0.0, 0.0); pairs.len()],
            pairs,
            steering,
            evaluations: 0,
        }
    }
}

fn steering_for(shape: &UpaShape, pairs: &[SpatialFrequencyPair]) -> CMat {
    let mut m = CMat::zeros(shape.len(), pairs.len());
    for (c, &p) in pairs.iter().enumerate() {
        m.set_column(c, &upa_response(shape, p));
    }
    m
}

/// Refined frequency from a coarse bin and a rotation.
pub fn refined_pair(bin: &CoarseBin, rotation: (f64, f64)) -> SpatialFrequencyPair {
    SpatialFrequencyPair::new(
        wrap_frequency(bin.pair.vertical - rotation.0 / (2.0 * PI)),
        wrap_frequency(bin.pair.horizontal - rotation.1 / (2.0 * PI)),
    )
}

fn refine(y: &CMat, bin: &CoarseBin, shape: &UpaShape, opts: &Stage1Options, counter: &mut usize) -> (f64, f64) {
    if opts.joint_search {
        joint_rotation_refine(y, bin, shape, opts.grid, counter)
    } else {
        angle_rotation_refine(y, bin, shape, opts.grid, counter)
    }
}

/// `Y` minus its least-squares fit on the columns of `a`.
fn project_out(y: &CMat, a: &CMat) -> CMat {
    let mut out = y.clone();
    if a.ncols() == 0 {
        return out;
    }
    for t in 0..y.ncols() {
        let col = y.column(t).into_owned();
        let fit = a * lstsq(a, &col);
        out.set_column(t, &(col - fit));
    }
    out
}

fn bin_of_row(row: usize, shape: &UpaShape) -> Result<CoarseBin> {
    index_to_coarse_freq(row + 1, shape)
}

const POLISH_SWEEPS: usize = 10;

/// Known-count detection by successive cancellation: the strongest DFT row
/// of the residual is refined and its response projected out before the next
/// row is taken. Sweeps then re-refine each path with the least-squares fit
/// of the others removed until the rotations settle.
fn successive_aoa(y1: &CMat, shape: &UpaShape, count: usize, opts: &Stage1Options) -> Result<AoaEstimate> {
    let first = dft_peak_detect(y1, shape, PeakMode::KnownCount(1))?;
    let row_power = first.row_power;
    let mut evaluations = 0;
    let mut rows = Vec::with_capacity(count);
    let mut bins: Vec<CoarseBin> = Vec::with_capacity(count);
    let mut rotations = Vec::with_capacity(count);
    let mut residual = y1.clone();
    for _ in 0..count.min(shape.len()) {
        let row = match dft_peak_detect(&residual, shape, PeakMode::KnownCount(1)) {
            Ok(p) => p.rows[0],
            Err(_) => break,
        };
        if rows.contains(&row) {
            break;
        }
        let bin = bin_of_row(row, shape)?;
        rotations.push(refine(&residual, &bin, shape, opts, &mut evaluations));
        rows.push(row);
        bins.push(bin);
        let pairs: Vec<SpatialFrequencyPair> = bins.iter().zip(&rotations).map(|(b, &r)| refined_pair(b, r)).collect();
        residual = project_out(y1, &steering_for(shape, &pairs));
    }
    // fill from the strongest untouched rows if the residual ran dry
    let mut order: Vec<usize> = (0..row_power.len()).collect();
    order.sort_by(|&a, &b| row_power[b].total_cmp(&row_power[a]).then(a.cmp(&b)));
    for r in order {
        if rows.len() >= count.min(shape.len()) {
            break;
        }
        if !rows.contains(&r) {
            rows.push(r);
            bins.push(bin_of_row(r, shape)?);
            rotations.push((0.0, 0.0));
        }
    }
    for _ in 0..if bins.len() > 1 { POLISH_SWEEPS } else { 0 } {
        let before = rotations.clone();
        for l in 0..bins.len() {
            let others: Vec<SpatialFrequencyPair> = (0..bins.len())
                .filter(|&i| i != l)
                .map(|i| refined_pair(&bins[i], rotations[i]))
                .collect();
            let own = project_out(y1, &steering_for(shape, &others));
            rotations[l] = refine(&own, &bins[l], shape, opts, &mut evaluations);
        }
        if rotations == before {
            break;
        }
    }
    let pairs: Vec<SpatialFrequencyPair> = bins.iter().zip(&rotations).map(|(b, &r)| refined_pair(b, r)).collect();
    let steering = steering_for(shape, &pairs);
    Ok(AoaEstimate { peaks: PeakSet { rows, row_power }, bins, rotations, pairs, steering, evaluations })
}

/// Peak detection, rotation refinement and assembly of `Â_N`.
pub fn estimate_common_aoa(y1: &CMat, shape: &UpaShape, opts: &Stage1Options) -> Result<AoaEstimate> {
    dim_check(y1.nrows() == shape.len(), || format!("Y1 has {} rows for a {}-element array", y1.nrows(), shape.len()))?;
    if let (PeakMode::KnownCount(l), true) = (opts.peak_mode, opts.leakage_cancellation) {
        return successive_aoa(y1, shape, l, opts);
    }
    let peaks = dft_peak_detect(y1, shape, opts.peak_mode)?;
    let bins: Vec<CoarseBin> = peaks.rows.iter().map(|&r| bin_of_row(r, shape)).collect::<Result<_>>()?;
    let coarse = steering_for(shape, &bins.iter().map(|b| b.pair).collect::<Vec<_>>());
    // coarse responses sit on distinct DFT bins, so they are orthogonal
    let fit = if opts.leakage_cancellation && bins.len() > 1 {
        Some(gemm(Op::H, &coarse, Op::N, y1) / C64::new(shape.len() as f64, 0.0))
    } else {
        None
    };
    let mut evaluations = 0;
    let mut rotations = Vec::with_capacity(bins.len());
    for (l, bin) in bins.iter().enumerate() {
        let own;
        let y = match &fit {
            Some(x) => {
                let mut others = x.clone();
                others.row_mut(l).fill(C64::new(0.0, 0.0));
                own = y1 - matmul(&coarse, &others);
                &own
            }
            None => y1,
        };
        rotations.push(refine(y, bin, shape, opts, &mut evaluations));
    }
    let pairs: Vec<SpatialFrequencyPair> = bins.iter().zip(&rotations).map(|(b, &r)| refined_pair(b, r)).collect();
    let steering = steering_for(shape, &pairs);
    Ok(AoaEstimate { peaks, bins, rotations, pairs, steering, evaluations })
}

/// `‖Â^H A‖_F² / (N²·L)`: one when the estimated and true responses coincide.
pub fn subspace_alignment(estimate: &CMat, truth: &CMat) -> f64 {
    let n = truth.nrows() as f64;
    let c = gemm(Op::H, estimate, Op::N, truth);
    c.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n * n * truth.ncols() as f64)
}

/// Largest circular frequency error under the best one-to-one matching of
/// estimated to true pairs (exhaustive for up to eight paths, greedy beyond).
pub fn matched_max_error(estimate: &[SpatialFrequencyPair], truth: &[SpatialFrequencyPair]) -> f64 {
    if estimate.len() != truth.len() {
        return f64::INFINITY;
    }
    let n = truth.len();
    let cost = |i: usize, j: usize| estimate[i].circular_distance(truth[j]);
    if n <= 8 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let worst = (0..n).map(|i| cost(i, p[i])).fold(0.0, f64::max);
            best = best.min(worst);
        });
        best
    } else {
        let mut used = vec![false; n];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let (j, c) = (0..n).filter(|&j| !used[j]).map(|j| (j, cost(i, j))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            used[j] = true;
            worst = worst.max(c);
        }
        worst
    }
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_normal_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(n: usize) -> UpaShape {
        UpaShape::half_wave(n, n).unwrap()
    }

    fn measure(s: &UpaShape, pairs: &[SpatialFrequencyPair], tau: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = steering_for(s, pairs);
        let x = complex_normal_matrix(&mut rng, pairs.len(), tau, 1.0);
        a * x
    }

    fn opts(l: usize) -> Stage1Options {
        Stage1Options {
            peak_mode: PeakMode::KnownCount(l),
            grid: RotationGrid { outer_points: 64, inner_points: 64 },
            joint_search: false,
            leakage_cancellation: true,
        }
    }

    #[test]
    fn single_on_grid_path_concentrates_in_one_row() {
        let s = shape(8);
        let y = measure(&s, &[SpatialFrequencyPair::new(0.25, -0.375)], 10, 1);
        let p = dft_peak_detect(&y, &s, PeakMode::Threshold(0.2)).unwrap();
        let total: f64 = p.row_power.iter().sum();
        assert_eq!(p.rows.len(), 1);
        assert!(p.row_power[p.rows[0]] > 0.9999 * total);
    }

    #[test]
    fn known_count_recovers_true_rows() {
        let s = shape(8);
        let pairs = [SpatialFrequencyPair::new(0.25, -0.375), SpatialFrequencyPair::new(-0.125, 0.125), SpatialFrequencyPair::new(0.0, 0.375)];
        let y = measure(&s, &pairs, 12, 2);
        let p = dft_peak_detect(&y, &s, PeakMode::KnownCount(3)).unwrap();
        let mut got = p.rows.clone();
        got.sort_unstable();
        let mut want: Vec<usize> = pairs
            .iter()
            .map(|q| {
                let o = ((q.vertical * 8.0).round() as isize).rem_euclid(8) as usize;
                let i = ((q.horizontal * 8.0).round() as isize).rem_euclid(8) as usize;
                o * 8 + i
            })
            .collect();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn adjacent_on_grid_paths_are_both_kept() {
        let s = shape(4);
        let pairs = [SpatialFrequencyPair::new(-0.5, 0.0), SpatialFrequencyPair::new(0.25, 0.0)];
        let y = measure(&s, &pairs, 16, 5);
        let est = estimate_common_aoa(&y, &s, &opts(2)).unwrap();
        assert!(matched_max_error(&est.pairs, &pairs) < 1e-12, "{:?} {:?} {:?}", est.peaks.rows, est.rotations, est.pairs);
    }

    #[test]
    fn zero_measurement_is_rejected() {
        assert!(dft_peak_detect(&CMat::zeros(16, 4), &shape(4), PeakMode::KnownCount(1)).is_err());
    }

    #[test]
    fn index_mapping_examples() {
        let s = shape(8);
        let b = index_to_coarse_freq(1, &s).unwrap();
        assert_eq!((b.outer, b.inner, b.pair), (1, 1, SpatialFrequencyPair::new(0.0, 0.0)));
        let b = index_to_coarse_freq(24, &s).unwrap();
        assert_eq!((b.outer, b.inner), (3, 8));
        assert!((b.pair.vertical - 0.25).abs() < 1e-15);
        assert!((b.pair.horizontal - (7.0 / 8.0 - 1.0)).abs() < 1e-15);
        let b = index_to_coarse_freq(6 * 8 + 1, &s).unwrap();
        assert_eq!(b.outer, 7);
        assert!((b.pair.vertical - (6.0 / 8.0 - 1.0)).abs() < 1e-15);
        assert!(index_to_coarse_freq(0, &s).is_err() && index_to_coarse_freq(65, &s).is_err());
    }

    #[test]
    fn on_grid_rotation_is_zero() {
        let s = shape(8);
        let pairs = [SpatialFrequencyPair::new(0.125, 0.25), SpatialFrequencyPair::new(-0.25, 0.375)];
        let y = measure(&s, &pairs, 10, 3);
        let est = estimate_common_aoa(&y, &s, &opts(2)).unwrap();
        let step = 2.0 * PI / (8.0 * 64.0);
        for r in &est.rotations {
            assert!(r.0.abs() < step && r.1.abs() < step);
        }
        assert!(matched_max_error(&est.pairs, &pairs) < 1e-6);
        // two successive picks, one polishing sweep and one that confirms it
        assert_eq!(est.evaluations, 6 * (64 + 64));
        let mut plain = opts(2);
        plain.leakage_cancellation = false;
        assert_eq!(estimate_common_aoa(&y, &s, &plain).unwrap().evaluations, 2 * (64 + 64));
    }

    #[test]
    fn half_bin_offset_is_recovered() {
        let s = shape(8);
        let truth = SpatialFrequencyPair::new(0.25 + 0.5 / 8.0, -0.125);
        let y = measure(&s, &[truth], 6, 4);
        let est = estimate_common_aoa(&y, &s, &opts(1)).unwrap();
        let err = wrap_frequency(est.pairs[0].vertical - truth.vertical).abs() * 2.0 * PI;
        assert!(err <= 2.0 * PI / (8.0 * 64.0) + 1e-12, "err {err}");
        assert!(est.rotations[0].1.abs() < 2.0 * PI / (8.0 * 64.0));
        let lo = -PI / 8.0;
        assert!(est.rotations.iter().all(|r| r.0 >= lo && r.0 < -lo && r.1 >= lo && r.1 < -lo));
    }

    #[test]
    fn refinement_beats_coarse_bins_off_grid() {
        let s = shape(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let pairs: Vec<SpatialFrequencyPair> = (0..2)
                .map(|_| SpatialFrequencyPair::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                .collect();
            if pairs[0].circular_distance(pairs[1]) < 3.0 / 8.0 {
                continue;
            }
            let y = measure(&s, &pairs, 16, 100 + trial);
            let est = estimate_common_aoa(&y, &s, &opts(2)).unwrap();
            let coarse: Vec<SpatialFrequencyPair> = est.bins.iter().map(|b| b.pair).collect();
            assert!(matched_max_error(&est.pairs, &pairs) < matched_max_error(&coarse, &pairs));
        }
    }

    #[test]
    fn rotation_never_lowers_the_objective() {
        let s = shape(8);
        let y = measure(&s, &[SpatialFrequencyPair::new(0.31, -0.07)], 5, 6);
        let est = estimate_common_aoa(&y, &s, &opts(1)).unwrap();
        let (b, r) = (est.bins[0], est.rotations[0]);
        assert!(outer_objective(&y, &b, &s, r.0) >= outer_objective(&y, &b, &s, 0.0));
        assert!(inner_objective(&y, &b, &s, r.1) >= inner_objective(&y, &b, &s, 0.0));
    }

    #[test]
    fn joint_search_agrees_single_path() {
        let s = shape(4);
        let y = measure(&s, &[SpatialFrequencyPair::new(0.2, 0.33)], 5, 7);
        let mut o = opts(1);
        o.grid = RotationGrid { outer_points: 32, inner_points: 32 };
        let a = estimate_common_aoa(&y, &s, &o).unwrap();
        o.joint_search = true;
        let b = estimate_common_aoa(&y, &s, &o).unwrap();
        assert_eq!(b.evaluations, 32 * 32);
        assert!(a.pairs[0].circular_distance(b.pairs[0]) < 1.0 / (4.0 * 32.0) + 1e-12);
    }

    #[test]
    fn alignment_is_one_for_exact_steering() {
        let s = shape(4);
        let pairs = vec![SpatialFrequencyPair::new(0.1, 0.2), SpatialFrequencyPair::new(-0.3, 0.4)];
        let a = steering_for(&s, &pairs);
        let v = subspace_alignment(&a, &a);
        assert!((1.0..1.1).contains(&v));
    }
}
