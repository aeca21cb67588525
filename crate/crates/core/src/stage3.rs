//! Remaining users: common-part construction from the typical user's
//! estimate, hierarchical block OMP, and cascaded-channel reconstruction.

use crate::bdris::TrainingSchedule;
use crate::error::{dim_check, Error, Result};
use crate::geometry::{rearranged_upa_response, GroupLayout, SpatialFrequencyPair};
use crate::linalg::{gemm, matmul, norm_sqr, CMat, CVec, Op, C64};
use crate::sparse::{column_normalize, omp, SparseSolution, StopRule};
use crate::stage1::AoaEstimate;
use crate::stage2::{apply_slot, delta_compensation, RisDictionaries, TypicalUserEstimate};

/// Quantities shared by every user's cascaded channel.
#[derive(Debug, Clone)]
pub struct CommonPart {
    /// `β̄·α_l` per path.
    pub lambda_s: Vec<C64>,
    pub deltas: Vec<SpatialFrequencyPair>,
    /// `M × L̂` rearranged responses at the path differences.
    pub delta_steering: CMat,
    /// Reference RIS departure pair.
    pub reference_aod: SpatialFrequencyPair,
    pub bs_steering: CMat,
    /// `Â_N Λ_s A_Δ^H`, `N × M`.
    pub h_s: CMat,
    /// `(1/N) Â_N^H H_s`, `L̂ × M`.
    pub h_c: CMat,
}

impl CommonPart {
    pub fn from_parts(
        bs_steering: CMat,
        lambda_s: Vec<C64>,
        deltas: Vec<SpatialFrequencyPair>,
        reference_aod: SpatialFrequencyPair,
        layout: &GroupLayout,
    ) -> Result<Self> {
        dim_check(lambda_s.len() == deltas.len() && deltas.len() == bs_steering.ncols(), || {
            "common part needs one gain and one delta per BS path".into()
        })?;
        let mut delta_steering = CMat::zeros(layout.element_count(), deltas.len());
        for (l, &d) in deltas.iter().enumerate() {
            delta_steering.set_column(l, &rearranged_upa_response(layout, d));
        }
        let scaled = CMat::from_fn(bs_steering.nrows(), bs_steering.ncols(), |r, c| bs_steering[(r, c)] * lambda_s[c]);
        let h_s = gemm(Op::N, &scaled, Op::H, &delta_steering);
        let h_c = gemm(Op::H, &bs_steering, Op::N, &h_s) / C64::new(bs_steering.nrows() as f64, 0.0);
        Ok(CommonPart { lambda_s, deltas, delta_steering, reference_aod, bs_steering, h_s, h_c })
    }
}

/// Builds the common part with `β̄` set to the gain of the typical user's
/// strongest atom: `Λ_s(l,l) = conj(b₁·γ_l*)`.
pub fn build_common_part(typical: &TypicalUserEstimate, aoa: &AoaEstimate, dicts: &RisDictionaries) -> Result<CommonPart> {
    let (aod_index, lead) = match (typical.reference_aod_index(), typical.leading_coefficient()) {
        (Some(i), Some(b)) => (i, b),
        _ => return Err(Error::Degenerate("typical-user estimate has no reference departure angle".into())),
    };
    let lambda_s = typical.gain_ratios_conj.iter().map(|g| (lead * g).conj()).collect();
    CommonPart::from_parts(
        aoa.steering.clone(),
        lambda_s,
        typical.deltas.clone(),
        dicts.ris.grid_frequencies[aod_index],
        &dicts.layout,
    )
}

/// `vec((1/(N√p)) Â^H Y)`, slot-major.
pub fn stack_measurement(yk: &CMat, a_hat: &CMat, transmit_power: f64) -> Result<CVec> {
    dim_check(yk.nrows() == a_hat.nrows(), || "measurement rows differ from BS steering rows".into())?;
    let z = gemm(Op::H, a_hat, Op::N, yk) / C64::new(a_hat.nrows() as f64 * transmit_power.sqrt(), 0.0);
    Ok(CVec::from_column_slice(z.as_slice()))
}

/// Block dictionary `[Ψ^(1), …, Ψ^(P₁)]` with blocks built on demand:
/// rows `t·L̂ + l` of `Ψ^(j)` are `H_c Diag(ã_j) Φ_t Ã₂`.
#[derive(Debug, Clone)]
pub struct HbompDictionary {
    pub h_c: CMat,
    /// `Φ_t Ã₂` per slot.
    pub slot_products: Vec<CMat>,
    /// Candidate reference-angle responses, `M × P₁`.
    pub outer: CMat,
    pub inner_len: usize,
}

impl HbompDictionary {
    pub fn new(common: &CommonPart, schedule: &TrainingSchedule, dicts: &RisDictionaries) -> Result<Self> {
        dim_check(schedule.group_size == dicts.layout.group_size() && schedule.group_count == dicts.layout.group_count(), || {
            "schedule grouping differs from the RIS layout".into()
        })?;
        let slot_products = (0..schedule.slots()).map(|t| apply_slot(schedule, t, &dicts.user.atoms)).collect();
        Ok(HbompDictionary {
            h_c: common.h_c.clone(),
            slot_products,
            outer: dicts.ris.atoms.clone(),
            inner_len: dicts.user.len(),
        })
    }

    pub fn block_count(&self) -> usize {
        self.outer.ncols()
    }

    pub fn rows(&self) -> usize {
        self.h_c.nrows() * self.slot_products.len()
    }

    pub fn block(&self, j: usize) -> CMat {
        let l = self.h_c.nrows();
        let a = self.outer.column(j);
        let hc_a = CMat::from_fn(l, self.h_c.ncols(), |r, c| self.h_c[(r, c)] * a[c]);
        let mut out = CMat::zeros(self.rows(), self.inner_len);
        for (t, w) in self.slot_products.iter().enumerate() {
            out.rows_mut(t * l, l).copy_from(&matmul(&hc_a, w));
        }
        out
    }

    /// Every block side by side; for checks at small sizes.
    pub fn materialize(&self) -> CMat {
        let mut out = CMat::zeros(self.rows(), self.block_count() * self.inner_len);
        for j in 0..self.block_count() {
            out.columns_mut(j * self.inner_len, self.inner_len).copy_from(&self.block(j));
        }
        out
    }
}

/// Macro-block index and intra-block sparse solution.
#[derive(Debug, Clone)]
pub struct HbompSolution {
    pub block: usize,
    pub block_scores: Vec<f64>,
    pub solution: SparseSolution,
}

/// Scores every block by its largest normalised correlation with `y`, then
/// runs OMP inside the best `candidates` blocks. The kept block is the first
/// (in score order) that reaches the residual target, uses the fewest atoms
/// and leaves the smallest residual, compared in that order. Coefficients
/// refer to the unnormalised block columns.
pub fn hbomp(y: &CVec, dict: &HbompDictionary, stop: StopRule, candidates: usize) -> Result<HbompSolution> {
    dim_check(y.len() == dict.rows(), || format!("stacked measurement length {} differs from {}", y.len(), dict.rows()))?;
    if candidates == 0 {
        return Err(Error::Config("at least one macro-block candidate is required".into()));
    }
    if norm_sqr(y) == 0.0 {
        return Err(Error::Degenerate("stacked measurement is zero".into()));
    }
    let ym = CMat::from_column_slice(y.len(), 1, y.as_slice());
    let mut scores = Vec::with_capacity(dict.block_count());
    for j in 0..dict.block_count() {
        let (psi, _) = column_normalize(&dict.block(j))?;
        scores.push(gemm(Op::H, &psi, Op::N, &ym).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::Degenerate("every block is uncorrelated with the measurement".into()));
    }
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let y_norm = norm_sqr(y).sqrt();
    let missed = |sol: &SparseSolution| match stop {
        StopRule::Residual { threshold, .. } => sol.residual_norm > threshold.max(1e-13 * y_norm),
        StopRule::Sparsity(_) => false,
    };
    let rank = |sol: &SparseSolution| (missed(sol), sol.support.len());
    let mut best: Option<(usize, SparseSolution)> = None;
    for &j in order.iter().take(candidates) {
        let sol = omp(&dict.block(j), y, stop)?;
        let better = best.as_ref().is_none_or(|(_, b)| {
            let (rs, rb) = (rank(&sol), rank(b));
            rs < rb || (rs == rb && sol.residual_norm < b.residual_norm)
        });
        if better {
            best = Some((j, sol));
        }
    }
    let (block, solution) = best.expect("at least one candidate");
    Ok(HbompSolution { block, block_scores: scores, solution })
}

/// Index `i·inner + j` of a Kronecker product `x ⊗ y` moved to `j·outer + i`,
/// i.e. the entries of `y ⊗ x`.
pub fn kron_swap(v: &CVec, outer: usize, inner: usize) -> CVec {
    let mut out = CVec::zeros(v.len());
    for i in 0..outer {
        for j in 0..inner {
            out[j * outer + i] = v[i * inner + j];
        }
    }
    out
}

/// Remaining-user output.
#[derive(Debug, Clone)]
pub struct OtherUserEstimate {
    pub block: usize,
    pub solution: SparseSolution,
    /// `M̄²G × L̂`.
    pub columns: CMat,
    pub cascaded: CMat,
}

/// Rebuilds `Ĝ_k` from the selected block and atoms.
pub fn reconstruct_cascaded(sol: &HbompSolution, common: &CommonPart, dicts: &RisDictionaries) -> Result<(CMat, CMat)> {
    let layout = &dicts.layout;
    let n = layout.group_size();
    let a = dicts.ris.atom(sol.block);
    let mut h = CVec::zeros(layout.element_count());
    for (i, &c) in sol.solution.support.iter().enumerate() {
        h += dicts.user.atom(c) * sol.solution.coefficients[i];
    }
    let mut g_bar = CVec::zeros(layout.vec_len());
    for g in 0..layout.group_count() {
        let ag = a.rows(g * n, n).into_owned();
        let hg = h.rows(g * n, n).into_owned();
        let target = crate::linalg::kron_vec(&ag, &hg);
        let swapped = kron_swap(&target, n, n).map(|z| z.conj());
        g_bar.rows_mut(g * n * n, n * n).copy_from(&swapped);
    }
    let l_hat = common.lambda_s.len();
    let mut columns = CMat::zeros(layout.vec_len(), l_hat);
    for l in 0..l_hat {
        let col = delta_compensation(layout, common.deltas[l]).component_mul(&g_bar) * common.lambda_s[l].conj();
        columns.set_column(l, &col);
    }
    let cascaded = gemm(Op::N, &common.bs_steering, Op::H, &columns);
    Ok((columns, cascaded))
}

/// Stage III for one user.
pub fn estimate_other_user(
    yk: &CMat,
    schedule: &TrainingSchedule,
    common: &CommonPart,
    dicts: &RisDictionaries,
    stop: StopRule,
    candidates: usize,
    transmit_power: f64,
) -> Result<OtherUserEstimate> {
    let y = stack_measurement(yk, &common.bs_steering, transmit_power)?;
    let dict = HbompDictionary::new(common, schedule, dicts)?;
    let sol = hbomp(&y, &dict, stop, candidates)?;
    let (columns, cascaded) = reconstruct_cascaded(&sol, common, dicts)?;
    Ok(OtherUserEstimate { block: sol.block, solution: sol.solution, columns, cascaded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdris::{bernoulli_training_schedule, random_unitary_block_matrix, row_selection_blocks};
    use crate::channel::{cascaded_direct, cascaded_matrix, sample_realization, synthesize_measurements, ChannelRealization};
    use crate::config::SystemConfig;
    use crate::linalg::{kron_vec, rel_error, rel_error_vec};
    use crate::stage2::{estimate_typical_user, DeltaGrid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn on_grid_desk() -> SystemConfig {
        let mut c = SystemConfig::desk();
        c.channel.on_grid = true;
        c.channel.snr_db = None;
        c
    }

    fn dicts(c: &SystemConfig) -> RisDictionaries {
        let (dv, dh) = c.ris_grid();
        RisDictionaries::new(&c.ris_layout().unwrap(), dv, dh).unwrap()
    }

    /// Common part from ground truth with reference path `r` and `β̄`.
    fn true_common(real: &ChannelRealization, r: usize, beta_bar: C64) -> CommonPart {
        let deltas = real.ris_aod.iter().map(|&p| p - real.ris_aod[r]).collect();
        let lambda = real.bs_ris_gains.iter().map(|a| beta_bar * a).collect();
        CommonPart::from_parts(real.bs_steering.clone(), lambda, deltas, real.ris_aod[r], &real.layout).unwrap()
    }

    #[test]
    fn common_part_recovers_bs_ris_channel() {
        for (seed, groups) in [(1u64, 4usize), (2, 1), (3, 16)] {
            let mut c = SystemConfig::desk();
            c.ris.groups = groups;
            let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let beta = r.users[0].gains[0];
            let cp = true_common(&r, 0, beta);
            let a_neg = rearranged_upa_response(&r.layout, -r.ris_aod[0]);
            let h = CMat::from_fn(cp.h_s.nrows(), cp.h_s.ncols(), |i, m| cp.h_s[(i, m)] * a_neg[m]) / beta;
            assert!(rel_error(&h, &r.ris_channel()) < 1e-10);
        }
    }

    #[test]
    fn factorisation_through_row_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for groups in [1usize, 4, 16] {
            let mut c = SystemConfig::desk();
            c.ris.groups = groups;
            let r = sample_realization(&c, &mut rng).unwrap();
            let beta = r.users[1].gains[1];
            let cp = true_common(&r, 1, beta);
            let phi = random_unitary_block_matrix(&r.layout, &mut rng);
            let p = row_selection_blocks(&phi);
            let a = rearranged_upa_response(&r.layout, -r.ris_aod[1]);
            let h = r.user_channel(2);
            let n = r.layout.group_size();
            let mut inner = CVec::zeros(r.layout.element_count());
            for (g, block) in p.iter().enumerate().take(groups) {
                let v = block * kron_vec(&a.rows(g * n, n).into_owned(), &h.rows(g * n, n).into_owned());
                inner.rows_mut(g * n, n).copy_from(&v);
            }
            let lhs = cascaded_direct(&r, &phi, 2).unwrap();
            let rhs = &cp.h_s * inner / beta;
            assert!(rel_error_vec(&rhs, &lhs) < 1e-9);
        }
    }

    #[test]
    fn rank_one_common_part_for_single_path() {
        let mut c = SystemConfig::desk();
        c.channel.bs_ris_paths = 1;
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let cp = true_common(&r, 0, r.users[0].gains[0]);
        let sv = cp.h_s.singular_values();
        assert!(sv.iter().skip(1).all(|&s| s < 1e-12 * sv[0]));
    }

    #[test]
    fn kron_swap_is_an_involution_and_swaps_factors() {
        let x = CVec::from_fn(3, |i, _| C64::new(i as f64 + 1.0, 0.5));
        let y = CVec::from_fn(4, |i, _| C64::new(0.0, i as f64 - 1.0));
        let s = kron_swap(&kron_vec(&x, &y), 3, 4);
        assert_eq!(s, kron_vec(&y, &x));
        assert_eq!(kron_swap(&s, 4, 3), kron_vec(&x, &y));
    }

    fn other_user_setup(seed: u64) -> (SystemConfig, ChannelRealization, RisDictionaries) {
        let c = on_grid_desk();
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let d = dicts(&c);
        (c, r, d)
    }

    /// With a short candidate re-check the macro-block index is exact on
    /// every seed. Greedy intra-block
    /// selection can trade a path for a coherent neighbouring atom, so exact
    /// reconstruction is required only when the residual vanishes, and that
    /// must happen on most seeds.
    #[test]
    fn hbomp_forward_model_and_exact_recovery() {
        let mut exact = 0;
        for seed in 0..10 {
            let (_, r, d) = other_user_setup(10 + seed);
            let beta = r.users[0].gains[0];
            let cp = true_common(&r, 0, beta);
            let s = bernoulli_training_schedule(&d.layout, 24, &mut ChaCha8Rng::seed_from_u64(20 + seed)).unwrap();
            let k = 1;
            let g = cascaded_matrix(&r, k);
            let y = synthesize_measurements(&g, &s, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let ys = stack_measurement(&y, &r.bs_steering, 1.0).unwrap();
            let dict = HbompDictionary::new(&cp, &s, &d).unwrap();
            let j_true = d.ris.nearest_index(-r.ris_aod[0]);
            let mut lam = CVec::zeros(d.user.len());
            for (jj, p) in r.users[k].aoa.iter().enumerate() {
                lam[d.user.nearest_index(*p)] += r.users[k].gains[jj] / beta;
            }
            assert!(rel_error_vec(&(dict.block(j_true) * &lam), &ys) < 1e-10);
            let sol = hbomp(&ys, &dict, StopRule::Sparsity(2), 4).unwrap();
            assert_eq!(sol.block, j_true, "seed {seed}");
            if sol.solution.residual_norm > 1e-9 * ys.norm() {
                continue;
            }
            exact += 1;
            let mut got = sol.solution.support.clone();
            got.sort_unstable();
            let mut want: Vec<usize> = r.users[k].aoa.iter().map(|p| d.user.nearest_index(*p)).collect();
            want.sort_unstable();
            assert_eq!(got, want, "seed {seed}");
            let (_, est) = reconstruct_cascaded(&sol, &cp, &d).unwrap();
            assert!(rel_error(&est, &g.matrix).powi(2) < 1e-10);
        }
        assert!(exact >= 8, "only {exact} of 10 exact");
    }

    #[test]
    fn single_candidate_keeps_top_score() {
        for seed in 0..10 {
            let (_, r, d) = other_user_setup(70 + seed);
            let cp = true_common(&r, 0, r.users[0].gains[0]);
            let s = bernoulli_training_schedule(&d.layout, 24, &mut ChaCha8Rng::seed_from_u64(80 + seed)).unwrap();
            let y = synthesize_measurements(&cascaded_matrix(&r, 2), &s, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let ys = stack_measurement(&y, &r.bs_steering, 1.0).unwrap();
            let dict = HbompDictionary::new(&cp, &s, &d).unwrap();
            let one = hbomp(&ys, &dict, StopRule::Sparsity(2), 1).unwrap();
            let top = (0..one.block_scores.len()).fold(0, |b, j| if one.block_scores[j] > one.block_scores[b] { j } else { b });
            assert_eq!(one.block, top);
            let many = hbomp(&ys, &dict, StopRule::Sparsity(2), 8).unwrap();
            assert!(many.solution.residual_norm <= one.solution.residual_norm);
        }
    }

    #[test]
    fn hbomp_single_path_coefficient() {
        let mut c = on_grid_desk();
        c.users.paths = vec![1];
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(30)).unwrap();
        let d = dicts(&c);
        let beta = r.users[0].gains[0];
        let cp = true_common(&r, 0, beta);
        let s = bernoulli_training_schedule(&d.layout, 12, &mut ChaCha8Rng::seed_from_u64(31)).unwrap();
        let y = synthesize_measurements(&cascaded_matrix(&r, 2), &s, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ys = stack_measurement(&y, &r.bs_steering, 1.0).unwrap();
        let sol = hbomp(&ys, &HbompDictionary::new(&cp, &s, &d).unwrap(), StopRule::Sparsity(1), 1).unwrap();
        assert_eq!(sol.solution.support.len(), 1);
        let want = r.users[2].gains[0] / beta;
        assert!((sol.solution.coefficients[0] - want).norm() < 1e-9 * want.norm());
    }

    #[test]
    fn hbomp_rejects_zero_measurement() {
        let (_, r, d) = other_user_setup(40);
        let cp = true_common(&r, 0, r.users[0].gains[0]);
        let s = bernoulli_training_schedule(&d.layout, 4, &mut ChaCha8Rng::seed_from_u64(41)).unwrap();
        let dict = HbompDictionary::new(&cp, &s, &d).unwrap();
        assert!(hbomp(&CVec::zeros(dict.rows()), &dict, StopRule::Sparsity(1), 1).is_err());
    }

    #[test]
    fn single_group_blocks_match_ungrouped_construction() {
        let mut c = on_grid_desk();
        c.ris.groups = 1;
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(50)).unwrap();
        let d = dicts(&c);
        let cp = true_common(&r, 0, r.users[0].gains[0]);
        let s = bernoulli_training_schedule(&d.layout, 3, &mut ChaCha8Rng::seed_from_u64(51)).unwrap();
        let dict = HbompDictionary::new(&cp, &s, &d).unwrap();
        let j = 7;
        let blk = dict.block(j);
        let a = d.ris.atom(j);
        for t in 0..3 {
            let phi = s.slot(t).to_dense();
            let direct = &cp.h_c * CMat::from_diagonal(&a) * &phi * &d.user.atoms;
            let l = cp.h_c.nrows();
            assert!(rel_error(&blk.rows(t * l, l).into_owned(), &direct) < 1e-12);
        }
        assert_eq!(dict.materialize().ncols(), d.ris.len() * d.user.len());
        assert_eq!(d.ris.len(), 4 * 16);
    }

    #[test]
    fn typical_user_through_stage_three_agrees_with_stage_two() {
        let (c, r, d) = other_user_setup(60);
        let k = r.typical_user;
        let s1 = bernoulli_training_schedule(&d.layout, 48, &mut ChaCha8Rng::seed_from_u64(61)).unwrap();
        let g = cascaded_matrix(&r, k);
        let y = synthesize_measurements(&g, &s1, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let aoa = AoaEstimate::from_pairs(&r.bs_shape, r.bs_aoa.clone());
        let grid = DeltaGrid::from_config(&c);
        let typ = estimate_typical_user(&y, &aoa, &s1, &d, grid, StopRule::Sparsity(2), 1.0).unwrap();
        let cp = build_common_part(&typ, &aoa, &d).unwrap();
        let s3 = bernoulli_training_schedule(&d.layout, 24, &mut ChaCha8Rng::seed_from_u64(62)).unwrap();
        let y3 = synthesize_measurements(&g, &s3, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let est = estimate_other_user(&y3, &s3, &cp, &d, StopRule::Sparsity(2), 1, 1.0).unwrap();
        assert!(rel_error(&est.cascaded, &typ.cascaded) < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn reconstruction_is_invariant_to_beta_bar(seed in 0u64..1000, re in 0.1f64..5.0, im in -5.0f64..5.0) {
            let (_, r, d) = other_user_setup(seed);
            let beta = r.users[0].gains[0];
            let scale = C64::new(re, im);
            let s = bernoulli_training_schedule(&d.layout, 24, &mut ChaCha8Rng::seed_from_u64(seed + 1)).unwrap();
            let y = synthesize_measurements(&cascaded_matrix(&r, 1), &s, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let ys = stack_measurement(&y, &r.bs_steering, 1.0).unwrap();
            let cp = true_common(&r, 0, beta);
            let sol = hbomp(&ys, &HbompDictionary::new(&cp, &s, &d).unwrap(), StopRule::Sparsity(2), 1).unwrap();
            let (_, base) = reconstruct_cascaded(&sol, &cp, &d).unwrap();
            let cp2 = true_common(&r, 0, beta * scale);
            let mut sol2 = sol.clone();
            sol2.solution.coefficients /= scale;
            let (_, scaled) = reconstruct_cascaded(&sol2, &cp2, &d).unwrap();
            prop_assert!(rel_error(&scaled, &base) < 1e-10);
        }
    }
}
