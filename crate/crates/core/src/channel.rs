//! Ground-truth channel synthesis, the equivalent cascaded-channel forms and
//! pilot measurements.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bdris::{ScatteringMatrix, TrainingSchedule};
use crate::config::SystemConfig;
use crate::error::{dim_check, Error, Result};
use crate::geometry::{
    grid_frequency, rearranged_upa_response, upa_response, wrap_frequency, GroupLayout, SpatialFrequencyPair, UpaShape,
};
use crate::linalg::{complex_normal, matmul, CMat, CVec, C64, ZERO};

/// One user's RIS-side multipath.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub aoa: Vec<SpatialFrequencyPair>,
    pub gains: Vec<C64>,
    /// RIS-user distance, metres.
    pub distance: f64,
    /// Rearranged RIS responses at `aoa`, `M × J`.
    pub steering: CMat,
}

/// Every ground-truth quantity of one channel draw.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub bs_shape: UpaShape,
    pub layout: GroupLayout,
    pub bs_aoa: Vec<SpatialFrequencyPair>,
    pub ris_aod: Vec<SpatialFrequencyPair>,
    pub bs_ris_gains: Vec<C64>,
    /// BS responses, `N × L`.
    pub bs_steering: CMat,
    /// Rearranged RIS responses at the departure angles, `M × L`.
    pub ris_steering: CMat,
    pub users: Vec<UserChannel>,
    /// User nearest the RIS.
    pub typical_user: usize,
}

/// Ground-truth cascaded channel `G_k` (`N × M̄²G`).
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    pub matrix: CMat,
}

fn uniform_pair<R: Rng + ?Sized>(rng: &mut R, spacing: f64) -> SpatialFrequencyPair {
    let v = rng.random_range(-spacing..spacing);
    let h = rng.random_range(-spacing..spacing);
    SpatialFrequencyPair::new(v, h)
}

/// Cyclic distance between two indices on a ring of `n`.
fn ring_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// `count` points of a `gv × gh` grid, each pair at least `min_v` apart
/// vertically or `min_h` apart horizontally (cyclically). Returns flat
/// indices `iv·gh + ih`.
fn separated_grid_points<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    (gv, gh): (usize, usize),
    (min_v, min_h): (usize, usize),
) -> Result<Vec<usize>> {
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while picked.len() < count {
        attempts += 1;
        if attempts > 1000 * (count + 1) {
            return Err(Error::Config(format!("cannot place {count} separated on-grid paths on a {gv}x{gh} grid")));
        }
        let c = rng.random_range(0..gv * gh);
        let ok = picked
            .iter()
            .all(|&p| ring_distance(p / gh, c / gh, gv) >= min_v || ring_distance(p % gh, c % gh, gh) >= min_h);
        if ok {
            picked.push(c);
        }
    }
    Ok(picked)
}

/// Dictionary-grid pairs at least one array resolution cell apart.
fn separated_grid_pairs<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    (gv, gh): (usize, usize),
    shape: &UpaShape,
) -> Result<Vec<SpatialFrequencyPair>> {
    let min = (gv.div_ceil(shape.vertical), gh.div_ceil(shape.horizontal));
    Ok(separated_grid_points(rng, count, (gv, gh), min)?
        .into_iter()
        .map(|c| SpatialFrequencyPair::new(grid_frequency(c / gh, gv, shape.spacing), grid_frequency(c % gh, gh, shape.spacing)))
        .collect())
}

/// Distinct points of the DFT grid `(kv/Nv, kh/Nh)`, wrapped into `[-0.5, 0.5)`.
fn distinct_dft_pairs<R: Rng + ?Sized>(rng: &mut R, count: usize, shape: &UpaShape) -> Result<Vec<SpatialFrequencyPair>> {
    Ok(separated_grid_points(rng, count, (shape.vertical, shape.horizontal), (1, 1))?
        .into_iter()
        .map(|c| {
            SpatialFrequencyPair::new(
                wrap_frequency((c / shape.horizontal) as f64 / shape.vertical as f64),
                wrap_frequency((c % shape.horizontal) as f64 / shape.horizontal as f64),
            )
        })
        .collect())
}

fn steering_matrix(pairs: &[SpatialFrequencyPair], f: impl Fn(SpatialFrequencyPair) -> CVec, rows: usize) -> CMat {
    let mut m = CMat::zeros(rows, pairs.len());
    for (c, &p) in pairs.iter().enumerate() {
        m.set_column(c, &f(p));
    }
    m
}

/// Uniform point in a ball; returns its distance from the origin when the
/// ball is centred at `(centre, 0, 0)`.
fn cluster_distance<R: Rng + ?Sized>(rng: &mut R, centre: f64, radius: f64) -> f64 {
    let dir: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().cbrt();
    let p = [centre + r * dir[0] / norm, r * dir[1] / norm, r * dir[2] / norm];
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Draws a channel. Angles are uniform in spatial frequency, or grid points
/// when `config.channel.on_grid` is set: distinct DFT points for the BS, and
/// RIS dictionary points at least one resolution cell apart within each
/// path set.
pub fn sample_realization<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    config.validate()?;
    let bs_shape = config.bs_shape()?;
    let layout = config.ris_layout()?;
    let ris_shape = layout.shape();
    let l = config.channel.bs_ris_paths;
    let on_grid = config.channel.on_grid;
    let (dv, dh) = config.ris_grid();

    let bs_aoa = if on_grid {
        distinct_dft_pairs(rng, l, &bs_shape)?
    } else {
        (0..l).map(|_| uniform_pair(rng, bs_shape.spacing)).collect()
    };
    let ris_aod = if on_grid {
        separated_grid_pairs(rng, l, (dv, dh), &ris_shape)?
    } else {
        (0..l).map(|_| uniform_pair(rng, ris_shape.spacing)).collect()
    };
    let var_br = config.bs_ris_gain_variance();
    let bs_ris_gains: Vec<C64> = (0..l).map(|_| complex_normal(rng, var_br)).collect();

    let mut users = Vec::with_capacity(config.users.count);
    for k in 0..config.users.count {
        let j = config.user_paths(k);
        let distance = cluster_distance(rng, config.users.cluster_distance, config.users.cluster_radius);
        let aoa = if on_grid {
            separated_grid_pairs(rng, j, (dv, dh), &ris_shape)?
        } else {
            (0..j).map(|_| uniform_pair(rng, ris_shape.spacing)).collect()
        };
        let var = config.ris_user_gain_variance(distance);
        let gains = (0..j).map(|_| complex_normal(rng, var)).collect();
        let steering = steering_matrix(&aoa, |p| rearranged_upa_response(&layout, p), ris_shape.len());
        users.push(UserChannel { aoa, gains, distance, steering });
    }
    let typical_user = users
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, u)| if u.distance < best.1 { (k, u.distance) } else { best })
        .0;

    let bs_steering = steering_matrix(&bs_aoa, |p| upa_response(&bs_shape, p), bs_shape.len());
    let ris_steering = steering_matrix(&ris_aod, |p| rearranged_upa_response(&layout, p), ris_shape.len());
    Ok(ChannelRealization { bs_shape, layout, bs_aoa, ris_aod, bs_ris_gains, bs_steering, ris_steering, users, typical_user })
}

impl ChannelRealization {
    /// Rebuilds the derived steering matrices after angles were edited.
    pub fn refresh(&mut self) {
        let bs = self.bs_shape;
        let layout = self.layout.clone();
        self.bs_steering = steering_matrix(&self.bs_aoa, |p| upa_response(&bs, p), bs.len());
        self.ris_steering = steering_matrix(&self.ris_aod, |p| rearranged_upa_response(&layout, p), layout.element_count());
        for u in &mut self.users {
            u.steering = steering_matrix(&u.aoa, |p| rearranged_upa_response(&layout, p), layout.element_count());
        }
    }

    pub fn path_count(&self) -> usize {
        self.bs_aoa.len()
    }

    pub fn gain_matrix(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_vec(self.bs_ris_gains.clone()))
    }

    /// BS-RIS channel `A_N Λ A_M^H` (`N × M`, RIS columns rearranged).
    pub fn ris_channel(&self) -> CMat {
        let left = &self.bs_steering * self.gain_matrix();
        &left * self.ris_steering.adjoint()
    }

    /// RIS-user channel `A_{M,k} β_k`.
    pub fn user_channel(&self, user: usize) -> CVec {
        let u = &self.users[user];
        &u.steering * CVec::from_vec(u.gains.clone())
    }
}

/// `Σ_g H_g Φ̄_g h_{k,g}` by explicit block products.
pub fn cascaded_direct(real: &ChannelRealization, scattering: &ScatteringMatrix, user: usize) -> Result<CVec> {
    dim_check(scattering.matches(&real.layout), || "scattering matrix does not match the RIS grouping".into())?;
    let h = real.ris_channel();
    let hk = real.user_channel(user);
    let n = real.layout.group_size();
    let mut out = CVec::zeros(h.nrows());
    for (g, block) in scattering.blocks.iter().enumerate() {
        let inner = block * hk.rows(g * n, n);
        out += h.columns(g * n, n) * inner;
    }
    Ok(out)
}

/// `[h_{k,1}^T ⊗ H_1, …, h_{k,G}^T ⊗ H_G]`, so that the cascaded response to
/// a stacked scattering vector is this matrix times the vector.
pub fn vectorized_form(real: &ChannelRealization, user: usize) -> CMat {
    let h = real.ris_channel();
    let hk = real.user_channel(user);
    let n = real.layout.group_size();
    let g_count = real.layout.group_count();
    let mut out = CMat::zeros(h.nrows(), n * n * g_count);
    for g in 0..g_count {
        let hg = h.columns(g * n, n).into_owned();
        let hkg = hk.rows(g * n, n).transpose();
        out.columns_mut(g * n * n, n * n).copy_from(&hkg.kronecker(&hg));
    }
    out
}

/// Composite block-Kronecker RIS steering matrix
/// `[(A_{M,k})_g^T ⊗ (A_M^H)_g]_g` of size `JL × M̄²G`.
pub fn composite_steering(real: &ChannelRealization, user: usize) -> CMat {
    let n = real.layout.group_size();
    let g_count = real.layout.group_count();
    let ak = &real.users[user].steering;
    let am_h = real.ris_steering.adjoint();
    let rows = ak.ncols() * am_h.nrows();
    let mut out = CMat::zeros(rows, n * n * g_count);
    for g in 0..g_count {
        let akg = ak.rows(g * n, n).transpose();
        let amg = am_h.columns(g * n, n).into_owned();
        out.columns_mut(g * n * n, n * n).copy_from(&akg.kronecker(&amg));
    }
    out
}

/// `G_k = A_N (β_k^T ⊗ Λ) B_k`.
pub fn cascaded_matrix(real: &ChannelRealization, user: usize) -> CascadedChannel {
    let beta_t = CMat::from_row_slice(1, real.users[user].gains.len(), &real.users[user].gains);
    let mix = beta_t.kronecker(&real.gain_matrix());
    let left = matmul(&real.bs_steering, &mix);
    CascadedChannel { matrix: matmul(&left, &composite_steering(real, user)) }
}

/// Per-path factor `Q` with `G_k = A_N Q^H`; column `l` is the stacked
/// block vectorisation of `α_l^* a_M(ω_l) h_k^H` per group.
pub fn cascaded_columns(real: &ChannelRealization, user: usize) -> CMat {
    let n = real.layout.group_size();
    let g_count = real.layout.group_count();
    let hk = real.user_channel(user);
    let mut q = CMat::zeros(n * n * g_count, real.path_count());
    for l in 0..real.path_count() {
        let a = real.ris_steering.column(l);
        let alpha_c = real.bs_ris_gains[l].conj();
        for g in 0..g_count {
            for c in 0..n {
                for r in 0..n {
                    q[(g * n * n + c * n + r, l)] = alpha_c * a[g * n + r] * hk[g * n + c].conj();
                }
            }
        }
    }
    q
}

/// `Y = √p·G·Θ + N` with unit pilots; noise entries are standard complex
/// normals scaled by `√δ²`, drawn column by column.
pub fn synthesize_measurements<R: Rng + ?Sized>(
    cascaded: &CascadedChannel,
    schedule: &TrainingSchedule,
    transmit_power: f64,
    noise_variance: f64,
    rng: &mut R,
) -> Result<CMat> {
    dim_check(cascaded.matrix.ncols() == schedule.matrix.nrows(), || {
        format!(
            "cascaded channel has {} columns but the schedule has {} rows",
            cascaded.matrix.ncols(),
            schedule.matrix.nrows()
        )
    })?;
    let mut y = matmul(&cascaded.matrix, &schedule.matrix) * C64::new(transmit_power.sqrt(), 0.0);
    let sigma = noise_variance.sqrt();
    for c in 0..y.ncols() {
        for r in 0..y.nrows() {
            let z = complex_normal(rng, 1.0);
            if sigma > 0.0 {
                y[(r, c)] += z * sigma;
            }
        }
    }
    Ok(y)
}

/// Zero matrix of cascaded-channel shape, used when an estimator fails.
pub fn zero_cascaded(real: &ChannelRealization) -> CMat {
    CMat::from_element(real.bs_shape.len(), real.layout.vec_len(), ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdris::{bernoulli_training_schedule, random_unitary_block_matrix};
    use crate::linalg::{rel_error, rel_error_vec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_real(seed: u64) -> ChannelRealization {
        sample_realization(&SystemConfig::desk(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn identity_scattering_gives_plain_product() {
        let r = desk_real(1);
        let direct = cascaded_direct(&r, &ScatteringMatrix::identity(&r.layout), 0).unwrap();
        let plain = r.ris_channel() * r.user_channel(0);
        assert!(rel_error_vec(&direct, &plain) < 1e-13);
    }

    #[test]
    fn single_connected_reduces_to_diagonal_model() {
        let mut c = SystemConfig::desk();
        c.ris.groups = 16;
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let e = CVec::from_iterator(16, (0..16).map(|i| C64::from_polar(1.0, 0.3 * i as f64)));
        let direct = cascaded_direct(&r, &ScatteringMatrix::diagonal(&e), 1).unwrap();
        let conventional = r.ris_channel() * CMat::from_diagonal(&e) * r.user_channel(1);
        assert!(rel_error_vec(&direct, &conventional) < 1e-13);
    }

    #[test]
    fn three_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..20 {
            let r = desk_real(seed);
            for k in 0..r.users.len() {
                let phi = random_unitary_block_matrix(&r.layout, &mut rng);
                let p = phi.vec_stack();
                let direct = cascaded_direct(&r, &phi, k).unwrap();
                let vecform = vectorized_form(&r, k) * &p;
                let factored = cascaded_matrix(&r, k).matrix * &p;
                assert!(rel_error_vec(&vecform, &direct) < 1e-10);
                assert!(rel_error_vec(&factored, &direct) < 1e-10);
                let q = cascaded_columns(&r, k);
                assert!(rel_error(&(&r.bs_steering * q.adjoint()), &cascaded_matrix(&r, k).matrix) < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_cascades() {
        let mut c = SystemConfig::desk();
        c.ris.groups = 1;
        c.channel.bs_ris_paths = 1;
        c.users.paths = vec![1];
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let g = cascaded_matrix(&r, 0).matrix;
        let sv = g.singular_values();
        assert!(sv.iter().skip(1).all(|&s| s < 1e-12 * sv[0]));
        let mut z = r.clone();
        z.users[0].gains = vec![ZERO];
        assert!(cascaded_matrix(&z, 0).matrix.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn on_grid_paths_are_resolution_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let pts = separated_grid_points(&mut rng, 4, (8, 8), (2, 2)).unwrap();
            for (i, &a) in pts.iter().enumerate() {
                for &b in &pts[i + 1..] {
                    assert!(ring_distance(a / 8, b / 8, 8) >= 2 || ring_distance(a % 8, b % 8, 8) >= 2);
                }
            }
        }
        assert_eq!(ring_distance(0, 7, 8), 1);
        assert!(separated_grid_points(&mut rng, 5, (2, 2), (2, 2)).is_err());
        let all = separated_grid_points(&mut rng, 16, (4, 4), (1, 1)).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_deterministic_and_on_grid_when_asked() {
        let a = desk_real(9);
        let b = desk_real(9);
        assert_eq!(a.bs_ris_gains, b.bs_ris_gains);
        assert_eq!(a.users[2].aoa, b.users[2].aoa);
        let mut c = SystemConfig::desk();
        c.channel.on_grid = true;
        let r = sample_realization(&c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (dv, dh) = c.ris_grid();
        let on = |f: f64, d: usize| ((f + 0.5) * d as f64 - ((f + 0.5) * d as f64).round()).abs() < 1e-12;
        for p in r.ris_aod.iter().chain(r.users.iter().flat_map(|u| u.aoa.iter())) {
            assert!(on(p.vertical, dv) && on(p.horizontal, dh));
        }
        for p in &r.bs_aoa {
            assert!(on(p.vertical, 4) && on(p.horizontal, 4));
        }
        let min_d = r.users.iter().map(|u| u.distance).fold(f64::INFINITY, f64::min);
        assert_eq!(r.users[r.typical_user].distance, min_d);
    }

    #[test]
    fn gain_variance_matches_model() {
        let c = SystemConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let var = c.bs_ris_gain_variance();
        let n = 100_000;
        let emp: f64 = (0..n).map(|_| complex_normal(&mut rng, var).norm_sqr()).sum::<f64>() / n as f64;
        assert!((emp / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn measurements_noise_and_noiseless() {
        let r = desk_real(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = bernoulli_training_schedule(&r.layout, 10, &mut rng).unwrap();
        let g = cascaded_matrix(&r, 0);
        let y = synthesize_measurements(&g, &s, 2.0, 0.0, &mut rng).unwrap();
        assert!(rel_error(&y, &(&g.matrix * &s.matrix * C64::new(2f64.sqrt(), 0.0))) < 1e-15);
        let zero = CascadedChannel { matrix: CMat::zeros(16, 64) };
        let big = bernoulli_training_schedule(&r.layout, 700, &mut rng).unwrap();
        let noise = synthesize_measurements(&zero, &big, 1.0, 0.3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(noise.len() >= 10_000);
        let emp = noise.iter().map(|z| z.norm_sqr()).sum::<f64>() / noise.len() as f64;
        assert!((emp / 0.3 - 1.0).abs() < 0.05);
        let again = synthesize_measurements(&zero, &big, 1.0, 0.3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(noise, again);
        let short = bernoulli_training_schedule(&r.layout, 3, &mut rng).unwrap();
        let bad = CascadedChannel { matrix: CMat::zeros(16, 10) };
        assert!(synthesize_measurements(&bad, &short, 1.0, 0.0, &mut rng).is_err());
    }
}
