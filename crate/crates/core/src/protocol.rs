//! The three-stage estimator and the baseline pipelines run on a common set
//! of per-user measurements.

use crate::baselines::{direct_bs_dictionary, direct_omp, sbl_cascaded, SblOptions};
use crate::bdris::TrainingSchedule;
use crate::config::{Stopping, SystemConfig};
use crate::error::{dim_check, Result};
use crate::geometry::UpaShape;
use crate::linalg::CMat;
use crate::sparse::StopRule;
use crate::stage1::{estimate_common_aoa, AoaEstimate, Stage1Options};
use crate::stage2::{estimate_typical_user, DeltaGrid, RisDictionaries, TypicalUserEstimate};
use crate::stage3::{build_common_part, estimate_other_user, CommonPart, OtherUserEstimate};

/// Pilot observations of every user.
#[derive(Debug, Clone)]
pub struct Observations {
    /// `N × τ_k` per user.
    pub measurements: Vec<CMat>,
    pub schedules: Vec<TrainingSchedule>,
    pub typical_user: usize,
    /// Noise variance per receive antenna; used by residual stopping.
    pub noise_variance: f64,
}

impl Observations {
    pub fn validate(&self, bs: &UpaShape) -> Result<()> {
        dim_check(self.measurements.len() == self.schedules.len() && !self.measurements.is_empty(), || {
            "one schedule per user measurement is required".into()
        })?;
        dim_check(self.typical_user < self.measurements.len(), || "typical user index out of range".into())?;
        for (k, (y, s)) in self.measurements.iter().zip(&self.schedules).enumerate() {
            dim_check(y.nrows() == bs.len() && y.ncols() == s.slots(), || {
                format!("user {k}: measurement is {}x{}, expected {}x{}", y.nrows(), y.ncols(), bs.len(), s.slots())
            })?;
        }
        Ok(())
    }
}

/// Stopping rule for `rows` stacked entries of per-entry noise variance
/// `entry_variance`, or `sparsity` atoms.
pub fn stop_rule(stopping: Stopping, sparsity: usize, rows: usize, entry_variance: f64) -> StopRule {
    match stopping {
        Stopping::KnownSparsity => StopRule::Sparsity(sparsity),
        Stopping::NoiseResidual => StopRule::Residual { threshold: (rows as f64 * entry_variance).sqrt(), max_atoms: rows },
    }
}

/// Everything the three-stage estimator produces.
#[derive(Debug, Clone)]
pub struct EstimateBundle {
    pub aoa: AoaEstimate,
    pub typical: TypicalUserEstimate,
    pub common: CommonPart,
    /// `(user, estimate)` for every non-typical user.
    pub others: Vec<(usize, OtherUserEstimate)>,
    /// `Ĝ_k` for every user, in user order.
    pub cascaded: Vec<CMat>,
}

fn dictionaries(config: &SystemConfig) -> Result<RisDictionaries> {
    let (dv, dh) = config.ris_grid();
    RisDictionaries::new(&config.ris_layout()?, dv, dh)
}

/// BS arrival angles from the typical user's pilots.
pub fn run_stage_one(config: &SystemConfig, obs: &Observations) -> Result<AoaEstimate> {
    let bs = config.bs_shape()?;
    obs.validate(&bs)?;
    estimate_common_aoa(&obs.measurements[obs.typical_user], &bs, &Stage1Options::from_config(config))
}

/// Runs all three stages.
pub fn run_protocol(config: &SystemConfig, obs: &Observations) -> Result<EstimateBundle> {
    let aoa = run_stage_one(config, obs)?;
    let dicts = dictionaries(config)?;
    let n = config.bs_shape()?.len() as f64;
    let p = config.channel.transmit_power;
    let stopping = config.estimation.stopping;
    let entry_var = obs.noise_variance / (n * p);
    let k1 = obs.typical_user;
    let grid = DeltaGrid::from_config(config);
    let stop1 = stop_rule(stopping, config.user_paths(k1), obs.schedules[k1].slots(), entry_var);
    let typical = estimate_typical_user(&obs.measurements[k1], &aoa, &obs.schedules[k1], &dicts, grid, stop1, p)?;
    let common = build_common_part(&typical, &aoa, &dicts)?;
    let mut cascaded = vec![CMat::zeros(0, 0); obs.measurements.len()];
    cascaded[k1] = typical.cascaded.clone();
    let mut others = Vec::new();
    for k in (0..obs.measurements.len()).filter(|&k| k != k1) {
        let rows = aoa.path_count() * obs.schedules[k].slots();
        let stop = stop_rule(stopping, config.user_paths(k), rows, entry_var);
        let est = estimate_other_user(
            &obs.measurements[k],
            &obs.schedules[k],
            &common,
            &dicts,
            stop,
            config.estimation.macro_block_candidates,
            p,
        )?;
        cascaded[k] = est.cascaded.clone();
        others.push((k, est));
    }
    Ok(EstimateBundle { aoa, typical, common, others, cascaded })
}

/// Direct OMP on every user's vectorised measurement, sparsity `L²J_k`.
pub fn run_direct_omp(config: &SystemConfig, obs: &Observations) -> Result<Vec<CMat>> {
    let bs_shape = config.bs_shape()?;
    obs.validate(&bs_shape)?;
    let dicts = dictionaries(config)?;
    let bs = direct_bs_dictionary(&bs_shape)?;
    let p = config.channel.transmit_power;
    let l = config.channel.bs_ris_paths;
    let mut out = Vec::with_capacity(obs.measurements.len());
    for (k, (y, s)) in obs.measurements.iter().zip(&obs.schedules).enumerate() {
        let stop = stop_rule(config.estimation.stopping, l * l * config.user_paths(k), y.len(), obs.noise_variance / p);
        out.push(direct_omp(y, s, &bs, &dicts, stop, p, config.estimation.direct_omp_budget)?.cascaded);
    }
    Ok(out)
}

/// Stage I arrival angles followed by per-column SBL for every user.
pub fn run_sbl(config: &SystemConfig, obs: &Observations) -> Result<Vec<CMat>> {
    let aoa = run_stage_one(config, obs)?;
    let dicts = dictionaries(config)?;
    let opts = SblOptions { max_iterations: config.estimation.sbl_max_iterations, tolerance: config.estimation.sbl_tolerance };
    obs.measurements
        .iter()
        .zip(&obs.schedules)
        .map(|(y, s)| Ok(sbl_cascaded(y, &aoa, s, &dicts, opts, config.channel.transmit_power)?.cascaded))
        .collect()
}
