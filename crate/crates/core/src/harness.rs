//! Monte Carlo trials, parameter sweeps and CSV export.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::Statistics;

use crate::bdris::{bernoulli_training_schedule, TrainingSchedule};
use crate::channel::{cascaded_matrix, sample_realization, synthesize_measurements, ChannelRealization};
use crate::config::SystemConfig;
use crate::error::{dim_check, Error, Result};
use crate::linalg::{fro_norm_sqr, CMat};
use crate::protocol::{run_direct_omp, run_protocol, run_sbl, Observations};

/// Estimators a campaign can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Proposed,
    DirectOmp,
    Sbl,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Proposed, Estimator::DirectOmp, Estimator::Sbl];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Proposed => "proposed",
            Estimator::DirectOmp => "direct_omp",
            Estimator::Sbl => "sbl",
        }
    }

    pub fn run(self, config: &SystemConfig, obs: &Observations) -> Result<Vec<CMat>> {
        match self {
            Estimator::Proposed => Ok(run_protocol(config, obs)?.cascaded),
            Estimator::DirectOmp => run_direct_omp(config, obs),
            Estimator::Sbl => run_sbl(config, obs),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown estimator '{s}' (expected proposed, direct_omp or sbl)")))
    }
}

/// Comma-separated estimator list.
pub fn parse_estimators(list: &str) -> Result<Vec<Estimator>> {
    let out: Vec<Estimator> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Parse("no estimators given".into()));
    }
    Ok(out)
}

/// `Σ‖Ĝ_k − G_k‖² / Σ‖G_k‖²`.
pub fn nmse(estimates: &[CMat], truths: &[CMat]) -> Result<f64> {
    dim_check(estimates.len() == truths.len(), || format!("{} estimates for {} users", estimates.len(), truths.len()))?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, (e, t)) in estimates.iter().zip(truths).enumerate() {
        dim_check(e.shape() == t.shape(), || format!("user {k}: estimate {:?} vs truth {:?}", e.shape(), t.shape()))?;
        num += fro_norm_sqr(&(e - t));
        den += fro_norm_sqr(t);
    }
    if den == 0.0 {
        return Err(Error::Degenerate("true cascaded channels are all zero".into()));
    }
    Ok(num / den)
}

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub channel: u64,
    pub schedule: u64,
    pub noise: u64,
}

impl TrialSeeds {
    /// Stream `trial` of the master seed. Sweep points share streams so
    /// every point sees the same draws.
    pub fn derive(master: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(trial);
        TrialSeeds { channel: rng.random(), schedule: rng.random(), noise: rng.random() }
    }

    fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(user as u64);
        rng
    }
}

/// A realization plus every user's schedule and measurement.
#[derive(Debug, Clone)]
pub struct SimulatedTrial {
    pub realization: ChannelRealization,
    pub truths: Vec<CMat>,
    pub observations: Observations,
}

/// Draws one trial. Schedules and noise come from per-user streams drawn
/// slot by slot, so a longer schedule extends a shorter one.
pub fn simulate_trial(config: &SystemConfig, seeds: TrialSeeds) -> Result<SimulatedTrial> {
    config.validate()?;
    let realization = sample_realization(config, &mut ChaCha8Rng::seed_from_u64(seeds.channel))?;
    let layout = config.ris_layout()?;
    let noise_variance = config.noise_variance();
    let p = config.channel.transmit_power;
    let mut truths = Vec::with_capacity(config.users.count);
    let mut measurements = Vec::with_capacity(config.users.count);
    let mut schedules: Vec<TrainingSchedule> = Vec::with_capacity(config.users.count);
    for k in 0..config.users.count {
        let tau = config.pilots(k == realization.typical_user);
        let schedule = bernoulli_training_schedule(&layout, tau, &mut TrialSeeds::user_rng(seeds.schedule, k))?;
        let g = cascaded_matrix(&realization, k);
        let y = synthesize_measurements(&g, &schedule, p, noise_variance, &mut TrialSeeds::user_rng(seeds.noise, k))?;
        truths.push(g.matrix);
        measurements.push(y);
        schedules.push(schedule);
    }
    let observations = Observations { measurements, schedules, typical_user: realization.typical_user, noise_variance };
    Ok(SimulatedTrial { realization, truths, observations })
}

/// One estimator's result in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    /// One when the estimator failed.
    pub nmse: f64,
    pub elapsed_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seeds: TrialSeeds,
    pub typical_user: usize,
    pub outcomes: Vec<EstimatorOutcome>,
}

/// Runs every estimator on one simulated trial. Estimator errors are
/// recorded in the outcome; only simulation errors are returned.
pub fn run_trial(config: &SystemConfig, estimators: &[Estimator], seeds: TrialSeeds) -> Result<TrialResult> {
    let trial = simulate_trial(config, seeds)?;
    let outcomes = estimators
        .iter()
        .map(|&estimator| {
            let start = Instant::now();
            let result = estimator.run(config, &trial.observations).and_then(|est| nmse(&est, &trial.truths));
            let elapsed_s = start.elapsed().as_secs_f64();
            match result {
                Ok(v) => EstimatorOutcome { estimator, nmse: v, elapsed_s, error: None },
                Err(e) => EstimatorOutcome { estimator, nmse: 1.0, elapsed_s, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(TrialResult { seeds, typical_user: trial.realization.typical_user, outcomes })
}

/// Swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "param", content = "values")]
pub enum SweepAxis {
    SnrDb(Vec<f64>),
    /// Multiplies both pilot lengths.
    PilotScale(Vec<f64>),
    UserPaths(Vec<usize>),
    BsRisPaths(Vec<usize>),
    /// Side of the square BS array.
    BsSide(Vec<usize>),
    /// Side of the square RIS array.
    RisSide(Vec<usize>),
    Groups(Vec<usize>),
}

impl SweepAxis {
    pub fn param(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb(_) => "snr_db",
            SweepAxis::PilotScale(_) => "pilot_scale",
            SweepAxis::UserPaths(_) => "user_paths",
            SweepAxis::BsRisPaths(_) => "bs_ris_paths",
            SweepAxis::BsSide(_) => "bs_side",
            SweepAxis::RisSide(_) => "ris_side",
            SweepAxis::Groups(_) => "groups",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::SnrDb(v) | SweepAxis::PilotScale(v) => v.len(),
            SweepAxis::UserPaths(v) | SweepAxis::BsRisPaths(v) | SweepAxis::BsSide(v) | SweepAxis::RisSide(v) | SweepAxis::Groups(v) => {
                v.len()
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value `i` as written in the CSV.
    pub fn label(&self, i: usize) -> String {
        match self {
            SweepAxis::SnrDb(v) | SweepAxis::PilotScale(v) => v[i].to_string(),
            SweepAxis::UserPaths(v) | SweepAxis::BsRisPaths(v) | SweepAxis::BsSide(v) | SweepAxis::RisSide(v) | SweepAxis::Groups(v) => {
                v[i].to_string()
            }
        }
    }

    /// Base configuration with value `i` applied.
    pub fn apply(&self, base: &SystemConfig, i: usize) -> Result<SystemConfig> {
        let mut c = base.clone();
        match self {
            SweepAxis::SnrDb(v) => c.channel.snr_db = Some(v[i]),
            SweepAxis::PilotScale(v) => {
                let s = v[i];
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Config(format!("pilot scale {s} must be positive")));
                }
                let scale = |t: usize| ((t as f64 * s).round() as usize).max(1);
                c.users.typical_pilots = scale(base.users.typical_pilots);
                c.users.other_pilots = scale(base.users.other_pilots);
            }
            SweepAxis::UserPaths(v) => c.users.paths = vec![v[i]],
            SweepAxis::BsRisPaths(v) => c.channel.bs_ris_paths = v[i],
            SweepAxis::BsSide(v) => {
                c.bs.horizontal = v[i];
                c.bs.vertical = v[i];
            }
            SweepAxis::RisSide(v) => {
                c.ris.horizontal = v[i];
                c.ris.vertical = v[i];
            }
            SweepAxis::Groups(v) => c.ris.groups = v[i],
        }
        c.validate()?;
        Ok(c)
    }
}

/// A full sweep.
#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub base: SystemConfig,
    pub axis: SweepAxis,
    pub trials: usize,
    pub estimators: Vec<Estimator>,
    pub master_seed: u64,
    /// Record wall-times; timing columns stay empty otherwise so reruns are
    /// byte-identical.
    pub timing: bool,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl CampaignSpec {
    pub fn new(base: SystemConfig, axis: SweepAxis, trials: usize, estimators: Vec<Estimator>) -> Self {
        let master_seed = base.seed;
        CampaignSpec { base, axis, trials, estimators, master_seed, timing: false, threads: None, output: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("at least one trial per sweep point is required".into()));
        }
        if self.axis.is_empty() {
            return Err(Error::Config("the sweep has no values".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        for i in 0..self.axis.len() {
            self.axis.apply(&self.base, i)?;
        }
        Ok(())
    }
}

/// Aggregate for one sweep value and estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignRow {
    pub sweep_value: String,
    pub estimator: Estimator,
    pub trials: usize,
    pub failures: usize,
    pub nmse_mean: f64,
    pub nmse_std: f64,
    pub time_mean_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub sweep_param: String,
    pub rows: Vec<CampaignRow>,
    /// Per sweep value, per trial.
    pub trials: Vec<Vec<TrialResult>>,
}

impl CampaignResult {
    pub fn row(&self, value_index: usize, estimator: Estimator) -> Option<&CampaignRow> {
        let per = self.rows.len() / self.trials.len().max(1);
        self.rows[value_index * per..(value_index + 1) * per].iter().find(|r| r.estimator == estimator)
    }

    /// Per-trial NMSE of one estimator at one sweep value.
    pub fn nmse_samples(&self, value_index: usize, estimator: Estimator) -> Vec<f64> {
        self.trials[value_index]
            .iter()
            .filter_map(|t| t.outcomes.iter().find(|o| o.estimator == estimator).map(|o| o.nmse))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sweep_param", "sweep_value", "estimator", "trials", "nmse_mean", "nmse_std", "time_mean_s"])?;
        for r in &self.rows {
            w.write_record([
                self.sweep_param.clone(),
                r.sweep_value.clone(),
                r.estimator.name().to_string(),
                r.trials.to_string(),
                r.nmse_mean.to_string(),
                r.nmse_std.to_string(),
                r.time_mean_s.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

fn aggregate(value: String, estimator: Estimator, trials: &[TrialResult], timing: bool) -> CampaignRow {
    let outcomes: Vec<&EstimatorOutcome> =
        trials.iter().filter_map(|t| t.outcomes.iter().find(|o| o.estimator == estimator)).collect();
    let values: Vec<f64> = outcomes.iter().map(|o| o.nmse).collect();
    let nmse_std = if values.len() > 1 { values.iter().std_dev() } else { 0.0 };
    CampaignRow {
        sweep_value: value,
        estimator,
        trials: values.len(),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        nmse_mean: values.iter().mean(),
        nmse_std,
        time_mean_s: timing.then(|| outcomes.iter().map(|o| o.elapsed_s).mean()),
    }
}

/// Runs every sweep value for every trial on a worker pool and writes the
/// CSV if an output path is set. Results do not depend on the pool size.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignResult> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    let mut all = Vec::with_capacity(spec.axis.len());
    for i in 0..spec.axis.len() {
        let config = spec.axis.apply(&spec.base, i)?;
        let trials: Vec<TrialResult> = pool.install(|| {
            (0..spec.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(&config, &spec.estimators, TrialSeeds::derive(spec.master_seed, t)))
                .collect::<Result<_>>()
        })?;
        for &e in &spec.estimators {
            rows.push(aggregate(spec.axis.label(i), e, &trials, spec.timing));
        }
        all.push(trials);
    }
    let result = CampaignResult { sweep_param: spec.axis.param().to_string(), rows, trials: all };
    if let Some(path) = &spec.output {
        result.write_csv(path)?;
    }
    Ok(result)
}

/// One-sided Wilcoxon signed-rank p-value for `x` tending below `y`, using
/// the normal approximation with tie correction. Zero differences are
/// dropped.
pub fn wilcoxon_less(x: &[f64], y: &[f64]) -> Result<f64> {
    dim_check(x.len() == y.len(), || "paired samples differ in length".into())?;
    let mut d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(1.0);
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].iter_mut().for_each(|r| *r = rank);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w_plus - mean + 0.5) / var.sqrt();
    Ok(Normal::new(0.0, 1.0).expect("standard normal").cdf(z))
}
