//! Scenario configuration, loaded from TOML with every field defaulted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GroupLayout, GroupOrdering, UpaShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsConfig {
    pub horizontal: usize,
    pub vertical: usize,
    pub spacing: f64,
}

impl Default for BsConfig {
    fn default() -> Self {
        BsConfig { horizontal: 8, vertical: 8, spacing: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RisConfig {
    pub horizontal: usize,
    pub vertical: usize,
    pub spacing: f64,
    pub groups: usize,
    pub ordering: GroupOrdering,
    /// Characteristic impedance for admittance conversion, ohms.
    pub z0: f64,
}

impl Default for RisConfig {
    fn default() -> Self {
        RisConfig { horizontal: 6, vertical: 6, spacing: 0.5, groups: 4, ordering: GroupOrdering::SquareBlocks, z0: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersConfig {
    pub count: usize,
    /// RIS-user path counts; a single entry applies to every user.
    pub paths: Vec<usize>,
    /// Training slots of the user nearest the RIS.
    pub typical_pilots: usize,
    /// Training slots of every other user.
    pub other_pilots: usize,
    /// Distance from the RIS to the centre of the user cluster, metres.
    pub cluster_distance: f64,
    /// Radius of the spherical user cluster, metres.
    pub cluster_radius: f64,
}

impl Default for UsersConfig {
    fn default() -> Self {
        UsersConfig {
            count: 5,
            paths: vec![3],
            typical_pilots: 48,
            other_pilots: 24,
            cluster_distance: 10.0,
            cluster_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bs_ris_paths: usize,
    /// Transmit power, watts.
    pub transmit_power: f64,
    /// BS-RIS distance, metres.
    pub bs_ris_distance: f64,
    pub bs_ris_exponent: f64,
    pub ris_user_exponent: f64,
    /// Path-gain reference at one metre.
    pub gain_reference: f64,
    /// Signal-to-noise ratio in dB; absent means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Snap every sampled angle to an estimator grid point.
    pub on_grid: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            bs_ris_paths: 4,
            transmit_power: 1.0,
            bs_ris_distance: 100.0,
            bs_ris_exponent: 2.2,
            ris_user_exponent: 2.8,
            gain_reference: 1e-3,
            snr_db: Some(0.0),
            on_grid: false,
        }
    }
}

/// How the BS peak search picks paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeakSelection {
    #[default]
    KnownCount,
    Threshold,
}

/// Stopping rule of the greedy solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    /// Stop at the known number of paths.
    #[default]
    KnownSparsity,
    /// Stop once the residual reaches the expected noise level.
    NoiseResidual,
}

/// Score maximised by the path-difference search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaObjective {
    /// `|c^H y| / ‖c‖`, the least-squares fit over difference and gain.
    #[default]
    Normalized,
    /// `|c^H y|`.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    /// RIS dictionary grid sizes; zero selects twice the array dimension.
    pub ris_grid_vertical: usize,
    pub ris_grid_horizontal: usize,
    /// Angle-rotation search points along the outer and inner array axes.
    pub rotation_points_outer: usize,
    pub rotation_points_inner: usize,
    /// Use the exhaustive two-dimensional rotation search.
    pub joint_rotation: bool,
    /// Remove the other detected paths before each rotation search.
    pub leakage_cancellation: bool,
    pub peak_selection: PeakSelection,
    pub peak_threshold: f64,
    /// Path-difference search points; zero selects eight times the array dimension.
    pub delta_points_vertical: usize,
    pub delta_points_horizontal: usize,
    pub stopping: Stopping,
    pub delta_objective: DeltaObjective,
    /// Highest-scoring macro-blocks refitted before one is kept; one keeps
    /// the top correlation score alone.
    pub macro_block_candidates: usize,
    pub sbl_max_iterations: usize,
    pub sbl_tolerance: f64,
    /// Largest implicit dictionary (atoms × rows) direct OMP may touch.
    pub direct_omp_budget: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            ris_grid_vertical: 0,
            ris_grid_horizontal: 0,
            rotation_points_outer: 64,
            rotation_points_inner: 64,
            joint_rotation: false,
            leakage_cancellation: true,
            peak_selection: PeakSelection::KnownCount,
            peak_threshold: 0.2,
            delta_points_vertical: 0,
            delta_points_horizontal: 0,
            stopping: Stopping::NoiseResidual,
            delta_objective: DeltaObjective::Normalized,
            macro_block_candidates: 4,
            sbl_max_iterations: 50,
            sbl_tolerance: 1e-6,
            direct_omp_budget: 2_000_000_000,
        }
    }
}

/// Full scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub seed: u64,
    pub bs: BsConfig,
    pub ris: RisConfig,
    pub users: UsersConfig,
    pub channel: ChannelConfig,
    pub estimation: EstimationConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            seed: 2024,
            bs: BsConfig::default(),
            ris: RisConfig::default(),
            users: UsersConfig::default(),
            channel: ChannelConfig::default(),
            estimation: EstimationConfig::default(),
        }
    }
}

impl SystemConfig {
    /// 8x8 BS, 6x6 RIS in four groups, five users, four BS-RIS paths,
    /// three user paths.
    pub fn full_scale() -> Self {
        Self::default()
    }

    /// Small scenario used for fast tests: 4x4 BS, 4x4 RIS in four 2x2
    /// groups, three users, two BS-RIS paths, two user paths.
    pub fn desk() -> Self {
        let mut c = SystemConfig { bs: BsConfig { horizontal: 4, vertical: 4, spacing: 0.5 }, ..Self::default() };
        c.ris.horizontal = 4;
        c.ris.vertical = 4;
        c.ris.groups = 4;
        c.users.count = 3;
        c.users.paths = vec![2];
        c.channel.bs_ris_paths = 2;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: SystemConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.bs_shape()?;
        self.ris_layout()?;
        let u = &self.users;
        if u.count == 0 {
            return Err(Error::Config("at least one user is required".into()));
        }
        if u.paths.is_empty() || u.paths.contains(&0) {
            return Err(Error::Config("every user needs at least one path".into()));
        }
        if u.paths.len() != 1 && u.paths.len() != u.count {
            return Err(Error::Config(format!(
                "users.paths has {} entries for {} users",
                u.paths.len(),
                u.count
            )));
        }
        if u.typical_pilots == 0 || u.other_pilots == 0 {
            return Err(Error::Config("pilot lengths must be positive".into()));
        }
        if !(u.cluster_distance > u.cluster_radius && u.cluster_radius >= 0.0) {
            return Err(Error::Config("user cluster must lie away from the RIS".into()));
        }
        let ch = &self.channel;
        if ch.bs_ris_paths == 0 {
            return Err(Error::Config("at least one BS-RIS path is required".into()));
        }
        if !(ch.transmit_power > 0.0 && ch.bs_ris_distance > 0.0 && ch.gain_reference > 0.0) {
            return Err(Error::Config("power, distance and gain reference must be positive".into()));
        }
        if let Some(s) = ch.snr_db {
            if !s.is_finite() {
                return Err(Error::Config("snr_db must be finite".into()));
            }
        }
        let e = &self.estimation;
        if e.rotation_points_outer == 0 || e.rotation_points_inner == 0 {
            return Err(Error::Config("rotation grids need at least one point".into()));
        }
        if !(e.peak_threshold > 0.0 && e.peak_threshold <= 1.0) {
            return Err(Error::Config("peak_threshold must lie in (0, 1]".into()));
        }
        if e.macro_block_candidates == 0 {
            return Err(Error::Config("macro_block_candidates must be at least one".into()));
        }
        if e.sbl_max_iterations == 0 || e.sbl_tolerance.is_nan() || e.sbl_tolerance <= 0.0 {
            return Err(Error::Config("SBL needs a positive iteration cap and tolerance".into()));
        }
        let (dv, dh) = self.ris_grid();
        let ris = self.ris_layout()?.shape();
        if dv < ris.vertical || dh < ris.horizontal {
            return Err(Error::Config("RIS dictionary grid is smaller than the array".into()));
        }
        Ok(())
    }

    pub fn bs_shape(&self) -> Result<UpaShape> {
        UpaShape::new(self.bs.horizontal, self.bs.vertical, self.bs.spacing)
    }

    pub fn ris_layout(&self) -> Result<GroupLayout> {
        let shape = UpaShape::new(self.ris.horizontal, self.ris.vertical, self.ris.spacing)?;
        GroupLayout::new(shape, self.ris.groups, self.ris.ordering)
    }

    pub fn user_paths(&self, user: usize) -> usize {
        if self.users.paths.len() == 1 {
            self.users.paths[0]
        } else {
            self.users.paths[user]
        }
    }

    pub fn max_user_paths(&self) -> usize {
        self.users.paths.iter().copied().max().unwrap_or(1)
    }

    pub fn pilots(&self, is_typical: bool) -> usize {
        if is_typical {
            self.users.typical_pilots
        } else {
            self.users.other_pilots
        }
    }

    /// RIS dictionary grid (vertical, horizontal).
    pub fn ris_grid(&self) -> (usize, usize) {
        let e = &self.estimation;
        let v = if e.ris_grid_vertical == 0 { 2 * self.ris.vertical } else { e.ris_grid_vertical };
        let h = if e.ris_grid_horizontal == 0 { 2 * self.ris.horizontal } else { e.ris_grid_horizontal };
        (v, h)
    }

    /// Path-difference search grid (vertical, horizontal).
    pub fn delta_grid(&self) -> (usize, usize) {
        let e = &self.estimation;
        let v = if e.delta_points_vertical == 0 { 8 * self.ris.vertical } else { e.delta_points_vertical };
        let h = if e.delta_points_horizontal == 0 { 8 * self.ris.horizontal } else { e.delta_points_horizontal };
        (v, h)
    }

    pub fn bs_ris_gain_variance(&self) -> f64 {
        self.channel.gain_reference * self.channel.bs_ris_distance.powf(-self.channel.bs_ris_exponent)
    }

    pub fn ris_user_gain_variance(&self, distance: f64) -> f64 {
        self.channel.gain_reference * distance.powf(-self.channel.ris_user_exponent)
    }

    /// Noise variance per receive sample; zero when noiseless.
    pub fn noise_variance(&self) -> f64 {
        match self.channel.snr_db {
            None => 0.0,
            Some(snr) => noise_variance_for_snr(self, snr),
        }
    }
}

/// `δ² = g0²·d_BR^{-a}·d_RU^{-b}·p / 10^{snr/10}` at the cluster-centre distance.
pub fn noise_variance_for_snr(c: &SystemConfig, snr_db: f64) -> f64 {
    let ch = &c.channel;
    ch.gain_reference * ch.gain_reference
        * ch.bs_ris_distance.powf(-ch.bs_ris_exponent)
        * c.users.cluster_distance.powf(-ch.ris_user_exponent)
        * ch.transmit_power
        / 10f64.powf(snr_db / 10.0)
}

/// Pilot lengths suggested by the recovery bounds, `(typical, other)`:
/// `J·ln(16M²)` and `(J+1)·ln(4M)/L`, rounded up.
pub fn pilot_bound(c: &SystemConfig) -> (usize, usize) {
    let m = (c.ris.horizontal * c.ris.vertical) as f64;
    let j = c.max_user_paths() as f64;
    let l = c.channel.bs_ris_paths as f64;
    let t1 = (j * (16.0 * m * m).ln()).ceil() as usize;
    let tk = ((j + 1.0) * (4.0 * m).ln() / l).ceil() as usize;
    (t1.max(1), tk.max(1))
}
