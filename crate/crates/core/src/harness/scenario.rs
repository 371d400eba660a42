//! Scenario documents: fleet, channel, task, solver and sweep settings.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{derive_seed, HarnessError, LinkModel};
use crate::channel::{
    assemble_two_step, build_slot_topology, db_to_linear, dbm_to_watts, ChannelParams, Slot, SlotTopology, WtegGraph,
};
use crate::dag::{builtin, TaskDag, MEGABIT};
use crate::mapping::Problem;
use crate::schedulers::{BpsoParams, CloudParams, SolverKind};
use crate::sins::{predict_slot_positions, simulate_imu, EarthModel, Geodetic, ImuErrorModel, Segment, Trajectory};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Built-in task name (`phi1`, `phi2`) or a path relative to the
    /// scenario file.
    pub task: String,
    pub slot_duration_s: f64,
    /// Source data size used by `schedule` [Mb].
    #[serde(default = "default_data_mb")]
    pub data_mb: f64,
    /// Multiplier on every subtask's complexity.
    #[serde(default = "one")]
    pub complexity_scale: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    /// IMU sub-sample interval for slot prediction [s].
    #[serde(default = "default_imu_sample")]
    pub imu_sample_s: f64,
    pub data_sizes_mb: Vec<f64>,
    #[serde(default)]
    pub complexity_multipliers: Vec<f64>,
    #[serde(default)]
    pub complexity_data_sizes_mb: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds_per_point: usize,
    #[serde(default = "default_trials")]
    pub trials_per_point: usize,
    pub origin: OriginSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub cloud: CloudParams,
    #[serde(default)]
    pub bpso: BpsoParams,
    #[serde(default)]
    pub imu: ImuSpec,
    #[serde(default)]
    pub success: SuccessSpec,
    #[serde(default)]
    pub sins_report: SinsReportSpec,
    pub fleet: FleetSpec,
}

fn default_data_mb() -> f64 {
    5.0
}
fn one() -> f64 {
    1.0
}
fn default_solver() -> SolverKind {
    SolverKind::Bpso
}
fn default_imu_sample() -> f64 {
    0.01
}
fn default_seeds() -> usize {
    20
}
fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginSpec {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub height_m: f64,
}

/// Link budget in the units of a parameter table: dB gains, dBm noise.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    pub tx_power_w: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub los_attenuation_db: f64,
    pub max_range_m: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            tx_power_w: 0.05,
            tx_gain_db: 3.0,
            rx_gain_db: 3.0,
            carrier_hz: 2.4e9,
            bandwidth_hz: 20e6,
            noise_dbm: -100.0,
            los_attenuation_db: 0.0,
            max_range_m: 6000.0,
        }
    }
}

impl ChannelSpec {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            tx_power_w: self.tx_power_w,
            tx_gain: db_to_linear(self.tx_gain_db),
            rx_gain: db_to_linear(self.rx_gain_db),
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
            noise_w: dbm_to_watts(self.noise_dbm),
            los_attenuation: db_to_linear(self.los_attenuation_db),
            max_range_m: self.max_range_m,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImuSpec {
    pub gyro_bias_rad_s: [f64; 3],
    pub accel_bias_m_s2: [f64; 3],
    pub gyro_noise_rad_sqrt_s: f64,
    pub accel_noise_m_s_sqrt_s: f64,
}

impl Default for ImuSpec {
    fn default() -> Self {
        let m = ImuErrorModel::consumer_grade(0);
        ImuSpec {
            gyro_bias_rad_s: m.gyro_bias,
            accel_bias_m_s2: m.accel_bias,
            gyro_noise_rad_sqrt_s: m.gyro_noise,
            accel_noise_m_s_sqrt_s: m.accel_noise,
        }
    }
}

impl ImuSpec {
    pub fn model(&self, seed: u64) -> ImuErrorModel {
        ImuErrorModel {
            gyro_bias: self.gyro_bias_rad_s,
            accel_bias: self.accel_bias_m_s2,
            gyro_noise: self.gyro_noise_rad_sqrt_s,
            accel_noise: self.accel_noise_m_s_sqrt_s,
            seed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessSpec {
    /// How slot-two links are realized for schedules planned without
    /// prediction.
    pub models: Vec<LinkModel>,
    /// Survival probability of each link under the Bernoulli model.
    pub link_probability: f64,
    /// Coverage of the reported binomial intervals.
    pub confidence: f64,
}

impl Default for SuccessSpec {
    fn default() -> Self {
        SuccessSpec { models: vec![LinkModel::Physical, LinkModel::Bernoulli], link_probability: 0.5, confidence: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinsReportSpec {
    pub duration_s: f64,
    pub step_s: f64,
    pub sample_s: f64,
    /// Independent noise realizations.
    pub runs: usize,
}

impl Default for SinsReportSpec {
    fn default() -> Self {
        SinsReportSpec { duration_s: 240.0, step_s: 1.0, sample_s: 0.1, runs: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    /// Range for capacities not given explicitly [cycles/s].
    #[serde(default = "default_capacity_range")]
    pub capacity_range_hz: [f64; 2],
    pub uav: Vec<UavSpec>,
}

fn default_capacity_range() -> [f64; 2] {
    [500e6, 1200e6]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub east_m: f64,
    pub north_m: f64,
    #[serde(default)]
    pub up_m: f64,
    #[serde(default)]
    pub heading_deg: f64,
    #[serde(default)]
    pub speed_m_s: f64,
    #[serde(default)]
    pub climb_m_s: f64,
    pub capacity_hz: Option<f64>,
    /// Manoeuvres flown from t = 0; straight flight follows the last one.
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration_s: f64,
    #[serde(default)]
    pub turn_rate_deg_s: f64,
}

/// Which slot-two topology a schedule is planned against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planning {
    /// Dead-reckoned positions at the start of slot two.
    Predicted,
    /// Slot-one positions assumed to persist.
    Persist,
}

/// A validated scenario with its fleet flown and predicted.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub seed: u64,
    /// First 16 hex digits of SHA-256 over the scenario text and any task
    /// file it references.
    pub hash: String,
    pub dag: TaskDag,
    pub channel: ChannelParams,
    pub earth: EarthModel,
    pub origin: Geodetic,
    pub trajectories: Vec<Trajectory>,
    pub capacities: Vec<f64>,
    /// True ENU positions `[slot][uav]` at the slot starts.
    pub truth: Vec<Vec<Vector3<f64>>>,
    /// Dead-reckoned ENU positions `[slot][uav]` at the slot starts.
    pub predicted: Vec<Vec<Vector3<f64>>>,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Invalid(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn non_negative_list(name: &str, v: &[f64]) -> Result<(), HarnessError> {
    match v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        Some(x) => Err(invalid(format!("`{name}` entries must be non-negative and finite, got {x}"))),
        None => Ok(()),
    }
}

impl Scenario {
    /// Reads and builds a scenario. `seed` overrides the document's seed.
    pub fn load(path: impl AsRef<Path>, seed: Option<u64>) -> Result<Scenario, HarnessError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scenario::from_toml_str(&text, &base, seed)
    }

    /// Builds a scenario from TOML text; task paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path, seed: Option<u64>) -> Result<Scenario, HarnessError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let dag = match builtin(&file.task) {
            Some(d) => d,
            None => {
                let path: PathBuf = base.join(&file.task);
                let dag_text =
                    std::fs::read_to_string(&path).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
                hasher.update(dag_text.as_bytes());
                TaskDag::from_toml_str(&dag_text)?
            }
        };
        let digest = hasher.finalize();
        let hash: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Scenario::build(file, dag, hash, seed)
    }

    fn build(file: ScenarioFile, dag: TaskDag, hash: String, seed: Option<u64>) -> Result<Scenario, HarnessError> {
        let seed = seed.unwrap_or(file.seed);
        positive("slot_duration_s", file.slot_duration_s)?;
        positive("complexity_scale", file.complexity_scale)?;
        positive("imu_sample_s", file.imu_sample_s)?;
        positive("cloud.capacity_hz", file.cloud.capacity_hz)?;
        positive("cloud.backhaul_bps", file.cloud.backhaul_bps)?;
        non_negative_list("data_sizes_mb", &file.data_sizes_mb)?;
        non_negative_list("complexity_data_sizes_mb", &file.complexity_data_sizes_mb)?;
        if !(file.data_mb >= 0.0 && file.data_mb.is_finite()) {
            return Err(invalid("`data_mb` must be non-negative and finite"));
        }
        if file.data_sizes_mb.is_empty() {
            return Err(invalid("`data_sizes_mb` must not be empty"));
        }
        if file.complexity_multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(invalid("`complexity_multipliers` entries must be positive"));
        }
        if file.seeds_per_point == 0 || file.trials_per_point == 0 {
            return Err(invalid("`seeds_per_point` and `trials_per_point` must be at least 1"));
        }
        let s = &file.success;
        if !(s.link_probability >= 0.0 && s.link_probability <= 1.0) {
            return Err(invalid("`success.link_probability` must lie in [0, 1]"));
        }
        if !(s.confidence > 0.0 && s.confidence < 1.0) {
            return Err(invalid("`success.confidence` must lie in (0, 1)"));
        }
        let r = &file.sins_report;
        positive("sins_report.duration_s", r.duration_s)?;
        positive("sins_report.step_s", r.step_s)?;
        positive("sins_report.sample_s", r.sample_s)?;
        if r.runs == 0 {
            return Err(invalid("`sins_report.runs` must be at least 1"));
        }
        file.bpso.validate()?;
        let channel = file.channel.params();
        channel.validate()?;
        file.imu.model(0).validate()?;

        let dt = file.slot_duration_s;
        let horizon = 2.0 * dt;
        let steps = horizon / (2.0 * file.imu_sample_s);
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(invalid("two slots must span a whole number of IMU updates (2 x imu_sample_s)"));
        }

        let fleet = &file.fleet;
        let n = fleet.uav.len();
        if n < 2 {
            return Err(invalid(format!("the fleet needs at least two UAVs, got {n}")));
        }
        let [lo, hi] = fleet.capacity_range_hz;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid("`fleet.capacity_range_hz` must be an increasing positive pair"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "capacity", 0));
        let mut capacities = Vec::with_capacity(n);
        for (k, u) in fleet.uav.iter().enumerate() {
            let drawn = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let c = u.capacity_hz.unwrap_or(drawn);
            positive(&format!("fleet.uav[{k}].capacity_hz"), c)?;
            capacities.push(c);
        }

        let earth = EarthModel::wgs84();
        let o = file.origin;
        let origin = Geodetic::from_degrees(o.lat_deg, o.lon_deg, o.height_m);
        let trajectories: Vec<Trajectory> = fleet
            .uav
            .iter()
            .map(|u| {
                let start = earth.offset_geodetic(&origin, &Vector3::new(u.east_m, u.north_m, u.up_m));
                let mut segments: Vec<Segment> =
                    u.segments.iter().map(|s| Segment::turn(s.duration_s, s.turn_rate_deg_s.to_radians())).collect();
                segments.push(Segment::straight(horizon));
                Trajectory {
                    start,
                    speed: u.speed_m_s,
                    heading: u.heading_deg.to_radians(),
                    climb_rate: u.climb_m_s,
                    segments,
                }
            })
            .collect();

        let mut truth: Vec<Vec<_>> = (0..2).map(|_| Vec::with_capacity(n)).collect();
        let mut members = Vec::with_capacity(n);
        for (k, tr) in trajectories.iter().enumerate() {
            let states = tr.states(dt, horizon, &earth)?;
            for (slot, row) in truth.iter_mut().enumerate() {
                row.push(earth.geodetic_to_enu(&states[slot].position, &origin));
            }
            let imu = file.imu.model(derive_seed(seed, "imu", k as u64));
            let trace = simulate_imu(tr, &imu, file.imu_sample_s, horizon, &earth)?;
            members.push((states[0], trace));
        }
        let predicted = predict_slot_positions(&members, dt, 2, &earth, &origin)?;

        let mut dag = dag;
        dag.validate()?;
        let dag = dag.scale_complexity(file.complexity_scale);
        Ok(Scenario { file, seed, hash, dag, channel, earth, origin, trajectories, capacities, truth, predicted })
    }

    pub fn uav_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn slot_duration(&self) -> f64 {
        self.file.slot_duration_s
    }

    /// The task with source size `data_mb` and complexities scaled by
    /// `multiplier`.
    pub fn task(&self, data_mb: f64, multiplier: f64) -> Result<TaskDag, HarnessError> {
        Ok(self.dag.scale_complexity(multiplier).propagate_data_sizes(data_mb * MEGABIT)?)
    }

    pub fn topology(&self, positions: &[Vector3<f64>], slot: Slot) -> Result<SlotTopology, HarnessError> {
        Ok(build_slot_topology(positions, &self.channel, slot)?)
    }

    pub fn wteg(&self, first: &SlotTopology, second: &SlotTopology) -> Result<WtegGraph, HarnessError> {
        Ok(assemble_two_step(first, second, &vec![0.0; self.uav_count()], self.slot_duration())?)
    }

    /// Graph a scheduler plans against.
    pub fn planning_wteg(&self, planning: Planning) -> Result<WtegGraph, HarnessError> {
        let first = self.topology(&self.predicted[0], Slot::First)?;
        let second = match planning {
            Planning::Predicted => self.topology(&self.predicted[1], Slot::Second)?,
            Planning::Persist => self.topology(&self.predicted[0], Slot::Second)?,
        };
        self.wteg(&first, &second)
    }

    /// Graph of the positions actually flown.
    pub fn true_wteg(&self) -> Result<WtegGraph, HarnessError> {
        let first = self.topology(&self.truth[0], Slot::First)?;
        let second = self.topology(&self.truth[1], Slot::Second)?;
        self.wteg(&first, &second)
    }

    pub fn problem(&self, dag: TaskDag, wteg: WtegGraph) -> Result<Problem, HarnessError> {
        Ok(Problem::new(dag, wteg, self.capacities.clone())?)
    }

    /// BPSO settings with the seed taken from the scenario.
    pub fn bpso(&self) -> BpsoParams {
        BpsoParams { seed: derive_seed(self.seed, "bpso", 0), ..self.file.bpso }
    }
}
