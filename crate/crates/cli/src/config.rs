//! TOML scenario files.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use anyhow::{Context, Result};
use ehrenfest_core::classical::{ehrenfest_estimate, predicted_revival_time, ActionAngle, Integrator, PhasePoint};
use ehrenfest_core::model::{CustomPotential, Hamiltonian, HamiltonianSpec, Polynomial, ScaledPlanck, Tabulated};
use ehrenfest_core::quantum::SplitOrder;
use ehrenfest_core::scenario::{log_spaced, GridSpec, ScenarioSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Problems with the file itself; reported with exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Quartic,
    Harmonic,
    Toda,
    Custom,
    Bose,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub hamiltonian: HamiltonianSection,
    pub initial: Option<InitialSection>,
    pub grid: Option<GridSection>,
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub sweep: Option<SweepSection>,
    pub bose: Option<BoseSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    pub omega: Option<f64>,
    /// Coefficients c₀, c₁, … of Σ c_k x^k.
    pub polynomial: Option<Vec<f64>>,
    pub table: Option<TableSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    pub hbar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub extent: Vec<[f64; 2]>,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorName {
    Leapfrog,
    Yoshida4,
    KahanLi6,
}

impl From<IntegratorName> for Integrator {
    fn from(n: IntegratorName) -> Self {
        match n {
            IntegratorName::Leapfrog => Integrator::Leapfrog,
            IntegratorName::Yoshida4 => Integrator::Yoshida4,
            IntegratorName::KahanLi6 => Integrator::KahanLi6,
        }
    }
}

fn default_sample_every() -> usize {
    4
}
fn default_stride() -> usize {
    4
}
fn default_integrator() -> IntegratorName {
    IntegratorName::KahanLi6
}
fn default_split_order() -> u8 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Explicit step; otherwise T_c / `steps_per_period` (1D).
    pub dt: Option<f64>,
    pub steps_per_period: Option<f64>,
    /// Exactly one of the three t_final forms must be given.
    pub t_final: Option<f64>,
    /// Multiple of the predicted Ehrenfest time (1D).
    pub t_final_over_tau: Option<f64>,
    /// Multiple of the predicted revival time (1D).
    pub t_final_over_revival: Option<f64>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_stride")]
    pub ensemble_stride: usize,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorName,
    #[serde(default = "default_split_order")]
    pub split_order: u8,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// 0 disables the Wigner ensemble.
    #[serde(default)]
    pub size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Times at which raw point clouds are written.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { size: 0, seed: default_seed(), snapshot_times: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationKind {
    Absolute,
    Relative,
}

fn default_true() -> bool {
    true
}
fn default_deviation() -> DeviationKind {
    DeviationKind::Absolute
}
fn default_floor() -> f64 {
    0.05
}
fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_true")]
    pub ehrenfest: bool,
    #[serde(default = "default_deviation")]
    pub deviation: DeviationKind,
    #[serde(default = "default_floor")]
    pub relative_floor: f64,
    #[serde(default)]
    pub axis: usize,
    /// Fit window as a multiple of the predicted τ; the whole run when absent.
    pub fit_over_tau: Option<f64>,
    #[serde(default)]
    pub revival: bool,
    #[serde(default = "default_one")]
    pub autocorrelation_every: usize,
    pub phase_space: Option<PhaseSpaceSection>,
    /// Report max |x̄_ens − ⟨x⟩| and max |x_c − ⟨x⟩| for t up to this value.
    pub compare_until: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            ehrenfest: true,
            deviation: DeviationKind::Absolute,
            relative_floor: default_floor(),
            axis: 0,
            fit_over_tau: None,
            revival: false,
            autocorrelation_every: 1,
            phase_space: None,
            compare_until: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceSection {
    pub x: [f64; 2],
    pub p: [f64; 2],
    #[serde(default)]
    pub times: Vec<f64>,
    /// Compare with the initial Husimi density around T_r/2.
    #[serde(default)]
    pub half_revival: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSection {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub hbar: Option<Vec<f64>>,
    pub hbar_range: Option<RangeSection>,
    /// Particle numbers for Bose sweeps.
    pub n: Option<Vec<usize>>,
    /// An explicit `time.t_final` is rescaled by (ℏ₀/ℏ)^k, ℏ₀ from `[initial]`.
    pub t_final_exponent: Option<f64>,
    /// Scale grid points per axis by ℏ₀/ℏ (rounded up to a power of two),
    /// keeping the momentum range fixed.
    #[serde(default)]
    pub grid_follows_hbar: bool,
}

fn default_bose_n() -> usize {
    200
}
fn default_c_over_nu() -> f64 {
    2.0
}
fn default_half() -> f64 {
    0.5
}
fn default_theta() -> f64 {
    FRAC_PI_2
}
fn default_bose_dt() -> f64 {
    0.05
}
fn default_substeps() -> usize {
    10
}
fn default_window() -> f64 {
    20.0
}
fn default_revival_window() -> f64 {
    12.0
}
fn default_bose_ensemble() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoseSection {
    #[serde(default = "default_bose_n")]
    pub n: usize,
    #[serde(default = "default_c_over_nu")]
    pub c_over_nu: f64,
    /// |β|², the initial population of mode b.
    #[serde(default = "default_half")]
    pub beta_sq: f64,
    /// Relative phase θ_β − θ_α.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_bose_dt")]
    pub dt: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Breakdown fit window in units of √N.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Revival record length in units of N.
    #[serde(default = "default_revival_window")]
    pub revival_window: f64,
    #[serde(default = "default_bose_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub revival: bool,
}

impl Default for BoseSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = match toml::from_str(text) {
            Ok(c) => c,
            Err(e) => return config_err(e.to_string()),
        };
        if cfg.schema_version != SCHEMA_VERSION {
            return config_err(format!("schema_version: expected {SCHEMA_VERSION}, found {}", cfg.schema_version));
        }
        Ok(cfg)
    }

    /// Stable identifier of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        format!("{digest:x}")[..16].to_string()
    }

    pub fn bose(&self) -> BoseSection {
        self.bose.clone().unwrap_or_default()
    }

    /// Reduced ensembles and sweeps for CI. Grids are left alone: a coarser
    /// grid shrinks the momentum range and trips the aliasing check.
    pub fn make_quick(&mut self) {
        if self.ensemble.size > 10_000 {
            self.ensemble.size = 10_000;
        }
        if let Some(b) = &mut self.bose {
            b.ensemble_size = b.ensemble_size.min(1000);
        }
        if let Some(sweep) = &mut self.sweep {
            if let Some(h) = &mut sweep.hbar {
                thin(h);
            }
            if let Some(r) = &mut sweep.hbar_range {
                r.count = r.count.min(4);
            }
            if let Some(n) = &mut sweep.n {
                thin(n);
            }
        }
    }

    pub fn hamiltonian_spec(&self) -> Result<HamiltonianSpec> {
        let h = &self.hamiltonian;
        let spec = match self.scenario {
            ScenarioKind::Quartic => HamiltonianSpec::Quartic1D,
            ScenarioKind::Toda => HamiltonianSpec::Toda2D,
            ScenarioKind::Harmonic => match h.omega {
                Some(omega) => HamiltonianSpec::Harmonic1D { omega },
                None => return config_err("hamiltonian.omega: required for the harmonic scenario"),
            },
            ScenarioKind::Custom => match (&h.polynomial, &h.table) {
                (Some(c), None) => HamiltonianSpec::Custom1D(CustomPotential::Polynomial(Polynomial { coefficients: c.clone() })),
                (None, Some(t)) => HamiltonianSpec::Custom1D(CustomPotential::Tabulated(
                    Tabulated::new(t.x.clone(), t.v.clone()).context("hamiltonian.table")?,
                )),
                _ => return config_err("hamiltonian: custom scenarios need exactly one of `polynomial` or `table`"),
            },
            ScenarioKind::Bose => return config_err("scenario: bose has no packet Hamiltonian"),
        };
        spec.validate().context("hamiltonian")?;
        Ok(spec)
    }

    /// ℏ_ε values of a sweep, or the single value from `[initial]`.
    pub fn hbar_values(&self) -> Result<Vec<f64>> {
        match &self.sweep {
            Some(SweepSection { hbar: Some(v), hbar_range: None, .. }) => Ok(v.clone()),
            Some(SweepSection { hbar: None, hbar_range: Some(r), .. }) => {
                if !(r.from > 0.0 && r.to > r.from && r.count >= 1) {
                    return config_err("sweep.hbar_range: need 0 < from < to and count ≥ 1");
                }
                Ok(log_spaced(r.from, r.to, r.count))
            }
            Some(SweepSection { hbar: Some(_), hbar_range: Some(_), .. }) => {
                config_err("sweep: give either `hbar` or `hbar_range`, not both")
            }
            _ => Ok(vec![self.initial()?.hbar]),
        }
    }

    fn initial(&self) -> Result<&InitialSection> {
        match &self.initial {
            Some(i) => Ok(i),
            None => config_err("initial: section required for packet scenarios"),
        }
    }

    /// Build the scenario, optionally at a different ℏ_ε.
    pub fn scenario(&self, hbar_override: Option<f64>) -> Result<ScenarioSpec> {
        let hamiltonian = self.hamiltonian_spec()?;
        let init = self.initial()?;
        let hbar_value = hbar_override.unwrap_or(init.hbar);
        let hbar = ScaledPlanck::new(hbar_value).context("initial.hbar")?;
        let Some(grid) = &self.grid else {
            return config_err("grid: section required for packet scenarios");
        };
        let Some(time) = &self.time else {
            return config_err("time: section required for packet scenarios");
        };
        let dim = if hamiltonian.is_1d() { 1 } else { 2 };
        if init.x0.len() != dim || init.p0.len() != dim {
            return config_err(format!("initial.x0/p0: {} expects {dim} components", hamiltonian.name()));
        }
        let start = {
            let mut pt = PhasePoint { x: [0.0; 2], p: [0.0; 2], dim };
            pt.x[..dim].copy_from_slice(&init.x0);
            pt.p[..dim].copy_from_slice(&init.p0);
            pt
        };
        let energy = hamiltonian.energy(&start.x[..dim], &start.p[..dim]);
        let pot = hamiltonian.potential_1d();
        let dt = match (time.dt, time.steps_per_period, pot) {
            (Some(dt), None, _) => dt,
            (None, Some(k), Some(pot)) => ActionAngle::new(pot, init.x0[0]).period(energy).context("time.steps_per_period")? / k,
            (None, Some(_), None) => return config_err("time.steps_per_period: only available for 1D scenarios; set time.dt"),
            _ => return config_err("time: give exactly one of `dt` or `steps_per_period`"),
        };
        let t_final = match (time.t_final, time.t_final_over_tau, time.t_final_over_revival, pot) {
            (Some(t), None, None, _) => match self.sweep.as_ref().and_then(|s| s.t_final_exponent) {
                Some(k) => t * (init.hbar / hbar_value).powf(k),
                None => t,
            },
            (None, Some(k), None, Some(pot)) => {
                k * ehrenfest_estimate(pot, init.x0[0], init.p0[0], hbar).context("time.t_final_over_tau")?.tau.as_f64()
            }
            (None, None, Some(k), Some(pot)) => {
                k * predicted_revival_time(pot, init.x0[0], energy, hbar).context("time.t_final_over_revival")?.as_f64()
            }
            (None, ..) if pot.is_none() => return config_err("time: 2D scenarios need an explicit t_final"),
            _ => return config_err("time: give exactly one of `t_final`, `t_final_over_tau` or `t_final_over_revival`"),
        };
        if !t_final.is_finite() {
            return config_err("time: the predicted time scale is infinite; set t_final explicitly");
        }
        let mut points = grid.points.clone();
        if self.sweep.as_ref().is_some_and(|s| s.grid_follows_hbar) {
            let factor = init.hbar / hbar_value;
            for p in &mut points {
                *p = ((*p as f64 * factor).ceil() as usize).next_power_of_two();
            }
        }
        let order = match time.split_order {
            2 => SplitOrder::Second,
            4 => SplitOrder::Fourth,
            o => return config_err(format!("time.split_order: expected 2 or 4, found {o}")),
        };
        let sc = ScenarioSpec {
            hamiltonian,
            hbar,
            x0: init.x0.clone(),
            p0: init.p0.clone(),
            grid: GridSpec { extent: grid.extent.iter().map(|e| (e[0], e[1])).collect(), points },
            dt,
            t_final,
            sample_every: time.sample_every,
            ensemble_size: self.ensemble.size.max(1),
            rng_seed: self.ensemble.seed,
            ensemble_stride: time.ensemble_stride,
            order,
            integrator: time.integrator.into(),
        };
        sc.validate().context("scenario")?;
        Ok(sc)
    }
}

/// Keep four roughly evenly spread entries, always including both ends.
fn thin<T: Copy>(v: &mut Vec<T>) {
    if v.len() <= 4 {
        return;
    }
    let n = v.len() - 1;
    *v = (0..4).map(|i| v[(i * n + 1) / 3]).collect();
}
