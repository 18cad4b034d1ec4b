//! Scenario descriptions and the single-point pipelines built on them:
//! quantum/classical correspondence runs, Ehrenfest-time measurement and
//! revival detection.

use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::{
    detect_revival, deviation_series, fit_envelope, masked_run_peaks, peak_envelope, relative_deviation, EnvelopeFit,
    RevivalReport,
};
use crate::classical::{
    ehrenfest_estimate, integrate_trajectory, predicted_revival_time, ActionAngle, Integrator, PhasePoint, Timescale, Trajectory,
};
use crate::ensemble::EnsembleRun;
use crate::error::{bail, Result};
use crate::model::{Hamiltonian, HamiltonianSpec, ScaledPlanck, MAX_DIM};
use crate::phasespace::{density_distance, husimi_density, PlanckGrid};
use crate::quantum::{
    gaussian_packet, propagate, Axis, Discretization, Grid, Observers, Propagation, Propagator, SplitOrder, WaveFunction,
};
use crate::series::{ComplexSeries, SparseSeries, TimeSeries};

/// Extent and resolution per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub extent: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        if self.extent.len() != self.points.len() {
            bail!(Config, "grid extent has {} axes but points has {}", self.extent.len(), self.points.len());
        }
        let axes =
            self.extent.iter().zip(&self.points).map(|(&(lo, hi), &n)| Axis::new(lo, hi, n)).collect::<Result<Vec<_>>>()?;
        match axes.as_slice() {
            [a] => Ok(Grid::One(*a)),
            [a, b] => Ok(Grid::Two(*a, *b)),
            _ => bail!(Config, "grid must have 1 or 2 axes, got {}", axes.len()),
        }
    }
}

/// Everything needed to reproduce one packet run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub hamiltonian: HamiltonianSpec,
    pub hbar: ScaledPlanck,
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    pub grid: GridSpec,
    pub dt: f64,
    pub t_final: f64,
    /// Observables are recorded every `sample_every` steps.
    pub sample_every: usize,
    pub ensemble_size: usize,
    pub rng_seed: u64,
    /// Ensemble step = `ensemble_stride × dt`; must divide `sample_every`.
    pub ensemble_stride: usize,
    pub order: SplitOrder,
    pub integrator: Integrator,
}

/// Derived quantities reported by [`ScenarioSpec::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioCheck {
    pub energy: f64,
    /// Classical period at the initial energy (1D only).
    pub period: Option<f64>,
    /// Largest recommended step, T_c/32 (1D only).
    pub dt_max: Option<f64>,
}

/// Points probed per grid edge when checking that the orbit is enclosed.
const EDGE_PROBES: usize = 256;

impl ScenarioSpec {
    pub fn dim(&self) -> usize {
        if self.hamiltonian.is_1d() {
            1
        } else {
            2
        }
    }

    pub fn start(&self) -> PhasePoint {
        let mut pt = PhasePoint { x: [0.0; MAX_DIM], p: [0.0; MAX_DIM], dim: self.x0.len() };
        pt.x[..self.x0.len()].copy_from_slice(&self.x0);
        pt.p[..self.p0.len()].copy_from_slice(&self.p0);
        pt
    }

    pub fn n_steps(&self) -> usize {
        libm::round(self.t_final / self.dt) as usize
    }

    pub fn sample_dt(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    /// Check shapes, grid containment of the energy shell with a 5σ_x
    /// margin, and the step size.
    pub fn validate(&self) -> Result<ScenarioCheck> {
        self.hamiltonian.validate()?;
        let d = self.dim();
        if self.x0.len() != d || self.p0.len() != d {
            bail!(Config, "{} needs {d}-component x0 and p0", self.hamiltonian.name());
        }
        if self.grid.extent.len() != d {
            bail!(Config, "{} needs a {d}-axis grid", self.hamiltonian.name());
        }
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_final > 0.0 && self.t_final.is_finite()) {
            bail!(Config, "dt and t_final must be positive and finite");
        }
        if self.sample_every == 0 || self.ensemble_stride == 0 || self.sample_every % self.ensemble_stride != 0 {
            bail!(Config, "sample_every must be a positive multiple of ensemble_stride");
        }
        if self.ensemble_size == 0 {
            bail!(Config, "ensemble_size must be at least 1");
        }
        let grid = self.grid.build()?;
        let energy = self.start().energy(&self.hamiltonian);
        let margin = 5.0 * self.hbar.sigma();
        let inner: Vec<(f64, f64)> = (0..d)
            .map(|k| {
                let ax = grid.axis(k);
                (ax.min + margin, ax.max - ax.dx() - margin)
            })
            .collect();
        for k in 0..d {
            let (lo, hi) = inner[k];
            if !(self.x0[k] > lo && self.x0[k] < hi) {
                bail!(Config, "x0[{k}] = {} is within 5σ_x of the grid edge [{lo:.4}, {hi:.4}]", self.x0[k]);
            }
        }
        if let Some(pot) = self.hamiltonian.potential_1d() {
            for (edge, x) in [("lower", inner[0].0), ("upper", inner[0].1)] {
                if pot.value(x) <= energy {
                    bail!(
                        Config,
                        "the orbit at E = {energy:.6} reaches the {edge} grid edge (V({x:.4}) = {:.6}); widen axis 0",
                        pot.value(x)
                    );
                }
            }
        } else {
            // The energy shell is enclosed when V exceeds E on the whole inner boundary.
            let zero = [0.0; MAX_DIM];
            for k in 0..2 {
                let other = 1 - k;
                for side in [inner[k].0, inner[k].1] {
                    for i in 0..=EDGE_PROBES {
                        let (lo, hi) = inner[other];
                        let mut x = [0.0; MAX_DIM];
                        x[k] = side;
                        x[other] = lo + (hi - lo) * i as f64 / EDGE_PROBES as f64;
                        let v = self.hamiltonian.potential(&x) + self.hamiltonian.kinetic(&zero);
                        if v <= energy {
                            bail!(
                                Config,
                                "the energy shell E = {energy:.6} reaches the grid boundary on axis {k}; widen the grid"
                            );
                        }
                    }
                }
            }
        }
        let period = match self.hamiltonian.potential_1d() {
            Some(pot) => Some(ActionAngle::new(pot, self.x0[0]).period(energy)?),
            None => None,
        };
        let dt_max = period.map(|t| t / 32.0);
        if let Some(m) = dt_max {
            if self.dt > m {
                bail!(Config, "dt = {} exceeds the bound T_c/32 = {m:.6}", self.dt);
            }
        }
        Ok(ScenarioCheck { energy, period, dt_max })
    }

    /// Stepping parameters for the Wigner ensemble, sampled on the same
    /// times as the quantum observables. Snapshot times past the end are
    /// clamped to the last step.
    pub fn ensemble_run(&self, snapshot_times: &[f64]) -> EnsembleRun {
        let dt = self.dt * self.ensemble_stride as f64;
        let n_steps = self.n_steps() / self.ensemble_stride;
        EnsembleRun {
            dt,
            n_steps,
            every: self.sample_every / self.ensemble_stride,
            integrator: self.integrator,
            snapshot_steps: snapshot_times.iter().map(|t| (libm::round(t / dt) as usize).min(n_steps)).collect(),
        }
    }

    pub fn propagator(&self) -> Result<Propagator> {
        let grid = self.grid.build()?;
        Propagator::new(Discretization::new(&self.hamiltonian, grid, self.hbar)?, self.dt, self.order)
    }
}

/// Analytic predictions for 1D scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictions {
    pub energy: f64,
    pub period: f64,
    pub tau: Timescale,
    pub revival: Timescale,
}

pub fn predict(sc: &ScenarioSpec) -> Result<Predictions> {
    let Some(pot) = sc.hamiltonian.potential_1d() else {
        bail!(Usage, "analytic predictions are available for 1D scenarios only");
    };
    let est = ehrenfest_estimate(pot, sc.x0[0], sc.p0[0], sc.hbar)?;
    let revival = predicted_revival_time(pot, sc.x0[0], est.frequencies.energy, sc.hbar)?;
    Ok(Predictions {
        energy: est.frequencies.energy,
        period: 2.0 * core::f64::consts::PI / est.frequencies.omega,
        tau: est.tau,
        revival,
    })
}

/// Quantum propagation alongside the classical trajectory from (x0, p0).
#[derive(Debug, Clone)]
pub struct Correspondence {
    pub quantum: Propagation,
    pub classical: Trajectory,
}

pub fn run_correspondence(sc: &ScenarioSpec, observers: &Observers) -> Result<Correspondence> {
    sc.validate()?;
    let prop = sc.propagator()?;
    let wf = gaussian_packet(prop.discretization().grid, &sc.x0, &sc.p0, sc.hbar)?;
    let quantum = propagate(&wf, &prop, sc.n_steps(), observers)?;
    let classical = integrate_trajectory(sc.start(), &sc.hamiltonian, sc.dt, sc.n_steps(), observers.every, sc.integrator)?;
    Ok(Correspondence { quantum, classical })
}

/// How the quantum/classical gap is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviationMode {
    /// |⟨x⟩ − x_c| and its strict local maxima.
    Absolute,
    /// |⟨x⟩ − x_c|/|x_c| where |x_c| > floor, one peak per masked run.
    Relative { floor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhrenfestMeasurement {
    pub axis: usize,
    pub deviation: TimeSeries,
    pub peaks: SparseSeries,
    pub fit: EnvelopeFit,
}

/// τ from the a(1 − e^{−bt²}) envelope of the deviation along `axis`,
/// fitted over samples with t ≤ `t_max`.
pub fn measure_ehrenfest(run: &Correspondence, axis: usize, mode: DeviationMode, t_max: f64) -> Result<EhrenfestMeasurement> {
    let Some(q) = run.quantum.observables.mean_x.get(axis) else {
        bail!(Usage, "axis {axis} not present in the run");
    };
    let q = q.truncated(t_max);
    let c = run.classical.position(axis).truncated(t_max);
    let deviation = deviation_series(&q, &c)?;
    let peaks = match mode {
        DeviationMode::Absolute => peak_envelope(&deviation)?,
        DeviationMode::Relative { floor } => masked_run_peaks(&relative_deviation(&q, &c, floor)?, 1.5 * c.dt)?,
    };
    let fit = fit_envelope(&peaks)?;
    Ok(EhrenfestMeasurement { axis, deviation, peaks, fit })
}

/// Autocorrelation analysis plus the half-revival phase-space check.
#[derive(Debug, Clone)]
pub struct RevivalMeasurement {
    pub report: RevivalReport,
    pub autocorrelation: ComplexSeries,
    pub half_revival: Option<HalfRevival>,
}

/// Closest approach of the Husimi density to the initial one around T_r/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfRevival {
    pub time: f64,
    pub distance: f64,
}

/// Snapshots per classical period searched around T_r/2.
const HALF_REVIVAL_SAMPLES: usize = 32;

/// Steps within ±T_c of the predicted T_r/2, `HALF_REVIVAL_SAMPLES` per period.
pub fn half_revival_steps(sc: &ScenarioSpec) -> Result<Vec<usize>> {
    let pred = predict(sc)?;
    let Timescale::Finite(tr) = pred.revival else {
        return Ok(Vec::new());
    };
    let stride = ((pred.period / HALF_REVIVAL_SAMPLES as f64) / sc.dt).max(1.0);
    let first = ((0.5 * tr - pred.period) / sc.dt).max(0.0);
    Ok((0..=2 * HALF_REVIVAL_SAMPLES)
        .map(|i| libm::round(first + i as f64 * stride) as usize)
        .filter(|&s| s <= sc.n_steps())
        .collect())
}

/// Revival detection on a propagation that recorded the autocorrelation.
/// Snapshots at [`half_revival_steps`] are compared with the initial Husimi
/// density when a Planck grid is given.
pub fn analyze_revival(
    sc: &ScenarioSpec,
    run: &Propagation,
    initial: &WaveFunction,
    planck: Option<&PlanckGrid>,
) -> Result<RevivalMeasurement> {
    let Some(ac) = run.observables.autocorrelation.clone() else {
        bail!(Usage, "revival analysis needs a propagation that recorded the autocorrelation");
    };
    let pred = predict(sc)?;
    let disc = Discretization::new(&sc.hamiltonian, initial.grid, sc.hbar)?;
    let demodulation = disc.energy(initial) / sc.hbar.get();
    let report = detect_revival(&ac, pred.period, demodulation)?;
    let half_revival = match planck {
        Some(pg) => {
            let steps = half_revival_steps(sc)?;
            let reference = husimi_density(initial, pg)?;
            let mut best: Option<HalfRevival> = None;
            for (t, snap) in &run.snapshots {
                let step = libm::round(t / sc.dt) as usize;
                if !steps.contains(&step) {
                    continue;
                }
                let distance = density_distance(&husimi_density(snap, pg)?, &reference)?;
                if best.is_none_or(|b| distance < b.distance) {
                    best = Some(HalfRevival { time: *t, distance });
                }
            }
            best
        }
        None => None,
    };
    Ok(RevivalMeasurement { report, autocorrelation: ac, half_revival })
}

/// Propagate to `sc.t_final` recording A(t) every `ac_every` steps and analyse it.
pub fn measure_revival(sc: &ScenarioSpec, ac_every: usize, planck: Option<&PlanckGrid>) -> Result<RevivalMeasurement> {
    sc.validate()?;
    let prop = sc.propagator()?;
    let wf = gaussian_packet(prop.discretization().grid, &sc.x0, &sc.p0, sc.hbar)?;
    let n_steps = sc.n_steps();
    let observers = Observers {
        every: n_steps.max(1),
        autocorrelation_every: Some(ac_every.max(1)),
        energy: false,
        snapshot_steps: if planck.is_some() { half_revival_steps(sc)? } else { Vec::new() },
        check_aliasing: true,
    };
    let run = propagate(&wf, &prop, n_steps, &observers)?;
    analyze_revival(sc, &run, &wf, planck)
}

/// Largest |a − b| over samples with t ≤ t_max; the series must share a grid.
pub fn max_gap(a: &TimeSeries, b: &TimeSeries, t_max: f64) -> Result<f64> {
    if !a.same_grid(b) {
        bail!(Usage, "series sampled on different grids");
    }
    Ok(a.iter().zip(&b.values).filter(|((t, _), _)| *t <= t_max).map(|((_, x), y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    let mut v: Vec<f64> = (0..n).map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64)).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}
