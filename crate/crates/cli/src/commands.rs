//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ehrenfest_core::analysis::{
    deviation_series, fit_envelope, log_log_fit, peak_envelope, scaling_fit, EnvelopeFit, LineFit, RevivalReport,
};
use ehrenfest_core::bose::{
    bose_revival, bose_tau, circular_moments, coherent_state, combine_meanfield, meanfield_chunk, meanfield_evolve,
    quantum_evolve_bh, scaling_from_points, stheta_ensemble, stheta_widths, theta_distribution, BoseScan, BoseTauPoint, Dimer,
    MeanFieldRun, MeanFieldState,
};
use ehrenfest_core::classical::{ActionProfile, Timescale};
use ehrenfest_core::ensemble::{combine, evolve_chunk, sample_wigner, EnsembleObservables, EnsembleRun, PhaseEnsemble, CHUNK};
use ehrenfest_core::model::{
    box_ehrenfest_time, box_revival_time, kepler_ehrenfest_ratio, kepler_revival_time, Hamiltonian, HamiltonianSpec, SiInputs,
    HBAR_SI,
};
use ehrenfest_core::phasespace::{density_distance, ensemble_density, husimi_density, PlanckGrid};
use ehrenfest_core::quantum::{gaussian_packet, Observers};
use ehrenfest_core::scenario::{
    analyze_revival, half_revival_steps, max_gap, measure_ehrenfest, measure_revival, predict, run_correspondence, DeviationMode,
    EhrenfestMeasurement, Predictions, ScenarioSpec,
};
use ehrenfest_core::series::TimeSeries;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Config, ConfigError, DeviationKind, ScenarioKind};
use crate::output::{Cell, Manifest, RunDir, Versions};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub quick: bool,
}

/// A loaded configuration together with its provenance.
pub struct Loaded {
    pub config: Config,
    pub file_sha256: String,
    pub hash: String,
}

pub fn load(opts: &Options) -> Result<Loaded> {
    let Some(path) = &opts.config else {
        return Err(ConfigError("--config is required for this command".into()).into());
    };
    let mut config = Config::load(path)?;
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(seed) = opts.seed_override {
        config.ensemble.seed = seed;
        if let Some(b) = &mut config.bose {
            b.seed = seed;
        }
    }
    if opts.quick {
        config.make_quick();
    }
    let hash = config.hash();
    Ok(Loaded { config, file_sha256: format!("{:x}", Sha256::digest(&bytes)), hash })
}

fn out_dir(opts: &Options, loaded: &Loaded) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| Path::new("ehrenfest-out").join(&loaded.hash))
}

/// Run `body` in a fresh output directory and always write the manifest.
fn with_manifest(
    command: &str,
    opts: &Options,
    loaded: &Loaded,
    body: impl FnOnce(&mut RunDir) -> Result<()>,
) -> Result<PathBuf> {
    let root = out_dir(opts, loaded);
    let mut dir = RunDir::create(&root, loaded.hash.clone())?;
    let result = body(&mut dir);
    let cfg = &loaded.config;
    let mut seeds = vec![cfg.ensemble.seed];
    if let Some(b) = &cfg.bose {
        seeds.push(b.seed);
    }
    let manifest = Manifest {
        command: command.to_string(),
        scenario: if cfg.name.is_empty() { format!("{:?}", cfg.scenario).to_lowercase() } else { cfg.name.clone() },
        scenario_hash: loaded.hash.clone(),
        config_sha256: Some(loaded.file_sha256.clone()),
        seeds,
        versions: Versions { ehrenfest_core: ehrenfest_core::VERSION.into(), ehrenfest_cli: env!("CARGO_PKG_VERSION").into() },
        threads: rayon::current_num_threads(),
        quick: opts.quick,
        wall_clock_seconds: 0.0,
        status: if result.is_ok() { "ok".into() } else { "failed".into() },
        error: result.as_ref().err().map(|e| format!("{e:#}")),
        files: Vec::new(),
    };
    dir.finish(manifest)?;
    result.map(|_| root)
}

#[derive(Serialize)]
struct FitReport {
    tau: f64,
    a: f64,
    b: f64,
    residual: f64,
    n_peaks: usize,
    iterations: usize,
}

impl From<&EnvelopeFit> for FitReport {
    fn from(f: &EnvelopeFit) -> Self {
        Self { tau: f.tau, a: f.a, b: f.b, residual: f.residual, n_peaks: f.n_peaks, iterations: f.iterations }
    }
}

#[derive(Serialize)]
struct LineReport {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    log_base: &'static str,
}

impl From<&LineFit> for LineReport {
    fn from(f: &LineFit) -> Self {
        Self { slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, log_base: "e" }
    }
}

#[derive(Serialize)]
struct FractionalReport {
    time: f64,
    strength: f64,
    label: Option<(u32, u32)>,
}

#[derive(Serialize)]
struct RevivalJson {
    t_r: f64,
    strength: f64,
    peak_time: f64,
    detected: bool,
    isochronous: bool,
    classical_period: Option<f64>,
    predicted_t_r: Option<f64>,
    fractional: Vec<FractionalReport>,
    half_revival_time: Option<f64>,
    half_revival_distance: Option<f64>,
}

impl RevivalJson {
    fn new(r: &RevivalReport, predicted: Option<f64>) -> Self {
        Self {
            t_r: r.t_r,
            strength: r.strength,
            peak_time: r.peak_time,
            detected: r.detected,
            isochronous: r.isochronous,
            classical_period: r.spectral.as_ref().map(|s| s.classical_period()),
            predicted_t_r: predicted,
            fractional: r
                .fractional
                .iter()
                .map(|f| FractionalReport { time: f.time, strength: f.strength, label: f.label })
                .collect(),
            half_revival_time: None,
            half_revival_distance: None,
        }
    }
}

fn axis_columns(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|k| format!("{prefix}{k}")).collect()
    }
}

/// Columns `t` followed by each group of per-axis series.
fn series_table(dir: &mut RunDir, name: &str, groups: &[(&str, &[TimeSeries])], extra: &[(&str, &TimeSeries)]) -> Result<()> {
    let Some(first) = groups.first().and_then(|g| g.1.first()) else {
        return Ok(());
    };
    let mut columns = vec!["t".to_string()];
    for (prefix, series) in groups {
        columns.extend(axis_columns(prefix, series.len()));
    }
    columns.extend(extra.iter().map(|e| e.0.to_string()));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let rows = (0..first.len()).map(|i| {
        let mut row = vec![first.time(i)];
        for (_, series) in groups {
            row.extend(series.iter().map(|s| s.values[i]));
        }
        row.extend(extra.iter().map(|e| e.1.values[i]));
        row
    });
    dir.csv(name, &cols, rows)
}

fn single_series(dir: &mut RunDir, name: &str, s: &TimeSeries) -> Result<()> {
    dir.csv(name, &["t", "value"], s.iter().map(|(t, v)| vec![t, v]))
}

/// Evolve the ensemble in chunks on the rayon pool; chunk order fixes the
/// reduction order, so the result does not depend on the thread count.
pub fn parallel_ensemble<H: Hamiltonian + Sync + ?Sized>(
    ens: &PhaseEnsemble,
    ham: &H,
    run: &EnsembleRun,
) -> Result<EnsembleObservables> {
    let mut points = ens.points.clone();
    let chunks = points.par_chunks_mut(CHUNK).map(|c| evolve_chunk(c, ham, run)).collect::<ehrenfest_core::Result<Vec<_>>>()?;
    Ok(combine(chunks, ham.dim(), run)?)
}

fn deviation_mode(cfg: &Config) -> DeviationMode {
    match cfg.analysis.deviation {
        DeviationKind::Absolute => DeviationMode::Absolute,
        DeviationKind::Relative => DeviationMode::Relative { floor: cfg.analysis.relative_floor },
    }
}

fn fit_window(cfg: &Config, sc: &ScenarioSpec, pred: Option<&Predictions>) -> Result<f64> {
    match (cfg.analysis.fit_over_tau, pred.and_then(|p| p.tau.finite())) {
        (None, _) => Ok(sc.t_final),
        (Some(k), Some(tau)) => Ok((k * tau).min(sc.t_final)),
        (Some(_), None) => Err(ConfigError("analysis.fit_over_tau: no finite predicted τ for this scenario".into()).into()),
    }
}

fn planck_grid(cfg: &Config, sc: &ScenarioSpec) -> Result<Option<PlanckGrid>> {
    let Some(ps) = &cfg.analysis.phase_space else {
        return Ok(None);
    };
    if sc.dim() != 1 {
        return Err(ConfigError("analysis.phase_space: only available for 1D scenarios".into()).into());
    }
    Ok(Some(PlanckGrid::covering((ps.x[0], ps.x[1]), (ps.p[0], ps.p[1]), sc.hbar).context("analysis.phase_space")?))
}

fn time_label(t: f64) -> String {
    format!("{t}")
}

#[derive(Serialize)]
struct RunSummary {
    energy: f64,
    period: Option<f64>,
    dt: f64,
    n_steps: usize,
    sample_dt: f64,
    predicted_tau: Option<f64>,
    predicted_revival: Option<f64>,
    classical_max_energy_drift: f64,
    quantum_max_energy_drift: Option<f64>,
    max_norm_error: f64,
    max_edge_amplitude: f64,
    ensemble_size: usize,
    ensemble_max_energy_drift: Option<f64>,
}

#[derive(Serialize)]
struct PhaseSnapshotReport {
    time: f64,
    husimi_vs_initial: Option<f64>,
    husimi_vs_ensemble: Option<f64>,
    husimi_maxima: Option<usize>,
}

#[derive(Serialize)]
struct Comparison {
    until: f64,
    axis: usize,
    quantum_vs_classical: f64,
    quantum_vs_ensemble: Option<f64>,
}

#[derive(Serialize)]
struct EhrenfestJson {
    axis: usize,
    deviation: &'static str,
    fit_window: f64,
    predicted_tau: Option<f64>,
    fit: FitReport,
    inputs: Vec<(String, Option<String>)>,
}

pub fn cmd_run(opts: &Options) -> Result<PathBuf> {
    let loaded = load(opts)?;
    with_manifest("run", opts, &loaded, |dir| match loaded.config.scenario {
        ScenarioKind::Bose => run_bose(&loaded.config, dir),
        _ => run_packet(&loaded.config, dir),
    })
}

fn run_packet(cfg: &Config, dir: &mut RunDir) -> Result<()> {
    let sc = cfg.scenario(None)?;
    let check = sc.validate()?;
    dir.hbar = Some(sc.hbar.get());
    let pred = if sc.dim() == 1 { Some(predict(&sc)?) } else { None };
    let planck = planck_grid(cfg, &sc)?;
    let ps = cfg.analysis.phase_space.as_ref();
    let ps_times: Vec<f64> = ps.map(|p| p.times.clone()).unwrap_or_default();
    let half = ps.is_some_and(|p| p.half_revival) && cfg.analysis.revival;

    let step_of = |t: f64| ((t / sc.dt).round() as usize).min(sc.n_steps());
    let mut snapshot_steps: Vec<usize> = ps_times.iter().map(|&t| step_of(t)).collect();
    if half {
        snapshot_steps.extend(half_revival_steps(&sc)?);
    }
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();
    let observers = Observers {
        every: sc.sample_every,
        autocorrelation_every: cfg.analysis.revival.then_some(cfg.analysis.autocorrelation_every),
        energy: true,
        snapshot_steps,
        check_aliasing: true,
    };
    let corr = run_correspondence(&sc, &observers)?;
    let q = &corr.quantum.observables;
    let dim = sc.dim();
    let mut extra: Vec<(&str, &TimeSeries)> = vec![("norm", &q.norm)];
    if let Some(e) = &q.energy {
        extra.push(("energy", e));
    }
    series_table(dir, "quantum.csv", &[("mean_x", &q.mean_x), ("mean_p", &q.mean_p), ("var_x", &q.var_x)], &extra)?;
    let cx: Vec<TimeSeries> = (0..dim).map(|k| corr.classical.position(k)).collect();
    let cp: Vec<TimeSeries> = (0..dim).map(|k| corr.classical.momentum(k)).collect();
    series_table(dir, "classical.csv", &[("x", &cx), ("p", &cp)], &[])?;

    let mut ensemble_obs = None;
    if cfg.ensemble.size > 0 {
        let mut times = cfg.ensemble.snapshot_times.clone();
        times.extend(&ps_times);
        let run = sc.ensemble_run(&times);
        let ens = sample_wigner(&sc.x0, &sc.p0, sc.hbar, cfg.ensemble.size, cfg.ensemble.seed)?;
        let obs = parallel_ensemble(&ens, &sc.hamiltonian, &run)?;
        series_table(
            dir,
            "ensemble.csv",
            &[("mean_x", &obs.mean_x), ("var_x", &obs.var_x), ("mean_p", &obs.mean_p), ("sem_x", &obs.sem_x)],
            &[],
        )?;
        for (t, (_, cloud)) in cfg.ensemble.snapshot_times.iter().zip(&obs.snapshots) {
            dir.point_cloud(&format!("cloud_t{}.bin", time_label(*t)), *t, cloud)?;
        }
        ensemble_obs = Some((obs, times));
    }

    if let Some(pot) = sc.hamiltonian.potential_1d() {
        let e = check.energy;
        if e != 0.0 {
            let energies: Vec<f64> = (0..33).map(|k| e * (0.5 + k as f64 / 32.0)).collect();
            let energies = if e > 0.0 { energies } else { energies.into_iter().rev().collect() };
            if let Ok(profile) = ActionProfile::build(pot, sc.x0[0], &energies) {
                let rows = (0..profile.energy.len())
                    .map(|i| vec![profile.energy[i], profile.action[i], profile.omega[i], profile.omega_prime[i]]);
                dir.csv("action_profile.csv", &["E", "I", "omega", "omega_prime"], rows)?;
            }
        }
    }

    let initial = gaussian_packet(sc.grid.build()?, &sc.x0, &sc.p0, sc.hbar)?;
    if let Some(pg) = &planck {
        let reference = husimi_density(&initial, pg)?;
        let mut reports = Vec::new();
        for &t in &ps_times {
            let step = step_of(t);
            let label = time_label(t);
            let snap = corr.quantum.snapshots.iter().find(|(ts, _)| (ts / sc.dt).round() as usize == step);
            let husimi = match snap {
                Some((_, wf)) => Some(husimi_density(wf, pg)?),
                None => None,
            };
            if let Some(h) = &husimi {
                dir.density(&format!("husimi_t{label}"), h, t, "husimi")?;
            }
            let mut vs_ensemble = None;
            if let Some((obs, times)) = &ensemble_obs {
                if let Some(i) = times.iter().position(|&x| x == t) {
                    let cloud = &obs.snapshots[i].1;
                    let dens = ensemble_density(cloud, pg)?;
                    dir.density(&format!("ensemble_t{label}"), &dens, t, "ensemble")?;
                    if let Some(h) = &husimi {
                        vs_ensemble = Some(density_distance(h, &dens)?);
                    }
                }
            }
            reports.push(PhaseSnapshotReport {
                time: t,
                husimi_vs_initial: husimi.as_ref().map(|h| density_distance(h, &reference)).transpose()?,
                husimi_vs_ensemble: vs_ensemble,
                husimi_maxima: husimi.as_ref().map(|h| h.local_maxima(1e-3).len()),
            });
        }
        dir.json("phase_space.json", &reports)?;
    }

    if let Some(until) = cfg.analysis.compare_until {
        let axis = cfg.analysis.axis;
        let qx = q.mean_x.get(axis).context("analysis.axis: out of range")?;
        let comparison = Comparison {
            until,
            axis,
            quantum_vs_classical: max_gap(&cx[axis], qx, until)?,
            quantum_vs_ensemble: ensemble_obs.as_ref().map(|(obs, _)| max_gap(&obs.mean_x[axis], qx, until)).transpose()?,
        };
        dir.json("comparison.json", &comparison)?;
    }

    let energy_drift = q.energy.as_ref().map(|e| {
        let e0 = e.values[0];
        e.values.iter().map(|v| (v - e0).abs() / e0.abs().max(1e-300)).fold(0.0, f64::max)
    });
    let summary = RunSummary {
        energy: check.energy,
        period: check.period,
        dt: sc.dt,
        n_steps: sc.n_steps(),
        sample_dt: sc.sample_dt(),
        predicted_tau: pred.map(|p| p.tau.as_f64()),
        predicted_revival: pred.map(|p| p.revival.as_f64()),
        classical_max_energy_drift: corr.classical.max_energy_drift,
        quantum_max_energy_drift: energy_drift,
        max_norm_error: q.norm.values.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max),
        max_edge_amplitude: corr.quantum.max_edge_amplitude,
        ensemble_size: cfg.ensemble.size,
        ensemble_max_energy_drift: ensemble_obs.as_ref().map(|(o, _)| o.max_energy_drift),
    };
    dir.json("summary.json", &summary)?;

    if cfg.analysis.revival {
        let m = analyze_revival(&sc, &corr.quantum, &initial, if half { planck.as_ref() } else { None })?;
        let ac = &m.autocorrelation;
        dir.csv(
            "autocorrelation.csv",
            &["t", "re", "im"],
            ac.values.iter().enumerate().map(|(i, z)| vec![ac.time(i), z.re, z.im]),
        )?;
        let mut report = RevivalJson::new(&m.report, pred.and_then(|p| p.revival.finite()));
        report.half_revival_time = m.half_revival.map(|h| h.time);
        report.half_revival_distance = m.half_revival.map(|h| h.distance);
        dir.json("revival.json", &report)?;
    }

    if cfg.analysis.ehrenfest {
        let window = fit_window(cfg, &sc, pred.as_ref())?;
        let m = measure_ehrenfest(&corr, cfg.analysis.axis, deviation_mode(cfg), window)?;
        write_ehrenfest(dir, cfg, &m, window, pred.and_then(|p| p.tau.finite()))?;
    }
    Ok(())
}

fn write_ehrenfest(dir: &mut RunDir, cfg: &Config, m: &EhrenfestMeasurement, window: f64, predicted: Option<f64>) -> Result<()> {
    single_series(dir, "deviation.csv", &m.deviation)?;
    dir.csv("peaks.csv", &["t", "value"], m.peaks.t.iter().zip(&m.peaks.v).map(|(t, v)| vec![*t, *v]))?;
    let report = EhrenfestJson {
        axis: m.axis,
        deviation: match cfg.analysis.deviation {
            DeviationKind::Absolute => "absolute",
            DeviationKind::Relative => "relative",
        },
        fit_window: window,
        predicted_tau: predicted,
        fit: FitReport::from(&m.fit),
        inputs: ["quantum.csv", "classical.csv"].iter().map(|f| (f.to_string(), dir.sha256(f))).collect(),
    };
    dir.json("ehrenfest.json", &report)
}

fn bose_modes(cfg: &Config) -> Result<(Complex64, Complex64)> {
    let b = cfg.bose();
    if !(0.0..=1.0).contains(&b.beta_sq) {
        return Err(ConfigError(format!("bose.beta_sq: must lie in [0, 1], found {}", b.beta_sq)).into());
    }
    Ok((Complex64::new((1.0 - b.beta_sq).sqrt(), 0.0), Complex64::from_polar(b.beta_sq.sqrt(), b.theta)))
}

fn bose_scan(cfg: &Config) -> BoseScan {
    let b = cfg.bose();
    BoseScan { dt: b.dt, substeps: b.substeps, window: b.window, revival_window: b.revival_window }
}

#[derive(Serialize)]
struct SThetaReport {
    n: usize,
    samples: usize,
    seed: u64,
    delta_s: f64,
    delta_theta: f64,
    product: f64,
    target: f64,
    sample_delta_s: f64,
    sample_delta_theta: f64,
    fourier_delta_theta: f64,
}

#[derive(Serialize)]
struct BoseRunReport {
    n: usize,
    c_over_nu: f64,
    beta_sq: f64,
    theta: f64,
    fit: Option<FitReport>,
    quantum_max_norm_error: f64,
    meanfield_max_energy_drift: f64,
}

fn run_bose(cfg: &Config, dir: &mut RunDir) -> Result<()> {
    let b = cfg.bose();
    let (alpha, beta) = bose_modes(cfg)?;
    let dimer = Dimer::from_ratio(b.c_over_nu).context("bose.c_over_nu")?;
    let scan = bose_scan(cfg);
    dir.hbar = Some(1.0 / b.n as f64);
    let ham = dimer.hamiltonian(b.n)?;
    let st = coherent_state(alpha, beta, b.n)?;
    let samples = (scan.window * (b.n as f64).sqrt() / scan.dt) as usize + 1;
    let quantum = quantum_evolve_bh(&ham, &st, scan.dt, samples)?;
    let run = MeanFieldRun::sampled(scan.dt, samples, scan.substeps).context("bose")?;
    let mf = meanfield_evolve(&dimer, MeanFieldState::new(alpha, beta)?, &run)?;
    let deviation = deviation_series(&quantum.s, &mf.s)?;
    let mut extra: Vec<(&str, &TimeSeries)> = vec![("quantum_s", &quantum.s), ("meanfield_s", &mf.s), ("deviation", &deviation)];
    let ensemble_s;
    if b.ensemble_size > 0 {
        let ens = stheta_ensemble(alpha, beta, b.n, b.ensemble_size, b.seed)?;
        let chunks = ens
            .samples
            .par_chunks(CHUNK)
            .map(|c| meanfield_chunk(&dimer, c, &run))
            .collect::<ehrenfest_core::Result<Vec<_>>>()?;
        ensemble_s = combine_meanfield(&chunks, ens.samples.len(), &run)?;
        extra.push(("ensemble_s", &ensemble_s));
        let (ds, dth) = stheta_widths(b.beta_sq, b.n)?;
        let ((_, sd_s), (_, sd_th)) = ens.moments();
        dir.json(
            "stheta.json",
            &SThetaReport {
                n: b.n,
                samples: b.ensemble_size,
                seed: b.seed,
                delta_s: ds,
                delta_theta: dth,
                product: ds * dth,
                target: 1.0 / (2.0 * b.n as f64),
                sample_delta_s: sd_s,
                sample_delta_theta: sd_th,
                fourier_delta_theta: circular_moments(&theta_distribution(&st)).1,
            },
        )?;
    }
    let first = extra[0].1;
    let cols: Vec<&str> = std::iter::once("t").chain(extra.iter().map(|e| e.0)).collect();
    dir.csv(
        "bose.csv",
        &cols,
        (0..first.len()).map(|i| std::iter::once(first.time(i)).chain(extra.iter().map(|e| e.1.values[i])).collect()),
    )?;

    if b.revival {
        let report = bose_revival(&dimer, b.n, alpha, beta, &scan)?;
        dir.json("revival.json", &RevivalJson::new(&report, None))?;
    }
    let fit = peak_envelope(&deviation).and_then(|p| fit_envelope(&p));
    dir.json(
        "bose.json",
        &BoseRunReport {
            n: b.n,
            c_over_nu: b.c_over_nu,
            beta_sq: b.beta_sq,
            theta: b.theta,
            fit: fit.as_ref().ok().map(FitReport::from),
            quantum_max_norm_error: quantum.max_norm_error,
            meanfield_max_energy_drift: mf.max_energy_drift,
        },
    )?;
    fit.map(|_| ()).map_err(Into::into)
}

pub const MIN_SWEEP_POINTS: usize = 4;

fn too_few(n: usize, what: &str) -> anyhow::Error {
    ehrenfest_core::Error::Usage(format!("a sweep needs at least {MIN_SWEEP_POINTS} {what} values for the scaling fit, got {n}"))
        .into()
}

#[derive(Serialize)]
struct SweepJson<P: Serialize> {
    points: Vec<P>,
    fit: Option<LineReport>,
    fit_error: Option<String>,
    revival_fit: Option<LineReport>,
}

#[derive(Serialize)]
struct PacketPoint {
    hbar: f64,
    tau: Option<f64>,
    predicted_tau: Option<f64>,
    fit: Option<FitReport>,
    error: Option<String>,
}

pub fn cmd_sweep(opts: &Options) -> Result<PathBuf> {
    let loaded = load(opts)?;
    with_manifest("sweep", opts, &loaded, |dir| match loaded.config.scenario {
        ScenarioKind::Bose => sweep_bose(&loaded.config, dir),
        _ => sweep_packet(&loaded.config, dir),
    })
}

fn packet_tau(cfg: &Config, hbar: f64) -> Result<(EhrenfestMeasurement, Option<Predictions>)> {
    let sc = cfg.scenario(Some(hbar))?;
    let pred = if sc.dim() == 1 { Some(predict(&sc)?) } else { None };
    let observers = Observers {
        every: sc.sample_every,
        autocorrelation_every: None,
        energy: false,
        snapshot_steps: Vec::new(),
        check_aliasing: true,
    };
    let corr = run_correspondence(&sc, &observers)?;
    let window = fit_window(cfg, &sc, pred.as_ref())?;
    Ok((measure_ehrenfest(&corr, cfg.analysis.axis, deviation_mode(cfg), window)?, pred))
}

fn sweep_packet(cfg: &Config, dir: &mut RunDir) -> Result<()> {
    let hbars = cfg.hbar_values()?;
    if cfg.sweep.is_none() || hbars.len() < MIN_SWEEP_POINTS {
        return Err(too_few(if cfg.sweep.is_none() { 1 } else { hbars.len() }, "ħ_ε"));
    }
    let results: Vec<Result<(EhrenfestMeasurement, Option<Predictions>)>> =
        hbars.par_iter().map(|&h| packet_tau(cfg, h)).collect();
    let points: Vec<PacketPoint> = hbars
        .iter()
        .zip(&results)
        .map(|(&hbar, r)| match r {
            Ok((m, pred)) => PacketPoint {
                hbar,
                tau: Some(m.fit.tau),
                predicted_tau: pred.and_then(|p| p.tau.finite()),
                fit: Some(FitReport::from(&m.fit)),
                error: None,
            },
            Err(e) => PacketPoint { hbar, tau: None, predicted_tau: None, fit: None, error: Some(format!("{e:#}")) },
        })
        .collect();
    let rows = points.iter().map(|p| {
        vec![
            p.hbar.into(),
            (1.0 / p.hbar).into(),
            p.tau.into(),
            p.predicted_tau.into(),
            p.fit.as_ref().map(|f| f.residual).into(),
            p.fit.as_ref().map_or(Cell::Empty, |f| Cell::Num(f.n_peaks as f64)),
            Cell::Text(if p.error.is_some() { "failed".into() } else { "ok".into() }),
        ]
    });
    dir.csv_cells("sweep.csv", &["hbar", "inv_hbar", "tau", "tau_predicted", "residual", "n_peaks", "status"], rows)?;
    let survivors: Vec<(f64, f64)> = points.iter().filter_map(|p| p.tau.map(|t| (p.hbar, t))).collect();
    let fit = scaling_fit(&survivors);
    dir.json(
        "sweep.json",
        &SweepJson {
            fit: fit.as_ref().ok().map(LineReport::from),
            fit_error: fit.as_ref().err().map(|e| e.to_string()),
            points,
            revival_fit: None,
        },
    )?;
    fit.map(|_| ()).map_err(Into::into)
}

#[derive(Serialize)]
struct BosePoint {
    n: usize,
    tau: Option<f64>,
    fit: Option<FitReport>,
    t_r: Option<f64>,
    error: Option<String>,
}

fn sweep_bose(cfg: &Config, dir: &mut RunDir) -> Result<()> {
    let Some(ns) = cfg.sweep.as_ref().and_then(|s| s.n.clone()) else {
        return Err(too_few(1, "N"));
    };
    if ns.len() < MIN_SWEEP_POINTS {
        return Err(too_few(ns.len(), "N"));
    }
    let b = cfg.bose();
    let (alpha, beta) = bose_modes(cfg)?;
    let dimer = Dimer::from_ratio(b.c_over_nu).context("bose.c_over_nu")?;
    let scan = bose_scan(cfg);
    let results: Vec<(ehrenfest_core::Result<BoseTauPoint>, Option<ehrenfest_core::Result<RevivalReport>>)> = ns
        .par_iter()
        .map(|&n| (bose_tau(&dimer, n, alpha, beta, &scan), b.revival.then(|| bose_revival(&dimer, n, alpha, beta, &scan))))
        .collect();
    let mut points = Vec::new();
    let mut taus = Vec::new();
    for (&n, (tau, rev)) in ns.iter().zip(results) {
        let t_r = rev.as_ref().and_then(|r| r.as_ref().ok()).filter(|r| r.detected).map(|r| r.t_r);
        let mut error = tau.as_ref().err().map(|e| e.to_string());
        if let Some(Err(e)) = &rev {
            error.get_or_insert_with(|| e.to_string());
        }
        points.push(BosePoint {
            n,
            tau: tau.as_ref().ok().map(|p| p.fit.tau),
            fit: tau.as_ref().ok().map(|p| FitReport::from(&p.fit)),
            t_r,
            error,
        });
        taus.push((n, tau));
    }
    let rows = points.iter().map(|p| {
        vec![
            Cell::Num(p.n as f64),
            (1.0 / p.n as f64).into(),
            p.tau.into(),
            p.fit.as_ref().map(|f| f.residual).into(),
            p.t_r.into(),
            p.t_r.map(|t| t / p.n as f64).into(),
            Cell::Text(if p.error.is_some() { "failed".into() } else { "ok".into() }),
        ]
    });
    dir.csv_cells("sweep.csv", &["n", "inv_n", "tau", "residual", "t_r", "t_r_over_n", "status"], rows)?;
    let fit = scaling_from_points(&taus);
    let (rn, rt): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.t_r.map(|t| (p.n as f64, t))).unzip();
    let revival_fit = if rn.len() >= 2 { log_log_fit(&rn, &rt).ok() } else { None };
    dir.json(
        "sweep.json",
        &SweepJson {
            fit: fit.as_ref().ok().map(LineReport::from),
            fit_error: fit.as_ref().err().map(|e| e.to_string()),
            revival_fit: revival_fit.as_ref().map(LineReport::from),
            points,
        },
    )?;
    fit.map(|_| ()).map_err(Into::into)
}

#[derive(Serialize)]
struct DiagramPoint {
    hbar: f64,
    tau_predicted: f64,
    tau_measured: Option<f64>,
    revival_predicted: f64,
    revival_measured: Option<f64>,
    error: Option<String>,
}

pub fn cmd_diagram(opts: &Options) -> Result<PathBuf> {
    let loaded = load(opts)?;
    let cfg = &loaded.config;
    let init = cfg.initial.as_ref();
    if cfg.scenario != ScenarioKind::Quartic || init.is_none_or(|i| i.x0 != [0.0] || i.p0 != [2.0]) {
        return Err(
            ehrenfest_core::Error::Usage("diagram needs the quartic scenario with x0 = [0.0] and p0 = [2.0]".into()).into()
        );
    }
    with_manifest("diagram", opts, &loaded, |dir| diagram(cfg, dir))
}

fn diagram_point(cfg: &Config, hbar: f64) -> Result<DiagramPoint> {
    let sc = cfg.scenario(Some(hbar))?;
    let pred = predict(&sc)?;
    let (Timescale::Finite(tau_p), Timescale::Finite(tr_p)) = (pred.tau, pred.revival) else {
        anyhow::bail!("quartic predictions should be finite");
    };
    let mut point = DiagramPoint {
        hbar,
        tau_predicted: tau_p,
        tau_measured: None,
        revival_predicted: tr_p,
        revival_measured: None,
        error: None,
    };
    match packet_tau(cfg, hbar) {
        Ok((m, _)) => point.tau_measured = Some(m.fit.tau),
        Err(e) => point.error = Some(format!("{e:#}")),
    }
    if cfg.analysis.revival {
        let long = ScenarioSpec { t_final: 1.15 * tr_p, ..sc };
        match measure_revival(&long, cfg.analysis.autocorrelation_every, None) {
            Ok(m) if m.report.detected => point.revival_measured = Some(m.report.t_r),
            Ok(_) => {
                point.error.get_or_insert_with(|| "no revival detected".into());
            }
            Err(e) => {
                point.error.get_or_insert_with(|| format!("{e:#}"));
            }
        }
    }
    Ok(point)
}

fn diagram(cfg: &Config, dir: &mut RunDir) -> Result<()> {
    let hbars = cfg.hbar_values()?;
    let points = hbars.par_iter().map(|&h| diagram_point(cfg, h)).collect::<Result<Vec<_>>>()?;
    let rows = points.iter().map(|p| {
        vec![
            p.hbar.into(),
            (1.0 / p.hbar).into(),
            p.tau_predicted.into(),
            p.tau_measured.into(),
            p.revival_predicted.into(),
            p.revival_measured.into(),
            Cell::Text(if p.error.is_some() { "partial".into() } else { "ok".into() }),
        ]
    });
    dir.csv_cells(
        "diagram.csv",
        &["hbar", "inv_hbar", "tau_predicted", "tau_measured", "revival_predicted", "revival_measured", "status"],
        rows,
    )?;
    let mut regions = Vec::new();
    for p in &points {
        let tau = p.tau_measured.unwrap_or(p.tau_predicted);
        let tr = p.revival_measured.unwrap_or(p.revival_predicted);
        let inv = Cell::Num(1.0 / p.hbar);
        regions.push(vec![inv.clone(), Cell::Text("classical".into()), 0.0.into(), tau.into()]);
        regions.push(vec![inv.clone(), Cell::Text("classical_ensemble".into()), tau.into(), tr.into()]);
        regions.push(vec![inv, Cell::Text("quantum".into()), tr.into(), Cell::Empty]);
    }
    dir.csv_cells("regions.csv", &["inv_hbar", "region", "t_from", "t_to"], regions)?;
    dir.json("diagram.json", &points)
}

/// One row of the closed-form table.
#[derive(Debug, Clone, Serialize)]
pub struct ExampleRow {
    pub system: &'static str,
    pub tau_over_period: f64,
    pub revival_over_period: f64,
    pub period_seconds: Option<f64>,
    pub note: &'static str,
}

pub fn example_rows() -> Result<Vec<ExampleRow>> {
    let ball = SiInputs { mass: 1e-3, length: 1.0, speed: 1.0 };
    let atom = SiInputs { mass: 1.5e-25, length: 1e-7, speed: 1e-3 };
    let earth_l = 2.7e39;
    let b = box_ehrenfest_time(&ball)?;
    let a = box_ehrenfest_time(&atom)?;
    Ok(vec![
        ExampleRow {
            system: "ball in box",
            tau_over_period: b.over_period,
            revival_over_period: box_revival_time(&ball)?,
            period_seconds: Some(b.period),
            note: "1 g, 1 m, 1 m/s",
        },
        ExampleRow {
            system: "cold atom in box",
            tau_over_period: a.over_period,
            revival_over_period: box_revival_time(&atom)?,
            period_seconds: Some(a.period),
            note: "1.5e-25 kg, 100 nm, 1 mm/s",
        },
        ExampleRow {
            system: "sun-earth",
            tau_over_period: kepler_ehrenfest_ratio(earth_l, 0.0)?,
            revival_over_period: kepler_revival_time(earth_l, 0.0)?,
            period_seconds: Some(ehrenfest_core::model::YEAR_SI),
            note: "L = 2.7e39 J s, circular orbit; T_c = 1 year",
        },
        ExampleRow {
            system: "hydrogen",
            tau_over_period: kepler_ehrenfest_ratio(HBAR_SI, 0.0)?,
            revival_over_period: kepler_revival_time(HBAR_SI, 0.0)?,
            period_seconds: None,
            note: "L = hbar, ground state",
        },
    ])
}

pub fn cmd_examples(opts: &Options) -> Result<String> {
    let rows = example_rows()?;
    let mut text = format!("{:<18} {:>12} {:>12}  {}\n", "system", "tau/T_c", "T_r/T_c", "inputs");
    for r in &rows {
        text.push_str(&format!("{:<18} {:>12.3e} {:>12.3e}  {}\n", r.system, r.tau_over_period, r.revival_over_period, r.note));
    }
    if let Some(out) = &opts.out {
        let mut dir = RunDir::create(out, "examples".into())?;
        let cells = rows.iter().map(|r| {
            vec![Cell::Text(r.system.into()), r.tau_over_period.into(), r.revival_over_period.into(), r.period_seconds.into()]
        });
        dir.csv_cells("examples.csv", &["system", "tau_over_period", "revival_over_period", "period_seconds"], cells)?;
        dir.json("examples.json", &rows)?;
        dir.finish(Manifest {
            command: "examples".into(),
            scenario: "closed-form".into(),
            scenario_hash: "examples".into(),
            config_sha256: None,
            seeds: Vec::new(),
            versions: Versions {
                ehrenfest_core: ehrenfest_core::VERSION.into(),
                ehrenfest_cli: env!("CARGO_PKG_VERSION").into(),
            },
            threads: rayon::current_num_threads(),
            quick: opts.quick,
            wall_clock_seconds: 0.0,
            status: "ok".into(),
            error: None,
            files: Vec::new(),
        })?;
    }
    Ok(text)
}

/// Lint a configuration without running it.
pub fn cmd_validate(opts: &Options) -> Result<String> {
    let loaded = load(opts)?;
    let cfg = &loaded.config;
    let mut text = format!("scenario {} ({:?})\n", loaded.hash, cfg.scenario);
    if cfg.scenario == ScenarioKind::Bose {
        let b = cfg.bose();
        bose_modes(cfg)?;
        Dimer::from_ratio(b.c_over_nu).context("bose.c_over_nu")?;
        let ns = cfg.sweep.as_ref().and_then(|s| s.n.clone()).unwrap_or_else(|| vec![b.n]);
        for n in ns {
            Dimer::from_ratio(b.c_over_nu)?.hamiltonian(n)?;
            text.push_str(&format!("N = {n}: fit window {:.1}, dim {}\n", b.window * (n as f64).sqrt(), n + 1));
        }
        return Ok(text);
    }
    for h in cfg.hbar_values()? {
        let sc = cfg.scenario(Some(h))?;
        let check = sc.validate()?;
        planck_grid(cfg, &sc)?;
        text.push_str(&format!("hbar = {h}: E = {:.6}, dt = {:.4e}, steps = {}", check.energy, sc.dt, sc.n_steps()));
        if let HamiltonianSpec::Toda2D = sc.hamiltonian {
            text.push('\n');
            continue;
        }
        let pred = predict(&sc)?;
        text.push_str(&format!(
            ", T_c = {:.6}, tau = {:.4}, T_r = {:.4}\n",
            pred.period,
            pred.tau.as_f64(),
            pred.revival.as_f64()
        ));
    }
    Ok(text)
}
