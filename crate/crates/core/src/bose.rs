//! Two-site Bose-Hubbard dimer: exact Fock-space dynamics, the mean-field
//! limit, the (s, θ) ensemble built from a coherent state, and the N^{1/2}
//! breakdown scaling. Time is in units with ℏ = 1; 1/N takes the role of ℏ.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::{detect_revival, fit_envelope, log_log_fit, peak_envelope, EnvelopeFit, LineFit, RevivalReport};
use crate::classical::{Integrator, DRIFT_ABORT};
use crate::ensemble::CHUNK;
use crate::error::{bail, Error, Result};
use crate::series::{ComplexSeries, TimeSeries};

const NORM_TOL: f64 = 1e-10;

/// Interaction `c` and tunnelling `nu`; ν sets the energy unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimer {
    pub c: f64,
    pub nu: f64,
}

impl Dimer {
    pub fn new(c: f64, nu: f64) -> Result<Self> {
        if !(c.is_finite() && nu.is_finite() && nu > 0.0) {
            bail!(Config, "dimer needs finite c and ν > 0, got c = {c}, ν = {nu}");
        }
        Ok(Self { c, nu })
    }

    pub fn from_ratio(c_over_nu: f64) -> Result<Self> {
        Self::new(c_over_nu, 1.0)
    }

    pub fn hamiltonian(&self, n: usize) -> Result<BoseHubbard> {
        BoseHubbard::new(n, *self)
    }

    /// H_mf = −(ν/2)(a*b + ab*) + (c/2)(|a|⁴ + |b|⁴).
    pub fn meanfield_energy(&self, st: &MeanFieldState) -> f64 {
        let (a2, b2) = (st.a.norm_sqr(), st.b.norm_sqr());
        -self.nu * (st.a.conj() * st.b).re + 0.5 * self.c * (a2 * a2 + b2 * b2)
    }
}

/// Ĥ over Fock states |N−n, n⟩, n = 0…N (n counts particles in mode b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoseHubbard {
    pub n: usize,
    pub dimer: Dimer,
}

impl BoseHubbard {
    pub fn new(n: usize, dimer: Dimer) -> Result<Self> {
        if n == 0 {
            bail!(Config, "particle number must be at least 1");
        }
        Ok(Self { n, dimer })
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// (c/2N)[n(n−1) + (N−n)(N−n−1)].
    pub fn diagonal(&self) -> Vec<f64> {
        let nn = self.n as f64;
        (0..=self.n)
            .map(|k| {
                let (b, a) = (k as f64, nn - k as f64);
                self.dimer.c / (2.0 * nn) * (b * (b - 1.0) + a * (a - 1.0))
            })
            .collect()
    }

    /// −(ν/2)√((n+1)(N−n)) between n and n+1.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let nn = self.n as f64;
        (0..self.n).map(|k| -0.5 * self.dimer.nu * libm::sqrt((k as f64 + 1.0) * (nn - k as f64))).collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (k, d) in self.diagonal().into_iter().enumerate() {
            m[(k, k)] = d;
        }
        for (k, e) in self.off_diagonal().into_iter().enumerate() {
            m[(k, k + 1)] = e;
            m[(k + 1, k)] = e;
        }
        m
    }

    pub fn expectation(&self, st: &FockState) -> f64 {
        let (d, e) = (self.diagonal(), self.off_diagonal());
        let mut acc = 0.0;
        for k in 0..self.dim() {
            acc += d[k] * st.amps[k].norm_sqr();
            if k < self.n {
                acc += 2.0 * e[k] * (st.amps[k].conj() * st.amps[k + 1]).re;
            }
        }
        acc
    }

    pub fn diagonalize(&self) -> BoseSpectrum {
        let eig = SymmetricEigen::new(self.matrix());
        BoseSpectrum { n: self.n, energies: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
    }
}

/// Amplitudes over |N−n, n⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub n: usize,
    pub amps: Vec<Complex64>,
}

impl FockState {
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ⟨b†b⟩/N.
    pub fn mean_s(&self) -> f64 {
        self.amps.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum::<f64>() / self.n as f64
    }

    pub fn var_s(&self) -> f64 {
        let m = self.mean_s();
        let nn = self.n as f64;
        self.amps.iter().enumerate().map(|(k, z)| (k as f64 / nn - m).powi(2) * z.norm_sqr()).sum()
    }
}

fn check_modes(alpha: Complex64, beta: Complex64) -> Result<()> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if !((norm - 1.0).abs() <= NORM_TOL) {
        bail!(Usage, "mode amplitudes must satisfy |α|² + |β|² = 1, got {norm}");
    }
    Ok(())
}

/// (1/√N!)(αa† + βb†)^N|0⟩ with amplitudes √(N!/(n!(N−n)!)) α^{N−n} β^n,
/// evaluated through log-factorials.
pub fn coherent_state(alpha: Complex64, beta: Complex64, n: usize) -> Result<FockState> {
    check_modes(alpha, beta)?;
    if n == 0 {
        bail!(Config, "particle number must be at least 1");
    }
    let nn = n as f64;
    let term = |k: f64, r: f64| if k == 0.0 { 0.0 } else { k * libm::log(r) };
    let (ra, rb, pa, pb) = (alpha.norm(), beta.norm(), alpha.arg(), beta.arg());
    let amps = (0..=n)
        .map(|k| {
            let (kb, ka) = (k as f64, nn - k as f64);
            let ln_binom = libm::lgamma(nn + 1.0) - libm::lgamma(kb + 1.0) - libm::lgamma(ka + 1.0);
            let ln_mag = 0.5 * ln_binom + term(ka, ra) + term(kb, rb);
            Complex64::from_polar(libm::exp(ln_mag), ka * pa + kb * pb)
        })
        .collect();
    Ok(FockState { n, amps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoseSpectrum {
    pub n: usize,
    pub energies: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<f64>,
}

/// Sampled exact dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct BoseEvolution {
    /// ⟨s(t)⟩ = ⟨b†b⟩/N.
    pub s: TimeSeries,
    pub max_norm_error: f64,
}

/// Weights below this are dropped from the eigenbasis expansion.
const WEIGHT_FLOOR: f64 = 1e-28;

impl BoseSpectrum {
    pub fn coefficients(&self, st: &FockState) -> Result<Vec<Complex64>> {
        if st.amps.len() != self.energies.len() {
            bail!(Usage, "state has {} amplitudes, Hamiltonian has {} levels", st.amps.len(), self.energies.len());
        }
        let d = self.energies.len();
        Ok((0..d).map(|k| (0..d).map(|j| st.amps[j] * self.vectors[(j, k)]).sum()).collect())
    }

    /// ⟨s⟩ at t = i·dt, i < n_samples.
    pub fn evolve(&self, st: &FockState, dt: f64, n_samples: usize) -> Result<BoseEvolution> {
        let co = self.coefficients(st)?;
        let kept: Vec<usize> = (0..co.len()).filter(|&k| co[k].norm_sqr() > WEIGHT_FLOOR).collect();
        let d = co.len();
        let nn = self.n as f64;
        let mut values = Vec::with_capacity(n_samples);
        let mut max_norm_error: f64 = 0.0;
        let mut evolved = vec![Complex64::new(0.0, 0.0); kept.len()];
        for i in 0..n_samples {
            let t = i as f64 * dt;
            for (slot, &k) in evolved.iter_mut().zip(&kept) {
                *slot = co[k] * Complex64::from_polar(1.0, -self.energies[k] * t);
            }
            let (mut s, mut norm) = (0.0, 0.0);
            for j in 0..d {
                let mut amp = Complex64::new(0.0, 0.0);
                for (z, &k) in evolved.iter().zip(&kept) {
                    amp += z * self.vectors[(j, k)];
                }
                let w = amp.norm_sqr();
                s += j as f64 * w;
                norm += w;
            }
            max_norm_error = max_norm_error.max((norm - 1.0).abs());
            values.push(s / nn);
        }
        Ok(BoseEvolution { s: TimeSeries::new(0.0, dt, values)?, max_norm_error })
    }

    /// A(t) = ⟨ψ(0)|ψ(t)⟩ = Σ|c_k|² e^{−iE_k t}.
    pub fn autocorrelation(&self, st: &FockState, dt: f64, n_samples: usize) -> Result<ComplexSeries> {
        let co = self.coefficients(st)?;
        let lines: Vec<(f64, f64)> =
            co.iter().zip(&self.energies).map(|(c, &e)| (c.norm_sqr(), e)).filter(|(w, _)| *w > WEIGHT_FLOOR).collect();
        let values = (0..n_samples)
            .map(|i| {
                let t = i as f64 * dt;
                lines.iter().map(|&(w, e)| Complex64::from_polar(w, -e * t)).sum()
            })
            .collect();
        Ok(ComplexSeries { t0: 0.0, dt, values })
    }
}

/// Exact ⟨s(t)⟩ by eigen-decomposition.
pub fn quantum_evolve_bh(ham: &BoseHubbard, st: &FockState, dt: f64, n_samples: usize) -> Result<BoseEvolution> {
    ham.diagonalize().evolve(st, dt, n_samples)
}

/// Mode amplitudes of the mean-field limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub a: Complex64,
    pub b: Complex64,
}

impl MeanFieldState {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        check_modes(a, b)?;
        Ok(Self { a, b })
    }

    /// (a, b) = (√(1−s), √s e^{iθ}).
    pub fn from_s_theta(s: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            bail!(Domain, "population s = {s} outside [0, 1]");
        }
        Ok(Self { a: Complex64::new(libm::sqrt(1.0 - s), 0.0), b: Complex64::from_polar(libm::sqrt(s), theta) })
    }

    pub fn s(&self) -> f64 {
        self.b.norm_sqr()
    }

    pub fn theta(&self) -> f64 {
        self.b.arg() - self.a.arg()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }
}

/// Step size and sampling for mean-field runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldRun {
    pub dt: f64,
    pub n_steps: usize,
    pub every: usize,
}

impl MeanFieldRun {
    /// Sampling interval `sample_dt` with `substeps` integrator steps per sample.
    pub fn sampled(sample_dt: f64, n_samples: usize, substeps: usize) -> Result<Self> {
        if !(sample_dt > 0.0) || n_samples == 0 || substeps == 0 {
            bail!(Config, "mean-field run needs positive sampling interval, sample count and substeps");
        }
        Ok(Self { dt: sample_dt / substeps as f64, n_steps: (n_samples - 1) * substeps, every: substeps })
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps / self.every + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldTrajectory {
    pub s: TimeSeries,
    pub last: MeanFieldState,
    pub max_energy_drift: f64,
    pub max_norm_error: f64,
}

fn hop(st: &mut MeanFieldState, nu: f64, h: f64) {
    let (c, s) = (libm::cos(0.5 * nu * h), libm::sin(0.5 * nu * h));
    let i = Complex64::new(0.0, s);
    let (a, b) = (st.a, st.b);
    st.a = a * c + i * b;
    st.b = b * c + i * a;
}

fn interact(st: &mut MeanFieldState, c: f64, h: f64) {
    st.a *= Complex64::from_polar(1.0, -c * st.a.norm_sqr() * h);
    st.b *= Complex64::from_polar(1.0, -c * st.b.norm_sqr() * h);
}

/// One step of the sixth-order composition of the exact hopping and
/// interaction flows; both flows preserve |a|² + |b|² exactly.
fn meanfield_step(dimer: &Dimer, st: &mut MeanFieldState, h: f64) {
    let w = Integrator::KahanLi6.weights();
    hop(st, dimer.nu, 0.5 * w[0] * h);
    for i in 0..w.len() {
        interact(st, dimer.c, w[i] * h);
        let next = if i + 1 < w.len() { w[i + 1] } else { 0.0 };
        hop(st, dimer.nu, 0.5 * (w[i] + next) * h);
    }
}

/// Integrates i ȧ = ∂H_mf/∂a*, i ḃ = ∂H_mf/∂b*.
pub fn meanfield_evolve(dimer: &Dimer, start: MeanFieldState, run: &MeanFieldRun) -> Result<MeanFieldTrajectory> {
    check_modes(start.a, start.b)?;
    if run.every == 0 || !(run.dt > 0.0) {
        bail!(Config, "mean-field run needs dt > 0 and sampling every ≥ 1 step");
    }
    let e0 = dimer.meanfield_energy(&start);
    let scale = e0.abs().max(0.5 * dimer.nu);
    let mut st = start;
    let mut values = Vec::with_capacity(run.n_samples());
    let (mut max_energy_drift, mut max_norm_error): (f64, f64) = (0.0, 0.0);
    values.push(st.s());
    for step in 1..=run.n_steps {
        meanfield_step(dimer, &mut st, run.dt);
        if step % run.every == 0 {
            let drift = (dimer.meanfield_energy(&st) - e0).abs() / scale;
            if drift > DRIFT_ABORT {
                return Err(Error::EnergyDrift { step, drift, limit: DRIFT_ABORT });
            }
            max_energy_drift = max_energy_drift.max(drift);
            max_norm_error = max_norm_error.max((st.norm_sqr() - 1.0).abs());
            values.push(st.s());
        }
    }
    Ok(MeanFieldTrajectory {
        s: TimeSeries::new(0.0, run.dt * run.every as f64, values)?,
        last: st,
        max_energy_drift,
        max_norm_error,
    })
}

/// Mean spacing of upward crossings of the mean of s(t) over `n_periods`
/// oscillations, as a guess for the mean-field period.
pub fn meanfield_period(dimer: &Dimer, start: MeanFieldState, n_periods: usize) -> Result<f64> {
    let guess = 2.0 * PI / dimer.nu;
    let sample = guess / 200.0;
    let n = 200 * (2 * n_periods + 4);
    let traj = meanfield_evolve(dimer, start, &MeanFieldRun::sampled(sample, n, 4)?)?;
    let v = &traj.s.values;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut crossings = Vec::new();
    for i in 1..v.len() {
        if v[i - 1] < mean && v[i] >= mean {
            let frac = (mean - v[i - 1]) / (v[i] - v[i - 1]);
            crossings.push(traj.s.time(i - 1) + frac * sample);
        }
    }
    if crossings.len() < 3 {
        bail!(InsufficientData, "mean-field population does not oscillate over the probe window");
    }
    let used = crossings.len().min(n_periods + 1);
    Ok((crossings[used - 1] - crossings[0]) / (used - 1) as f64)
}

/// Independent Gaussian samples of (s, θ).
#[derive(Debug, Clone, PartialEq)]
pub struct SThetaEnsemble {
    pub samples: Vec<(f64, f64)>,
    pub n: usize,
    pub seed: u64,
}

impl SThetaEnsemble {
    /// Means and standard deviations of s and θ.
    pub fn moments(&self) -> ((f64, f64), (f64, f64)) {
        let m = self.samples.len() as f64;
        let stats = |f: &dyn Fn(&(f64, f64)) -> f64| {
            let mean = self.samples.iter().map(f).sum::<f64>() / m;
            let var = self.samples.iter().map(|x| (f(x) - mean).powi(2)).sum::<f64>() / m;
            (mean, libm::sqrt(var))
        };
        (stats(&|x| x.0), stats(&|x| x.1))
    }
}

/// Δs = |β|√(1−|β|²)/√N and Δθ = 1/(2√N |β|√(1−|β|²)).
pub fn stheta_widths(beta_sq: f64, n: usize) -> Result<(f64, f64)> {
    if !(beta_sq > 0.0 && beta_sq < 1.0) {
        bail!(Domain, "Δθ diverges when |β|² = {beta_sq} reaches 0 or 1");
    }
    let q = libm::sqrt(beta_sq * (1.0 - beta_sq));
    let sn = libm::sqrt(n as f64);
    Ok((q / sn, 1.0 / (2.0 * sn * q)))
}

/// Samples (s, θ) around (|β|², θ_β − θ_α); each sample draws s, redrawing
/// until it lies in [0, 1], then θ.
pub fn stheta_ensemble(alpha: Complex64, beta: Complex64, n: usize, n_samples: usize, seed: u64) -> Result<SThetaEnsemble> {
    check_modes(alpha, beta)?;
    if n == 0 || n_samples == 0 {
        bail!(Usage, "ensemble needs N ≥ 1 and at least one sample");
    }
    let beta_sq = beta.norm_sqr();
    let (ds, dth) = stheta_widths(beta_sq, n)?;
    let theta0 = beta.arg() - alpha.arg();
    let gs = Normal::new(beta_sq, ds).map_err(|_| Error::Domain("invalid Δs".into()))?;
    let gt = Normal::new(theta0, dth).map_err(|_| Error::Domain("invalid Δθ".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|_| {
            let s = loop {
                let s = gs.sample(&mut rng);
                if (0.0..=1.0).contains(&s) {
                    break s;
                }
            };
            (s, gt.sample(&mut rng))
        })
        .collect();
    Ok(SThetaEnsemble { samples, n, seed })
}

/// |φ_N(θ_j)|² on θ_j = 2πj/(N+1), where φ_N(θ) = (N+1)^{−1/2} Σ_n φ_n e^{−inθ}.
pub fn theta_distribution(st: &FockState) -> Vec<(f64, f64)> {
    let m = st.amps.len();
    let scale = 1.0 / libm::sqrt(m as f64);
    (0..m)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / m as f64;
            let z: Complex64 =
                st.amps.iter().enumerate().map(|(k, a)| a * Complex64::from_polar(scale, -(k as f64) * theta)).sum();
            (theta, z.norm_sqr())
        })
        .collect()
}

/// Circular mean and standard deviation of a weighted angle distribution,
/// with deviations wrapped into (−π, π].
pub fn circular_moments(dist: &[(f64, f64)]) -> (f64, f64) {
    let total: f64 = dist.iter().map(|d| d.1).sum();
    let z: Complex64 = dist.iter().map(|&(t, w)| Complex64::from_polar(w, t)).sum();
    let mean = z.arg();
    let var = dist
        .iter()
        .map(|&(t, w)| {
            let d = libm::remainder(t - mean, 2.0 * PI);
            w * d * d
        })
        .sum::<f64>()
        / total;
    (mean, libm::sqrt(var))
}

/// Σ s_i(t) over one slice of samples, summed in sample order.
pub fn meanfield_chunk(dimer: &Dimer, samples: &[(f64, f64)], run: &MeanFieldRun) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; run.n_samples()];
    for &(s, theta) in samples {
        let traj = meanfield_evolve(dimer, MeanFieldState::from_s_theta(s, theta)?, run)?;
        for (acc, v) in sums.iter_mut().zip(&traj.s.values) {
            *acc += v;
        }
    }
    Ok(sums)
}

/// Combine per-chunk sums in chunk order into s̄(t).
pub fn combine_meanfield(chunks: &[Vec<f64>], n_total: usize, run: &MeanFieldRun) -> Result<TimeSeries> {
    let mut mean = vec![0.0; run.n_samples()];
    for chunk in chunks {
        for (m, v) in mean.iter_mut().zip(chunk) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_total as f64;
    }
    TimeSeries::new(0.0, run.dt * run.every as f64, mean)
}

/// s̄(t) over the ensemble, reduced in fixed `CHUNK` order.
pub fn ensemble_meanfield_evolve(dimer: &Dimer, ens: &SThetaEnsemble, run: &MeanFieldRun) -> Result<TimeSeries> {
    let chunks = ens.samples.chunks(CHUNK).map(|c| meanfield_chunk(dimer, c, run)).collect::<Result<Vec<_>>>()?;
    combine_meanfield(&chunks, ens.samples.len(), run)
}

/// Sampling and window for the breakdown-time measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoseScan {
    /// Sampling interval of ⟨s(t)⟩.
    pub dt: f64,
    /// Mean-field integrator steps per sample.
    pub substeps: usize,
    /// Fit window t_final = window·√N.
    pub window: f64,
    /// Revival-analog record length = revival_window·N.
    pub revival_window: f64,
}

impl Default for BoseScan {
    fn default() -> Self {
        Self { dt: 0.05, substeps: 10, window: 20.0, revival_window: 12.0 }
    }
}

/// Breakdown measurement at one N.
#[derive(Debug, Clone, PartialEq)]
pub struct BoseTauPoint {
    pub n: usize,
    pub quantum: TimeSeries,
    pub meanfield: TimeSeries,
    pub deviation: TimeSeries,
    pub fit: EnvelopeFit,
}

/// τ from the a(1 − e^{−bt²}) envelope of |⟨s⟩_quantum − s_mf|.
pub fn bose_tau(dimer: &Dimer, n: usize, alpha: Complex64, beta: Complex64, scan: &BoseScan) -> Result<BoseTauPoint> {
    let ham = dimer.hamiltonian(n)?;
    let st = coherent_state(alpha, beta, n)?;
    let samples = (scan.window * libm::sqrt(n as f64) / scan.dt) as usize + 1;
    let quantum = quantum_evolve_bh(&ham, &st, scan.dt, samples)?.s;
    let run = MeanFieldRun::sampled(scan.dt, samples, scan.substeps)?;
    let meanfield = meanfield_evolve(dimer, MeanFieldState::new(alpha, beta)?, &run)?.s;
    let deviation = crate::analysis::deviation_series(&quantum, &meanfield)?;
    let fit = fit_envelope(&peak_envelope(&deviation)?)?;
    Ok(BoseTauPoint { n, quantum, meanfield, deviation, fit })
}

#[derive(Debug)]
pub struct BoseScaling {
    /// Per-N results, failures included.
    pub points: Vec<(usize, Result<BoseTauPoint>)>,
    /// ln τ against ln N over the successful points.
    pub fit: Result<LineFit>,
}

pub fn bose_tau_scaling(ns: &[usize], c_over_nu: f64, alpha: Complex64, beta: Complex64, scan: &BoseScan) -> Result<BoseScaling> {
    if ns.len() < 4 {
        bail!(Usage, "scaling fit needs at least 4 particle numbers, got {}", ns.len());
    }
    let dimer = Dimer::from_ratio(c_over_nu)?;
    let points: Vec<(usize, Result<BoseTauPoint>)> = ns.iter().map(|&n| (n, bose_tau(&dimer, n, alpha, beta, scan))).collect();
    let fit = scaling_from_points(&points);
    Ok(BoseScaling { points, fit })
}

/// Log-log fit of τ against N over the successful points.
pub fn scaling_from_points(points: &[(usize, Result<BoseTauPoint>)]) -> Result<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        points.iter().filter_map(|(n, r)| r.as_ref().ok().map(|p| (*n as f64, p.fit.tau))).unzip();
    if xs.len() < 4 {
        bail!(InsufficientData, "only {} of {} particle numbers produced a fit", xs.len(), points.len());
    }
    log_log_fit(&xs, &ys)
}

/// Revival analysis of the autocorrelation over `revival_window·N`,
/// demodulated by ⟨H⟩ and bracketed by the mean-field period.
pub fn bose_revival(dimer: &Dimer, n: usize, alpha: Complex64, beta: Complex64, scan: &BoseScan) -> Result<RevivalReport> {
    let ham = dimer.hamiltonian(n)?;
    let st = coherent_state(alpha, beta, n)?;
    let t_c = meanfield_period(dimer, MeanFieldState::new(alpha, beta)?, 8)?;
    let samples = (scan.revival_window * n as f64 / scan.dt) as usize + 1;
    let ac = ham.diagonalize().autocorrelation(&st, scan.dt, samples)?;
    detect_revival(&ac, t_c, ham.expectation(&st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn half() -> (Complex64, Complex64) {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        (c(r, 0.0), Complex64::from_polar(r, 0.5 * PI))
    }

    #[test]
    fn small_hamiltonians() {
        let one = Dimer::new(3.7, 1.0).unwrap().hamiltonian(1).unwrap();
        assert_eq!(one.diagonal(), vec![0.0, 0.0]);
        assert_eq!(one.off_diagonal(), vec![-0.5]);
        let mut e = one.diagonalize().energies;
        e.sort_by(f64::total_cmp);
        assert!((e[0] + 0.5).abs() < 1e-14 && (e[1] - 0.5).abs() < 1e-14);

        let mut e2 = Dimer::new(0.0, 1.0).unwrap().hamiltonian(2).unwrap().diagonalize().energies;
        e2.sort_by(f64::total_cmp);
        for (a, b) in e2.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-13);
        }

        let m = Dimer::new(2.0, 1.0).unwrap().hamiltonian(200).unwrap().matrix();
        assert_eq!(m, m.transpose());
        for i in 0..201usize {
            for j in 0..201 {
                if i.abs_diff(j) > 1 {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn coherent_amplitudes() {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let st = coherent_state(c(r, 0.0), c(r, 0.0), 2).unwrap();
        for (a, b) in st.amps.iter().zip([0.5, r, 0.5]) {
            assert!((a - c(b, 0.0)).norm() < 1e-14);
        }
        assert!(matches!(coherent_state(c(1.0, 0.0), c(0.5, 0.0), 4), Err(Error::Usage(_))));
        let pole = coherent_state(c(1.0, 0.0), c(0.0, 0.0), 10).unwrap();
        assert_eq!(pole.amps[0], c(1.0, 0.0));
        assert!(pole.amps[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn coherent_statistics_at_large_n() {
        for &(n, b2) in &[(100usize, 0.5), (400, 0.3), (1000, 0.8)] {
            let st = coherent_state(c(libm::sqrt(1.0 - b2), 0.0), Complex64::from_polar(libm::sqrt(b2), 1.0), n).unwrap();
            assert!((st.norm_sqr() - 1.0).abs() < 1e-10);
            assert!((st.mean_s() - b2).abs() < 1e-12);
            let (ds, _) = stheta_widths(b2, n).unwrap();
            assert!((libm::sqrt(st.var_s()) - ds).abs() < 1e-12);
        }
    }

    #[test]
    fn rabi_oscillation() {
        let dimer = Dimer::new(0.0, 1.0).unwrap();
        let st = coherent_state(c(1.0, 0.0), c(0.0, 0.0), 20).unwrap();
        let ev = quantum_evolve_bh(&dimer.hamiltonian(20).unwrap(), &st, 0.1, 200).unwrap();
        assert!(ev.max_norm_error < 1e-10);
        for (t, s) in ev.s.iter() {
            assert!((s - libm::sin(0.5 * t).powi(2)).abs() < 1e-10);
        }
        let run = MeanFieldRun::sampled(0.1, 200, 5).unwrap();
        let mf = meanfield_evolve(&dimer, MeanFieldState::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap(), &run).unwrap();
        for (t, s) in mf.s.iter() {
            assert!((s - libm::sin(0.5 * t).powi(2)).abs() < 1e-12, "{t} {s}");
        }
    }

    #[test]
    fn symmetric_states() {
        let (a, b) = half();
        let st = coherent_state(a, b, 60).unwrap();
        let ev = quantum_evolve_bh(&Dimer::new(2.0, 1.0).unwrap().hamiltonian(60).unwrap(), &st, 0.1, 3).unwrap();
        assert!((ev.s.values[0] - 0.5).abs() < 1e-12);

        let r = core::f64::consts::FRAC_1_SQRT_2;
        let run = MeanFieldRun::sampled(0.1, 100, 4).unwrap();
        let still =
            meanfield_evolve(&Dimer::new(0.0, 1.0).unwrap(), MeanFieldState::new(c(r, 0.0), c(r, 0.0)).unwrap(), &run).unwrap();
        assert!(still.s.values.iter().all(|s| (s - 0.5).abs() < 1e-13));
    }

    #[test]
    fn meanfield_conserves_energy_over_long_runs() {
        let dimer = Dimer::new(2.0, 1.0).unwrap();
        let (a, b) = half();
        let run = MeanFieldRun { dt: 0.005, n_steps: 100_000, every: 100 };
        let traj = meanfield_evolve(&dimer, MeanFieldState::new(a, b).unwrap(), &run).unwrap();
        assert!(traj.max_energy_drift < 1e-8, "{}", traj.max_energy_drift);
        assert!(traj.max_norm_error < 1e-10);
    }

    #[test]
    fn coherent_energy_approaches_meanfield() {
        let dimer = Dimer::new(2.0, 1.0).unwrap();
        for (a, b) in [half(), (c(libm::sqrt(0.8), 0.0), Complex64::from_polar(libm::sqrt(0.2), 2.5))] {
            let hmf = dimer.meanfield_energy(&MeanFieldState::new(a, b).unwrap());
            for n in [50, 100, 200] {
                let e = dimer.hamiltonian(n).unwrap().expectation(&coherent_state(a, b, n).unwrap()) / n as f64;
                assert!((e - hmf).abs() / hmf.abs() < 2.0 / n as f64, "N={n}: {e} vs {hmf}");
            }
        }
    }

    #[test]
    fn widths_and_uncertainty_product() {
        let (ds, dth) = stheta_widths(0.5, 100).unwrap();
        assert!((ds - 0.05).abs() < 1e-15 && (dth - 0.1).abs() < 1e-15);
        assert!(matches!(stheta_widths(0.0, 100), Err(Error::Domain(_))));
        assert!(matches!(stheta_widths(1.0, 100), Err(Error::Domain(_))));
        let (a, b) = half();
        let ens = stheta_ensemble(a, b, 100, 20_000, 3).unwrap();
        let ((ms, ss), (mt, st)) = ens.moments();
        assert!((ms - 0.5).abs() < 0.05 * ds && (ss / ds - 1.0).abs() < 0.05);
        assert!((mt - 0.5 * PI).abs() < 0.05 * dth && (st / dth - 1.0).abs() < 0.05);
        assert!(ens.samples.iter().all(|x| (0.0..=1.0).contains(&x.0)));
        assert_eq!(ens, stheta_ensemble(a, b, 100, 20_000, 3).unwrap());
    }

    #[test]
    fn fourier_theta_width_matches_closed_form() {
        let (a, b) = half();
        for n in [50, 100, 200] {
            let (mean, sd) = circular_moments(&theta_distribution(&coherent_state(a, b, n).unwrap()));
            let (_, dth) = stheta_widths(0.5, n).unwrap();
            assert!((mean - 0.5 * PI).abs() < 1e-8);
            assert!((sd / dth - 1.0).abs() < 0.1, "N={n}: {sd} vs {dth}");
        }
    }

    #[test]
    fn ensemble_limits() {
        let dimer = Dimer::new(2.0, 1.0).unwrap();
        let run = MeanFieldRun::sampled(0.05, 400, 10).unwrap();
        let (s, th) = (0.3, 1.1);
        let single = SThetaEnsemble { samples: vec![(s, th)], n: 1, seed: 0 };
        let traj = meanfield_evolve(&dimer, MeanFieldState::from_s_theta(s, th).unwrap(), &run).unwrap();
        assert_eq!(ensemble_meanfield_evolve(&dimer, &single, &run).unwrap().values, traj.s.values);
        let many = SThetaEnsemble { samples: vec![(s, th); 37], n: 1, seed: 0 };
        let mean = ensemble_meanfield_evolve(&dimer, &many, &run).unwrap();
        for (m, v) in mean.values.iter().zip(&traj.s.values) {
            assert!((m - v).abs() < 1e-14);
        }
    }

    #[test]
    fn meanfield_period_of_free_hopping() {
        // ν = 1, c = 0 from mode a: s = sin²(t/2) has period 2π.
        let p =
            meanfield_period(&Dimer::new(0.0, 1.0).unwrap(), MeanFieldState::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap(), 6).unwrap();
        assert!((p - 2.0 * PI).abs() < 1e-3, "{p}");
    }

    #[test]
    fn scaling_of_synthetic_points() {
        let fit = log_log_fit(&[50.0, 100.0, 200.0, 400.0], &[50f64, 100.0, 200.0, 400.0].map(|n| 3.0 * libm::sqrt(n))).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        let (a, b) = half();
        assert!(matches!(bose_tau_scaling(&[50, 100, 200], 2.0, a, b, &BoseScan::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn breakdown_at_moderate_n() {
        let (a, b) = half();
        let point = bose_tau(&Dimer::new(2.0, 1.0).unwrap(), 50, a, b, &BoseScan::default()).unwrap();
        assert!(point.fit.tau > 10.0 && point.fit.tau < 40.0, "{:?}", point.fit);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn uncertainty_identity(b2 in 0.01f64..0.99, n in 1usize..10_000) {
            let (ds, dth) = stheta_widths(b2, n).unwrap();
            prop_assert!((ds * dth * 2.0 * n as f64 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn quantum_norm_is_conserved(n in 2usize..40, cv in 0.0f64..4.0, theta in 0.0f64..6.0) {
            let st = coherent_state(c(0.6, 0.0), Complex64::from_polar(0.8, theta), n).unwrap();
            let ev = quantum_evolve_bh(&Dimer::new(cv, 1.0).unwrap().hamiltonian(n).unwrap(), &st, 0.37, 30).unwrap();
            prop_assert!(ev.max_norm_error < 1e-10);
        }
    }
}
