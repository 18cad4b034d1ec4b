//! Split-operator propagation of the scaled Schrödinger equation on periodic
//! uniform grids in one and two dimensions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::classical::{Integrator, Timescale};
use crate::error::{bail, Error, Result};
use crate::fft::{wave_numbers, Fft, Fft2};
use crate::model::{HamiltonianSpec, Potential1D, ScaledPlanck, Toda};
use crate::series::{ComplexSeries, TimeSeries};

/// Normalized momentum amplitude allowed at the edge of the dual grid.
pub const ALIAS_LIMIT: f64 = 1e-8;
/// Relative probability density allowed at the spatial grid edge for a fresh packet.
pub const EDGE_TAIL_LIMIT: f64 = 1e-12;

/// One periodic axis `[min, max)` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            bail!(Config, "grid axis needs max > min, got [{min}, {max}]");
        }
        if n < 64 || !n.is_power_of_two() {
            bail!(Config, "grid axis needs a power-of-two point count of at least 64, got {n}");
        }
        Ok(Self { min, max, n })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Largest representable momentum π ℏ_ε / dx.
    pub fn p_max(&self, hbar: ScaledPlanck) -> f64 {
        PI * hbar.get() / self.dx()
    }

    pub fn momenta(&self, hbar: ScaledPlanck) -> Vec<f64> {
        wave_numbers(self.n, self.dx()).into_iter().map(|k| hbar.get() * k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    One(Axis),
    Two(Axis, Axis),
}

impl Grid {
    pub fn dim(&self) -> usize {
        match self {
            Self::One(_) => 1,
            Self::Two(..) => 2,
        }
    }

    pub fn axis(&self, i: usize) -> Axis {
        match (self, i) {
            (Self::One(a), 0) | (Self::Two(a, _), 0) => *a,
            (Self::Two(_, b), 1) => *b,
            _ => panic!("axis {i} out of range for a {}D grid", self.dim()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::One(a) => a.n,
            Self::Two(a, b) => a.n * b.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self) -> f64 {
        match self {
            Self::One(a) => a.dx(),
            Self::Two(a, b) => a.dx() * b.dx(),
        }
    }

    /// Coordinates of flat index `idx` (row-major, axis 0 slowest).
    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        match self {
            Self::One(a) => [a.x(idx), 0.0],
            Self::Two(a, b) => [a.x(idx / b.n), b.x(idx % b.n)],
        }
    }
}

/// Complex amplitudes on a grid, normalized with the grid cell measure.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: Grid,
    pub hbar: ScaledPlanck,
    pub psi: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, hbar: ScaledPlanck, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != grid.len() {
            bail!(Usage, "amplitude count {} does not match grid size {}", psi.len(), grid.len());
        }
        Ok(Self { grid, hbar, psi })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell()
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / libm::sqrt(self.norm_sqr());
        for z in &mut self.psi {
            *z *= s;
        }
    }

    /// ⟨x_axis⟩
    pub fn mean_x(&self, axis: usize) -> f64 {
        self.moment(axis, |x| x)
    }

    pub fn var_x(&self, axis: usize) -> f64 {
        let m = self.mean_x(axis);
        self.moment(axis, |x| (x - m) * (x - m))
    }

    fn moment(&self, axis: usize, f: impl Fn(f64) -> f64) -> f64 {
        let cell = self.grid.cell();
        self.psi.iter().enumerate().map(|(i, z)| z.norm_sqr() * f(self.grid.coords(i)[axis])).sum::<f64>() * cell
    }

    /// Normalized momentum-space probabilities, one per FFT bin.
    pub fn momentum_probabilities(&self) -> Vec<f64> {
        let spectrum = self.spectrum();
        let total: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
        spectrum.iter().map(|z| z.norm_sqr() / total).collect()
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.psi.clone();
        match self.grid {
            Grid::One(a) => Fft::new(a.n).expect("validated axis").forward(&mut data),
            Grid::Two(a, b) => Fft2::new(a.n, b.n).expect("validated axes").forward(&mut data, &mut Vec::new()),
        }
        data
    }

    /// ⟨p_axis⟩ and Var(p_axis).
    pub fn momentum_moments(&self, axis: usize) -> (f64, f64) {
        let probs = self.momentum_probabilities();
        let pa = self.grid.axis(axis).momenta(self.hbar);
        let pick = |idx: usize| match self.grid {
            Grid::One(_) => pa[idx],
            Grid::Two(_, b) => {
                if axis == 0 {
                    pa[idx / b.n]
                } else {
                    pa[idx % b.n]
                }
            }
        };
        let mean: f64 = probs.iter().enumerate().map(|(i, w)| w * pick(i)).sum();
        let var: f64 = probs.iter().enumerate().map(|(i, w)| w * (pick(i) - mean) * (pick(i) - mean)).sum();
        (mean, var)
    }
}

/// ⟨ψ₀|ψ_t⟩.
pub fn autocorrelation(wf_t: &WaveFunction, wf_0: &WaveFunction) -> Result<Complex64> {
    if wf_t.grid != wf_0.grid {
        bail!(Usage, "autocorrelation requires both states on the same grid");
    }
    let cell = wf_t.grid.cell();
    Ok(wf_0.psi.iter().zip(&wf_t.psi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * cell)
}

/// Minimal-uncertainty packet with σ_x² = ℏ_ε/2 per axis.
pub fn gaussian_packet(grid: Grid, x0: &[f64], p0: &[f64], hbar: ScaledPlanck) -> Result<WaveFunction> {
    let s = hbar.sigma();
    gaussian_packet_with_width(grid, x0, p0, &[s, s][..grid.dim()], hbar)
}

/// Gaussian packet with per-axis position width `sigma_x`.
pub fn gaussian_packet_with_width(
    grid: Grid,
    x0: &[f64],
    p0: &[f64],
    sigma_x: &[f64],
    hbar: ScaledPlanck,
) -> Result<WaveFunction> {
    let d = grid.dim();
    if x0.len() != d || p0.len() != d || sigma_x.len() != d {
        bail!(Usage, "packet parameters must have {d} components");
    }
    for k in 0..d {
        let ax = grid.axis(k);
        if !(x0[k] > ax.min && x0[k] < ax.max) {
            bail!(Config, "packet centre {} lies outside axis {k} range [{}, {})", x0[k], ax.min, ax.max);
        }
        let sigma_p = hbar.get() / (2.0 * sigma_x[k]);
        let pm = ax.p_max(hbar);
        if (p0[k].abs() + 6.0 * sigma_p) > pm {
            bail!(
                Config,
                "momentum grid ±{pm:.4} on axis {k} cannot hold p0 ± 6σ_p = {:.4} ± {:.4}; refine the grid",
                p0[k],
                6.0 * sigma_p
            );
        }
        let edge = (x0[k] - ax.min).min(ax.max - ax.dx() - x0[k]);
        let tail = libm::exp(-edge * edge / (2.0 * sigma_x[k] * sigma_x[k]));
        if tail > EDGE_TAIL_LIMIT {
            bail!(Config, "packet tail {tail:.2e} at the edge of axis {k} exceeds {EDGE_TAIL_LIMIT:.0e}; widen the grid");
        }
    }
    let h = hbar.get();
    let psi = (0..grid.len())
        .map(|i| {
            let c = grid.coords(i);
            let mut phase = 0.0;
            let mut env = 0.0;
            for k in 0..d {
                let dx = c[k] - x0[k];
                env -= dx * dx / (4.0 * sigma_x[k] * sigma_x[k]);
                phase += p0[k] * dx / h;
            }
            Complex64::from_polar(libm::exp(env), phase)
        })
        .collect();
    let mut wf = WaveFunction::new(grid, hbar, psi)?;
    wf.normalize();
    Ok(wf)
}

/// Kinetic and potential energy tables for a Hamiltonian on a grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub hbar: ScaledPlanck,
    /// T(p) per FFT bin.
    pub kinetic: Vec<f64>,
    /// V(x) per grid point.
    pub potential: Vec<f64>,
}

impl Discretization {
    pub fn new(spec: &HamiltonianSpec, grid: Grid, hbar: ScaledPlanck) -> Result<Self> {
        spec.validate()?;
        match (spec, grid) {
            (HamiltonianSpec::Toda2D, Grid::Two(a, b)) => {
                let (p1, p2) = (a.momenta(hbar), b.momenta(hbar));
                let kinetic = (0..grid.len()).map(|i| Toda::kinetic_form(p1[i / b.n], p2[i % b.n])).collect();
                let potential = (0..grid.len())
                    .map(|i| {
                        let c = grid.coords(i);
                        Toda::potential_form(c[0], c[1])
                    })
                    .collect();
                Ok(Self { grid, hbar, kinetic, potential })
            }
            (HamiltonianSpec::Toda2D, Grid::One(_)) => {
                bail!(Config, "the Toda model needs a 2D grid")
            }
            (_, Grid::Two(..)) => bail!(Config, "{} is one-dimensional but the grid is 2D", spec.name()),
            (_, Grid::One(a)) => {
                let kinetic = a.momenta(hbar).into_iter().map(|p| 0.5 * p * p).collect();
                let potential = a.points().into_iter().map(|x| Potential1D::value(spec, x)).collect();
                Ok(Self { grid, hbar, kinetic, potential })
            }
        }
    }

    /// ⟨H⟩ of `wf`.
    pub fn energy(&self, wf: &WaveFunction) -> f64 {
        let probs = wf.momentum_probabilities();
        let t: f64 = probs.iter().zip(&self.kinetic).map(|(w, k)| w * k).sum();
        let v: f64 = wf.psi.iter().zip(&self.potential).map(|(z, v)| z.norm_sqr() * v).sum::<f64>() * wf.grid.cell();
        t + v
    }

    /// Dense real symmetric matrix of the discretized 1D Hamiltonian. The kinetic
    /// part is the circulant matrix that is diagonal in the FFT basis.
    pub fn dense_1d(&self) -> Result<DMatrix<f64>> {
        let n = match self.grid {
            Grid::One(a) => a.n,
            Grid::Two(..) => bail!(Usage, "dense matrices are built for 1D grids only"),
        };
        // Column c(d) = (1/n) Σ_k T_k cos(2π k d / n)
        let mut kernel: Vec<Complex64> = self.kinetic.iter().map(|&t| Complex64::new(t, 0.0)).collect();
        Fft::new(n)?.inverse(&mut kernel);
        let mut h = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for l in 0..n {
                h[(j, l)] = kernel[(j + n - l) % n].re;
            }
            h[(j, j)] += self.potential[j];
        }
        Ok(h)
    }
}

/// Splitting order of the propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitOrder {
    /// Half kinetic, full potential, half kinetic.
    #[default]
    Second,
    /// Triple-jump composition of the second-order step.
    Fourth,
}

enum Transform {
    One(Fft),
    Two(Fft2),
}

/// Precomputed split-operator step for fixed `dt`.
pub struct Propagator {
    disc: Discretization,
    dt: f64,
    kinetic_phases: Vec<Vec<Complex64>>,
    potential_phases: Vec<Vec<Complex64>>,
    transform: Transform,
}

impl Propagator {
    pub fn new(disc: Discretization, dt: f64, order: SplitOrder) -> Result<Self> {
        if !dt.is_finite() || dt == 0.0 {
            bail!(Config, "time step must be finite and nonzero, got {dt}");
        }
        let weights = match order {
            SplitOrder::Second => Integrator::Leapfrog.weights(),
            SplitOrder::Fourth => Integrator::Yoshida4.weights(),
        };
        let h = disc.hbar.get();
        let phases = |table: &[f64], c: f64| -> Vec<Complex64> {
            table.iter().map(|&e| Complex64::from_polar(1.0, -e * c * dt / h)).collect()
        };
        let m = weights.len();
        let mut kinetic_phases = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let prev = if i > 0 { weights[i - 1] } else { 0.0 };
            let next = if i < m { weights[i] } else { 0.0 };
            kinetic_phases.push(phases(&disc.kinetic, 0.5 * (prev + next)));
        }
        let potential_phases = weights.iter().map(|&w| phases(&disc.potential, w)).collect();
        let transform = match disc.grid {
            Grid::One(a) => Transform::One(Fft::new(a.n)?),
            Grid::Two(a, b) => Transform::Two(Fft2::new(a.n, b.n)?),
        };
        Ok(Self { disc, dt, kinetic_phases, potential_phases, transform })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        match &self.transform {
            Transform::One(f) => f.forward(data),
            Transform::Two(f) => f.forward(data, scratch),
        }
    }

    fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        match &self.transform {
            Transform::One(f) => f.inverse(data),
            Transform::Two(f) => f.inverse(data, scratch),
        }
    }

    /// One full step on a momentum-space state (FFT ordering, unnormalized).
    fn step_spectral(&self, spec: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let last = self.kinetic_phases.len() - 1;
        for (i, kp) in self.kinetic_phases.iter().enumerate() {
            mul_assign(spec, kp);
            if i == last {
                break;
            }
            self.inverse(spec, scratch);
            mul_assign(spec, &self.potential_phases[i]);
            self.forward(spec, scratch);
        }
    }

    /// Largest normalized momentum amplitude in the outermost bins of each axis.
    fn edge_amplitude(&self, spec: &[Complex64], total: f64) -> f64 {
        let edge_bins = |n: usize| [n / 2 - 1, n / 2, n / 2 + 1];
        let scale = 1.0 / libm::sqrt(total);
        let mut worst: f64 = 0.0;
        match self.disc.grid {
            Grid::One(a) => {
                for k in edge_bins(a.n) {
                    worst = worst.max(spec[k].norm() * scale);
                }
            }
            Grid::Two(a, b) => {
                for k in edge_bins(a.n) {
                    for j in 0..b.n {
                        worst = worst.max(spec[k * b.n + j].norm() * scale);
                    }
                }
                for i in 0..a.n {
                    for k in edge_bins(b.n) {
                        worst = worst.max(spec[i * b.n + k].norm() * scale);
                    }
                }
            }
        }
        worst
    }
}

#[inline]
fn mul_assign(data: &mut [Complex64], phases: &[Complex64]) {
    for (z, p) in data.iter_mut().zip(phases) {
        *z *= p;
    }
}

/// What to record during propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observers {
    /// Sampling stride for position-space observables and energy.
    pub every: usize,
    /// Sampling stride for the autocorrelation; `None` disables it.
    pub autocorrelation_every: Option<usize>,
    pub energy: bool,
    /// Steps at which full wave functions are kept.
    pub snapshot_steps: Vec<usize>,
    pub check_aliasing: bool,
}

impl Default for Observers {
    fn default() -> Self {
        Self { every: 1, autocorrelation_every: None, energy: true, snapshot_steps: Vec::new(), check_aliasing: true }
    }
}

/// Series emitted by [`propagate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    /// ⟨x_k⟩ per axis.
    pub mean_x: Vec<TimeSeries>,
    /// ⟨p_k⟩ per axis.
    pub mean_p: Vec<TimeSeries>,
    pub var_x: Vec<TimeSeries>,
    pub energy: Option<TimeSeries>,
    pub norm: TimeSeries,
    pub autocorrelation: Option<ComplexSeries>,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: WaveFunction,
    pub observables: Observables,
    pub snapshots: Vec<(f64, WaveFunction)>,
    /// Largest normalized amplitude seen at the momentum-grid edge.
    pub max_edge_amplitude: f64,
}

/// Evolve `wf` for `n_steps`. Observables are sampled at step 0 and every
/// `observers.every` steps.
pub fn propagate(wf: &WaveFunction, prop: &Propagator, n_steps: usize, observers: &Observers) -> Result<Propagation> {
    if wf.grid != prop.disc.grid || wf.hbar != prop.disc.hbar {
        bail!(Usage, "wave function grid or ħ_ε does not match the propagator");
    }
    let grid = wf.grid;
    let dim = grid.dim();
    let every = observers.every.max(1);
    let n_samples = n_steps / every + 1;
    let sample_dt = prop.dt * every as f64;
    let mut mean_x = vec![Vec::with_capacity(n_samples); dim];
    let mut mean_p = vec![Vec::with_capacity(n_samples); dim];
    let mut var_x = vec![Vec::with_capacity(n_samples); dim];
    let mut energy = Vec::new();
    let mut norm = Vec::with_capacity(n_samples);
    let mut snapshots = Vec::new();

    let mut scratch = Vec::new();
    let mut spec = wf.psi.clone();
    prop.forward(&mut spec, &mut scratch);
    // ⟨ψ₀|ψ⟩ = (cell / n) Σ conj(ψ̃₀) ψ̃
    let parseval = grid.cell() / grid.len() as f64;
    let initial_spec: Vec<Complex64> = spec.iter().map(|z| z.conj() * parseval).collect();
    let ac_every = observers.autocorrelation_every.map(|e| e.max(1));
    let mut ac = Vec::new();

    let momenta: Vec<Vec<f64>> = (0..dim).map(|k| grid.axis(k).momenta(wf.hbar)).collect();
    let mut position = WaveFunction { grid, hbar: wf.hbar, psi: wf.psi.clone() };
    let mut max_edge: f64 = 0.0;

    for step in 0..=n_steps {
        if step > 0 {
            prop.step_spectral(&mut spec, &mut scratch);
        }
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        if observers.check_aliasing {
            let edge = prop.edge_amplitude(&spec, total);
            max_edge = max_edge.max(edge);
            if edge > ALIAS_LIMIT {
                return Err(Error::Aliasing { step, amplitude: edge, limit: ALIAS_LIMIT });
            }
        }
        if let Some(e) = ac_every {
            if step % e == 0 {
                ac.push(initial_spec.iter().zip(&spec).map(|(a, b)| a * b).sum::<Complex64>());
            }
        }
        let sample = step % every == 0;
        let snap = observers.snapshot_steps.contains(&step);
        if !(sample || snap) {
            continue;
        }
        position.psi.copy_from_slice(&spec);
        prop.inverse(&mut position.psi, &mut scratch);
        if snap {
            snapshots.push((step as f64 * prop.dt, position.clone()));
        }
        if !sample {
            continue;
        }
        norm.push(total * parseval);
        for k in 0..dim {
            let m = position.mean_x(k);
            mean_x[k].push(m);
            var_x[k].push(position.var_x(k));
            let pk = &momenta[k];
            let mp: f64 = match grid {
                Grid::One(_) => spec.iter().zip(pk).map(|(z, p)| z.norm_sqr() * p).sum(),
                Grid::Two(_, b) => {
                    spec.iter().enumerate().map(|(i, z)| z.norm_sqr() * if k == 0 { pk[i / b.n] } else { pk[i % b.n] }).sum()
                }
            };
            mean_p[k].push(mp / total);
        }
        if observers.energy {
            let t: f64 = spec.iter().zip(&prop.disc.kinetic).map(|(z, k)| z.norm_sqr() * k).sum::<f64>() / total;
            let v: f64 = position.psi.iter().zip(&prop.disc.potential).map(|(z, v)| z.norm_sqr() * v).sum::<f64>() * grid.cell();
            energy.push(t + v / (total * parseval));
        }
    }
    let series = |values: Vec<f64>| TimeSeries { t0: 0.0, dt: sample_dt, values, tag: 0 };
    let mut state = WaveFunction { grid, hbar: wf.hbar, psi: spec };
    prop.inverse(&mut state.psi, &mut scratch);
    if n_steps == 0 {
        state.psi.copy_from_slice(&wf.psi);
    }
    Ok(Propagation {
        state,
        observables: Observables {
            mean_x: mean_x.into_iter().map(series).collect(),
            mean_p: mean_p.into_iter().map(series).collect(),
            var_x: var_x.into_iter().map(series).collect(),
            energy: observers.energy.then(|| series(energy)),
            norm: series(norm),
            autocorrelation: ac_every.map(|e| ComplexSeries { t0: 0.0, dt: prop.dt * e as f64, values: ac }),
        },
        snapshots,
        max_edge_amplitude: max_edge,
    })
}

/// Lowest levels of the discretized 1D Hamiltonian.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors normalized with the grid measure.
    pub eigenvectors: Option<DMatrix<f64>>,
    pub n_levels: usize,
    /// Index of the first level resolved by fewer than 8 points per de Broglie
    /// wavelength or whose turning points leave the grid.
    pub first_unresolved: Option<usize>,
}

impl Spectrum {
    pub fn trusted(&self) -> bool {
        self.first_unresolved.is_none()
    }

    /// Expansion coefficients ⟨φ_n|ψ⟩.
    pub fn coefficients(&self, wf: &WaveFunction) -> Result<Vec<Complex64>> {
        let vecs = match &self.eigenvectors {
            Some(v) => v,
            None => bail!(Usage, "spectrum was computed without eigenvectors"),
        };
        if vecs.nrows() != wf.psi.len() {
            bail!(Usage, "spectrum and wave function grids differ");
        }
        let cell = wf.grid.cell();
        Ok((0..self.n_levels)
            .map(|n| vecs.column(n).iter().zip(&wf.psi).map(|(&a, b)| b * a).sum::<Complex64>() * cell)
            .collect())
    }
}

pub const DENSE_LIMIT: usize = 2048;

/// Lowest `n_levels` eigenvalues of the spectral discretization.
pub fn eigen_spectrum(
    spec: &HamiltonianSpec,
    grid: Grid,
    hbar: ScaledPlanck,
    n_levels: usize,
    keep_vectors: bool,
) -> Result<Spectrum> {
    let axis = match grid {
        Grid::One(a) => a,
        Grid::Two(..) => bail!(Usage, "eigen spectra are computed for 1D potentials"),
    };
    if axis.n > DENSE_LIMIT {
        bail!(Config, "dense eigen-solver supports at most {DENSE_LIMIT} points, got {}", axis.n);
    }
    if n_levels == 0 || n_levels >= axis.n {
        bail!(Usage, "n_levels must be in 1..{}", axis.n);
    }
    let disc = Discretization::new(spec, grid, hbar)?;
    let eig = SymmetricEigen::new(disc.dense_1d()?);
    let mut order: Vec<usize> = (0..axis.n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(n_levels);
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let vmin = disc.potential.iter().copied().fold(f64::INFINITY, f64::min);
    let v_edge = disc.potential[0].min(disc.potential[axis.n - 1]);
    let first_unresolved = eigenvalues.iter().position(|&e| {
        let p = libm::sqrt(2.0 * (e - vmin).max(0.0));
        let wavelength = 2.0 * PI * hbar.get() / p;
        wavelength / axis.dx() < 8.0 || e >= v_edge
    });

    let eigenvectors = keep_vectors.then(|| {
        let scale = 1.0 / libm::sqrt(axis.dx());
        let mut m = DMatrix::<f64>::zeros(axis.n, n_levels);
        for (c, &i) in order.iter().enumerate() {
            for r in 0..axis.n {
                m[(r, c)] = eig.eigenvectors[(r, i)] * scale;
            }
        }
        m
    });
    Ok(Spectrum { eigenvalues, eigenvectors, n_levels, first_unresolved })
}

/// Default time step T_c/512 for 1D scenarios; `None` for isochronous or 2D cases.
pub fn default_dt(period: Timescale) -> Option<f64> {
    period.finite().map(|t| t / 512.0)
}
