//! Classical ensembles drawn from the Wigner function of a minimal Gaussian
//! packet and evolved point by point.
//!
//! Evolution is split into fixed-size chunks whose partial sums are combined in
//! chunk order, so callers may evaluate chunks on any number of threads without
//! changing a single bit of the result.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classical::{energy_scale, Integrator, PhasePoint, DRIFT_ABORT};
use crate::error::{bail, Error, Result};
use crate::model::{Hamiltonian, ScaledPlanck, MAX_DIM};
use crate::series::TimeSeries;

/// Points per reduction chunk.
pub const CHUNK: usize = 2048;
/// Points stepped together inside a chunk.
const BLOCK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEnsemble {
    pub points: Vec<PhasePoint>,
    pub hbar: ScaledPlanck,
    pub seed: u64,
}

impl PhaseEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sample mean and variance of a coordinate selected by `f`.
    pub fn moments(&self, f: impl Fn(&PhasePoint) -> f64) -> (f64, f64) {
        let n = self.points.len() as f64;
        let mean = self.points.iter().map(&f).sum::<f64>() / n;
        let var = self.points.iter().map(|pt| (f(pt) - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }
}

/// i.i.d. draws from ρ(x, p) ∝ exp(−(x−x₀)²/2σ² − (p−p₀)²/2σ²) with σ² = ℏ_ε/2
/// per axis. Each point draws its position components, then its momenta.
pub fn sample_wigner(x0: &[f64], p0: &[f64], hbar: ScaledPlanck, n: usize, seed: u64) -> Result<PhaseEnsemble> {
    let dim = x0.len();
    if dim == 0 || dim > MAX_DIM || p0.len() != dim {
        bail!(Usage, "ensemble centre must have 1 or 2 matching position and momentum components");
    }
    if n == 0 {
        bail!(Usage, "ensemble size must be at least 1");
    }
    let normal = Normal::new(0.0, hbar.sigma()).map_err(|_| Error::Domain("invalid ensemble width".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let mut pt = PhasePoint { x: [0.0; MAX_DIM], p: [0.0; MAX_DIM], dim };
            for k in 0..dim {
                pt.x[k] = x0[k] + normal.sample(&mut rng);
            }
            for k in 0..dim {
                pt.p[k] = p0[k] + normal.sample(&mut rng);
            }
            pt
        })
        .collect();
    Ok(PhaseEnsemble { points, hbar, seed })
}

/// Stepping and sampling parameters shared by every chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub dt: f64,
    pub n_steps: usize,
    pub every: usize,
    pub integrator: Integrator,
    /// Steps at which the full point cloud is kept.
    pub snapshot_steps: Vec<usize>,
}

impl EnsembleRun {
    pub fn n_samples(&self) -> usize {
        self.n_steps / self.every.max(1) + 1
    }
}

/// Partial sums of one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSums {
    pub count: usize,
    /// Per sample: Σx_k, Σx_k², Σp_k for each axis, laid out [sample][axis].
    pub sum_x: Vec<[f64; MAX_DIM]>,
    pub sum_x2: Vec<[f64; MAX_DIM]>,
    pub sum_p: Vec<[f64; MAX_DIM]>,
    pub max_energy_drift: f64,
    pub snapshots: Vec<Vec<PhasePoint>>,
}

/// Evolve the points of one chunk in place and accumulate their moments.
pub fn evolve_chunk<H: Hamiltonian + ?Sized>(points: &mut [PhasePoint], ham: &H, run: &EnsembleRun) -> Result<ChunkSums> {
    let every = run.every.max(1);
    let ns = run.n_samples();
    let mut sums = ChunkSums {
        count: points.len(),
        sum_x: vec![[0.0; MAX_DIM]; ns],
        sum_x2: vec![[0.0; MAX_DIM]; ns],
        sum_p: vec![[0.0; MAX_DIM]; ns],
        max_energy_drift: 0.0,
        snapshots: vec![Vec::with_capacity(points.len()); run.snapshot_steps.len()],
    };
    if let Some(pt) = points.iter().find(|pt| pt.dim != ham.dim()) {
        bail!(Usage, "ensemble point has {} components, Hamiltonian needs {}", pt.dim, ham.dim());
    }
    let snap_at = |step: usize| run.snapshot_steps.iter().position(|&k| k == step);
    for block in points.chunks_mut(BLOCK) {
        let e0: Vec<f64> = block.iter().map(|pt| pt.energy(ham)).collect();
        for step in 0..=run.n_steps {
            if step > 0 {
                run.integrator.step_block(ham, block, run.dt);
            }
            if step % every == 0 {
                let s = step / every;
                for pt in block.iter() {
                    for k in 0..pt.dim {
                        sums.sum_x[s][k] += pt.x[k];
                        sums.sum_x2[s][k] += pt.x[k] * pt.x[k];
                        sums.sum_p[s][k] += pt.p[k];
                    }
                }
            }
            if let Some(i) = snap_at(step) {
                sums.snapshots[i].extend_from_slice(block);
            }
        }
        for (pt, e0) in block.iter().zip(e0) {
            let drift = (pt.energy(ham) - e0).abs() / energy_scale(e0);
            if !(drift <= DRIFT_ABORT) {
                return Err(Error::EnergyDrift { step: run.n_steps, drift, limit: DRIFT_ABORT });
            }
            sums.max_energy_drift = sums.max_energy_drift.max(drift);
        }
    }
    Ok(sums)
}

/// Ensemble-averaged observables.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleObservables {
    pub mean_x: Vec<TimeSeries>,
    pub var_x: Vec<TimeSeries>,
    pub mean_p: Vec<TimeSeries>,
    /// Standard error of the mean of x per axis, √(Var/n).
    pub sem_x: Vec<TimeSeries>,
    pub max_energy_drift: f64,
    /// Point clouds at `EnsembleRun::snapshot_steps`, in the original point order.
    pub snapshots: Vec<(f64, Vec<PhasePoint>)>,
}

/// Combine chunk sums in the given (chunk) order.
pub fn combine(chunks: Vec<ChunkSums>, dim: usize, run: &EnsembleRun) -> Result<EnsembleObservables> {
    let n: usize = chunks.iter().map(|c| c.count).sum();
    if n == 0 {
        bail!(Usage, "cannot combine an empty ensemble");
    }
    let ns = run.n_samples();
    let mut sx = vec![[0.0; MAX_DIM]; ns];
    let mut sx2 = vec![[0.0; MAX_DIM]; ns];
    let mut sp = vec![[0.0; MAX_DIM]; ns];
    let mut drift: f64 = 0.0;
    let mut snapshots: Vec<Vec<PhasePoint>> = vec![Vec::new(); run.snapshot_steps.len()];
    for c in chunks {
        for s in 0..ns {
            for k in 0..dim {
                sx[s][k] += c.sum_x[s][k];
                sx2[s][k] += c.sum_x2[s][k];
                sp[s][k] += c.sum_p[s][k];
            }
        }
        drift = drift.max(c.max_energy_drift);
        for (dst, src) in snapshots.iter_mut().zip(c.snapshots) {
            dst.extend(src);
        }
    }
    let inv = 1.0 / n as f64;
    let dt = run.dt * run.every.max(1) as f64;
    let series = |f: &dyn Fn(usize) -> f64| TimeSeries { t0: 0.0, dt, values: (0..ns).map(f).collect(), tag: 0 };
    let mut mean_x = Vec::new();
    let mut var_x = Vec::new();
    let mut mean_p = Vec::new();
    let mut sem_x = Vec::new();
    for k in 0..dim {
        let var = |s: usize| (sx2[s][k] * inv - (sx[s][k] * inv).powi(2)).max(0.0);
        mean_x.push(series(&|s| sx[s][k] * inv));
        var_x.push(series(&var));
        mean_p.push(series(&|s| sp[s][k] * inv));
        sem_x.push(series(&|s| libm::sqrt(var(s) * inv)));
    }
    let snapshots = run.snapshot_steps.iter().map(|&s| s as f64 * run.dt).zip(snapshots).collect();
    Ok(EnsembleObservables { mean_x, var_x, mean_p, sem_x, max_energy_drift: drift, snapshots })
}

/// Sequential evolution; identical to any parallel evaluation of the same chunks.
pub fn evolve_ensemble<H: Hamiltonian + ?Sized>(
    ensemble: &PhaseEnsemble,
    ham: &H,
    run: &EnsembleRun,
) -> Result<EnsembleObservables> {
    let mut points = ensemble.points.clone();
    let chunks = points.chunks_mut(CHUNK).map(|c| evolve_chunk(c, ham, run)).collect::<Result<Vec<_>>>()?;
    combine(chunks, ham.dim(), run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::integrate_trajectory;
    use crate::model::{Harmonic, OneD, Quartic};
    use proptest::prelude::*;

    fn hb(v: f64) -> ScaledPlanck {
        ScaledPlanck::new(v).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_wigner(&[1.0], &[0.0], hb(0.03), 1, 42).unwrap();
        let b = sample_wigner(&[1.0], &[0.0], hb(0.03), 1, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_wigner(&[1.0], &[0.0], hb(0.03), 1, 43).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn sample_moments() {
        let n = 100_000;
        let e = sample_wigner(&[1.0], &[0.5], hb(0.03), n, 9).unwrap();
        let (mx, vx) = e.moments(|pt| pt.x[0]);
        let (mp, vp) = e.moments(|pt| pt.p[0]);
        let sigma = libm::sqrt(0.015);
        let band = 3.0 * sigma / libm::sqrt(n as f64);
        assert!((mx - 1.0).abs() < band && (mp - 0.5).abs() < band);
        assert!((vx - 0.015).abs() < 2e-4 && (vp - 0.015).abs() < 2e-4, "{vx} {vp}");
        let cov = e.points.iter().map(|pt| (pt.x[0] - mx) * (pt.p[0] - mp)).sum::<f64>() / n as f64;
        assert!(cov.abs() < 3.0 * 0.015 / libm::sqrt(n as f64));
    }

    #[test]
    fn single_point_ensemble_is_a_trajectory() {
        let e = sample_wigner(&[1.0], &[0.0], hb(0.03), 1, 5).unwrap();
        let run = EnsembleRun { dt: 0.01, n_steps: 500, every: 5, integrator: Integrator::default(), snapshot_steps: vec![] };
        let obs = evolve_ensemble(&e, &OneD(&Quartic), &run).unwrap();
        let tr = integrate_trajectory(e.points[0], &OneD(&Quartic), 0.01, 500, 5, Integrator::default()).unwrap();
        for (a, b) in obs.mean_x[0].values.iter().zip(&tr.points) {
            assert_eq!(*a, b.x[0]);
        }
    }

    #[test]
    fn harmonic_mean_follows_classical_orbit() {
        let omega = 1.4;
        let pot = Harmonic { omega };
        let e = sample_wigner(&[0.8], &[0.3], hb(0.03), 20_000, 11).unwrap();
        let (mx0, _) = e.moments(|pt| pt.x[0]);
        let (mp0, _) = e.moments(|pt| pt.p[0]);
        let run = EnsembleRun { dt: 0.01, n_steps: 2000, every: 50, integrator: Integrator::default(), snapshot_steps: vec![] };
        let obs = evolve_ensemble(&e, &OneD(&pot), &run).unwrap();
        // Linear flow maps the sample mean exactly along the classical orbit.
        for (t, x) in obs.mean_x[0].iter() {
            let exact = mx0 * libm::cos(omega * t) + mp0 / omega * libm::sin(omega * t);
            assert!((x - exact).abs() < 1e-9);
        }
        assert!(obs.max_energy_drift < 1e-8);
    }

    #[test]
    fn reductions_do_not_depend_on_chunk_schedule() {
        let e = sample_wigner(&[1.0], &[0.0], hb(0.03), 3 * CHUNK + 17, 3).unwrap();
        let run = EnsembleRun { dt: 0.02, n_steps: 200, every: 10, integrator: Integrator::default(), snapshot_steps: vec![100] };
        let ham = OneD(&Quartic);
        let serial = evolve_ensemble(&e, &ham, &run).unwrap();
        // Evaluate chunks in reverse, then restore chunk order before combining.
        let mut pts = e.points.clone();
        let mut chunks: Vec<(usize, ChunkSums)> =
            pts.chunks_mut(CHUNK).enumerate().rev().map(|(i, c)| (i, evolve_chunk(c, &ham, &run).unwrap())).collect();
        chunks.sort_by_key(|c| c.0);
        let shuffled = combine(chunks.into_iter().map(|c| c.1).collect(), 1, &run).unwrap();
        assert_eq!(serial, shuffled);
        assert_eq!(serial.snapshots[0].1.len(), e.len());
    }

    #[test]
    fn liouville_occupancy_of_static_box() {
        // Unit-frequency oscillator with σ_x = σ_p: the Wigner Gaussian at the
        // origin is stationary, so a fixed box keeps its occupancy.
        let pot = Harmonic { omega: 1.0 };
        let n = 50_000;
        let e = sample_wigner(&[0.0], &[0.0], hb(0.05), n, 21).unwrap();
        let steps = 700;
        let run = EnsembleRun {
            dt: 0.01,
            n_steps: steps,
            every: steps,
            integrator: Integrator::default(),
            snapshot_steps: vec![0, steps],
        };
        let obs = evolve_ensemble(&e, &OneD(&pot), &run).unwrap();
        let count = |pts: &[PhasePoint]| {
            pts.iter().filter(|pt| pt.x[0] > 0.05 && pt.x[0] < 0.2 && pt.p[0] > -0.1 && pt.p[0] < 0.1).count() as f64
        };
        let (c0, c1) = (count(&obs.snapshots[0].1), count(&obs.snapshots[1].1));
        assert!(c0 > 1000.0);
        assert!((c1 - c0).abs() < 3.0 * libm::sqrt(2.0 * c0), "{c0} vs {c1}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn per_point_energy_is_conserved(seed in 0u64..1000) {
            let e = sample_wigner(&[1.0], &[0.0], hb(0.03), 64, seed).unwrap();
            let run = EnsembleRun { dt: 2.831_474_416_851_99 / 128.0, n_steps: 5000, every: 100, integrator: Integrator::default(), snapshot_steps: vec![] };
            let obs = evolve_ensemble(&e, &OneD(&Quartic), &run).unwrap();
            prop_assert!(obs.max_energy_drift < 1e-8, "{}", obs.max_energy_drift);
        }
    }
}
