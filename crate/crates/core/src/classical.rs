//! Classical trajectories and action-angle quantities.
//!
//! Trajectories use symmetric compositions of the kick-drift-kick leapfrog. The
//! sixth-order Kahan-Li composition is the default because plain leapfrog cannot
//! hold the energy error near 1e-8 at practical step counts.
//!
//! Action, period and frequency derivatives are computed by Gauss-Legendre
//! quadrature after the substitution x = c + A sin θ, which removes the
//! inverse-square-root singularity at the turning points.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Error, Result};
use crate::model::{Hamiltonian, Potential1D, ScaledPlanck, MAX_DIM};
use crate::series::TimeSeries;

/// Point in phase space with one or two degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: [f64; MAX_DIM],
    pub p: [f64; MAX_DIM],
    pub dim: usize,
}

impl PhasePoint {
    pub fn one(x: f64, p: f64) -> Self {
        Self { x: [x, 0.0], p: [p, 0.0], dim: 1 }
    }

    pub fn two(x: [f64; 2], p: [f64; 2]) -> Self {
        Self { x, p, dim: 2 }
    }

    #[inline]
    pub fn xs(&self) -> &[f64] {
        &self.x[..self.dim]
    }

    #[inline]
    pub fn ps(&self) -> &[f64] {
        &self.p[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.xs().iter().chain(self.ps()).all(|v| v.is_finite())
    }

    pub fn energy<H: Hamiltonian + ?Sized>(&self, ham: &H) -> f64 {
        ham.energy(self.xs(), self.ps())
    }
}

const YOSHIDA4: [f64; 3] = {
    // w1 = 1/(2 − 2^{1/3}), w0 = 1 − 2 w1
    let w1 = 1.351_207_191_959_657_8;
    [w1, 1.0 - 2.0 * w1, w1]
};

const KAHAN_LI6: [f64; 9] = [
    0.392_161_444_007_314_139_28,
    0.332_599_136_789_359_438_60,
    -0.706_246_172_557_639_359_81,
    0.082_213_596_293_550_800_230,
    0.798_543_990_934_829_963_40,
    0.082_213_596_293_550_800_230,
    -0.706_246_172_557_639_359_81,
    0.332_599_136_789_359_438_60,
    0.392_161_444_007_314_139_28,
];

/// Symmetric symplectic composition schemes built on leapfrog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    Leapfrog,
    Yoshida4,
    #[default]
    KahanLi6,
}

impl Integrator {
    pub fn weights(self) -> &'static [f64] {
        match self {
            Self::Leapfrog => &[1.0],
            Self::Yoshida4 => &YOSHIDA4,
            Self::KahanLi6 => &KAHAN_LI6,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Self::Leapfrog => 2,
            Self::Yoshida4 => 4,
            Self::KahanLi6 => 6,
        }
    }

    /// Advance `state` by `h`. Adjacent half kicks of consecutive stages are fused.
    pub fn step<H: Hamiltonian + ?Sized>(self, ham: &H, state: &mut PhasePoint, h: f64) {
        let w = self.weights();
        let d = state.dim;
        let mut buf = [0.0; MAX_DIM];
        kick(ham, state, 0.5 * w[0] * h, &mut buf);
        for i in 0..w.len() {
            ham.velocity(&state.p[..d], &mut buf[..d]);
            for k in 0..d {
                state.x[k] += w[i] * h * buf[k];
            }
            let next = if i + 1 < w.len() { w[i + 1] } else { 0.0 };
            kick(ham, state, 0.5 * (w[i] + next) * h, &mut buf);
        }
    }

    /// Advance every point of `block` by `h`, stage by stage, so independent
    /// points overlap in the pipeline.
    pub fn step_block<H: Hamiltonian + ?Sized>(self, ham: &H, block: &mut [PhasePoint], h: f64) {
        let w = self.weights();
        let mut buf = [0.0; MAX_DIM];
        for pt in block.iter_mut() {
            kick(ham, pt, 0.5 * w[0] * h, &mut buf);
        }
        for i in 0..w.len() {
            let next = if i + 1 < w.len() { w[i + 1] } else { 0.0 };
            let (drift, kick_h) = (w[i] * h, 0.5 * (w[i] + next) * h);
            for pt in block.iter_mut() {
                let d = pt.dim;
                ham.velocity(&pt.p[..d], &mut buf[..d]);
                for k in 0..d {
                    pt.x[k] += drift * buf[k];
                }
                kick(ham, pt, kick_h, &mut buf);
            }
        }
    }
}

#[inline]
fn kick<H: Hamiltonian + ?Sized>(ham: &H, state: &mut PhasePoint, h: f64, buf: &mut [f64; MAX_DIM]) {
    let d = state.dim;
    ham.gradient(&state.x[..d], &mut buf[..d]);
    for k in 0..d {
        state.p[k] -= h * buf[k];
    }
}

/// Relative energy drift above which a run is aborted.
pub const DRIFT_ABORT: f64 = 1e-4;

/// Samples of a classical trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt_sample: f64,
    pub points: Vec<PhasePoint>,
    /// Largest relative energy deviation observed at the samples.
    pub max_energy_drift: f64,
}

impl Trajectory {
    pub fn position(&self, axis: usize) -> TimeSeries {
        TimeSeries { t0: 0.0, dt: self.dt_sample, values: self.points.iter().map(|pt| pt.x[axis]).collect(), tag: 0 }
    }

    pub fn momentum(&self, axis: usize) -> TimeSeries {
        TimeSeries { t0: 0.0, dt: self.dt_sample, values: self.points.iter().map(|pt| pt.p[axis]).collect(), tag: 0 }
    }

    pub fn last(&self) -> PhasePoint {
        *self.points.last().expect("trajectory holds the initial point")
    }
}

pub(crate) fn energy_scale(e0: f64) -> f64 {
    if e0.abs() > 0.0 {
        e0.abs()
    } else {
        1.0
    }
}

/// Integrate `n_steps` of size `dt`, sampling every `sample_every` steps.
///
/// Fails with [`Error::EnergyDrift`] once the relative energy error exceeds
/// [`DRIFT_ABORT`].
pub fn integrate_trajectory<H: Hamiltonian + ?Sized>(
    start: PhasePoint,
    ham: &H,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
    integrator: Integrator,
) -> Result<Trajectory> {
    if start.dim != ham.dim() {
        bail!(Usage, "phase point has {} components, Hamiltonian needs {}", start.dim, ham.dim());
    }
    if !start.is_finite() || !dt.is_finite() {
        bail!(Domain, "non-finite initial condition or step");
    }
    let every = sample_every.max(1);
    let e0 = start.energy(ham);
    let scale = energy_scale(e0);
    let mut state = start;
    let mut points = Vec::with_capacity(n_steps / every + 1);
    points.push(state);
    let mut max_drift: f64 = 0.0;
    for step in 1..=n_steps {
        integrator.step(ham, &mut state, dt);
        if step % every == 0 || step == n_steps {
            let drift = (state.energy(ham) - e0).abs() / scale;
            if !(drift <= DRIFT_ABORT) {
                return Err(Error::EnergyDrift { step, drift, limit: DRIFT_ABORT });
            }
            max_drift = max_drift.max(drift);
            if step % every == 0 {
                points.push(state);
            }
        }
    }
    Ok(Trajectory { dt_sample: dt * every as f64, points, max_energy_drift: max_drift })
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// ∫_a^b f.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(m + r * z)).sum::<f64>() * r
    }
}

const QUADRATURE_NODES: usize = 128;

/// Bounded orbit of a 1D potential at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Well {
    pub energy: f64,
    pub x_minus: f64,
    pub x_plus: f64,
}

fn bisect(mut inside: f64, mut outside: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(inside) < 0 <= f(outside); run to machine resolution.
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid) < 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Location of the potential minimum reached by descending from `guess`.
pub fn locate_minimum(pot: &dyn Potential1D, guess: f64) -> Result<f64> {
    let d0 = pot.derivative(guess);
    if d0 == 0.0 {
        return Ok(guess);
    }
    let dir = if d0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1e-3 * (1.0 + guess.abs());
    let mut far = guess;
    for _ in 0..200 {
        far = guess + dir * step;
        if pot.derivative(far) * dir > 0.0 {
            break;
        }
        step *= 2.0;
        if !far.is_finite() || step > 1e12 {
            bail!(Domain, "potential has no minimum reachable from x = {guess}");
        }
    }
    let (lo, hi) = if dir > 0.0 { (guess, far) } else { (far, guess) };
    // derivative < 0 at lo, > 0 at hi
    Ok(bisect(lo, hi, |x| pot.derivative(x)))
}

impl Well {
    /// Turning points of the orbit with energy `energy` through the well
    /// containing `inside` (a point where V < E, or the minimum descended to).
    pub fn locate(pot: &dyn Potential1D, energy: f64, inside: f64) -> Result<Self> {
        if !energy.is_finite() {
            bail!(Domain, "energy must be finite");
        }
        let mut start = inside;
        if !(pot.value(start) < energy) {
            start = locate_minimum(pot, inside)?;
            let vmin = pot.value(start);
            if !(vmin < energy) {
                bail!(Domain, "energy {energy} is not above the potential minimum {vmin}");
            }
        }
        let g = |x: f64| pot.value(x) - energy;
        let find = |dir: f64| -> Result<f64> {
            let mut step = 1e-3 * (1.0 + start.abs());
            for _ in 0..200 {
                let x = start + dir * step;
                if g(x) >= 0.0 {
                    return Ok(bisect(start, x, g));
                }
                step *= 2.0;
                if step > 1e12 {
                    break;
                }
            }
            bail!(Domain, "potential is not confining at energy {energy}")
        };
        let x_minus = find(-1.0)?;
        let x_plus = find(1.0)?;
        Ok(Self { energy, x_minus, x_plus })
    }

    fn center_amp(&self) -> (f64, f64) {
        (0.5 * (self.x_plus + self.x_minus), 0.5 * (self.x_plus - self.x_minus))
    }

    fn kinetic_at(&self, pot: &dyn Potential1D, theta: f64) -> (f64, f64) {
        let (c, a) = self.center_amp();
        let x = c + a * libm::sin(theta);
        ((self.energy - pot.value(x)).max(0.0), a * libm::cos(theta))
    }

    /// I = (1/π) ∫ √(2m(E − V)) dx.
    pub fn action(&self, pot: &dyn Potential1D, rule: &GaussLegendre) -> f64 {
        let m = pot.mass();
        rule.integrate(-PI / 2.0, PI / 2.0, |th| {
            let (k, jac) = self.kinetic_at(pot, th);
            libm::sqrt(2.0 * m * k) * jac
        }) / PI
    }

    /// T = 2 ∫ m dx / √(2m(E − V)).
    pub fn period(&self, pot: &dyn Potential1D, rule: &GaussLegendre) -> f64 {
        let m = pot.mass();
        2.0 * rule.integrate(-PI / 2.0, PI / 2.0, |th| {
            let (k, jac) = self.kinetic_at(pot, th);
            if k > 0.0 {
                m * jac / libm::sqrt(2.0 * m * k)
            } else {
                0.0
            }
        })
    }
}

/// Action-angle evaluator for one potential.
pub struct ActionAngle<'a> {
    pot: &'a dyn Potential1D,
    inside: f64,
    rule: GaussLegendre,
}

/// ω and its derivatives at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequencies {
    pub energy: f64,
    pub action: f64,
    pub omega: f64,
    /// dω/dE
    pub domega_de: f64,
    /// dω/dI = ω dω/dE
    pub omega_prime: f64,
    /// Final finite-difference step in energy.
    pub step: f64,
}

impl Frequencies {
    /// ω′ vanishing to rounding level, as for the harmonic oscillator.
    pub fn is_isochronous(&self) -> bool {
        (self.omega_prime * self.energy_scale() / (self.omega * self.omega)).abs() < 1e-9
    }

    fn energy_scale(&self) -> f64 {
        self.action * self.omega
    }
}

impl<'a> ActionAngle<'a> {
    /// `inside` selects the well; it may be any point the orbit passes through.
    pub fn new(pot: &'a dyn Potential1D, inside: f64) -> Self {
        Self { pot, inside, rule: GaussLegendre::new(QUADRATURE_NODES) }
    }

    pub fn well(&self, energy: f64) -> Result<Well> {
        Well::locate(self.pot, energy, self.inside)
    }

    pub fn action(&self, energy: f64) -> Result<f64> {
        Ok(self.well(energy)?.action(self.pot, &self.rule))
    }

    pub fn period(&self, energy: f64) -> Result<f64> {
        Ok(self.well(energy)?.period(self.pot, &self.rule))
    }

    pub fn omega(&self, energy: f64) -> Result<f64> {
        Ok(2.0 * PI / self.period(energy)?)
    }

    /// ω, dω/dE and ω′(I). The derivative is a centred difference whose step is
    /// halved until successive estimates agree to 1e-6 relative; the returned value
    /// is the Richardson extrapolation of the last pair.
    pub fn frequencies(&self, energy: f64) -> Result<Frequencies> {
        let well = self.well(energy)?;
        let action = well.action(self.pot, &self.rule);
        let omega = 2.0 * PI / well.period(self.pot, &self.rule);
        let vmin = self.pot.value(locate_minimum(self.pot, 0.5 * (well.x_minus + well.x_plus))?);
        let span = energy - vmin;
        let deriv = |h: f64| -> Result<f64> { Ok((self.omega(energy + h)? - self.omega(energy - h)?) / (2.0 * h)) };
        let mut h = 0.05 * span;
        let mut prev = deriv(h)?;
        let floor = 1e-10 * omega / span;
        let mut best = prev;
        for _ in 0..30 {
            let half = h / 2.0;
            let cur = deriv(half)?;
            let extrapolated = (4.0 * cur - prev) / 3.0;
            best = extrapolated;
            h = half;
            if (cur - prev).abs() <= 1e-6 * cur.abs() + floor {
                break;
            }
            prev = cur;
        }
        Ok(Frequencies { energy, action, omega, domega_de: best, omega_prime: best * omega, step: h })
    }
}

pub fn action_of_energy(pot: &dyn Potential1D, energy: f64) -> Result<f64> {
    ActionAngle::new(pot, 0.0).action(energy)
}

pub fn omega_of_energy(pot: &dyn Potential1D, energy: f64) -> Result<f64> {
    ActionAngle::new(pot, 0.0).omega(energy)
}

pub fn omega_prime(pot: &dyn Potential1D, energy: f64) -> Result<f64> {
    Ok(ActionAngle::new(pot, 0.0).frequencies(energy)?.omega_prime)
}

/// Tabulated I(E), ω(I), ω′(I).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionProfile {
    pub energy: Vec<f64>,
    pub action: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_prime: Vec<f64>,
}

impl ActionProfile {
    pub fn build(pot: &dyn Potential1D, inside: f64, energies: &[f64]) -> Result<Self> {
        if energies.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(Usage, "energy grid must be strictly ascending");
        }
        let aa = ActionAngle::new(pot, inside);
        let mut out = Self { energy: Vec::new(), action: Vec::new(), omega: Vec::new(), omega_prime: Vec::new() };
        for &e in energies {
            let f = aa.frequencies(e)?;
            out.energy.push(e);
            out.action.push(f.action);
            out.omega.push(f.omega);
            out.omega_prime.push(f.omega_prime);
        }
        Ok(out)
    }
}

/// A predicted timescale; isochronous systems give an infinite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timescale {
    Finite(f64),
    Infinite,
}

impl Timescale {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }

    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Ingredients of the dephasing estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhrenfestEstimate {
    pub tau: Timescale,
    pub frequencies: Frequencies,
    /// |∂I/∂x| δx + |∂I/∂p| δp
    pub action_spread: f64,
}

/// τ = 2π / (|ω′| (|∂I/∂x| δx + |∂I/∂p| δp)) with ∂I/∂x = V′(x₀)/ω and
/// ∂I/∂p = p₀/(mω).
pub fn ehrenfest_estimate_with_widths(
    pot: &dyn Potential1D,
    x0: f64,
    p0: f64,
    delta_x: f64,
    delta_p: f64,
) -> Result<EhrenfestEstimate> {
    let m = pot.mass();
    let energy = 0.5 * p0 * p0 / m + pot.value(x0);
    let frequencies = ActionAngle::new(pot, x0).frequencies(energy)?;
    let omega = frequencies.omega;
    let spread = pot.derivative(x0).abs() / omega * delta_x + (p0 / (m * omega)).abs() * delta_p;
    let tau = if frequencies.is_isochronous() {
        Timescale::Infinite
    } else {
        Timescale::Finite(2.0 * PI / (frequencies.omega_prime.abs() * spread))
    };
    Ok(EhrenfestEstimate { tau, frequencies, action_spread: spread })
}

/// Dephasing estimate for the minimal packet, δx = δp = √(ℏ_ε/2).
pub fn ehrenfest_estimate(pot: &dyn Potential1D, x0: f64, p0: f64, hbar: ScaledPlanck) -> Result<EhrenfestEstimate> {
    ehrenfest_estimate_with_widths(pot, x0, p0, hbar.sigma(), hbar.sigma())
}

pub fn predicted_ehrenfest_time(pot: &dyn Potential1D, x0: f64, p0: f64, hbar: ScaledPlanck) -> Result<Timescale> {
    Ok(ehrenfest_estimate(pot, x0, p0, hbar)?.tau)
}

/// Shortest finite per-action Ehrenfest time.
pub fn predicted_ehrenfest_time_nd(taus: &[Timescale]) -> Result<Timescale> {
    if taus.is_empty() {
        bail!(Usage, "at least one per-action Ehrenfest time is required");
    }
    Ok(taus.iter().filter_map(|t| t.finite()).fold(Timescale::Infinite, |acc, v| match acc {
        Timescale::Finite(a) if a <= v => acc,
        _ => Timescale::Finite(v),
    }))
}

/// T_r = 4π / (|ω′(I)| ℏ_ε) at energy `energy`.
pub fn predicted_revival_time(pot: &dyn Potential1D, inside: f64, energy: f64, hbar: ScaledPlanck) -> Result<Timescale> {
    let f = ActionAngle::new(pot, inside).frequencies(energy)?;
    if f.is_isochronous() {
        return Ok(Timescale::Infinite);
    }
    Ok(Timescale::Finite(4.0 * PI / (f.omega_prime.abs() * hbar.get())))
}
