//! Hamiltonians, the scaled Planck constant, and closed-form timescale calculators
//! for macroscopic and atomic examples.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Julian year in seconds.
pub const YEAR_SI: f64 = 3.155_76e7;

/// Dimensionless factor multiplying ℏ in the scaled Schrödinger equation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScaledPlanck(f64);

impl ScaledPlanck {
    pub fn new(hbar_eps: f64) -> Result<Self> {
        if !(hbar_eps.is_finite() && hbar_eps > 0.0) {
            bail!(Domain, "hbar_eps must be positive and finite, got {hbar_eps}");
        }
        Ok(Self(hbar_eps))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Packet width σ_x = σ_p = √(ℏ_ε/2) of the minimal-uncertainty Gaussian.
    #[inline]
    pub fn sigma(self) -> f64 {
        libm::sqrt(self.0 / 2.0)
    }
}

/// Maximum number of degrees of freedom handled by the classical integrators.
pub const MAX_DIM: usize = 2;

/// A Hamiltonian of the separable form H = T(p) + V(x).
///
/// Slices always have length `dim()`.
pub trait Hamiltonian {
    fn dim(&self) -> usize;
    fn kinetic(&self, p: &[f64]) -> f64;
    fn potential(&self, x: &[f64]) -> f64;
    /// ∂T/∂p.
    fn velocity(&self, p: &[f64], out: &mut [f64]);
    /// ∂V/∂x.
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    fn energy(&self, x: &[f64], p: &[f64]) -> f64 {
        self.kinetic(p) + self.potential(x)
    }
}

/// A one-dimensional potential with kinetic term p²/2m.
pub trait Potential1D {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn mass(&self) -> f64 {
        1.0
    }
}

#[inline]
pub fn quartic_potential(x: f64) -> f64 {
    let x2 = x * x;
    x2 + x2 * x2
}

/// V(x) = x² + x⁴ with unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quartic;

impl Potential1D for Quartic {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        quartic_potential(x)
    }
    #[inline]
    fn derivative(&self, x: f64) -> f64 {
        2.0 * x + 4.0 * x * x * x
    }
}

/// V(x) = ω²x²/2 with unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub omega: f64,
}

impl Potential1D for Harmonic {
    #[inline]
    fn value(&self, x: f64) -> f64 {
        0.5 * self.omega * self.omega * x * x
    }
    #[inline]
    fn derivative(&self, x: f64) -> f64 {
        self.omega * self.omega * x
    }
}

/// V(x) = Σ c_k x^k.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

impl Potential1D for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.coefficients.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }
}

/// Natural cubic spline through tabulated samples. Outside the table the end
/// segments are continued linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl Tabulated {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            bail!(Config, "tabulated potential needs at least 3 matching (x, V) samples");
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(Config, "tabulated potential abscissae must be strictly increasing");
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            bail!(Config, "tabulated potential contains non-finite samples");
        }
        // Tridiagonal solve for the natural spline second derivatives.
        let mut second = alloc::vec![0.0; n];
        let mut u = alloc::vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let dd = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * dd / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        Ok(Self { xs, ys, second })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            let (edge, k) = if x < lo { (lo, 0) } else { (hi, n - 2) };
            let (v, d) = self.eval_in(edge, k);
            return (v + d * (x - edge), d);
        }
        self.eval_in(x, self.segment(x))
    }

    fn eval_in(&self, x: f64, k: usize) -> (f64, f64) {
        let h = self.xs[k + 1] - self.xs[k];
        let a = (self.xs[k + 1] - x) / h;
        let b = (x - self.xs[k]) / h;
        let (m0, m1) = (self.second[k], self.second[k + 1]);
        let v = a * self.ys[k] + b * self.ys[k + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (self.ys[k + 1] - self.ys[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        (v, d)
    }
}

impl Potential1D for Tabulated {
    fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }
    fn derivative(&self, x: f64) -> f64 {
        self.eval(x).1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CustomPotential {
    Polynomial(Polynomial),
    Tabulated(Tabulated),
}

impl Potential1D for CustomPotential {
    fn value(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(p) => p.value(x),
            Self::Tabulated(t) => t.value(x),
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(p) => p.derivative(x),
            Self::Tabulated(t) => t.derivative(x),
        }
    }
}

/// Three-site Toda lattice reduced to two degrees of freedom:
/// H = p₁² + p₂² + p₁p₂ + e^{−x₁} + e^{−(x₂−x₁)} + e^{x₂}.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Toda;

impl Toda {
    #[inline]
    pub fn kinetic_form(p1: f64, p2: f64) -> f64 {
        p1 * p1 + p2 * p2 + p1 * p2
    }

    #[inline]
    pub fn potential_form(x1: f64, x2: f64) -> f64 {
        libm::exp(-x1) + libm::exp(-(x2 - x1)) + libm::exp(x2)
    }
}

impl Hamiltonian for Toda {
    fn dim(&self) -> usize {
        2
    }
    fn kinetic(&self, p: &[f64]) -> f64 {
        Self::kinetic_form(p[0], p[1])
    }
    fn potential(&self, x: &[f64]) -> f64 {
        Self::potential_form(x[0], x[1])
    }
    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * p[0] + p[1];
        out[1] = 2.0 * p[1] + p[0];
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let a = libm::exp(-x[0]);
        let b = libm::exp(-(x[1] - x[0]));
        let c = libm::exp(x[1]);
        out[0] = -a + b;
        out[1] = -b + c;
    }
}

pub fn toda_energy(x1: f64, x2: f64, p1: f64, p2: f64) -> f64 {
    Toda::kinetic_form(p1, p2) + Toda::potential_form(x1, x2)
}

/// Second conserved quantity of the Toda model.
pub fn toda_conserved_f(x1: f64, x2: f64, p1: f64, p2: f64) -> f64 {
    -(p1 * p1 * p2 + p2 * p2 * p1) - p2 * libm::exp(-x1) + (p1 + p2) * libm::exp(-(x2 - x1)) - p1 * libm::exp(x2)
}

/// Adapter lifting a 1D potential to the [`Hamiltonian`] interface.
#[derive(Debug, Clone, Copy)]
pub struct OneD<'a, P: Potential1D + ?Sized>(pub &'a P);

impl<P: Potential1D + ?Sized> Hamiltonian for OneD<'_, P> {
    fn dim(&self) -> usize {
        1
    }
    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p[0] * p[0] / self.0.mass()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        self.0.value(x[0])
    }
    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        out[0] = p[0] / self.0.mass();
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.0.derivative(x[0]);
    }
}

/// Closed set of model Hamiltonians addressable from scenario files.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSpec {
    Quartic1D,
    Harmonic1D { omega: f64 },
    Toda2D,
    Custom1D(CustomPotential),
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        if let Self::Harmonic1D { omega } = self {
            if !(omega.is_finite() && *omega > 0.0) {
                bail!(Config, "harmonic omega must be positive, got {omega}");
            }
        }
        Ok(())
    }

    pub fn is_1d(&self) -> bool {
        !matches!(self, Self::Toda2D)
    }

    /// The 1D potential, or `None` for Toda.
    pub fn potential_1d(&self) -> Option<&dyn Potential1D> {
        if self.is_1d() {
            Some(self)
        } else {
            None
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quartic1D => "quartic",
            Self::Harmonic1D { .. } => "harmonic",
            Self::Toda2D => "toda",
            Self::Custom1D(_) => "custom",
        }
    }
}

impl Potential1D for HamiltonianSpec {
    fn value(&self, x: f64) -> f64 {
        match self {
            Self::Quartic1D => quartic_potential(x),
            Self::Harmonic1D { omega } => Harmonic { omega: *omega }.value(x),
            Self::Toda2D => f64::NAN,
            Self::Custom1D(c) => c.value(x),
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Quartic1D => Quartic.derivative(x),
            Self::Harmonic1D { omega } => Harmonic { omega: *omega }.derivative(x),
            Self::Toda2D => f64::NAN,
            Self::Custom1D(c) => c.derivative(x),
        }
    }
}

impl Hamiltonian for HamiltonianSpec {
    fn dim(&self) -> usize {
        if self.is_1d() {
            1
        } else {
            2
        }
    }
    fn kinetic(&self, p: &[f64]) -> f64 {
        match self {
            Self::Toda2D => Toda.kinetic(p),
            _ => 0.5 * p[0] * p[0],
        }
    }
    fn potential(&self, x: &[f64]) -> f64 {
        match self {
            Self::Toda2D => Toda.potential(x),
            _ => Potential1D::value(self, x[0]),
        }
    }
    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Self::Toda2D => Toda.velocity(p, out),
            _ => out[0] = p[0],
        }
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Toda2D => Toda.gradient(x, out),
            _ => out[0] = Potential1D::derivative(self, x[0]),
        }
    }
}

/// SI inputs for the closed-form calculators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiInputs {
    /// kg
    pub mass: f64,
    /// Box size a in m.
    pub length: f64,
    /// m/s
    pub speed: f64,
}

/// Ehrenfest time as a multiple of the classical period, and in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormTime {
    pub over_period: f64,
    pub seconds: f64,
    /// Classical period T_c in seconds.
    pub period: f64,
}

fn box_action(si: &SiInputs) -> Result<(f64, f64)> {
    for (name, v) in [("mass", si.mass), ("length", si.length), ("speed", si.speed)] {
        if !(v.is_finite() && v > 0.0) {
            bail!(Domain, "{name} must be positive, got {v}");
        }
    }
    let p = si.mass * si.speed;
    let action = p * si.length / core::f64::consts::PI;
    let period = 2.0 * si.length * si.mass / p;
    Ok((action, period))
}

/// τ = T_c √(2I/ℏ) with I = pa/π for a particle bouncing in a box.
pub fn box_ehrenfest_time(si: &SiInputs) -> Result<ClosedFormTime> {
    let (action, period) = box_action(si)?;
    let ratio = libm::sqrt(2.0 * action / HBAR_SI);
    Ok(ClosedFormTime { over_period: ratio, seconds: ratio * period, period })
}

/// T_r / T_c = 2I/ℏ for the box.
pub fn box_revival_time(si: &SiInputs) -> Result<f64> {
    let (action, _) = box_action(si)?;
    Ok(2.0 * action / HBAR_SI)
}

/// Inputs of the Kepler problem with H = −mk²/(2(I+L)²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerInputs {
    /// Angular momentum L in J·s.
    pub angular_momentum: f64,
    /// Radial action I in J·s.
    pub radial_action: f64,
    /// kg
    pub mass: f64,
    /// Force constant k in J·m.
    pub coupling: f64,
}

fn kepler_check(angular_momentum: f64, radial_action: f64) -> Result<()> {
    if !(angular_momentum.is_finite() && angular_momentum > 0.0) {
        bail!(Domain, "angular momentum must be positive, got {angular_momentum}");
    }
    if !(radial_action.is_finite() && radial_action >= 0.0) {
        bail!(Domain, "radial action must be non-negative, got {radial_action}");
    }
    Ok(())
}

/// τ/T_c = (√2/3) / (√(ℏ[(I+L)²−L²]/(L²(I+L))) + (L/(I+L))√(ℏ/L)).
pub fn kepler_ehrenfest_ratio(angular_momentum: f64, radial_action: f64) -> Result<f64> {
    kepler_check(angular_momentum, radial_action)?;
    let (l, i) = (angular_momentum, radial_action);
    let j = i + l;
    let first = libm::sqrt(HBAR_SI * (j * j - l * l) / (l * l * j));
    let second = l / j * libm::sqrt(HBAR_SI / l);
    Ok(core::f64::consts::SQRT_2 / 3.0 / (first + second))
}

/// Kepler Ehrenfest time, with T_c = 2π(I+L)³/(mk²).
pub fn kepler_ehrenfest_time(inputs: &KeplerInputs) -> Result<ClosedFormTime> {
    let ratio = kepler_ehrenfest_ratio(inputs.angular_momentum, inputs.radial_action)?;
    if !(inputs.mass > 0.0 && inputs.coupling > 0.0) {
        bail!(Domain, "mass and coupling must be positive");
    }
    let j = inputs.radial_action + inputs.angular_momentum;
    let period = 2.0 * core::f64::consts::PI * j * j * j / (inputs.mass * inputs.coupling * inputs.coupling);
    Ok(ClosedFormTime { over_period: ratio, seconds: ratio * period, period })
}

/// T_r / T_c = (2/3)(I+L)/ℏ.
pub fn kepler_revival_time(angular_momentum: f64, radial_action: f64) -> Result<f64> {
    kepler_check(angular_momentum, radial_action)?;
    Ok(2.0 / 3.0 * (angular_momentum + radial_action) / HBAR_SI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_values() {
        assert_eq!(quartic_potential(0.0), 0.0);
        assert_eq!(quartic_potential(1.0), 2.0);
        assert_eq!(quartic_potential(-1.0), 2.0);
    }

    #[test]
    fn toda_f_hand_values() {
        assert_eq!(toda_conserved_f(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(toda_conserved_f(0.0, 0.0, 1.0, 1.0), -2.0);
    }

    #[test]
    fn toda_gradient_matches_finite_difference() {
        let (x1, x2, h) = (0.7, 1.2, 1e-6);
        let mut g = [0.0; 2];
        Toda.gradient(&[x1, x2], &mut g);
        let d1 = (Toda::potential_form(x1 + h, x2) - Toda::potential_form(x1 - h, x2)) / (2.0 * h);
        let d2 = (Toda::potential_form(x1, x2 + h) - Toda::potential_form(x1, x2 - h)) / (2.0 * h);
        assert!((g[0] - d1).abs() < 1e-8 && (g[1] - d2).abs() < 1e-8);
    }

    #[test]
    fn ball_in_box() {
        let si = SiInputs { mass: 1e-3, length: 1.0, speed: 1.0 };
        let tau = box_ehrenfest_time(&si).unwrap();
        assert!((tau.over_period / 2.4e15 - 1.0).abs() < 0.1, "{}", tau.over_period);
        let tr = box_revival_time(&si).unwrap();
        let oracle = 2.0 * (1e-3 / core::f64::consts::PI) / 1.0546e-34;
        assert!((tr / oracle - 1.0).abs() < 1e-3);
        assert!((tau.over_period * tau.over_period / tr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cold_atom_is_order_one() {
        let si = SiInputs { mass: 1.5e-25, length: 1e-7, speed: 1e-3 };
        let r = box_ehrenfest_time(&si).unwrap().over_period;
        assert!(r > 0.1 && r < 1.0, "{r}");
    }

    #[test]
    fn box_scalings() {
        let si = SiInputs { mass: 2.0, length: 3.0, speed: 5.0 };
        let base = box_ehrenfest_time(&si).unwrap().over_period;
        let quad = box_ehrenfest_time(&SiInputs { mass: 8.0, ..si }).unwrap().over_period;
        assert!((quad / base - 2.0).abs() < 1e-12);
        let tr = box_revival_time(&si).unwrap();
        let tr2 = box_revival_time(&SiInputs { speed: 10.0, ..si }).unwrap();
        assert!((tr2 / tr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_rejects_nonpositive() {
        assert!(box_ehrenfest_time(&SiInputs { mass: 0.0, length: 1.0, speed: 1.0 }).is_err());
        assert!(box_revival_time(&SiInputs { mass: 1.0, length: -1.0, speed: 1.0 }).is_err());
    }

    #[test]
    fn kepler_sun_earth_and_hydrogen() {
        let tau = kepler_ehrenfest_ratio(2.7e39, 0.0).unwrap();
        assert!((tau / 2.3e36 - 1.0).abs() < 0.1, "{tau}");
        let h = kepler_ehrenfest_ratio(HBAR_SI, 0.0).unwrap();
        assert!((h / 0.5 - 1.0).abs() < 0.1, "{h}");
        let tr = kepler_revival_time(HBAR_SI, 0.0).unwrap();
        assert!((tr - 2.0 / 3.0).abs() < 1e-12);
        let tr_sun = kepler_revival_time(2.7e39, 0.0).unwrap();
        assert!((tr_sun / 1.7e73 - 1.0).abs() < 0.05);
        assert!(kepler_ehrenfest_ratio(0.0, 0.0).is_err());
    }

    #[test]
    fn kepler_period_follows_frequency() {
        let inputs = KeplerInputs { angular_momentum: 2.0, radial_action: 1.0, mass: 3.0, coupling: 0.5 };
        let t = kepler_ehrenfest_time(&inputs).unwrap();
        let energy = |j: f64| -inputs.mass * inputs.coupling * inputs.coupling / (2.0 * j * j);
        let h = 1e-5;
        let omega = (energy(3.0 + h) - energy(3.0 - h)) / (2.0 * h);
        assert!((t.period - 2.0 * core::f64::consts::PI / omega).abs() / t.period < 1e-8);
    }

    #[test]
    fn tabulated_spline_reproduces_quadratic_interior() {
        let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let t = Tabulated::new(xs, ys).unwrap();
        assert!((t.value(0.33) - 0.1089).abs() < 1e-4);
        assert!((t.derivative(0.5) - 1.0).abs() < 1e-3);
        assert!(Tabulated::new(alloc::vec![0.0, 0.0, 1.0], alloc::vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn polynomial_matches_quartic() {
        let p = Polynomial { coefficients: alloc::vec![0.0, 0.0, 1.0, 0.0, 1.0] };
        for x in [-1.3, 0.0, 0.4, 2.0] {
            assert!((p.value(x) - quartic_potential(x)).abs() < 1e-12);
            assert!((p.derivative(x) - Quartic.derivative(x)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn kepler_identity_at_zero_radial_action(l in 1e-34f64..1e40) {
            let tau = kepler_ehrenfest_ratio(l, 0.0).unwrap();
            let closed = core::f64::consts::SQRT_2 / 3.0 * libm::sqrt(l / HBAR_SI);
            prop_assert!((tau / closed - 1.0).abs() < 1e-12);
            let tr = kepler_revival_time(l, 0.0).unwrap();
            prop_assert!((tr / (tau * tau) - 3.0).abs() < 1e-9);
        }

        #[test]
        fn quartic_is_even(x in -10.0f64..10.0) {
            prop_assert_eq!(quartic_potential(x), quartic_potential(-x));
        }
    }
}
