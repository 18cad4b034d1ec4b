//! Deviation envelopes, the a(1 − e^{−bt²}) fit, log-log scaling fits and
//! revival detection.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Error, FitTraceEntry, Result};
use crate::fft::Fft;
use crate::series::{ComplexSeries, SparseSeries, TimeSeries};

/// |q − c| sample by sample.
pub fn deviation_series(q: &TimeSeries, c: &TimeSeries) -> Result<TimeSeries> {
    if !q.same_grid(c) {
        bail!(Usage, "deviation needs series on the same time grid");
    }
    let values = q.values.iter().zip(&c.values).map(|(a, b)| (a - b).abs()).collect();
    Ok(TimeSeries { values, ..q.clone() })
}

/// |q − c| / |c| at the samples where |c| exceeds `floor`.
pub fn relative_deviation(q: &TimeSeries, c: &TimeSeries, floor: f64) -> Result<SparseSeries> {
    if !q.same_grid(c) {
        bail!(Usage, "deviation needs series on the same time grid");
    }
    let mut out = SparseSeries::default();
    for (i, (a, b)) in q.values.iter().zip(&c.values).enumerate() {
        if b.abs() > floor {
            out.push(q.time(i), (a - b).abs() / b.abs());
        }
    }
    if out.is_empty() {
        bail!(InsufficientData, "no samples exceed the relative-deviation floor {floor}");
    }
    Ok(out)
}

/// Noise floor for peak detection as a fraction of the series maximum.
pub const PEAK_FLOOR: f64 = 1e-3;
pub const MIN_PEAKS: usize = 4;

/// Strict local maxima above `PEAK_FLOOR × max`.
pub fn peak_envelope(series: &TimeSeries) -> Result<SparseSeries> {
    let v = &series.values;
    let floor = PEAK_FLOOR * series.max();
    let mut peaks = SparseSeries::default();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor {
            peaks.push(series.time(i), v[i]);
        }
    }
    if peaks.len() < MIN_PEAKS {
        bail!(InsufficientData, "found {} peaks, need at least {MIN_PEAKS}", peaks.len());
    }
    Ok(peaks)
}

/// One peak per contiguous run of masked samples, for relative deviations.
/// Runs are separated by gaps longer than `max_gap`.
pub fn masked_run_peaks(series: &SparseSeries, max_gap: f64) -> Result<SparseSeries> {
    let mut peaks = SparseSeries::default();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..series.len() {
        let (t, v) = (series.t[i], series.v[i]);
        if i > 0 && t - series.t[i - 1] > max_gap {
            if let Some((bt, bv)) = best.take() {
                peaks.push(bt, bv);
            }
        }
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((t, v));
        }
    }
    if let Some((bt, bv)) = best {
        peaks.push(bt, bv);
    }
    if peaks.len() < MIN_PEAKS {
        bail!(InsufficientData, "found {} masked runs, need at least {MIN_PEAKS}", peaks.len());
    }
    Ok(peaks)
}

/// Least-squares fit of y = a(1 − e^{−bt²}).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFit {
    pub a: f64,
    pub b: f64,
    /// 1/√b
    pub tau: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub n_peaks: usize,
    pub iterations: usize,
}

pub const FIT_MAX_ITERATIONS: usize = 200;
pub const FIT_TOLERANCE: f64 = 1e-8;

fn envelope(a: f64, b: f64, t: f64) -> f64 {
    a * -libm::expm1(-b * t * t)
}

/// Damped Gauss-Newton (Levenberg-Marquardt) in (ln a, ln b), which keeps both
/// parameters positive.
pub fn fit_envelope(peaks: &SparseSeries) -> Result<EnvelopeFit> {
    let n = peaks.len();
    if n < MIN_PEAKS {
        bail!(InsufficientData, "envelope fit needs at least {MIN_PEAKS} peaks, got {n}");
    }
    if peaks.t.iter().chain(&peaks.v).any(|v| !v.is_finite()) {
        bail!(Domain, "peak data contains non-finite values");
    }
    let a0 = peaks.v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(a0 > 0.0) {
        bail!(Domain, "envelope peaks must include a positive value");
    }
    let t_half = {
        let i = peaks.v.iter().position(|&v| v >= 0.5 * a0).unwrap_or(0);
        if i == 0 {
            peaks.t[0].abs()
        } else {
            let (t0, t1, v0, v1) = (peaks.t[i - 1], peaks.t[i], peaks.v[i - 1], peaks.v[i]);
            t0 + (0.5 * a0 - v0) / (v1 - v0) * (t1 - t0)
        }
    };
    if !(t_half > 0.0) {
        bail!(Domain, "cannot initialise the envelope fit: half-rise time is not positive");
    }
    let mut theta = [libm::log(a0), -2.0 * libm::log(t_half)];
    let cost = |th: &[f64; 2]| -> f64 {
        let (a, b) = (libm::exp(th[0]), libm::exp(th[1]));
        peaks.t.iter().zip(&peaks.v).map(|(&t, &y)| (y - envelope(a, b, t)).powi(2)).sum()
    };
    let mut current = cost(&theta);
    let mut lambda = 1e-3;
    let mut trace = Vec::new();
    for iteration in 1..=FIT_MAX_ITERATIONS {
        let (a, b) = (libm::exp(theta[0]), libm::exp(theta[1]));
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&t, &y) in peaks.t.iter().zip(&peaks.v) {
            let e = libm::exp(-b * t * t);
            let f = envelope(a, b, t);
            let j = [f, a * b * t * t * e];
            let r = y - f;
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let m = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        trace.push(FitTraceEntry { iteration, a, b, cost: current, damping: lambda });
        if !(det.is_finite() && det.abs() > 0.0) {
            return Err(Error::FitFailure { iterations: iteration, reason: "singular normal equations".to_string(), trace });
        }
        let delta = [(jtr[0] * m[1][1] - jtr[1] * m[0][1]) / det, (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det];
        let trial = [theta[0] + delta[0], theta[1] + delta[1]];
        let trial_cost = cost(&trial);
        let step = delta[0].abs().max(delta[1].abs());
        if trial_cost.is_finite() && trial_cost <= current {
            theta = trial;
            current = trial_cost;
            lambda = (lambda / 3.0).max(1e-12);
        } else {
            lambda *= 4.0;
        }
        // In log coordinates the step is the relative parameter change.
        if step < FIT_TOLERANCE {
            let (a, b) = (libm::exp(theta[0]), libm::exp(theta[1]));
            return Ok(EnvelopeFit {
                a,
                b,
                tau: 1.0 / libm::sqrt(b),
                residual: libm::sqrt(current / n as f64),
                n_peaks: n,
                iterations: iteration,
            });
        }
        if lambda > 1e16 {
            return Err(Error::FitFailure { iterations: iteration, reason: "damping diverged".to_string(), trace });
        }
    }
    Err(Error::FitFailure { iterations: FIT_MAX_ITERATIONS, reason: "iteration cap reached".to_string(), trace })
}

/// Ordinary least squares y = slope·x + intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        bail!(Usage, "linear fit needs at least two matching points");
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        bail!(InsufficientData, "linear fit needs distinct abscissae");
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LineFit { slope, intercept: my - slope * mx, r_squared })
}

/// Natural-log regression of ln y on ln x.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        bail!(Domain, "log-log fit needs positive finite values, got {v}");
    }
    let lx: Vec<f64> = xs.iter().map(|x| libm::log(*x)).collect();
    let ly: Vec<f64> = ys.iter().map(|y| libm::log(*y)).collect();
    linear_fit(&lx, &ly)
}

pub const MIN_SCALING_POINTS: usize = 4;

/// Regression of ln τ on ln(1/ℏ_ε).
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_SCALING_POINTS {
        bail!(InsufficientData, "scaling fit needs at least {MIN_SCALING_POINTS} distinct ħ_ε values, got {}", distinct.len());
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !(p.1 > 0.0)) {
        bail!(Domain, "scaling fit needs positive ħ_ε and τ, got ({}, {})", p.0, p.1);
    }
    let inv: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let taus: Vec<f64> = points.iter().map(|p| p.1).collect();
    log_log_fit(&inv, &taus)
}

/// A line of the autocorrelation spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub index: i64,
    /// Angular frequency, including any demodulation offset.
    pub omega: f64,
    pub weight: f64,
}

/// Quadratic fit ω(k) = ω₀ + b k + c k² through the dominant lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFit {
    pub lines: Vec<SpectralLine>,
    pub linear: f64,
    pub curvature: f64,
}

impl SpectralFit {
    pub fn classical_period(&self) -> f64 {
        2.0 * PI / self.linear.abs()
    }

    /// 2π/|c|, equal to 4π/(ω′ℏ) for E_n expanded to second order.
    pub fn revival_period(&self) -> f64 {
        2.0 * PI / self.curvature.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalRevival {
    pub time: f64,
    pub strength: f64,
    /// (p, q) when the time lies within 2% of p·T_r/q with q ≤ 4.
    pub label: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevivalReport {
    /// Estimated revival time; NaN when no spectral structure was found.
    pub t_r: f64,
    /// Largest |A| near `t_r`.
    pub strength: f64,
    /// Time of that maximum.
    pub peak_time: f64,
    /// Strength reached the 0.3 threshold.
    pub detected: bool,
    /// Equally spaced spectrum: every classical period is a revival.
    pub isochronous: bool,
    pub spectral: Option<SpectralFit>,
    pub fractional: Vec<FractionalRevival>,
}

pub const REVIVAL_THRESHOLD: f64 = 0.3;
pub const FRACTIONAL_THRESHOLD: f64 = 0.5;
const LINE_FLOOR: f64 = 1e-3;

fn blackman_harris(i: usize, n: usize) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let x = 2.0 * PI * i as f64 / (n - 1) as f64;
    0.35875 - 0.48829 * libm::cos(x) + 0.14128 * libm::cos(2.0 * x) - 0.01168 * libm::cos(3.0 * x)
}

/// Extract the eigenphase lines of an autocorrelation A(t) = Σ|c_n|² e^{−iω_n t}
/// and fit their second-order progression.
///
/// `t_c` is a guess of the classical period used to bracket neighbouring lines.
/// `demodulation` shifts frequencies by a known carrier (⟨H⟩/ℏ) before the
/// transform so coarse sampling does not alias the band.
pub fn spectral_lines(ac: &ComplexSeries, t_c: f64, demodulation: f64) -> Result<SpectralFit> {
    let n = ac.len();
    if n < 16 {
        bail!(InsufficientData, "autocorrelation too short for spectral analysis ({n} samples)");
    }
    let padded = (4 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    for (i, z) in ac.values.iter().enumerate() {
        let carrier = Complex64::from_polar(1.0, -demodulation * ac.time(i));
        buf[i] = (z * carrier.conj()).conj() * blackman_harris(i, n);
    }
    Fft::new(padded)?.forward(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let bin = 2.0 * PI / (padded as f64 * ac.dt);
    let freq = |k: f64| -> f64 {
        let half = padded as f64 / 2.0;
        let signed = if k >= half { k - padded as f64 } else { k };
        signed * bin
    };
    let at = |k: i64| mag[k.rem_euclid(padded as i64) as usize];
    let refine = |k: i64| -> f64 {
        let (y0, y1, y2) = (libm::log(at(k - 1)), libm::log(at(k)), libm::log(at(k + 1)));
        let denom = y0 - 2.0 * y1 + y2;
        let d = if denom.abs() > 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
        let k = k.rem_euclid(padded as i64) as f64;
        freq(k) + d.clamp(-0.5, 0.5) * bin
    };
    let (k0, &peak) = mag.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty spectrum");
    let k0 = k0 as i64;
    let nyquist = PI / ac.dt;
    let gap0 = 2.0 * PI / t_c;
    if gap0 >= nyquist {
        bail!(InsufficientData, "sampling interval too coarse to resolve line spacing 2π/T_c");
    }
    let half_window = ((gap0 / 3.0) / bin).max(2.0) as i64;
    let mut lines = vec![SpectralLine { index: 0, omega: refine(k0), weight: peak }];
    for dir in [1i64, -1] {
        let (mut f, mut gap, mut index) = (lines[0].omega, gap0, 0i64);
        let mut walked = 0.0;
        loop {
            index += dir;
            let centre = ((f + dir as f64 * gap) / bin).round() as i64;
            let (best, value) = (centre - half_window..=centre + half_window)
                .map(|k| (k, at(k)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("window is non-empty");
            if value < LINE_FLOOR * peak {
                break;
            }
            let fi = refine(best);
            let step = (fi - f) * dir as f64;
            if !(step > 0.3 * gap) {
                break;
            }
            walked += step;
            // Stop before wrapping around the periodic frequency axis.
            if walked + gap > 2.0 * nyquist - 2.0 * gap0 {
                break;
            }
            gap = step;
            f = fi;
            lines.push(SpectralLine { index, omega: fi + demodulation, weight: value });
        }
    }
    lines[0].omega += demodulation;
    lines.sort_by_key(|l| l.index);
    if lines.len() < 2 {
        bail!(InsufficientData, "autocorrelation spectrum has a single line");
    }
    let (linear, curvature) = if lines.len() == 2 { (lines[1].omega - lines[0].omega, 0.0) } else { quadratic_fit(&lines)? };
    Ok(SpectralFit { lines, linear, curvature })
}

fn quadratic_fit(lines: &[SpectralLine]) -> Result<(f64, f64)> {
    // Weighted least squares in the basis (1, k, k²).
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for l in lines {
        let k = l.index as f64;
        let basis = [1.0, k, k * k];
        for i in 0..3 {
            rhs[i] += l.weight * basis[i] * l.omega;
            for j in 0..3 {
                m[i][j] += l.weight * basis[i] * basis[j];
            }
        }
    }
    let a = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let b = nalgebra::Vector3::new(rhs[0], rhs[1], rhs[2]);
    match a.lu().solve(&b) {
        Some(sol) => Ok((sol[1], sol[2])),
        None => bail!(InsufficientData, "spectral lines do not determine a quadratic"),
    }
}

/// Revival detection from the complex autocorrelation.
///
/// The revival time comes from the curvature of the spectral line progression.
/// Its strength is the largest |A| within ±max(T_c, 0.05 T_r) of that time. A
/// near-linear progression (revival period beyond 10³ × the record length) is
/// reported as isochronous with T_r = T_c. Fractional revivals are local maxima
/// of the per-period maxima of |A| above 0.5.
pub fn detect_revival(ac: &ComplexSeries, t_c: f64, demodulation: f64) -> Result<RevivalReport> {
    let mag = ac.magnitude()?;
    let span = mag.t_end() - mag.t0;
    let spectral = spectral_lines(ac, t_c, demodulation).ok();
    let (t_r, isochronous, period) = match &spectral {
        Some(fit) => {
            let period = fit.classical_period();
            let tr = fit.revival_period();
            if !(tr.is_finite()) || tr > 1e3 * span {
                (period, true, period)
            } else {
                (tr, false, period)
            }
        }
        None => (f64::NAN, false, t_c),
    };
    let (mut strength, mut peak_time) = (0.0, f64::NAN);
    if t_r.is_finite() {
        let half = if isochronous { 0.25 * period } else { period.max(0.05 * t_r) };
        for (t, v) in mag.iter() {
            if (t - t_r).abs() <= half && v > strength {
                strength = v;
                peak_time = t;
            }
        }
    }
    let fractional = fractional_revivals(&mag, period, if isochronous { f64::NAN } else { t_r });
    Ok(RevivalReport { t_r, strength, peak_time, detected: strength >= REVIVAL_THRESHOLD, isochronous, spectral, fractional })
}

fn fractional_revivals(mag: &TimeSeries, period: f64, t_r: f64) -> Vec<FractionalRevival> {
    let per_block = ((period / mag.dt).round() as usize).max(1);
    let blocks: Vec<(f64, f64)> = mag
        .values
        .chunks(per_block)
        .enumerate()
        .map(|(b, chunk)| {
            let (i, v) =
                chunk.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            (mag.time(b * per_block + i), v)
        })
        .collect();
    let mut out = Vec::new();
    for i in 1..blocks.len().saturating_sub(1) {
        let (t, v) = blocks[i];
        if v > FRACTIONAL_THRESHOLD && v > blocks[i - 1].1 && v >= blocks[i + 1].1 {
            let label = if t_r.is_finite() { label_fraction(t, t_r) } else { None };
            out.push(FractionalRevival { time: t, strength: v, label });
        }
    }
    out
}

fn label_fraction(t: f64, t_r: f64) -> Option<(u32, u32)> {
    for q in 1..=4u32 {
        let p = libm::round(t * q as f64 / t_r);
        if p < 1.0 {
            continue;
        }
        let target = p * t_r / q as f64;
        if (t - target).abs() <= 0.02 * target {
            let p = p as u32;
            let g = gcd(p, q);
            return Some((p / g, q / g));
        }
    }
    None
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sparse(ts: &[f64], mut f: impl FnMut(f64) -> f64) -> SparseSeries {
        let mut s = SparseSeries::default();
        for &t in ts {
            s.push(t, f(t));
        }
        s
    }

    #[test]
    fn deviation_basics() {
        let a = TimeSeries::from_fn(0.0, 0.1, 50, |t| libm::sin(t)).unwrap();
        let d = deviation_series(&a, &a).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        let b = TimeSeries::from_fn(0.0, 0.1, 50, |t| libm::sin(t) + 0.25).unwrap();
        assert!(deviation_series(&a, &b).unwrap().values.iter().all(|&v| (v - 0.25).abs() < 1e-12));
        let c = TimeSeries::from_fn(0.0, 0.2, 50, |t| t).unwrap();
        assert!(matches!(deviation_series(&a, &c), Err(Error::Usage(_))));
    }

    #[test]
    fn relative_deviation_masks_small_reference() {
        let c = TimeSeries::from_fn(0.0, 0.01, 2000, |t| libm::sin(t)).unwrap();
        let q = TimeSeries::from_fn(0.0, 0.01, 2000, |t| 1.1 * libm::sin(t)).unwrap();
        let rel = relative_deviation(&q, &c, 0.5).unwrap();
        assert!(rel.v.iter().all(|&v| (v - 0.1).abs() < 1e-12));
        assert!(matches!(relative_deviation(&q, &c, 2.0), Err(Error::InsufficientData(_))));
        let runs = masked_run_peaks(&rel, 0.05).unwrap();
        // |sin t| > 0.5 in seven runs over [0, 20), the last one partial.
        assert_eq!(runs.len(), 7);
    }

    #[test]
    fn peaks_of_sine_squared() {
        let s = TimeSeries::from_fn(0.0, 1e-3, 31_416, |t| libm::sin(t).powi(2)).unwrap();
        let p = peak_envelope(&s).unwrap();
        assert_eq!(p.len(), 10);
        for (k, (&t, &v)) in p.t.iter().zip(&p.v).enumerate() {
            assert!((t - (2 * k + 1) as f64 * PI / 2.0).abs() < 1e-3);
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn monotone_series_has_no_peaks() {
        let s = TimeSeries::from_fn(0.0, 0.1, 100, |t| t).unwrap();
        assert!(matches!(peak_envelope(&s), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fit_recovers_its_model() {
        let ts: Vec<f64> = (1..=40).map(|k| k as f64).collect();
        let p = sparse(&ts, |t| 2.0 * (1.0 - libm::exp(-0.01 * t * t)));
        let fit = fit_envelope(&p).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-6 && (fit.b - 0.01).abs() < 1e-8 && (fit.tau - 10.0).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn fit_with_noise() {
        let ts: Vec<f64> = (1..=40).map(|k| k as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let p = sparse(&ts, |t| {
                2.0 * (1.0 - libm::exp(-0.01 * t * t)) * (1.0 + 0.01 * rng.sample::<f64, _>(rand_distr::StandardNormal))
            });
            let fit = fit_envelope(&p).unwrap();
            worst = worst.max((fit.tau / 10.0 - 1.0).abs());
        }
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn fit_needs_four_peaks() {
        let p = sparse(&[1.0, 2.0, 3.0], |t| t);
        assert!(matches!(fit_envelope(&p), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fit_failure_carries_trace() {
        // All-equal abscissae leave b undetermined.
        let p = sparse(&[0.0, 0.0, 0.0, 0.0, 0.0], |_| 1.0);
        match fit_envelope(&p) {
            Err(Error::FitFailure { trace, .. }) => assert!(!trace.is_empty()),
            Err(Error::Domain(_)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaling_laws() {
        let hs = [0.01, 0.02, 0.04, 0.08];
        let half: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 / libm::sqrt(h))).collect();
        let f = scaling_fit(&half).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6 && (f.r_squared - 1.0).abs() < 1e-12);
        let inv: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 / h)).collect();
        assert!((scaling_fit(&inv).unwrap().slope - 1.0).abs() < 1e-12);
        assert!(matches!(scaling_fit(&half[..3]), Err(Error::InsufficientData(_))));
        let mut bad = half.clone();
        bad[0].1 = -1.0;
        assert!(matches!(scaling_fit(&bad), Err(Error::Domain(_))));
    }

    fn synthetic_ac(levels: &[(f64, f64)], dt: f64, n: usize) -> ComplexSeries {
        ComplexSeries {
            t0: 0.0,
            dt,
            values: (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    levels.iter().map(|&(w, e)| Complex64::from_polar(w, -e * t)).sum()
                })
                .collect(),
        }
    }

    #[test]
    fn commensurate_toy_spectrum() {
        let t = 5.0;
        let g = 2.0 * PI / t;
        let ac = synthetic_ac(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, g), (1.0 / 3.0, 4.0 * g)], t / 64.0, 64 * 40);
        let r = detect_revival(&ac, t, 0.0).unwrap();
        assert!(r.isochronous);
        assert!((r.t_r - t).abs() < 1e-3 * t, "{}", r.t_r);
        assert!((r.strength - 1.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_spectrum_revives_every_period() {
        let (omega, hbar) = (1.7, 0.03);
        let tc = 2.0 * PI / omega;
        let mean = 20.0;
        let levels: Vec<(f64, f64)> = (0..60)
            .map(|n| {
                let k = n as f64 - 30.0;
                (libm::exp(-k * k / (2.0 * 36.0)), (mean + k) * omega + 0.5 * 0.0 * hbar)
            })
            .collect();
        let norm: f64 = levels.iter().map(|l| l.0).sum();
        let levels: Vec<(f64, f64)> = levels.iter().map(|&(w, e)| (w / norm, e)).collect();
        let ac = synthetic_ac(&levels, tc / 64.0, 64 * 50);
        let r = detect_revival(&ac, tc, mean * omega).unwrap();
        assert!(r.isochronous && r.detected);
        assert!((r.t_r / tc - 1.0).abs() < 1e-6);
        assert!((r.strength - 1.0).abs() < 1e-3);
    }

    #[test]
    fn quadratic_spectrum_revival_and_halves() {
        // E_k = ω k + c k² gives T_r = 2π/c with a half revival at T_r/2.
        let (omega, tr) = (2.2, 400.0);
        let c = 2.0 * PI / tr;
        let levels: Vec<(f64, f64)> = (-25..=25)
            .map(|k: i32| {
                let k = k as f64;
                (libm::exp(-k * k / (2.0 * 25.0)), 60.0 + omega * k + c * k * k)
            })
            .collect();
        let norm: f64 = levels.iter().map(|l| l.0).sum();
        let levels: Vec<(f64, f64)> = levels.iter().map(|&(w, e)| (w / norm, e)).collect();
        let tc = 2.0 * PI / omega;
        let ac = synthetic_ac(&levels, tc / 16.0, (1.3 * tr / (tc / 16.0)) as usize);
        let r = detect_revival(&ac, tc, 60.0).unwrap();
        assert!(!r.isochronous);
        assert!((r.t_r / tr - 1.0).abs() < 1e-3, "{}", r.t_r);
        assert!(r.detected && r.strength > 0.9);
        assert!(r.fractional.iter().any(|f| f.label == Some((1, 2))), "{:?}", r.fractional);
    }

    #[test]
    fn flat_autocorrelation_is_not_a_revival() {
        let ac = ComplexSeries { t0: 0.0, dt: 0.1, values: vec![Complex64::new(0.1, 0.0); 4000] };
        let r = detect_revival(&ac, 3.0, 0.0).unwrap();
        assert!(!r.detected);
    }

    proptest! {
        #[test]
        fn scaling_slope_is_invariant_under_rescaling(scale in 0.01f64..100.0, c in 0.5f64..5.0) {
            let pts: Vec<(f64, f64)> = [0.01, 0.02, 0.05, 0.1].iter().map(|&h| (h, c * libm::pow(h, -0.43))).collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(h, t)| (h, scale * t)).collect();
            let (a, b) = (scaling_fit(&pts).unwrap(), scaling_fit(&scaled).unwrap());
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
            prop_assert!((b.intercept - a.intercept - libm::log(scale)).abs() < 1e-9);
        }

        #[test]
        fn fit_is_idempotent(a in 0.05f64..5.0, tau in 3.0f64..60.0) {
            let b = 1.0 / (tau * tau);
            let ts: Vec<f64> = (1..=30).map(|k| k as f64 * tau / 8.0).collect();
            let p = sparse(&ts, |t| a * (1.0 - libm::exp(-b * t * t)));
            let fit = fit_envelope(&p).unwrap();
            prop_assert!((fit.a / a - 1.0).abs() < 1e-6);
            prop_assert!((fit.tau / tau - 1.0).abs() < 1e-6);
        }
    }
}
