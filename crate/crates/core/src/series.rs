//! Uniformly sampled series shared by all modules.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};

/// Scalar observable sampled on `t0 + i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    /// Hash of the scenario that produced the series; zero when untagged.
    pub tag: u64,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            bail!(Usage, "time series needs a finite origin and positive spacing (t0={t0}, dt={dt})");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            bail!(Domain, "time series value at index {i} is not finite");
        }
        Ok(Self { t0, dt, values, tag: 0 })
    }

    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(t0, dt, (0..n).map(|i| f(t0 + i as f64 * dt)).collect())
    }

    pub fn with_tag(mut self, tag: u64) -> Self {
        self.tag = tag;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.time(i), v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Samples with `t < t_max`.
    pub fn truncated(&self, t_max: f64) -> Self {
        let n = self.values.iter().enumerate().take_while(|(i, _)| self.time(*i) < t_max).count();
        Self { values: self.values[..n].to_vec(), ..self.clone() }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-12 * (1.0 + self.t0.abs())
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }
}

/// Irregularly sampled points, e.g. the local maxima of a [`TimeSeries`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseSeries {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl SparseSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.t.push(t);
        self.v.push(v);
    }
}

/// Complex observable such as the autocorrelation ⟨ψ(0)|ψ(t)⟩.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl ComplexSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn magnitude(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.t0, self.dt, self.values.iter().map(|z| z.norm()).collect())
    }
}
