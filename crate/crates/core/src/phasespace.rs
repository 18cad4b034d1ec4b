//! Planck-cell coarse graining of quantum states (Husimi) and classical
//! ensembles (histograms), and the L1 distance between the two.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::classical::PhasePoint;
use crate::error::{bail, Error, Result};
use crate::model::ScaledPlanck;
use crate::quantum::{Grid, WaveFunction};

/// Tolerated probability outside the cell ranges.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// Cells of area 2πℏ_ε covering a rectangle of the (x, p) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanckGrid {
    pub x_min: f64,
    pub p_min: f64,
    pub dx: f64,
    pub dp: f64,
    pub nx: usize,
    pub np: usize,
    pub hbar: ScaledPlanck,
}

impl PlanckGrid {
    /// Square cells Δx = Δp = √(2πℏ_ε), enough of them to cover the requested
    /// ranges; the covered rectangle is centred on the request.
    pub fn covering(x_range: (f64, f64), p_range: (f64, f64), hbar: ScaledPlanck) -> Result<Self> {
        let side = libm::sqrt(2.0 * PI * hbar.get());
        Self::with_aspect(x_range, p_range, side, hbar)
    }

    /// Cells with Δx = `dx` and Δp = 2πℏ_ε/Δx.
    pub fn with_aspect(x_range: (f64, f64), p_range: (f64, f64), dx: f64, hbar: ScaledPlanck) -> Result<Self> {
        if !(x_range.1 > x_range.0 && p_range.1 > p_range.0 && dx > 0.0) {
            bail!(Config, "phase-space ranges must be non-empty and cells positive");
        }
        let dp = 2.0 * PI * hbar.get() / dx;
        let fit = |lo: f64, hi: f64, d: f64| {
            let n = libm::ceil((hi - lo) / d - 1e-9).max(1.0) as usize;
            let mid = 0.5 * (lo + hi);
            (mid - 0.5 * n as f64 * d, n)
        };
        let (x_min, nx) = fit(x_range.0, x_range.1, dx);
        let (p_min, np) = fit(p_range.0, p_range.1, dp);
        Ok(Self { x_min, p_min, dx, dp, nx, np, hbar })
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.nx as f64 * self.dx
    }

    pub fn p_max(&self) -> f64 {
        self.p_min + self.np as f64 * self.dp
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.np
    }

    pub fn cell_center(&self, ix: usize, ip: usize) -> (f64, f64) {
        (self.x_min + (ix as f64 + 0.5) * self.dx, self.p_min + (ip as f64 + 0.5) * self.dp)
    }

    /// Cell index of (x, p), row-major in x.
    pub fn locate(&self, x: f64, p: f64) -> Option<usize> {
        let fx = (x - self.x_min) / self.dx;
        let fp = (p - self.p_min) / self.dp;
        if fx < 0.0 || fp < 0.0 {
            return None;
        }
        let (ix, ip) = (fx as usize, fp as usize);
        (ix < self.nx && ip < self.np).then_some(ix * self.np + ip)
    }
}

/// Probability per Planck cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    pub grid: PlanckGrid,
    /// Row-major in x: `values[ix * np + ip]`.
    pub values: Vec<f64>,
    /// Probability that fell outside the grid before normalization.
    pub leakage: f64,
    pub normalized: bool,
}

impl PhaseDensity {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.grid.np + ip]
    }

    /// Cell index of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) =
            self.values.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (i / self.grid.np, i % self.grid.np)
    }

    /// Cells strictly larger than their eight neighbours and above `min_value`.
    pub fn local_maxima(&self, min_value: f64) -> Vec<(usize, usize)> {
        let (nx, np) = (self.grid.nx, self.grid.np);
        let mut out = Vec::new();
        for ix in 0..nx {
            for ip in 0..np {
                let v = self.value(ix, ip);
                if v <= min_value {
                    continue;
                }
                let mut is_max = true;
                for (dx, dp) in [(-1i64, -1i64), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                    let (jx, jp) = (ix as i64 + dx, ip as i64 + dp);
                    if jx >= 0 && jp >= 0 && (jx as usize) < nx && (jp as usize) < np && self.value(jx as usize, jp as usize) >= v
                    {
                        is_max = false;
                    }
                }
                if is_max {
                    out.push((ix, ip));
                }
            }
        }
        out
    }

    /// Probability per x column.
    pub fn x_marginal(&self) -> Vec<f64> {
        self.values.chunks(self.grid.np).map(|c| c.iter().sum()).collect()
    }

    fn finish(grid: PlanckGrid, mut values: Vec<f64>, inside: f64) -> Result<Self> {
        let leakage = (1.0 - inside).max(0.0);
        if leakage > LEAKAGE_LIMIT {
            let (axis, lo, hi) = leak_axis(&grid, &values);
            return Err(Error::Leakage { leakage, axis, lo, hi });
        }
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            for v in &mut values {
                *v /= total;
            }
        }
        Ok(Self { grid, values, leakage, normalized: total > 0.0 })
    }
}

/// The axis whose border cells carry more probability, which is the one to widen.
fn leak_axis(grid: &PlanckGrid, values: &[f64]) -> (&'static str, f64, f64) {
    let (nx, np) = (grid.nx, grid.np);
    let mut x_edge = 0.0;
    let mut p_edge = 0.0;
    for ix in 0..nx {
        for ip in 0..np {
            let v = values[ix * np + ip];
            if ix == 0 || ix + 1 == nx {
                x_edge += v;
            }
            if ip == 0 || ip + 1 == np {
                p_edge += v;
            }
        }
    }
    if x_edge >= p_edge {
        ("x", grid.x_min, grid.x_max())
    } else {
        ("p", grid.p_min, grid.p_max())
    }
}

/// Subsamples per cell edge used to average the Husimi function over a cell.
pub const HUSIMI_SUBSAMPLES: usize = 8;

/// Planck-cell masses of the Husimi function Q(x,p) = |⟨x,p|ψ⟩|²/(2πℏ_ε),
/// using coherent states of width σ_x = √(ℏ_ε/2). Each cell mass is the cell
/// area times the mean of Q over a `HUSIMI_SUBSAMPLES`² lattice inside the cell.
pub fn husimi_density(wf: &WaveFunction, grid: &PlanckGrid) -> Result<PhaseDensity> {
    husimi_density_with(wf, grid, HUSIMI_SUBSAMPLES)
}

pub fn husimi_density_with(wf: &WaveFunction, grid: &PlanckGrid, subsamples: usize) -> Result<PhaseDensity> {
    let axis = match wf.grid {
        Grid::One(a) => a,
        Grid::Two(..) => bail!(Usage, "Husimi densities are computed for 1D states"),
    };
    if wf.hbar != grid.hbar {
        bail!(Usage, "phase-space grid and wave function use different ħ_ε");
    }
    let h = wf.hbar.get();
    let sigma = wf.hbar.sigma();
    let s = subsamples.max(1);
    let dx = axis.dx();
    let norm = libm::pow(2.0 * PI * sigma * sigma, -0.25) * dx;
    let reach = (10.0 * sigma / dx).ceil() as i64;
    let mut values = vec![0.0; grid.n_cells()];
    let mut amps: Vec<Complex64> = Vec::new();
    for ix in 0..grid.nx {
        for sx in 0..s {
            let xc = grid.x_min + (ix as f64 + (sx as f64 + 0.5) / s as f64) * grid.dx;
            // Window of grid points within 10σ of xc, wrapped periodically.
            let centre = ((xc - axis.min) / dx).round() as i64;
            amps.clear();
            let mut offsets = Vec::with_capacity((2 * reach + 1) as usize);
            for j in centre - reach..=centre + reach {
                let y = axis.min + j as f64 * dx;
                let idx = j.rem_euclid(axis.n as i64) as usize;
                let g = libm::exp(-(y - xc) * (y - xc) / (4.0 * sigma * sigma));
                amps.push(wf.psi[idx] * g * norm);
                offsets.push(y - xc);
            }
            for ip in 0..grid.np {
                let mut acc = 0.0;
                for sp in 0..s {
                    let pc = grid.p_min + (ip as f64 + (sp as f64 + 0.5) / s as f64) * grid.dp;
                    let k = pc / h;
                    let (mut re, mut im) = (0.0, 0.0);
                    // Σ ψ(y) g(y − x) e^{−ip(y−x)/ℏ}, rotating the phase incrementally.
                    let step = Complex64::from_polar(1.0, -k * dx);
                    let mut phase = Complex64::from_polar(1.0, -k * offsets[0]);
                    for a in &amps {
                        let z = a * phase;
                        re += z.re;
                        im += z.im;
                        phase *= step;
                    }
                    acc += re * re + im * im;
                }
                values[ix * grid.np + ip] += acc;
            }
        }
    }
    // Q integrates to one over the plane: cell mass = ΔxΔp mean(Q) = mean |⟨x,p|ψ⟩|².
    let scale = grid.dx * grid.dp / (2.0 * PI * h) / (s * s) as f64;
    for v in &mut values {
        *v *= scale;
    }
    let inside: f64 = values.iter().sum();
    PhaseDensity::finish(*grid, values, inside)
}

/// Normalized histogram of ensemble points over Planck cells.
pub fn ensemble_density(points: &[PhasePoint], grid: &PlanckGrid) -> Result<PhaseDensity> {
    if points.is_empty() {
        bail!(Usage, "ensemble density needs at least one point");
    }
    let mut values = vec![0.0; grid.n_cells()];
    let mut inside = 0usize;
    for pt in points {
        if let Some(i) = grid.locate(pt.x[0], pt.p[0]) {
            values[i] += 1.0;
            inside += 1;
        }
    }
    PhaseDensity::finish(*grid, values, inside as f64 / points.len() as f64)
}

/// L1 distance Σ|a − b| in [0, 2].
pub fn density_distance(a: &PhaseDensity, b: &PhaseDensity) -> Result<f64> {
    if a.grid != b.grid {
        bail!(Usage, "densities live on different phase-space grids");
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum())
}
