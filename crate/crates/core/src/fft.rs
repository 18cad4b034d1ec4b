//! Iterative radix-2 FFT over `Complex64`, plus a row/column 2D driver.
//!
//! Forward transforms use the `e^{-2πi jk/n}` kernel and are unnormalized;
//! inverse transforms carry the `1/n` factor.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            bail!(Config, "FFT length {n} is not a power of two");
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Inverse transform without the `1/n` factor.
    pub fn inverse_unscaled(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n, "FFT buffer length mismatch");
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let u = data[start + k];
                    let t = w * data[start + k + half];
                    data[start + k] = u + t;
                    data[start + k + half] = u - t;
                }
            }
            size *= 2;
        }
    }
}

/// 2D transform of a row-major `rows x cols` array.
#[derive(Debug, Clone)]
pub struct Fft2 {
    rows: Fft,
    cols: Fft,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self { rows: Fft::new(rows)?, cols: Fft::new(cols)? })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.apply(data, scratch, false);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.apply(data, scratch, true);
    }

    fn apply(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>, inverse: bool) {
        let (nr, nc) = self.shape();
        assert_eq!(data.len(), nr * nc, "FFT2 buffer length mismatch");
        for row in data.chunks_exact_mut(nc) {
            if inverse {
                self.cols.inverse(row);
            } else {
                self.cols.forward(row);
            }
        }
        scratch.clear();
        scratch.resize(nr, Complex64::new(0.0, 0.0));
        for c in 0..nc {
            for r in 0..nr {
                scratch[r] = data[r * nc + c];
            }
            if inverse {
                self.rows.inverse(scratch);
            } else {
                self.rows.forward(scratch);
            }
            for r in 0..nr {
                data[r * nc + c] = scratch[r];
            }
        }
    }
}

/// Signed integer frequency index of bin `k` in standard FFT ordering.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k < (n + 1) / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Angular wave numbers `2π m / (n dx)` in FFT ordering.
pub fn wave_numbers(n: usize, dx: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * dx);
    let mut out = vec![0.0; n];
    for (k, w) in out.iter_mut().enumerate() {
        *w = signed_index(k, n) as f64 * scale;
    }
    out
}
