//! Gridded 2-D kernel density estimation.
//!
//! Gaussian product kernel with per-axis Silverman bandwidths
//! (`h = σ̂ n^{−1/6}` in two dimensions), evaluated on a rectangular grid by
//! linear binning followed by separable convolution. The binned evaluation is
//! exact to within a fraction of a grid cell, which is far below the contour
//! tolerances used downstream.

use crate::error::StatsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeOptions {
    /// Grid nodes per axis.
    pub grid: usize,
    /// Padding of the sample range, in bandwidths per side.
    pub pad_bandwidths: f64,
    /// Multiplier on the Silverman bandwidths.
    pub bandwidth_scale: f64,
}

impl Default for KdeOptions {
    fn default() -> Self {
        KdeOptions {
            grid: 256,
            pad_bandwidths: 3.0,
            bandwidth_scale: 1.0,
        }
    }
}

/// Density values on a regular grid, row-major over `(iy, ix)`.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    pub fn y_at(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// Per-axis Silverman bandwidth for a 2-D sample.
pub fn silverman_bandwidth(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    std_dev(values) * (n as f64).powf(-1.0 / 6.0)
}

/// Estimates the sample density on a padded grid.
pub fn kde_grid(samples: &[[f64; 2]], opts: &KdeOptions) -> Result<GridDensity, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewDraws { got: n, need: 2 });
    }
    if opts.grid < 8 {
        return Err(StatsError::InvalidOption(format!(
            "kde grid must have at least 8 nodes per axis, got {}",
            opts.grid
        )));
    }
    let hx = silverman_bandwidth(samples.iter().map(|s| s[0]), n) * opts.bandwidth_scale;
    let hy = silverman_bandwidth(samples.iter().map(|s| s[1]), n) * opts.bandwidth_scale;
    if !(hx > 0.0 && hy > 0.0) {
        return Err(StatsError::InvalidOption(
            "kde bandwidth collapsed to zero (constant sample)".into(),
        ));
    }

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        x_min = x_min.min(s[0]);
        x_max = x_max.max(s[0]);
        y_min = y_min.min(s[1]);
        y_max = y_max.max(s[1]);
    }
    let x0 = x_min - opts.pad_bandwidths * hx;
    let x1 = x_max + opts.pad_bandwidths * hx;
    let y0 = y_min - opts.pad_bandwidths * hy;
    let y1 = y_max + opts.pad_bandwidths * hy;
    let nx = opts.grid;
    let ny = opts.grid;
    let dx = (x1 - x0) / (nx - 1) as f64;
    let dy = (y1 - y0) / (ny - 1) as f64;

    // linear binning: each sample spreads its weight over 4 neighbor nodes
    let mut binned = vec![0.0f64; nx * ny];
    let weight = 1.0 / n as f64;
    for s in samples {
        let fx = ((s[0] - x0) / dx).clamp(0.0, (nx - 1) as f64);
        let fy = ((s[1] - y0) / dy).clamp(0.0, (ny - 1) as f64);
        let ix = (fx as usize).min(nx - 2);
        let iy = (fy as usize).min(ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        binned[iy * nx + ix] += weight * (1.0 - tx) * (1.0 - ty);
        binned[iy * nx + ix + 1] += weight * tx * (1.0 - ty);
        binned[(iy + 1) * nx + ix] += weight * (1.0 - tx) * ty;
        binned[(iy + 1) * nx + ix + 1] += weight * tx * ty;
    }

    // separable convolution with discrete Gaussian kernels normalized to
    // unit integral
    let kernel = |h: f64, d: f64| -> Vec<f64> {
        let radius = ((4.0 * h / d).ceil() as usize).max(1);
        let mut k: Vec<f64> = (0..=radius)
            .map(|j| (-0.5 * (j as f64 * d / h).powi(2)).exp())
            .collect();
        let sum = (k[0] + 2.0 * k[1..].iter().sum::<f64>()) * d;
        for v in &mut k {
            *v /= sum;
        }
        k
    };
    let kx = kernel(hx, dx);
    let ky = kernel(hy, dy);

    let mut tmp = vec![0.0f64; nx * ny];
    for iy in 0..ny {
        let row = &binned[iy * nx..(iy + 1) * nx];
        let out = &mut tmp[iy * nx..(iy + 1) * nx];
        convolve_line(row, out, &kx);
    }
    let mut values = vec![0.0f64; nx * ny];
    let mut column = vec![0.0f64; ny];
    let mut column_out = vec![0.0f64; ny];
    for ix in 0..nx {
        for iy in 0..ny {
            column[iy] = tmp[iy * nx + ix];
        }
        convolve_line(&column, &mut column_out, &ky);
        for iy in 0..ny {
            values[iy * nx + ix] = column_out[iy];
        }
    }

    Ok(GridDensity {
        x0,
        y0,
        dx,
        dy,
        nx,
        ny,
        values,
    })
}

/// Symmetric FIR convolution of one line with a half-kernel.
fn convolve_line(input: &[f64], output: &mut [f64], half_kernel: &[f64]) {
    let n = input.len();
    for (i, out) in output.iter_mut().enumerate() {
        let mut acc = input[i] * half_kernel[0];
        for (j, k) in half_kernel.iter().enumerate().skip(1) {
            if i >= j {
                acc += input[i - j] * k;
            }
            if i + j < n {
                acc += input[i + j] * k;
            }
        }
        *out = acc;
    }
}
