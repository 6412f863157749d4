//! Persistent-excitation diagnostics: windowed Gram matrices
//! `∫_t^{t+T} φ(τ)φ(τ)ᵀ dτ` and their eigenvalue extrema over a trace.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector-valued signal sampled on a uniform grid `t0 + i·dt`, stored row-major.
#[derive(Debug, Clone, Copy)]
pub struct PhiSeries<'a> {
    pub t0: f64,
    pub dt: f64,
    pub dim: usize,
    pub data: &'a [f64],
}

impl<'a> PhiSeries<'a> {
    pub fn new(t0: f64, dt: f64, dim: usize, data: &'a [f64]) -> Result<Self> {
        if !(dt > 0.0) || dim == 0 || !data.len().is_multiple_of(dim) || data.is_empty() {
            return Err(Error::InvalidInput("malformed phi series".into()));
        }
        Ok(PhiSeries { t0, dt, dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn t_last(&self) -> f64 {
        self.t0 + (self.len() - 1) as f64 * self.dt
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Linear interpolation at fractional grid position `pos`.
    fn at(&self, pos: f64) -> Vec<f64> {
        let i = (pos.floor() as usize).min(self.len() - 1);
        let frac = pos - i as f64;
        if frac == 0.0 || i + 1 >= self.len() {
            return self.row(i).to_vec();
        }
        self.row(i)
            .iter()
            .zip(self.row(i + 1))
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }
}

fn add_outer(g: &mut DMatrix<f64>, v: &[f64], w: f64) {
    let n = v.len();
    for i in 0..n {
        let vi = w * v[i];
        for j in i..n {
            g[(i, j)] += vi * v[j];
        }
    }
}

/// Snap grid positions that are within rounding of an integer.
fn snap(pos: f64) -> f64 {
    let r = pos.round();
    if (pos - r).abs() < 1e-9 * pos.abs().max(1.0) {
        r
    } else {
        pos
    }
}

/// Trapezoid approximation of the Gram integral over `[t, t + window]`.
///
/// Window ends that fall between samples are handled by linear interpolation
/// of `φ`, so `window` need not be a multiple of `dt`.
pub fn gram_matrix(series: &PhiSeries<'_>, t: f64, window: f64) -> Result<DMatrix<f64>> {
    if !(window > 0.0) {
        return Err(Error::InvalidInput(format!("window must be positive, got {window}")));
    }
    let a = snap((t - series.t0) / series.dt);
    let b = snap((t + window - series.t0) / series.dt);
    if a < 0.0 || b > (series.len() - 1) as f64 {
        return Err(Error::InvalidInput(format!(
            "window [{t}, {}] exceeds trace extent [{}, {}]",
            t + window,
            series.t0,
            series.t_last()
        )));
    }

    // (grid position, sample) knots in increasing order
    let mut knots: Vec<(f64, std::borrow::Cow<'_, [f64]>)> = Vec::new();
    let first = a.ceil() as usize;
    let last = b.floor() as usize;
    if (first as f64) > a {
        knots.push((a, series.at(a).into()));
    }
    for i in first..=last {
        knots.push((i as f64, series.row(i).into()));
    }
    if (last as f64) < b {
        knots.push((b, series.at(b).into()));
    }

    let n = series.dim;
    let mut g = DMatrix::zeros(n, n);
    for pair in knots.windows(2) {
        let h = (pair[1].0 - pair[0].0) * series.dt;
        add_outer(&mut g, &pair[0].1, 0.5 * h);
        add_outer(&mut g, &pair[1].1, 0.5 * h);
    }
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeWindow {
    pub t_start: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeReport {
    pub window: f64,
    pub stride: f64,
    pub windows: Vec<PeWindow>,
    pub alpha1: f64,
    pub alpha2: f64,
}

pub fn eigen_extrema(g: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(g.clone());
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Slides a window of length `window` across the series every `stride` time
/// units and reports the Gram eigenvalue extrema.
pub fn pe_bounds(series: &PhiSeries<'_>, window: f64, stride: f64) -> Result<PeReport> {
    if !(stride > 0.0) {
        return Err(Error::InvalidInput(format!("stride must be positive, got {stride}")));
    }
    let span = series.t_last() - series.t0;
    if window > span * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "trace length {span} is shorter than the window {window}"
        )));
    }
    let mut windows = Vec::new();
    let mut j = 0usize;
    loop {
        let t_start = series.t0 + j as f64 * stride;
        if t_start + window > series.t_last() + 1e-9 * series.dt {
            break;
        }
        let g = gram_matrix(series, t_start, window)?;
        let (lambda_min, lambda_max) = eigen_extrema(&g);
        windows.push(PeWindow {
            t_start,
            lambda_min,
            lambda_max,
        });
        j += 1;
    }
    let alpha1 = windows.iter().map(|w| w.lambda_min).fold(f64::INFINITY, f64::min);
    let alpha2 = windows.iter().map(|w| w.lambda_max).fold(f64::NEG_INFINITY, f64::max);
    Ok(PeReport {
        window,
        stride,
        windows,
        alpha1,
        alpha2,
    })
}
