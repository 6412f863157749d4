//! Scalar summaries of a simulation trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimulationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsOptions {
    /// RMS and sup errors are taken over `t >= transient_cutoff`.
    pub transient_cutoff: f64,
    /// Time interval for the exponential fit of `‖θ̃‖`; whole trace if `None`.
    pub fit_window: Option<(f64, f64)>,
    /// Samples with `‖θ̃‖` at or below this value are excluded from the fit.
    pub fit_floor: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            transient_cutoff: 100.0,
            fit_window: None,
            fit_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `λ` in `‖θ̃(t)‖ ≈ C e^{-λ t}`.
    pub rate: f64,
    pub fit_failed: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub final_err_x: f64,
    pub final_err_h: f64,
    pub final_theta_err: f64,
    pub final_x_hat: Vec<f64>,
    pub rms_err_x: Option<f64>,
    pub rms_err_h: Option<f64>,
    pub sup_err_x: Option<f64>,
    pub sup_err_h: Option<f64>,
    pub decay: DecayFit,
    /// `max |(z - θ*ᵀφ) - (c1 - ½xᵀHx) e^{-a t}|`, stationary noiseless runs only.
    pub residual_max_dev: Option<f64>,
}

/// Least-squares fit of `ln v = ln C - λ t` over the samples in `window` that
/// lie above `floor`. A non-positive rate or too few points sets `fit_failed`.
pub fn fit_decay_rate(t: &[f64], values: &[f64], window: Option<(f64, f64)>, floor: f64) -> DecayFit {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(values)
        .filter(|(&ti, &v)| ti >= lo && ti <= hi && v > floor && v.is_finite())
        .map(|(&ti, &v)| (ti, v.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return DecayFit {
            rate: 0.0,
            fit_failed: true,
            samples: n,
        };
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    if sxx == 0.0 {
        return DecayFit {
            rate: 0.0,
            fit_failed: true,
            samples: n,
        };
    }
    let rate = -sxy / sxx;
    DecayFit {
        rate,
        fit_failed: !(rate > 0.0),
        samples: n,
    }
}

/// Largest deviation of the residual column from `C e^{-a t}` over `t <= t_max`.
pub fn residual_deviation(trace: &SimulationTrace, t_max: f64) -> Option<f64> {
    let c = trace.residual_constant?;
    Some(
        trace
            .t
            .iter()
            .zip(&trace.residual)
            .filter(|(&t, _)| t <= t_max)
            .map(|(&t, &r)| (r - c * (-trace.pole * t).exp()).abs())
            .fold(0.0, f64::max),
    )
}

fn tail_stats(t: &[f64], v: &[f64], cutoff: f64) -> (Option<f64>, Option<f64>) {
    let tail: Vec<f64> = t
        .iter()
        .zip(v)
        .filter(|(&ti, _)| ti >= cutoff)
        .map(|(_, &x)| x)
        .collect();
    if tail.is_empty() {
        return (None, None);
    }
    let rms = (tail.iter().map(|x| x * x).sum::<f64>() / tail.len() as f64).sqrt();
    let sup = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (Some(rms), Some(sup))
}

pub fn error_metrics(trace: &SimulationTrace, opts: &MetricsOptions) -> Result<ErrorSummary> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty trace".into()));
    }
    let (rms_err_x, sup_err_x) = tail_stats(&trace.t, &trace.err_x, opts.transient_cutoff);
    let (rms_err_h, sup_err_h) = tail_stats(&trace.t, &trace.err_h, opts.transient_cutoff);
    Ok(ErrorSummary {
        final_err_x: trace.err_x[n - 1],
        final_err_h: trace.err_h[n - 1],
        final_theta_err: trace.theta_err[n - 1],
        final_x_hat: trace.x_hat_at(n - 1).to_vec(),
        rms_err_x,
        rms_err_h,
        sup_err_x,
        sup_err_h,
        decay: fit_decay_rate(&trace.t, &trace.theta_err, opts.fit_window, opts.fit_floor),
        residual_max_dev: residual_deviation(trace, f64::INFINITY),
    })
}
