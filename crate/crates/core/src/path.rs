//! Closed-form sinusoidal paths used for both the agent trajectory and the
//! (possibly drifting) extremum location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `amplitude · sin(freq · t + phase)` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTerm {
    pub amplitude: f64,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisPath {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<SineTerm>,
}

/// Per-axis `offset + Σ amplitude · sin(freq · t + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidPath {
    pub axes: Vec<AxisPath>,
}

/// Analytic bounds on a path and its first two derivatives (Euclidean norms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathBounds {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl SinusoidPath {
    pub fn constant(point: &[f64]) -> Self {
        SinusoidPath {
            axes: point
                .iter()
                .map(|&offset| AxisPath {
                    offset,
                    terms: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn is_constant(&self) -> bool {
        self.axes
            .iter()
            .all(|ax| ax.terms.iter().all(|term| term.amplitude == 0.0 || term.freq == 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidInput("path has no axes".into()));
        }
        for (i, ax) in self.axes.iter().enumerate() {
            let finite = ax.offset.is_finite()
                && ax
                    .terms
                    .iter()
                    .all(|t| t.amplitude.is_finite() && t.freq.is_finite() && t.phase.is_finite());
            if !finite {
                return Err(Error::InvalidInput(format!("axis {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn value_into(&self, t: f64, out: &mut [f64]) {
        for (o, ax) in out.iter_mut().zip(&self.axes) {
            *o = ax.offset
                + ax
                    .terms
                    .iter()
                    .map(|s| s.amplitude * (s.freq * t + s.phase).sin())
                    .sum::<f64>();
        }
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.value_into(t, &mut out);
        out
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.axes
            .iter()
            .map(|ax| {
                ax.terms
                    .iter()
                    .map(|s| s.amplitude * s.freq * (s.freq * t + s.phase).cos())
                    .sum()
            })
            .collect()
    }

    pub fn acceleration(&self, t: f64) -> Vec<f64> {
        self.axes
            .iter()
            .map(|ax| {
                ax.terms
                    .iter()
                    .map(|s| -s.amplitude * s.freq * s.freq * (s.freq * t + s.phase).sin())
                    .sum()
            })
            .collect()
    }

    /// Triangle-inequality bounds that hold for every `t`.
    pub fn bounds(&self) -> PathBounds {
        let norm = |f: &dyn Fn(&AxisPath) -> f64| {
            self.axes.iter().map(|ax| f(ax).powi(2)).sum::<f64>().sqrt()
        };
        PathBounds {
            position: norm(&|ax| {
                ax.offset.abs() + ax.terms.iter().map(|s| s.amplitude.abs()).sum::<f64>()
            }),
            velocity: norm(&|ax| ax.terms.iter().map(|s| (s.amplitude * s.freq).abs()).sum()),
            acceleration: norm(&|ax| {
                ax.terms
                    .iter()
                    .map(|s| (s.amplitude * s.freq * s.freq).abs())
                    .sum()
            }),
        }
    }
}
