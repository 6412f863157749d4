//! Gradient adaptive law `θ̂̇ = γφ(z - θ̂ᵀφ)` and the projection that keeps
//! `Ĥ` inside the admissible set
//! `S_H = { Ĥ : Ĥii ≥ eps_diag, Ĥii ≥ Σ_{j≠i} |Ĥij| + delta }`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterOutput;
use crate::parametrization::{tri_index, Layout, ThetaVector};
use crate::sim::integrator::rk4_step;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: ThetaVector,
    pub gamma: f64,
}

impl EstimatorState {
    pub fn new(theta_hat: ThetaVector, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("adaptation gain must be positive, got {gamma}")));
        }
        Ok(EstimatorState { theta_hat, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    #[serde(default = "default_eps_diag")]
    pub eps_diag: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
}

fn default_eps_diag() -> f64 {
    0.01
}

fn default_delta() -> f64 {
    0.05
}

fn default_enabled() -> bool {
    true
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            eps_diag: default_eps_diag(),
            delta: default_delta(),
            enabled: default_enabled(),
        }
    }
}

impl ProjectionConfig {
    pub fn disabled() -> Self {
        ProjectionConfig {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_diag > 0.0 && self.eps_diag.is_finite()) {
            return Err(Error::InvalidInput("eps_diag must be positive".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput("delta must be non-negative".into()));
        }
        Ok(())
    }

    /// Effective lower bound on every diagonal entry of a member of `S_H`.
    fn diag_floor(&self) -> f64 {
        self.eps_diag.max(self.delta)
    }
}

pub(crate) fn gradient_into(gamma: f64, theta: &[f64], z: f64, phi: &[f64], out: &mut [f64]) {
    let err = z - theta.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
    for (o, p) in out.iter_mut().zip(phi) {
        *o = gamma * p * err;
    }
}

pub fn estimator_derivative(state: &EstimatorState, out: &FilterOutput) -> Result<Vec<f64>> {
    let theta = state.theta_hat.as_slice();
    if out.phi.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            what: "regressor",
            expected: theta.len(),
            got: out.phi.len(),
        });
    }
    if !out.z.is_finite() || theta.iter().chain(&out.phi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimator inputs"));
    }
    let mut d = vec![0.0; theta.len()];
    gradient_into(state.gamma, theta, out.z, &out.phi, &mut d);
    Ok(d)
}

/// Diagonal entry and off-diagonal absolute row sum of row `i` of `Ĥ`.
fn row_terms(h: &[f64], m: usize, layout: Layout, i: usize) -> (f64, f64) {
    match layout {
        Layout::Reduced => (h[i], 0.0),
        Layout::Full => {
            let off = (0..m)
                .filter(|&j| j != i)
                .map(|j| h[tri_index(i.min(j), i.max(j), m)].abs())
                .sum();
            (h[tri_index(i, i, m)], off)
        }
    }
}

fn h_dim(len: usize, layout: Layout) -> Option<usize> {
    match layout {
        Layout::Reduced => Some(len),
        Layout::Full => (1..=len).find(|m| m * (m + 1) / 2 == len),
    }
}

fn in_set_dim(h: &[f64], m: usize, layout: Layout, cfg: &ProjectionConfig) -> bool {
    (0..m).all(|i| {
        let (d, r) = row_terms(h, m, layout, i);
        d >= cfg.eps_diag && d >= r + cfg.delta
    })
}

pub fn in_set(theta_h: &[f64], layout: Layout, cfg: &ProjectionConfig) -> bool {
    match h_dim(theta_h.len(), layout) {
        Some(m) if m > 0 => in_set_dim(theta_h, m, layout, cfg),
        _ => false,
    }
}

/// Repairs the `θ_H` block in place so that it lies in `S_H`.
///
/// Diagonals are clamped to `max(eps_diag, delta)`; then, if any row breaks
/// dominance, every off-diagonal is scaled by the single factor
/// `s = min_i (Ĥii - delta) / r_i`. One shared factor keeps `Ĥ` symmetric,
/// and the map is the identity on `S_H`, hence idempotent.
pub(crate) fn project_h_in_place(h: &mut [f64], m: usize, layout: Layout, cfg: &ProjectionConfig) {
    if in_set_dim(h, m, layout, cfg) {
        return;
    }
    let floor = cfg.diag_floor();
    let diag_index = |i: usize| match layout {
        Layout::Full => tri_index(i, i, m),
        Layout::Reduced => i,
    };
    for i in 0..m {
        let k = diag_index(i);
        if h[k] < floor {
            h[k] = floor;
        }
    }
    if layout == Layout::Reduced || in_set_dim(h, m, layout, cfg) {
        return;
    }

    let mut scale = 1.0f64;
    for i in 0..m {
        let (d, r) = row_terms(h, m, layout, i);
        if d - cfg.delta <= 0.0 {
            scale = 0.0;
        } else if r > 0.0 {
            scale = scale.min((d - cfg.delta) / r);
        }
    }

    let original = h.to_vec();
    let apply = |h: &mut [f64], s: f64| {
        for i in 0..m {
            for j in (i + 1)..m {
                let k = tri_index(i, j, m);
                h[k] = original[k] * s;
            }
        }
    };
    // Rounding in the rescaled row sums can leave a row a few ulps short.
    for _ in 0..16 {
        apply(h, scale);
        if in_set_dim(h, m, layout, cfg) {
            return;
        }
        scale *= 1.0 - 4.0 * f64::EPSILON;
    }
    apply(h, 0.0);
}

pub fn project(theta: &ThetaVector, cfg: &ProjectionConfig) -> Result<ThetaVector> {
    if theta.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("theta estimate"));
    }
    let mut out = theta.clone();
    if cfg.enabled {
        let m = theta.dim();
        let layout = theta.layout();
        let h_len = layout.h_len(m);
        project_h_in_place(&mut out.as_mut_slice()[..h_len], m, layout, cfg);
    }
    Ok(out)
}

/// One RK4 step of the gradient law with `(z, φ)` held over the step, followed
/// by projection when enabled.
pub fn step_projected(
    state: &EstimatorState,
    out: &FilterOutput,
    dt: f64,
    cfg: &ProjectionConfig,
) -> Result<EstimatorState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {dt}")));
    }
    estimator_derivative(state, out)?;
    let theta = state.theta_hat.as_slice();
    let mut next = vec![0.0; theta.len()];
    rk4_step(
        |_, th, d| gradient_into(state.gamma, th, out.z, &out.phi, d),
        0.0,
        theta,
        dt,
        &mut next,
    );
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("theta estimate"));
    }
    let theta_hat = ThetaVector::new(next, state.theta_hat.dim(), state.theta_hat.layout())?;
    Ok(EstimatorState {
        theta_hat: project(&theta_hat, cfg)?,
        gamma: state.gamma,
    })
}
