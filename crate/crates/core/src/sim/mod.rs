//! Coupled filter + estimator simulation along a prescribed agent path.

pub mod integrator;
pub mod metrics;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{project_h_in_place, ProjectionConfig};
use crate::field::{check_diagonal_dominance, eval_at, FieldParams, NoiseKind, NoiseSpec};
use crate::parametrization::{pack_theta, psi_into, solve_extremum, unpack_h, Layout, ThetaVector};
use crate::path::{AxisPath, PathBounds, SineTerm, SinusoidPath};
use crate::pe::PhiSeries;
use integrator::Rk4;

pub use metrics::{error_metrics, fit_decay_rate, DecayFit, ErrorSummary, MetricsOptions};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END_STATIONARY: f64 = 300.0;
pub const DEFAULT_T_END_DRIFT: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub m: usize,
    pub field: FieldParams,
    pub agent: SinusoidPath,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default = "default_pole")]
    pub a: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Defaults to 300 for a stationary extremum and 2000 for a drifting one.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Initial `θ̂`; defaults to zero, projected onto the admissible set.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// Store every n-th integration step in the trace.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_pole() -> f64 {
    0.5
}

fn default_gamma() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_record_every() -> usize {
    1
}

impl ScenarioConfig {
    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            kind: self.noise.kind,
            variance: self.noise.variance,
            seed: self.seed,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(if self.field.extremum.is_constant() {
            DEFAULT_T_END_STATIONARY
        } else {
            DEFAULT_T_END_DRIFT
        })
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end() / self.dt).round() as usize
    }

    /// Initial estimate after projection.
    pub fn initial_theta(&self) -> Result<ThetaVector> {
        let raw = match &self.theta0 {
            Some(v) => ThetaVector::new(v.clone(), self.m, self.layout)?,
            None => ThetaVector::zeros(self.m, self.layout),
        };
        crate::estimator::project(&raw, &self.projection)
    }

    /// Fills in every defaulted optional field so the config echoes exactly
    /// what was run.
    pub fn resolve_defaults(&mut self) -> Result<()> {
        self.t_end = Some(self.t_end());
        self.theta0 = Some(self.initial_theta()?.into_vec());
        Ok(())
    }

    /// Checks every invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Err(Error::config("m", "dimension must be at least 1"));
        }
        let h = &self.field.hessian;
        if h.nrows() != m || h.ncols() != m {
            return Err(Error::config(
                "field.hessian",
                format!("expected a {m}x{m} matrix, got {}x{}", h.nrows(), h.ncols()),
            ));
        }
        if !check_diagonal_dominance(h) {
            return Err(Error::config(
                "field.hessian",
                "violates the admissibility assumption: strict diagonal dominance with a \
                 positive diagonal is required (H_ii > sum_{j!=i} |H_ij|)",
            ));
        }
        if self.field.extremum.dim() != m {
            return Err(Error::config(
                "field.extremum.axes",
                format!("expected {m} axes, got {}", self.field.extremum.dim()),
            ));
        }
        self.field
            .validate()
            .map_err(|e| Error::config("field", e.to_string()))?;
        if self.agent.dim() != m {
            return Err(Error::config(
                "agent.axes",
                format!("expected {m} axes, got {}", self.agent.dim()),
            ));
        }
        self.agent
            .validate()
            .map_err(|e| Error::config("agent", e.to_string()))?;
        if !(self.noise.variance >= 0.0 && self.noise.variance.is_finite()) {
            return Err(Error::config("noise.variance", "must be finite and non-negative"));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::config("a", "filter pole must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma", "adaptation gain must be positive"));
        }
        self.projection
            .validate()
            .map_err(|e| Error::config("projection", e.to_string()))?;
        if self.layout == Layout::Reduced && pack_theta(h, &vec![0.0; m], Layout::Reduced).is_err() {
            return Err(Error::config("layout", "reduced layout requires a diagonal hessian"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "step must be positive"));
        }
        let t_end = self.t_end();
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::config("t_end", "horizon must be positive"));
        }
        let n = self.n_steps();
        if n == 0 || ((n as f64) * self.dt - t_end).abs() > 1e-9 * t_end {
            return Err(Error::config("t_end", "horizon must be a whole number of steps"));
        }
        if self.record_every == 0 || !n.is_multiple_of(self.record_every) {
            return Err(Error::config(
                "record_every",
                format!("must be positive and divide the step count {n}"),
            ));
        }
        if let Some(theta0) = &self.theta0 {
            let expected = self.layout.theta_len(m);
            if theta0.len() != expected {
                return Err(Error::config(
                    "theta0",
                    format!("expected {expected} entries, got {}", theta0.len()),
                ));
            }
            if theta0.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("theta0", "entries must be finite"));
            }
        }
        Ok(())
    }
}

fn reference_hessian() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0])
}

fn sine(amplitude: f64, freq: f64) -> SineTerm {
    SineTerm {
        amplitude,
        freq,
        phase: 0.0,
    }
}

/// `y(t) = [sin 4t + sin 5t, sin 2t + sin 3t]`.
pub fn lissajous_agent() -> SinusoidPath {
    SinusoidPath {
        axes: vec![
            AxisPath {
                offset: 0.0,
                terms: vec![sine(1.0, 4.0), sine(1.0, 5.0)],
            },
            AxisPath {
                offset: 0.0,
                terms: vec![sine(1.0, 2.0), sine(1.0, 3.0)],
            },
        ],
    }
}

/// `x(t) = [1, 2] + amplitude · sin(π t / 1000) · [1, 1]`.
pub fn drifting_extremum(amplitude: f64) -> SinusoidPath {
    let term = sine(amplitude, PI / 1000.0);
    SinusoidPath {
        axes: vec![
            AxisPath {
                offset: 1.0,
                terms: vec![term],
            },
            AxisPath {
                offset: 2.0,
                terms: vec![term],
            },
        ],
    }
}

pub const BUILTIN_SCENARIOS: [&str; 4] = ["scenario1", "scenario2", "scenario3", "scenario4"];

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    let (noisy, drift) = match name {
        "scenario1" => (false, false),
        "scenario2" => (true, false),
        "scenario3" => (false, true),
        "scenario4" => (true, true),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown scenario `{other}`; expected one of {}",
                BUILTIN_SCENARIOS.join(", ")
            )))
        }
    };
    let extremum = if drift {
        drifting_extremum(0.5)
    } else {
        SinusoidPath::constant(&[1.0, 2.0])
    };
    let noise = if noisy {
        NoiseSettings {
            kind: NoiseKind::GaussianWhite,
            variance: 0.05,
        }
    } else {
        NoiseSettings::default()
    };
    Ok(ScenarioConfig {
        name: Some(name.to_string()),
        m: 2,
        field: FieldParams {
            c1: 3.0,
            hessian: reference_hessian(),
            extremum,
        },
        agent: lissajous_agent(),
        noise,
        a: default_pole(),
        gamma: default_gamma(),
        projection: ProjectionConfig::default(),
        layout: Layout::Full,
        dt: DEFAULT_DT,
        t_end: Some(if drift {
            DEFAULT_T_END_DRIFT
        } else {
            DEFAULT_T_END_STATIONARY
        }),
        seed: 0,
        theta0: None,
        record_every: 1,
    })
}

/// Filter states and parameter estimate advanced together on one clock.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub xi1: f64,
    pub xi2: Vec<f64>,
    pub theta_hat: Vec<f64>,
}

impl CoupledState {
    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + 2 * self.xi2.len());
        v.push(self.xi1);
        v.extend_from_slice(&self.xi2);
        v.extend_from_slice(&self.theta_hat);
        v
    }

    fn from_flat(v: &[f64], k: usize) -> Self {
        CoupledState {
            xi1: v[0],
            xi2: v[1..1 + k].to_vec(),
            theta_hat: v[1 + k..].to_vec(),
        }
    }
}

/// Evaluates the derivative field of the coupled system.
///
/// Flat state layout is `[ξ₁, ξ₂ (k), θ̂ (k)]`. Since `ξ̇₁ = z` and `ξ̇₂ = φ`,
/// the first `1 + k` derivative entries double as the filter outputs.
struct CoupledField<'a> {
    cfg: &'a ScenarioConfig,
    m: usize,
    k: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    diff: Vec<f64>,
    psi: Vec<f64>,
}

impl<'a> CoupledField<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let m = cfg.m;
        let k = cfg.layout.theta_len(m);
        CoupledField {
            cfg,
            m,
            k,
            y: vec![0.0; m],
            x: vec![0.0; m],
            diff: vec![0.0; m],
            psi: vec![0.0; k],
        }
    }

    /// True field value at the agent position, refreshing `y`, `x` and `Ψ`.
    fn observe(&mut self, t: f64) -> f64 {
        let cfg = self.cfg;
        cfg.agent.value_into(t, &mut self.y);
        cfg.field.extremum.value_into(t, &mut self.x);
        psi_into(&self.y, cfg.layout, &mut self.psi);
        eval_at(cfg.field.c1, &cfg.field.hessian, &self.x, &self.y, &mut self.diff)
    }

    fn derivative(&mut self, t: f64, noise: f64, s: &[f64], d: &mut [f64]) {
        let a = self.cfg.a;
        let k = self.k;
        let f = self.observe(t) + noise;
        d[0] = -a * s[0] + f;
        for i in 0..k {
            d[1 + i] = -a * s[1 + i] + self.psi[i];
        }
        let (head, grad) = d.split_at_mut(1 + k);
        crate::estimator::gradient_into(self.cfg.gamma, &s[1 + k..], head[0], &head[1..], grad);
    }
}

/// One RK4 step of the coupled system from `t` to `t + dt`.
///
/// The agent position is evaluated exactly at each stage time; the noise
/// sample for `step_index` is held across all four stages. Projection (when
/// enabled) is applied once after the full step.
pub fn integrate_step(
    state: &CoupledState,
    t: f64,
    step_index: u64,
    dt: f64,
    cfg: &ScenarioConfig,
) -> Result<CoupledState> {
    let k = cfg.layout.theta_len(cfg.m);
    if state.xi2.len() != k || state.theta_hat.len() != k {
        return Err(Error::DimensionMismatch {
            what: "coupled state",
            expected: k,
            got: state.xi2.len(),
        });
    }
    let flat = state.to_flat();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t });
    }
    let mut out = vec![0.0; flat.len()];
    let mut field = CoupledField::new(cfg);
    let mut rk = Rk4::new(flat.len());
    advance(&mut field, &mut rk, &flat, t, step_index, dt, &mut out)?;
    Ok(CoupledState::from_flat(&out, k))
}

fn advance(
    field: &mut CoupledField<'_>,
    rk: &mut Rk4,
    s: &[f64],
    t: f64,
    step_index: u64,
    dt: f64,
    out: &mut [f64],
) -> Result<()> {
    let noise = field.cfg.noise_spec().sample(step_index);
    rk.step(|tt, ss, dd| field.derivative(tt, noise, ss, dd), t, s, dt, out);
    if field.cfg.projection.enabled {
        let k = field.k;
        let h_len = field.cfg.layout.h_len(field.m);
        project_h_in_place(
            &mut out[1 + k..1 + k + h_len],
            field.m,
            field.cfg.layout,
            &field.cfg.projection,
        );
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t: t + dt });
    }
    Ok(())
}

/// Time-indexed record of a run. Vector quantities are stored row-major with
/// one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub m: usize,
    pub layout: Layout,
    /// Sample spacing (integration step times `record_every`).
    pub dt: f64,
    pub pole: f64,
    /// `c1 - ½xᵀHx` for stationary noiseless runs, where the residual
    /// `z - θ*ᵀφ` must equal this constant times `e^{-a t}`.
    pub residual_constant: Option<f64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub f_true: Vec<f64>,
    pub f_meas: Vec<f64>,
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// Upper triangle of `Ĥ`, row-major.
    pub h_hat: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub x_true: Vec<f64>,
    pub err_x: Vec<f64>,
    pub err_h: Vec<f64>,
    /// `‖θ̂ - θ*(t)‖`.
    pub theta_err: Vec<f64>,
    pub residual: Vec<f64>,
}

impl SimulationTrace {
    fn with_capacity(cfg: &ScenarioConfig, rows: usize) -> Self {
        let m = cfg.m;
        let k = cfg.layout.theta_len(m);
        let nh = m * (m + 1) / 2;
        let stationary_noiseless =
            cfg.field.extremum.is_constant() && cfg.noise_spec().is_silent();
        SimulationTrace {
            m,
            layout: cfg.layout,
            dt: cfg.dt * cfg.record_every as f64,
            pole: cfg.a,
            residual_constant: stationary_noiseless
                .then(|| cfg.field.offset_constant(&cfg.field.extremum.value(0.0))),
            t: Vec::with_capacity(rows),
            y: Vec::with_capacity(rows * m),
            f_true: Vec::with_capacity(rows),
            f_meas: Vec::with_capacity(rows),
            z: Vec::with_capacity(rows),
            phi: Vec::with_capacity(rows * k),
            theta_hat: Vec::with_capacity(rows * k),
            h_hat: Vec::with_capacity(rows * nh),
            x_hat: Vec::with_capacity(rows * m),
            x_true: Vec::with_capacity(rows * m),
            err_x: Vec::with_capacity(rows),
            err_h: Vec::with_capacity(rows),
            theta_err: Vec::with_capacity(rows),
            residual: Vec::with_capacity(rows),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Regressor dimension.
    pub fn k(&self) -> usize {
        self.layout.theta_len(self.m)
    }

    pub fn h_len(&self) -> usize {
        self.m * (self.m + 1) / 2
    }

    pub fn y_at(&self, i: usize) -> &[f64] {
        &self.y[i * self.m..(i + 1) * self.m]
    }

    pub fn phi_at(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.phi[i * k..(i + 1) * k]
    }

    pub fn theta_hat_at(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.theta_hat[i * k..(i + 1) * k]
    }

    pub fn h_hat_at(&self, i: usize) -> &[f64] {
        let nh = self.h_len();
        &self.h_hat[i * nh..(i + 1) * nh]
    }

    pub fn x_hat_at(&self, i: usize) -> &[f64] {
        &self.x_hat[i * self.m..(i + 1) * self.m]
    }

    pub fn x_true_at(&self, i: usize) -> &[f64] {
        &self.x_true[i * self.m..(i + 1) * self.m]
    }

    pub fn phi_series(&self) -> Result<PhiSeries<'_>> {
        PhiSeries::new(self.t.first().copied().unwrap_or(0.0), self.dt, self.k(), &self.phi)
    }
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    noise: NoiseSpec,
}

impl Recorder<'_> {
    fn record(
        &self,
        trace: &mut SimulationTrace,
        field: &mut CoupledField<'_>,
        t: f64,
        step_index: u64,
        s: &[f64],
    ) -> Result<()> {
        let cfg = self.cfg;
        let (m, k) = (field.m, field.k);
        let f_true = field.observe(t);
        let f_meas = f_true + self.noise.sample(step_index);
        let z = -cfg.a * s[0] + f_meas;
        let phi: Vec<f64> = (0..k).map(|i| -cfg.a * s[1 + i] + field.psi[i]).collect();
        let theta = &s[1 + k..];
        let h_len = cfg.layout.h_len(m);
        let h_hat = unpack_h(&theta[..h_len], cfg.layout)?;
        let x_hat = solve_extremum(h_hat.clone(), &theta[h_len..])
            .unwrap_or_else(|_| vec![f64::NAN; m]);
        let theta_star = pack_theta(&cfg.field.hessian, &field.x, cfg.layout)?;

        trace.t.push(t);
        trace.y.extend_from_slice(&field.y);
        trace.f_true.push(f_true);
        trace.f_meas.push(f_meas);
        trace.z.push(z);
        trace.residual.push(
            z - theta_star
                .as_slice()
                .iter()
                .zip(&phi)
                .map(|(a, b)| a * b)
                .sum::<f64>(),
        );
        trace.phi.extend_from_slice(&phi);
        trace.theta_hat.extend_from_slice(theta);
        for i in 0..m {
            for j in i..m {
                trace.h_hat.push(h_hat[(i, j)]);
            }
        }
        trace.err_x.push(norm(x_hat.iter().zip(&field.x).map(|(a, b)| a - b)));
        trace.x_hat.extend_from_slice(&x_hat);
        trace.x_true.extend_from_slice(&field.x);
        trace.err_h.push((&h_hat - &cfg.field.hessian).norm());
        trace.theta_err.push(norm(
            theta.iter().zip(theta_star.as_slice()).map(|(a, b)| a - b),
        ));
        Ok(())
    }
}

/// Runs a validated scenario to `t_end` and returns the full trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    let k = cfg.layout.theta_len(cfg.m);
    let n_steps = cfg.n_steps();
    let every = cfg.record_every;

    let mut state = vec![0.0; 1 + 2 * k];
    state[1 + k..].copy_from_slice(cfg.initial_theta()?.as_slice());
    let mut next = state.clone();

    let mut field = CoupledField::new(cfg);
    let mut rk = Rk4::new(state.len());
    let recorder = Recorder {
        cfg,
        noise: cfg.noise_spec(),
    };
    let mut trace = SimulationTrace::with_capacity(cfg, n_steps / every + 1);

    recorder.record(&mut trace, &mut field, 0.0, 0, &state)?;
    for step in 0..n_steps {
        let t = step as f64 * cfg.dt;
        advance(&mut field, &mut rk, &state, t, step as u64, cfg.dt, &mut next)?;
        std::mem::swap(&mut state, &mut next);
        let done = step + 1;
        if done % every == 0 {
            recorder.record(&mut trace, &mut field, done as f64 * cfg.dt, done as u64, &state)?;
        }
    }
    Ok(trace)
}

/// Analytic bounds on the agent and extremum paths, and the drift rate `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathWitness {
    pub agent: PathBounds,
    pub extremum: PathBounds,
    pub epsilon: f64,
}

pub fn path_witness(cfg: &ScenarioConfig) -> PathWitness {
    let extremum = cfg.field.extremum.bounds();
    PathWitness {
        agent: cfg.agent.bounds(),
        extremum,
        epsilon: extremum.velocity,
    }
}
