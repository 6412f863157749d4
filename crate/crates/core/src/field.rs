//! Ground-truth quadratic signal field and its measurement model.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::SinusoidPath;

/// `F(y, t) = c1 - ½ (y - x(t))ᵀ H (y - x(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub c1: f64,
    #[serde(with = "matrix_rows")]
    pub hessian: DMatrix<f64>,
    pub extremum: SinusoidPath,
}

impl FieldParams {
    pub fn new(c1: f64, hessian: DMatrix<f64>, extremum: SinusoidPath) -> Result<Self> {
        let params = FieldParams { c1, hessian, extremum };
        params.validate()?;
        Ok(params)
    }

    pub fn dim(&self) -> usize {
        self.hessian.nrows()
    }

    /// Checks shape, symmetry and diagonal dominance of `H`.
    pub fn validate(&self) -> Result<()> {
        let m = self.hessian.nrows();
        if m == 0 {
            return Err(Error::InvalidInput("field dimension must be at least 1".into()));
        }
        if self.hessian.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "hessian must be square, got {}x{}",
                m,
                self.hessian.ncols()
            )));
        }
        if self.extremum.dim() != m {
            return Err(Error::DimensionMismatch {
                what: "extremum path",
                expected: m,
                got: self.extremum.dim(),
            });
        }
        if !self.c1.is_finite() || self.hessian.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field parameters"));
        }
        self.extremum.validate()?;
        for i in 0..m {
            for j in 0..i {
                if self.hessian[(i, j)] != self.hessian[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "hessian is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if !check_diagonal_dominance(&self.hessian) {
            return Err(Error::InvalidInput(
                "hessian must have a positive diagonal and strict diagonal dominance".into(),
            ));
        }
        Ok(())
    }

    /// `c1 - ½ xᵀHx`, the constant left over when `F` is written as `θ*ᵀΨ(y)`.
    pub fn offset_constant(&self, x: &[f64]) -> f64 {
        self.c1 - 0.5 * quad_form(&self.hessian, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    None,
    GaussianWhite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec::default()
    }

    pub fn gaussian(variance: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::GaussianWhite,
            variance,
            seed,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.kind == NoiseKind::None || self.variance == 0.0
    }

    /// The noise value held over integration step `step_index`.
    ///
    /// Each step gets its own ChaCha stream, so samples are a pure function of
    /// `(seed, step_index)` and can be queried in any order.
    pub fn sample(&self, step_index: u64) -> f64 {
        if self.is_silent() {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step_index);
        Normal::new(0.0, self.variance.sqrt())
            .expect("variance validated non-negative")
            .sample(&mut rng)
    }
}

pub(crate) fn quad_form(h: &DMatrix<f64>, v: &[f64]) -> f64 {
    let m = v.len();
    let mut acc = 0.0;
    for i in 0..m {
        let mut row = 0.0;
        for j in 0..m {
            row += h[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

/// Field value at `y` with the extremum already evaluated at `x`.
pub(crate) fn eval_at(c1: f64, h: &DMatrix<f64>, x: &[f64], y: &[f64], scratch: &mut [f64]) -> f64 {
    for ((d, yi), xi) in scratch.iter_mut().zip(y).zip(x) {
        *d = yi - xi;
    }
    c1 - 0.5 * quad_form(h, scratch)
}

pub fn eval_field(params: &FieldParams, y: &[f64], t: f64) -> Result<f64> {
    let m = params.dim();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "agent position",
            expected: m,
            got: y.len(),
        });
    }
    let x = params.extremum.value(t);
    let mut scratch = vec![0.0; m];
    Ok(eval_at(params.c1, &params.hessian, &x, y, &mut scratch))
}

/// Noisy measurement; the noise sample is held constant across every query
/// that shares `step_index`.
pub fn eval_field_measured(
    params: &FieldParams,
    y: &[f64],
    t: f64,
    noise: &NoiseSpec,
    step_index: u64,
) -> Result<f64> {
    Ok(eval_field(params, y, t)? + noise.sample(step_index))
}

/// Positive diagonal with strict row-wise diagonal dominance. No tolerance.
pub fn check_diagonal_dominance(h: &DMatrix<f64>) -> bool {
    if !h.is_square() {
        return false;
    }
    (0..h.nrows()).all(|i| {
        let diag = h[(i, i)];
        let off: f64 = (0..h.ncols()).filter(|&j| j != i).map(|j| h[(i, j)].abs()).sum();
        diag > 0.0 && diag > off
    })
}

/// Serializes a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows have unequal lengths"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}
