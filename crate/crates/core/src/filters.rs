//! State-variable filters `ξ̇₁ = -aξ₁ + F`, `ξ̇₂ = -aξ₂ + Ψ` with outputs
//! `z = -aξ₁ + F` and `φ = -aξ₂ + Ψ`, i.e. `s/(s+a)` applied to `F` and `Ψ`
//! without differentiating either signal.
//!
//! The filters are exposed as a derivative field; the caller owns the state
//! and advances it with the shared integrator.

use crate::error::{Error, Result};
use crate::parametrization::PsiVector;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub xi1: f64,
    pub xi2: Vec<f64>,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub z: f64,
    pub phi: Vec<f64>,
}

impl FilterState {
    /// Zero initial conditions.
    pub fn new(dim: usize, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidInput(format!("filter pole must be positive, got {a}")));
        }
        Ok(FilterState {
            xi1: 0.0,
            xi2: vec![0.0; dim],
            a,
        })
    }

    fn check(&self, f_meas: f64, psi: &PsiVector) -> Result<()> {
        if psi.len() != self.xi2.len() {
            return Err(Error::DimensionMismatch {
                what: "regressor",
                expected: self.xi2.len(),
                got: psi.len(),
            });
        }
        let finite = f_meas.is_finite()
            && self.xi1.is_finite()
            && self.xi2.iter().chain(psi.as_slice()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("filter inputs"));
        }
        Ok(())
    }
}

/// `-a·s + u` elementwise; shared by the output map and the derivative field.
#[inline]
pub(crate) fn leaky_into(a: f64, state: &[f64], input: &[f64], out: &mut [f64]) {
    for ((o, s), u) in out.iter_mut().zip(state).zip(input) {
        *o = -a * s + u;
    }
}

pub fn filter_output(state: &FilterState, f_meas: f64, psi: &PsiVector) -> Result<FilterOutput> {
    state.check(f_meas, psi)?;
    let mut phi = vec![0.0; psi.len()];
    leaky_into(state.a, &state.xi2, psi.as_slice(), &mut phi);
    Ok(FilterOutput {
        z: -state.a * state.xi1 + f_meas,
        phi,
    })
}

/// Returns `(ξ̇₁, ξ̇₂)`. Numerically `ξ̇₁ == z`, but the two play different roles.
pub fn filter_derivative(
    state: &FilterState,
    f_meas: f64,
    psi: &PsiVector,
) -> Result<(f64, Vec<f64>)> {
    state.check(f_meas, psi)?;
    let mut d2 = vec![0.0; psi.len()];
    leaky_into(state.a, &state.xi2, psi.as_slice(), &mut d2);
    Ok((-state.a * state.xi1 + f_meas, d2))
}
