//! Linear-in-parameters form of the quadratic field.
//!
//! `F(y) - (c1 - ½xᵀHx) = θ*ᵀ Ψ(y)` with
//! `θ* = [H11, H12, …, H1m, H22, …, Hmm, (Hx)ᵀ]` and
//! `Ψ(y) = [-½y1², -y1y2, …, -y1ym, -½y2², …, -½ym², yᵀ]`.
//! The reduced layout keeps only the diagonal of `H` and is valid when `H`
//! is diagonal.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Full,
    Reduced,
}

impl Layout {
    /// Length of the `θ_H` block.
    pub fn h_len(self, m: usize) -> usize {
        match self {
            Layout::Full => m * (m + 1) / 2,
            Layout::Reduced => m,
        }
    }

    /// Length of the full parameter (and regressor) vector.
    pub fn theta_len(self, m: usize) -> usize {
        self.h_len(m) + m
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Layout::Full),
            "reduced" => Ok(Layout::Reduced),
            other => Err(Error::InvalidInput(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    data: Vec<f64>,
    m: usize,
    layout: Layout,
}

impl ThetaVector {
    pub fn new(data: Vec<f64>, m: usize, layout: Layout) -> Result<Self> {
        let expected = layout.theta_len(m);
        if m == 0 || data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "theta vector",
                expected,
                got: data.len(),
            });
        }
        Ok(ThetaVector { data, m, layout })
    }

    pub fn zeros(m: usize, layout: Layout) -> Self {
        ThetaVector {
            data: vec![0.0; layout.theta_len(m)],
            m,
            layout,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn h_part(&self) -> &[f64] {
        &self.data[..self.layout.h_len(self.m)]
    }

    pub fn x_part(&self) -> &[f64] {
        &self.data[self.layout.h_len(self.m)..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiVector {
    data: Vec<f64>,
    layout: Layout,
}

impl PsiVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Zero-based position of `H[i][j]` (`i <= j`) in the row-major upper triangle.
pub fn index_of(i: usize, j: usize, m: usize) -> Result<usize> {
    if i > j || j >= m {
        return Err(Error::InvalidInput(format!(
            "index ({i}, {j}) is not in the upper triangle of a {m}x{m} matrix"
        )));
    }
    Ok(tri_index(i, j, m))
}

#[inline]
pub(crate) fn tri_index(i: usize, j: usize, m: usize) -> usize {
    i * (2 * m - i + 1) / 2 + (j - i)
}

pub fn pack_theta(h: &DMatrix<f64>, x: &[f64], layout: Layout) -> Result<ThetaVector> {
    let m = h.nrows();
    if !h.is_square() || m == 0 {
        return Err(Error::InvalidInput("hessian must be a non-empty square matrix".into()));
    }
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            what: "extremum",
            expected: m,
            got: x.len(),
        });
    }
    let mut data = Vec::with_capacity(layout.theta_len(m));
    match layout {
        Layout::Full => {
            for i in 0..m {
                for j in i..m {
                    data.push(h[(i, j)]);
                }
            }
        }
        Layout::Reduced => {
            for i in 0..m {
                for j in 0..m {
                    if i != j && h[(i, j)] != 0.0 {
                        return Err(Error::InvalidInput(
                            "reduced layout requires a diagonal hessian".into(),
                        ));
                    }
                }
                data.push(h[(i, i)]);
            }
        }
    }
    for i in 0..m {
        data.push((0..m).map(|j| h[(i, j)] * x[j]).sum());
    }
    Ok(ThetaVector { data, m, layout })
}

/// Writes `Ψ(y)` into `out`, which must have length `layout.theta_len(y.len())`.
pub(crate) fn psi_into(y: &[f64], layout: Layout, out: &mut [f64]) {
    let m = y.len();
    let mut k = 0;
    match layout {
        Layout::Full => {
            for i in 0..m {
                out[k] = -0.5 * y[i] * y[i];
                k += 1;
                for j in (i + 1)..m {
                    out[k] = -y[i] * y[j];
                    k += 1;
                }
            }
        }
        Layout::Reduced => {
            for &yi in y {
                out[k] = -0.5 * yi * yi;
                k += 1;
            }
        }
    }
    out[k..].copy_from_slice(y);
}

pub fn build_psi(y: &[f64], layout: Layout) -> PsiVector {
    let mut data = vec![0.0; layout.theta_len(y.len())];
    psi_into(y, layout, &mut data);
    PsiVector { data, layout }
}

/// Rebuilds the symmetric `Ĥ` from the `θ_H` block; `m` is inferred from the length.
pub fn unpack_h(theta_h: &[f64], layout: Layout) -> Result<DMatrix<f64>> {
    match layout {
        Layout::Reduced => {
            if theta_h.is_empty() {
                return Err(Error::InvalidInput("empty theta_H block".into()));
            }
            Ok(DMatrix::from_diagonal(&DVector::from_column_slice(theta_h)))
        }
        Layout::Full => {
            let n = theta_h.len();
            let m = (1..=n).find(|m| m * (m + 1) / 2 >= n).unwrap_or(0);
            if m == 0 || m * (m + 1) / 2 != n {
                return Err(Error::InvalidInput(format!(
                    "theta_H length {n} is not a triangular number"
                )));
            }
            let mut h = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let v = theta_h[tri_index(i, j, m)];
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
            Ok(h)
        }
    }
}

/// `x̂ = Ĥ⁻¹ θ̂ₓ` via LU with partial pivoting.
pub fn estimate_x(theta: &ThetaVector) -> Result<Vec<f64>> {
    let h = unpack_h(theta.h_part(), theta.layout())?;
    solve_extremum(h, theta.x_part())
}

pub(crate) fn solve_extremum(h: DMatrix<f64>, theta_x: &[f64]) -> Result<Vec<f64>> {
    if h.iter().chain(theta_x).any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { matrix: h });
    }
    let rhs = DVector::from_column_slice(theta_x);
    match h.clone().lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x.as_slice().to_vec()),
        _ => Err(Error::SingularMatrix { matrix: h }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference_h() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0])
    }

    #[test]
    fn index_examples() {
        assert_eq!(index_of(0, 0, 2).unwrap(), 0);
        assert_eq!(index_of(0, 1, 2).unwrap(), 1);
        assert_eq!(index_of(1, 1, 2).unwrap(), 2);
        assert_eq!(index_of(0, 2, 3).unwrap(), 2);
        assert_eq!(index_of(1, 1, 3).unwrap(), 3);
        assert!(index_of(1, 0, 2).is_err());
        assert!(index_of(0, 2, 2).is_err());
    }

    #[test]
    fn index_is_bijective() {
        for m in 1..=6 {
            let mut seen = vec![false; m * (m + 1) / 2];
            let mut expected = 0;
            for i in 0..m {
                for j in i..m {
                    let k = index_of(i, j, m).unwrap();
                    assert_eq!(k, expected, "row-major order");
                    assert!(!seen[k]);
                    seen[k] = true;
                    expected += 1;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn pack_examples() {
        let t = pack_theta(&reference_h(), &[1.0, 2.0], Layout::Full).unwrap();
        let expected = [1.0, 0.2, 2.0, 1.4, 4.2];
        for (a, b) in t.as_slice().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let t = pack_theta(&DMatrix::identity(2, 2), &[0.0, 0.0], Layout::Full).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 0.0, 1.0, 0.0, 0.0]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let t = pack_theta(&d, &[1.0, 1.0], Layout::Reduced).unwrap();
        assert_eq!(t.as_slice(), &[2.0, 3.0, 2.0, 3.0]);
        assert!(pack_theta(&reference_h(), &[1.0, 2.0], Layout::Reduced).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(build_psi(&[0.0, 0.0], Layout::Full).as_slice(), &[-0.0, -0.0, -0.0, 0.0, 0.0]);
        assert_eq!(build_psi(&[1.0, 1.0], Layout::Full).as_slice(), &[-0.5, -1.0, -0.5, 1.0, 1.0]);
        assert_eq!(build_psi(&[2.0], Layout::Full).as_slice(), &[-2.0, 2.0]);
        assert_eq!(build_psi(&[1.0, 2.0], Layout::Reduced).as_slice(), &[-0.5, -2.0, 1.0, 2.0]);
    }

    #[test]
    fn unpack_examples() {
        assert_eq!(unpack_h(&[1.0, 0.2, 2.0], Layout::Full).unwrap(), reference_h());
        assert_eq!(unpack_h(&[5.0], Layout::Full).unwrap(), DMatrix::from_element(1, 1, 5.0));
        assert_eq!(
            unpack_h(&[2.0, 3.0], Layout::Reduced).unwrap(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))
        );
        assert!(unpack_h(&[1.0, 2.0], Layout::Full).is_err());
        assert!(unpack_h(&[], Layout::Full).is_err());
    }

    #[test]
    fn estimate_examples() {
        let t = ThetaVector::new(vec![1.0, 0.0, 1.0, 3.0, 4.0], 2, Layout::Full).unwrap();
        assert_eq!(estimate_x(&t).unwrap(), vec![3.0, 4.0]);
        let t = ThetaVector::new(vec![1.0, 0.2, 2.0, 1.4, 4.2], 2, Layout::Full).unwrap();
        let x = estimate_x(&t).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-14);
        let t = ThetaVector::new(vec![2.0, 6.0], 1, Layout::Full).unwrap();
        assert_eq!(estimate_x(&t).unwrap(), vec![3.0]);
    }

    #[test]
    fn estimate_rejects_singular() {
        let t = ThetaVector::new(vec![1.0, 1.0, 1.0, 3.0, 4.0], 2, Layout::Full).unwrap();
        match estimate_x(&t) {
            Err(Error::SingularMatrix { matrix }) => assert_eq!(matrix[(0, 1)], 1.0),
            other => panic!("expected singular error, got {other:?}"),
        }
        let t = ThetaVector::new(vec![f64::NAN, 0.0, 1.0, 3.0, 4.0], 2, Layout::Full).unwrap();
        assert!(matches!(estimate_x(&t), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn theta_length_checked() {
        assert!(ThetaVector::new(vec![0.0; 4], 2, Layout::Full).is_err());
        assert!(ThetaVector::new(vec![0.0; 4], 2, Layout::Reduced).is_ok());
        assert_eq!(Layout::Full.theta_len(3), 9);
    }

    fn dominant_matrix(m: usize, raw: &[f64], diag_extra: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(m, m);
        let mut k = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                h[(i, j)] = raw[k];
                h[(j, i)] = raw[k];
                k += 1;
            }
        }
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| h[(i, j)].abs()).sum();
            h[(i, i)] = off + 0.1 + diag_extra[i];
        }
        h
    }

    proptest! {
        #[test]
        fn model_identity(
            m in 1usize..=5,
            raw in prop::collection::vec(-2.0f64..2.0, 10),
            extra in prop::collection::vec(0.0f64..3.0, 5),
            x in prop::collection::vec(-5.0f64..5.0, 5),
            y in prop::collection::vec(-5.0f64..5.0, 5),
            reduced in any::<bool>(),
        ) {
            let mut h = dominant_matrix(m, &raw, &extra);
            let layout = if reduced { Layout::Reduced } else { Layout::Full };
            if reduced {
                h = DMatrix::from_diagonal(&h.diagonal());
            }
            let (x, y) = (&x[..m], &y[..m]);
            let theta = pack_theta(&h, x, layout).unwrap();
            let psi = build_psi(y, layout);
            let lhs: f64 = theta.as_slice().iter().zip(psi.as_slice()).map(|(a, b)| a * b).sum();
            let yhy = crate::field::quad_form(&h, y);
            let xhy: f64 = (0..m).map(|i| (0..m).map(|j| x[i] * h[(i, j)] * y[j]).sum::<f64>()).sum();
            let rhs = -0.5 * yhy + xhy;
            let scale = 1.0 + (0.5 * yhy).abs() + xhy.abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");

            let back = unpack_h(theta.h_part(), layout).unwrap();
            prop_assert_eq!(&back, &h);

            let xr = estimate_x(&theta).unwrap();
            for (a, b) in xr.iter().zip(x) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }
}
