//! Test-only oracles, independent of the library's linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub fn jacobi_min_eigenvalue(a: &[Vec<f64>]) -> f64 {
    jacobi_eigenvalues(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// Symmetric matrix from a row-major upper triangle.
pub fn from_upper(upper: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; m]; m];
    let mut k = 0;
    for i in 0..m {
        for j in i..m {
            h[i][j] = upper[k];
            h[j][i] = upper[k];
            k += 1;
        }
    }
    h
}

/// Small deterministic generator so oracles do not share the library's RNG path.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Random symmetric matrix with positive, strictly dominant diagonal.
pub fn random_dominant(rng: &mut SplitMix, m: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = rng.uniform(-3.0, 3.0);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| h[i][j].abs()).sum();
        // margins down to 1e-6 probe the boundary of the dominance condition
        let margin = 10f64.powf(rng.uniform(-6.0, 0.5));
        h[i][i] = off + margin;
    }
    h
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    // eigenvalues of [[2,1],[1,2]] are 1 and 3
    let mut e = jacobi_eigenvalues(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
    e.sort_by(f64::total_cmp);
    assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
}
