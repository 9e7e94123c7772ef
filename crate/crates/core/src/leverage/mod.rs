//! Leverage scores, their sketched estimates, index sampling and the sampled
//! least-squares solve shared by both decompositions.

mod chain;
mod sample;
mod solve;

pub use chain::{chain_distribution, draw_chain, ChainDiagnostics, SubindexChain};
pub use sample::{draw_from_weights, IndexSample};
pub use solve::{
    sampled_least_squares, solve_normal_equations, LsSolution, SolveMethod, SolveOptions,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Relative singular-value cutoff factor: keep `σ ≥ σ_max · TRUNCATION · max(rows, cols)`.
pub const TRUNCATION: f64 = 1e-10;

/// Compact SVD pieces `(σ, V)` of `a`, obtained from a thin QR when `a` is tall.
fn singular_pairs(a: &Matrix) -> (Vec<f64>, DMatrix<f64>) {
    let d = a.to_dmatrix();
    let r = if a.rows() > a.cols() { d.qr().r() } else { d };
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    (svd.singular_values.as_slice().to_vec(), vt.transpose())
}

fn cutoff(sigma: &[f64], rows: usize, cols: usize) -> Result<f64> {
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::Degenerate(
            "matrix has no nonzero singular values".into(),
        ));
    }
    Ok(smax * TRUNCATION * rows.max(cols) as f64)
}

/// Exact leverage scores `ℓᵢ = ‖U(i,:)‖²` from a compact SVD of `a`.
pub fn exact_leverage_scores(a: &Matrix) -> Result<Vec<f64>> {
    if a.data().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("leverage scores of a zero matrix".into()));
    }
    let d = a.to_dmatrix();
    let u = if a.rows() > a.cols() {
        let qr = d.qr();
        let q = qr.q();
        let svd = qr.r().svd(true, false);
        let thr = cutoff(svd.singular_values.as_slice(), a.rows(), a.cols())?;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] >= thr)
            .collect();
        let ur = svd.u.expect("requested U").select_columns(keep.iter());
        q * ur
    } else {
        let svd = d.svd(true, false);
        let thr = cutoff(svd.singular_values.as_slice(), a.rows(), a.cols())?;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] >= thr)
            .collect();
        svd.u.expect("requested U").select_columns(keep.iter())
    };
    Ok((0..u.nrows()).map(|i| u.row(i).norm_squared()).collect())
}

/// `Φ = V₁Σ₁⁻¹(V₁Σ₁⁻¹)ᵀ` from the compact SVD of a sketched design `ΨA`.
///
/// Estimated scores are `ℓ̃ᵢ = aᵢᵀ Φ aᵢ` for the rows `aᵢ` of `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeverageMap {
    phi: Matrix,
    rank: usize,
    threshold: f64,
    singular_values: Vec<f64>,
}

impl LeverageMap {
    /// Builds a map directly from `Φ`; used by tests and oracles.
    pub fn from_phi(phi: Matrix) -> Result<Self> {
        if phi.rows() != phi.cols() {
            return Err(Error::Shape("Φ must be square".into()));
        }
        let rank = phi.rows();
        Ok(LeverageMap {
            phi,
            rank,
            threshold: 0.0,
            singular_values: Vec::new(),
        })
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    /// Number of singular values kept.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn dim(&self) -> usize {
        self.phi.rows()
    }

    /// `ℓ̃ = rowᵀ Φ row`.
    pub fn score(&self, row: &[f64]) -> f64 {
        quad_form(&self.phi, row)
    }
}

pub(crate) fn quad_form(m: &Matrix, x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for k in 0..n {
        let col = m.col(k);
        let mut t = 0.0;
        for r in 0..n {
            t += col[r] * x[r];
        }
        s += t * x[k];
    }
    s
}

/// Leverage map of a sketched design matrix.
pub fn estimate_leverage_map(sketched: &Matrix) -> Result<LeverageMap> {
    let (sigma, v) = singular_pairs(sketched);
    let threshold = cutoff(&sigma, sketched.rows(), sketched.cols())?;
    let n = sketched.cols();
    let mut phi = Matrix::zeros(n, n);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s < threshold {
            continue;
        }
        rank += 1;
        let inv = 1.0 / (s * s);
        for b in 0..n {
            let vb = v[(b, k)] * inv;
            for a in 0..n {
                phi[(a, b)] += v[(a, k)] * vb;
            }
        }
    }
    Ok(LeverageMap {
        phi,
        rank,
        threshold,
        singular_values: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn exact_scores_examples() {
        let s = exact_leverage_scores(&Matrix::identity(3)).unwrap();
        for v in s {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let s = exact_leverage_scores(&Matrix::from_rows(&[&[1.0], &[1.0]])).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12 && (s[1] - 0.5).abs() < 1e-12);
        let s = exact_leverage_scores(&gaussian(8, 3, 1)).unwrap();
        assert!((s.iter().sum::<f64>() - 3.0).abs() < 1e-8);
        assert!(s.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        assert!(exact_leverage_scores(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn scores_sum_to_rank_for_deficient_and_wide() {
        let a = gaussian(10, 2, 2);
        let b = Matrix::from_fn(10, 4, |i, j| a[(i, j % 2)] * (1.0 + j as f64));
        let s = exact_leverage_scores(&b).unwrap();
        assert!((s.iter().sum::<f64>() - 2.0).abs() < 1e-8);
        let w = gaussian(3, 7, 3);
        let s = exact_leverage_scores(&w).unwrap();
        assert!((s.iter().sum::<f64>() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn orthonormal_sketch_gives_identity_phi() {
        let q = Matrix::from_dmatrix(&gaussian(20, 4, 4).to_dmatrix().qr().q());
        let map = estimate_leverage_map(&q).unwrap();
        assert!(map.phi().max_abs_diff(&Matrix::identity(4)) < 1e-10);
        assert_eq!(map.rank(), 4);
    }

    #[test]
    fn estimates_are_scale_free_and_exact_without_sketch() {
        let a = gaussian(30, 3, 5);
        let exact = exact_leverage_scores(&a).unwrap();
        let m1 = estimate_leverage_map(&a).unwrap();
        let m2 = estimate_leverage_map(&a.scaled(2.0)).unwrap();
        for i in 0..30 {
            let row = a.row(i);
            assert!((m1.score(&row) - exact[i]).abs() < 1e-10);
            assert!((m2.score(&row) * 4.0 - m1.score(&row)).abs() < 1e-10);
            let row2: Vec<f64> = row.iter().map(|v| 2.0 * v).collect();
            assert!((m2.score(&row2) - m1.score(&row)).abs() < 1e-10);
        }
        assert!(estimate_leverage_map(&Matrix::zeros(5, 2)).is_err());
    }
}
