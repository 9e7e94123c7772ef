use crate::error::{Error, Result};
use crate::leverage::exact_leverage_scores;
use crate::tensor::Matrix;

/// Largest design (rows × cols) accepted by [`exact_sampling_distribution`].
pub const EXACT_DISTRIBUTION_LIMIT: usize = 1 << 28;

/// `KL(p‖q) = Σ p(i) ln(p(i)/q(i))` with `0·ln 0 = 0`.
///
/// Returns `+∞` when some `q(i) = 0 < p(i)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "supports differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q).any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Config(
            "distributions must have finite nonnegative entries".into(),
        ));
    }
    let mut kl = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += a * (a / b).ln();
    }
    Ok(kl.max(0.0))
}

/// Exact leverage-score sampling distribution `p(i) = ℓᵢ(A)/rank(A)`.
pub fn exact_sampling_distribution(design: &Matrix) -> Result<Vec<f64>> {
    if design.rows().saturating_mul(design.cols()) > EXACT_DISTRIBUTION_LIMIT {
        return Err(Error::SizeLimit(format!(
            "{}x{} design exceeds the exact-distribution limit",
            design.rows(),
            design.cols()
        )));
    }
    let lev = exact_leverage_scores(design)?;
    let rank: f64 = lev.iter().sum();
    Ok(lev.into_iter().map(|l| l / rank).collect())
}

/// Total-variation distance `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "supports differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
