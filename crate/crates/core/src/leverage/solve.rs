use nalgebra::DMatrix;

use super::TRUNCATION;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Condition-estimate limit above which the QR path hands over to the SVD.
pub const QR_CONDITION_LIMIT: f64 = 1e8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveOptions {
    /// Tikhonov weight `λ` in `min ‖AX − Y‖² + λ‖X‖²`; zero disables it.
    pub ridge: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Qr,
    Svd,
}

/// Solution of a (sampled) least-squares problem with diagnostics.
#[derive(Clone, Debug)]
pub struct LsSolution {
    pub x: Matrix,
    /// `‖AX − Y‖_F` on the supplied rows.
    pub residual_norm: f64,
    pub rank: usize,
    /// Set when the pseudoinverse had to drop singular values.
    pub rank_deficient: bool,
    pub method: SolveMethod,
}

/// Solves `min ‖A X − Y‖_F` for already weighted rows `A` and `Y`.
///
/// Uses Householder QR when the diagonal-ratio condition estimate of `R` is
/// below [`QR_CONDITION_LIMIT`], otherwise a truncated SVD pseudoinverse.
pub fn sampled_least_squares(
    design: &Matrix,
    rhs: &Matrix,
    opts: &SolveOptions,
) -> Result<LsSolution> {
    if design.rows() != rhs.rows() {
        return Err(Error::Shape(format!(
            "design has {} rows but right-hand side has {}",
            design.rows(),
            rhs.rows()
        )));
    }
    if opts.ridge < 0.0 || !opts.ridge.is_finite() {
        return Err(Error::Config(
            "ridge weight must be finite and nonnegative".into(),
        ));
    }
    if design
        .data()
        .iter()
        .chain(rhs.data())
        .any(|v| !v.is_finite())
    {
        return Err(Error::Degenerate(
            "non-finite values in the least-squares problem".into(),
        ));
    }
    let n = design.cols();
    let (a, y) = if opts.ridge > 0.0 {
        let s = opts.ridge.sqrt();
        let mut a = design.to_dmatrix().insert_rows(design.rows(), n, 0.0);
        for k in 0..n {
            a[(design.rows() + k, k)] = s;
        }
        (a, rhs.to_dmatrix().insert_rows(rhs.rows(), n, 0.0))
    } else {
        (design.to_dmatrix(), rhs.to_dmatrix())
    };
    let (x, rank, method) = solve_dense(a, &y)?;
    let x = Matrix::from_dmatrix(&x);
    let resid = design.matmul(&x)?;
    let residual_norm = resid
        .data()
        .iter()
        .zip(rhs.data())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(LsSolution {
        x,
        residual_norm,
        rank,
        rank_deficient: rank < n,
        method,
    })
}

fn solve_dense(a: DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize, SolveMethod)> {
    let (m, n) = a.shape();
    if m >= n {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..n).map(|k| r[(k, k)].abs()).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if dmin > 0.0 && dmax / dmin < QR_CONDITION_LIMIT {
            let qty = qr.q().tr_mul(y);
            if let Some(x) = r.solve_upper_triangular(&qty) {
                return Ok((x, n, SolveMethod::Qr));
            }
        }
    }
    let svd = a.svd(true, true);
    let sigma = svd.singular_values.as_slice();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) {
        return Err(Error::Degenerate(
            "least-squares design matrix is zero".into(),
        ));
    }
    let thr = smax * TRUNCATION * m.max(n) as f64;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V");
    let mut uty = u.tr_mul(y);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s >= thr {
            rank += 1;
            uty.row_mut(k).scale_mut(1.0 / s);
        } else {
            uty.row_mut(k).fill(0.0);
        }
    }
    Ok((vt.tr_mul(&uty), rank, SolveMethod::Svd))
}

/// Solves `G X = B` for a symmetric positive semidefinite Gram matrix `G`
/// (normal equations of an exact ALS step) with a truncated eigen-pseudoinverse.
pub fn solve_normal_equations(gram: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if gram.rows() != gram.cols() || gram.rows() != rhs.rows() {
        return Err(Error::Shape(
            "normal equations need a square Gram matching the right-hand side".into(),
        ));
    }
    let g = gram.to_dmatrix();
    let b = rhs.to_dmatrix();
    if let Some(ch) = g.clone().cholesky() {
        let l = ch.l();
        let dmax = (0..l.nrows()).map(|k| l[(k, k)]).fold(0.0, f64::max);
        let dmin = (0..l.nrows())
            .map(|k| l[(k, k)])
            .fold(f64::INFINITY, f64::min);
        if dmin > 0.0 && dmax / dmin < 1e6 {
            return Ok(Matrix::from_dmatrix(&ch.solve(&b)));
        }
    }
    let eig = g.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(lmax > 0.0) {
        return Err(Error::Degenerate(
            "Gram matrix of the design is zero".into(),
        ));
    }
    let thr = lmax * 1e-14 * gram.rows() as f64;
    let v = &eig.eigenvectors;
    let mut vtb = v.tr_mul(&b);
    for k in 0..gram.rows() {
        let l = eig.eigenvalues[k];
        if l > thr {
            vtb.row_mut(k).scale_mut(1.0 / l);
        } else {
            vtb.row_mut(k).fill(0.0);
        }
    }
    Ok(Matrix::from_dmatrix(&(v * vtb)))
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
    fn consistent_system_is_recovered() {
        let a = gaussian(12, 3, 1);
        let x0 = gaussian(3, 2, 2);
        let y = a.matmul(&x0).unwrap();
        let sol = sampled_least_squares(&a, &y, &SolveOptions::default()).unwrap();
        assert!(sol.x.max_abs_diff(&x0) < 1e-10);
        assert_eq!(sol.method, SolveMethod::Qr);
        assert!(!sol.rank_deficient);
    }

    #[test]
    fn rank_deficient_uses_pseudoinverse() {
        let a = gaussian(10, 2, 3);
        let b = Matrix::from_fn(10, 3, |i, j| if j == 2 { a[(i, 0)] } else { a[(i, j)] });
        let y = gaussian(10, 1, 4);
        let sol = sampled_least_squares(&b, &y, &SolveOptions::default()).unwrap();
        assert_eq!(sol.method, SolveMethod::Svd);
        assert!(sol.rank_deficient);
        assert_eq!(sol.rank, 2);
        let dense = sampled_least_squares(&a, &y, &SolveOptions::default()).unwrap();
        assert!((sol.residual_norm - dense.residual_norm).abs() < 1e-10);
    }

    #[test]
    fn ridge_matches_closed_form() {
        let a = gaussian(15, 3, 5);
        let y = gaussian(15, 2, 6);
        let lam = 0.3;
        let sol = sampled_least_squares(&a, &y, &SolveOptions { ridge: lam }).unwrap();
        let mut g = a.gram();
        for k in 0..3 {
            g[(k, k)] += lam;
        }
        let x = solve_normal_equations(&g, &a.tr_matmul(&y).unwrap()).unwrap();
        assert!(sol.x.max_abs_diff(&x) < 1e-10);
    }

    #[test]
    fn normal_equations_agree_with_qr() {
        let a = gaussian(40, 4, 7);
        let y = gaussian(40, 3, 8);
        let qr = sampled_least_squares(&a, &y, &SolveOptions::default()).unwrap();
        let ne = solve_normal_equations(&a.gram(), &a.tr_matmul(&y).unwrap()).unwrap();
        assert!(qr.x.max_abs_diff(&ne) < 1e-10);
    }

    #[test]
    fn bad_inputs() {
        let a = gaussian(5, 2, 9);
        assert!(sampled_least_squares(&a, &gaussian(4, 1, 1), &SolveOptions::default()).is_err());
        assert!(sampled_least_squares(
            &Matrix::zeros(5, 2),
            &gaussian(5, 1, 1),
            &SolveOptions::default()
        )
        .is_err());
        assert!(
            sampled_least_squares(&a, &gaussian(5, 1, 1), &SolveOptions { ridge: -1.0 }).is_err()
        );
    }
}
