use rand::Rng;

use super::hash::HashFamily;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// CountSketch `C ∈ ℝ^{J×I}` with `C(j, i) = s(i)·1{h(i) = j}`.
#[derive(Clone, Debug)]
pub struct CountSketchSpec {
    rows: usize,
    cols: usize,
    h: HashFamily,
    s: HashFamily,
    buckets: Vec<usize>,
    signs: Vec<f64>,
}

impl CountSketchSpec {
    /// Draws a 3-wise independent bucket hash and a 4-wise independent sign hash.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let h = HashFamily::random(3, rng);
        let s = HashFamily::random(4, rng);
        Self::from_hashes(rows, cols, h, s).expect("positive sizes")
    }

    pub fn from_hashes(rows: usize, cols: usize, h: HashFamily, s: HashFamily) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("CountSketch sizes must be positive".into()));
        }
        let buckets = (0..cols as u64).map(|i| h.bucket(i, rows)).collect();
        let signs = (0..cols as u64).map(|i| s.sign(i)).collect();
        Ok(CountSketchSpec {
            rows,
            cols,
            h,
            s,
            buckets,
            signs,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bucket_hash(&self) -> &HashFamily {
        &self.h
    }

    pub fn sign_hash(&self) -> &HashFamily {
        &self.s
    }

    #[inline]
    pub fn bucket(&self, i: usize) -> usize {
        self.buckets[i]
    }

    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        self.signs[i]
    }

    /// `out = C x`; `x` may be shorter than `I`, trailing entries taken as zero.
    pub fn apply_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert!(x.len() <= self.cols && out.len() == self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                out[self.buckets[i]] += self.signs[i] * v;
            }
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "vector of length {} for a CountSketch with {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.apply_vec_into(x, &mut out);
        Ok(out)
    }

    /// Explicit `J × I` matrix.
    pub fn matrix(&self) -> Matrix {
        let mut c = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.cols {
            c[(self.buckets[i], i)] = self.signs[i];
        }
        c
    }
}

/// `C · A` in `O(nnz(A))`.
pub fn countsketch_apply(cs: &CountSketchSpec, a: &Matrix) -> Result<Matrix> {
    if a.rows() != cs.cols {
        return Err(Error::Shape(format!(
            "{}x{} matrix for a CountSketch with {} columns",
            a.rows(),
            a.cols(),
            cs.cols
        )));
    }
    let mut out = Matrix::zeros(cs.rows, a.cols());
    for c in 0..a.cols() {
        cs.apply_vec_into(a.col(c), out.col_mut(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_and_zero_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = CountSketchSpec::random(5, 7, &mut rng);
        for i in 0..7 {
            let mut e = vec![0.0; 7];
            e[i] = 1.0;
            let y = cs.apply_vec(&e).unwrap();
            let mut expect = vec![0.0; 5];
            expect[cs.bucket(i)] = cs.sign(i);
            assert_eq!(y, expect);
        }
        let z = countsketch_apply(&cs, &Matrix::zeros(7, 3)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        assert!(countsketch_apply(&cs, &Matrix::zeros(6, 3)).is_err());
    }

    #[test]
    fn matches_explicit_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cs = CountSketchSpec::random(4, 7, &mut rng);
        let a = Matrix::from_fn(7, 3, |i, j| {
            (i as f64 + 1.0) * (j as f64 - 1.3) + 0.25 * (i * j) as f64
        });
        let fast = countsketch_apply(&cs, &a).unwrap();
        let slow = cs.matrix().matmul(&a).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-12);
        let c = cs.matrix();
        for i in 0..7 {
            assert_eq!((0..4).filter(|&j| c[(j, i)] != 0.0).count(), 1);
        }
    }
}
