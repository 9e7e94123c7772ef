use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use super::countsketch::CountSketchSpec;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// How the cyclic convolution inside a TensorSketch is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConvolutionMode {
    /// Length-`J` discrete Fourier transform, `O(J log J)`.
    #[default]
    Fft,
    /// Direct `O(J²)` summation, kept as an oracle.
    Direct,
}

/// Forward and inverse transforms of one length.
#[derive(Clone)]
pub struct FftPair {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FftPair({})", self.len)
    }
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Spectra of two real vectors from a single complex transform.
    pub fn spectra2(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.len;
        let mut z: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fwd.process(&mut z);
        let mut fa = Vec::with_capacity(n);
        let mut fb = Vec::with_capacity(n);
        for k in 0..n {
            let zk = z[k];
            let zc = z[(n - k) % n].conj();
            fa.push((zk + zc) * 0.5);
            fb.push((zk - zc) * Complex64::new(0.0, -0.5));
        }
        (fa, fb)
    }

    /// Spectra of a list of real vectors, transformed two at a time.
    pub fn spectra(&self, vs: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(vs.len());
        let zero = vec![0.0; self.len];
        for pair in vs.chunks(2) {
            let b = if pair.len() == 2 { pair[1] } else { &zero[..] };
            let (fa, fb) = self.spectra2(pair[0], b);
            out.push(fa);
            if pair.len() == 2 {
                out.push(fb);
            }
        }
        out
    }

    /// Real part of the inverse transform, normalized.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut spec);
        let scale = 1.0 / self.len as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }
}

/// Degree-two TensorSketch `T ∈ ℝ^{J×I²}` with `T(e_{i₁} ⊗ e_{i₂}) = s₁(i₁)s₂(i₂) e_{(h₁(i₁)+h₂(i₂)) mod J}`.
///
/// `C₁ = (h₁, s₁)` acts on the left (slow) Kronecker factor and `C₂ = (h₂, s₂)` on the right one.
#[derive(Clone, Debug)]
pub struct TensorSketchSpec {
    rows: usize,
    input: usize,
    c1: CountSketchSpec,
    c2: CountSketchSpec,
    fft: FftPair,
}

impl TensorSketchSpec {
    pub fn random<R: Rng + ?Sized>(rows: usize, input: usize, rng: &mut R) -> Self {
        Self::random_with_fft(rows, input, FftPair::new(rows), rng)
    }

    pub(crate) fn random_with_fft<R: Rng + ?Sized>(
        rows: usize,
        input: usize,
        fft: FftPair,
        rng: &mut R,
    ) -> Self {
        assert_eq!(fft.len(), rows);
        let c1 = CountSketchSpec::random(rows, input, rng);
        let c2 = CountSketchSpec::random(rows, input, rng);
        TensorSketchSpec {
            rows,
            input,
            c1,
            c2,
            fft,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn input_len(&self) -> usize {
        self.input
    }

    pub fn left(&self) -> &CountSketchSpec {
        &self.c1
    }

    pub fn right(&self) -> &CountSketchSpec {
        &self.c2
    }

    pub(crate) fn fft(&self) -> &FftPair {
        &self.fft
    }

    /// Combined bucket `(h₁(i₁) + h₂(i₂)) mod J` (0-based).
    pub fn bucket(&self, i1: usize, i2: usize) -> usize {
        (self.c1.bucket(i1) + self.c2.bucket(i2)) % self.rows
    }

    /// `T(x ⊗ y)`.
    pub fn apply_pair(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.apply_pair_with(x, y, ConvolutionMode::Fft)
    }

    pub fn apply_pair_with(&self, x: &[f64], y: &[f64], mode: ConvolutionMode) -> Result<Vec<f64>> {
        if x.len() != self.input || y.len() != self.input {
            return Err(Error::Shape(format!(
                "TensorSketch inputs of length {} and {}, expected {}",
                x.len(),
                y.len(),
                self.input
            )));
        }
        let mut a = vec![0.0; self.rows];
        let mut b = vec![0.0; self.rows];
        self.c1.apply_vec_into(x, &mut a);
        self.c2.apply_vec_into(y, &mut b);
        Ok(match mode {
            ConvolutionMode::Fft => {
                let (fa, fb) = self.fft.spectra2(&a, &b);
                let prod = fa.iter().zip(&fb).map(|(p, q)| p * q).collect();
                self.fft.inverse_real(prod)
            }
            ConvolutionMode::Direct => cyclic_convolution(&a, &b),
        })
    }

    /// Explicit `J × I²` matrix, columns in Kronecker order (left index slow).
    pub fn matrix(&self) -> Matrix {
        let n = self.input;
        let mut t = Matrix::zeros(self.rows, n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                t[(self.bucket(i1, i2), i1 * n + i2)] = self.c1.sign(i1) * self.c2.sign(i2);
            }
        }
        t
    }
}

/// Direct length-`J` cyclic convolution.
pub fn cyclic_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[(i + j) % n] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::kron_vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(n: usize, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }

    #[test]
    fn basis_pair_lands_in_one_bucket() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ts = TensorSketchSpec::random(6, 6, &mut rng);
        for i1 in 0..6 {
            for i2 in 0..6 {
                let y = ts.apply_pair(&basis(6, i1), &basis(6, i2)).unwrap();
                let mut expect = vec![0.0; 6];
                expect[ts.bucket(i1, i2)] = ts.left().sign(i1) * ts.right().sign(i2);
                for (a, b) in y.iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_and_length_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ts = TensorSketchSpec::random(8, 8, &mut rng);
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 2.5).collect();
        let y = ts.apply_pair(&x, &[0.0; 8]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-14));
        assert!(ts.apply_pair(&x, &[0.0; 7]).is_err());
    }

    #[test]
    fn matches_explicit_matrix_for_all_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for j in [1usize, 2, 7, 8, 13, 30] {
            let ts = TensorSketchSpec::random(j, 8, &mut rng);
            let x: Vec<f64> = (0..8).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
            let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
            let explicit = ts
                .matrix()
                .matmul(&Matrix::from_col_major(64, 1, kron_vec(&[&x, &y])).unwrap())
                .unwrap();
            let fast = ts.apply_pair(&x, &y).unwrap();
            let direct = ts.apply_pair_with(&x, &y, ConvolutionMode::Direct).unwrap();
            for k in 0..j {
                assert!((fast[k] - explicit[(k, 0)]).abs() < 1e-10);
                assert!((direct[k] - explicit[(k, 0)]).abs() < 1e-12);
            }
        }
    }
}
