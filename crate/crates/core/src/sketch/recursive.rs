use num_complex::Complex64;

use super::countsketch::{countsketch_apply, CountSketchSpec};
use super::tensorsketch::{cyclic_convolution, ConvolutionMode, FftPair, TensorSketchSpec};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tensor::Matrix;

/// Largest `∏ I_j` that [`RecursiveSketch::materialize`] accepts.
pub const MATERIALIZE_LIMIT: usize = 4096;

/// Recursive sketch `Ψ`: `2^q` CountSketch leaves combined pairwise by `q`
/// levels of degree-two TensorSketches.
///
/// Inputs are Kronecker products `x₁ ⊗ ⋯ ⊗ x_M` with `x₁` the slowest factor.
/// When `M < 2^q` the trailing leaves sketch `e₁` of length `max_j I_j`.
#[derive(Clone, Debug)]
pub struct RecursiveSketch {
    rows: usize,
    leaf_dims: Vec<usize>,
    q: usize,
    leaves: Vec<CountSketchSpec>,
    levels: Vec<Vec<TensorSketchSpec>>,
    seed: u64,
    mode: ConvolutionMode,
}

/// A leaf's sketched block with its pair of inner ranks `(K_j, K_{j+1})`.
#[derive(Clone, Debug)]
struct Block {
    y: Matrix,
    k_left: usize,
    k_right: usize,
}

impl RecursiveSketch {
    pub fn new(rows: usize, leaf_dims: &[usize], seed: u64) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Config("sketch dimension must be positive".into()));
        }
        if leaf_dims.is_empty() || leaf_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("invalid leaf dims {leaf_dims:?}")));
        }
        let m = leaf_dims.len();
        let q = m.next_power_of_two().trailing_zeros() as usize;
        let imax = *leaf_dims.iter().max().unwrap();
        let leaves = (0..1usize << q)
            .map(|j| {
                let dim = if j < m { leaf_dims[j] } else { imax };
                CountSketchSpec::random(rows, dim, &mut rng_for(seed, &[0, j as u64]))
            })
            .collect();
        let fft = FftPair::new(rows);
        let levels = (1..=q)
            .map(|lvl| {
                (0..1usize << (q - lvl))
                    .map(|p| {
                        let mut rng = rng_for(seed, &[lvl as u64, p as u64]);
                        TensorSketchSpec::random_with_fft(rows, rows, fft.clone(), &mut rng)
                    })
                    .collect()
            })
            .collect();
        Ok(RecursiveSketch {
            rows,
            leaf_dims: leaf_dims.to_vec(),
            q,
            leaves,
            levels,
            seed,
            mode: ConvolutionMode::Fft,
        })
    }

    pub fn with_convolution(mut self, mode: ConvolutionMode) -> Self {
        self.mode = mode;
        self
    }

    /// Embedding dimension `J`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn leaf_dims(&self) -> &[usize] {
        &self.leaf_dims
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn leaf(&self, j: usize) -> &CountSketchSpec {
        &self.leaves[j]
    }

    pub fn node(&self, level: usize, p: usize) -> &TensorSketchSpec {
        &self.levels[level - 1][p]
    }

    /// `C_j e₁` for a padding leaf.
    fn padding_column(&self, j: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        y[self.leaves[j].bucket(0)] = self.leaves[j].sign(0);
        y
    }

    fn combine(&self, ts: &TensorSketchSpec, a: &[f64], b: &[f64]) -> Vec<f64> {
        ts.apply_pair_with(a, b, self.mode)
            .expect("internal lengths match")
    }

    /// `Ψ(x₁ ⊗ ⋯ ⊗ x_M)`.
    pub fn apply_kron_vector(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        self.check_leaves(xs.iter().map(|x| x.len()))?;
        let mut ys: Vec<Vec<f64>> = (0..self.leaves.len())
            .map(|j| match xs.get(j) {
                Some(x) => self.leaves[j].apply_vec(x).expect("checked length"),
                None => self.padding_column(j),
            })
            .collect();
        for level in &self.levels {
            ys = level
                .iter()
                .enumerate()
                .map(|(p, ts)| self.combine(ts, &ys[2 * p], &ys[2 * p + 1]))
                .collect();
        }
        Ok(ys.pop().unwrap())
    }

    /// `Ψ (A₁ ⊙ ⋯ ⊙ A_M)` for factors `A_j ∈ ℝ^{I_j×R}`; leaf `j` receives `A_j`.
    pub fn apply_kron_columns(&self, factors: &[&Matrix]) -> Result<Matrix> {
        self.check_leaves(factors.iter().map(|a| a.rows()))?;
        let r = factors[0].cols();
        if factors.iter().any(|a| a.cols() != r) {
            return Err(Error::Shape(
                "Khatri–Rao operands must share column count".into(),
            ));
        }
        let sketched: Vec<Matrix> = factors
            .iter()
            .zip(&self.leaves)
            .map(|(a, c)| countsketch_apply(c, a).expect("checked rows"))
            .collect();
        let pads: Vec<Vec<f64>> = (factors.len()..self.leaves.len())
            .map(|j| self.padding_column(j))
            .collect();
        let mut out = Matrix::zeros(self.rows, r);
        for c in 0..r {
            let mut ys: Vec<Vec<f64>> = sketched
                .iter()
                .map(|s| s.col(c).to_vec())
                .chain(pads.iter().cloned())
                .collect();
            for level in &self.levels {
                ys = level
                    .iter()
                    .enumerate()
                    .map(|(p, ts)| self.combine(ts, &ys[2 * p], &ys[2 * p + 1]))
                    .collect();
            }
            out.col_mut(c).copy_from_slice(&ys[0]);
        }
        Ok(out)
    }

    /// One column of a sketched TR subchain: `Ψ Σ_{k} H⁽¹⁾(:,k₁k₂) ⊗ H⁽²⁾(:,k₂k₃) ⊗ ⋯`.
    ///
    /// `h[j]` has `k[j]·k[j+1]` columns indexed `overline{k_j k_{j+1}}` (first fastest),
    /// with `k[0] = k[M] = 1`. Padding leaves are added internally.
    pub fn apply_tr_column(&self, h: &[&Matrix], k: &[usize]) -> Result<Vec<f64>> {
        self.check_leaves(h.iter().map(|a| a.rows()))?;
        let sketched: Vec<Matrix> = h
            .iter()
            .zip(&self.leaves)
            .map(|(a, c)| countsketch_apply(c, a).expect("checked rows"))
            .collect();
        self.combine_tr(sketched, k)
    }

    /// Tree recursion on already CountSketched leaf blocks `C_j H⁽ʲ⁾`.
    pub(crate) fn combine_tr(&self, sketched: Vec<Matrix>, k: &[usize]) -> Result<Vec<f64>> {
        let mut out =
            self.combine_tr_variants(sketched.into_iter().map(|y| vec![y]).collect(), k)?;
        Ok(out.pop().unwrap())
    }

    /// Tree recursion over alternative blocks per leaf.
    ///
    /// Returns one sketched column per choice of variants, the choice at leaf 0 changing
    /// fastest. Subtrees shared between choices are combined once.
    pub(crate) fn combine_tr_variants(
        &self,
        leaves: Vec<Vec<Matrix>>,
        k: &[usize],
    ) -> Result<Vec<Vec<f64>>> {
        let m = leaves.len();
        if m != self.leaf_dims.len() || k.len() != m + 1 || k[0] != 1 || k[m] != 1 {
            return Err(Error::Shape(format!(
                "inner-rank chain {k:?} does not fit {m} leaves"
            )));
        }
        let mut nodes: Vec<Vec<Block>> = Vec::with_capacity(self.leaves.len());
        for (j, variants) in leaves.into_iter().enumerate() {
            if variants.is_empty() {
                return Err(Error::Shape(format!("leaf {j} has no blocks")));
            }
            let mut blocks = Vec::with_capacity(variants.len());
            for y in variants {
                if y.cols() != k[j] * k[j + 1] || y.rows() != self.rows {
                    return Err(Error::Shape(format!(
                        "leaf {j} block is {}×{}, expected {}×{}·{}",
                        y.rows(),
                        y.cols(),
                        self.rows,
                        k[j],
                        k[j + 1]
                    )));
                }
                blocks.push(Block {
                    y,
                    k_left: k[j],
                    k_right: k[j + 1],
                });
            }
            nodes.push(blocks);
        }
        for j in m..self.leaves.len() {
            let y = Matrix::from_col_major(self.rows, 1, self.padding_column(j)).unwrap();
            nodes.push(vec![Block {
                y,
                k_left: 1,
                k_right: 1,
            }]);
        }
        for level in &self.levels {
            nodes = level
                .iter()
                .enumerate()
                .map(|(p, ts)| self.combine_blocks(ts, &nodes[2 * p], &nodes[2 * p + 1]))
                .collect();
        }
        let root = nodes.pop().unwrap();
        Ok(root
            .into_iter()
            .map(|b| {
                debug_assert_eq!(b.y.cols(), 1);
                b.y.into_data()
            })
            .collect())
    }

    /// `Y(:, overline{k₁k₃}) = Σ_{k₂} T(L(:, overline{k₁k₂}) ⊗ R(:, overline{k₂k₃}))` for every
    /// pair of variants, left variant fastest.
    fn combine_blocks(&self, ts: &TensorSketchSpec, ls: &[Block], rs: &[Block]) -> Vec<Block> {
        let mut out = Vec::with_capacity(ls.len() * rs.len());
        match self.mode {
            ConvolutionMode::Fft => {
                let fft = ts.fft();
                let spectra = |b: &Block, cs: &CountSketchSpec| {
                    let cols: Vec<Vec<f64>> = (0..b.y.cols())
                        .map(|c| sketch_col(cs, b.y.col(c)))
                        .collect();
                    fft.spectra(&cols.iter().map(|v| v.as_slice()).collect::<Vec<_>>())
                };
                let lfs: Vec<_> = ls.iter().map(|b| spectra(b, ts.left())).collect();
                let rfs: Vec<_> = rs.iter().map(|b| spectra(b, ts.right())).collect();
                for (r, rf) in rs.iter().zip(&rfs) {
                    for (l, lf) in ls.iter().zip(&lfs) {
                        debug_assert_eq!(l.k_right, r.k_left);
                        let (k1n, k2n, k3n) = (l.k_left, l.k_right, r.k_right);
                        let mut y = Matrix::zeros(self.rows, k1n * k3n);
                        for k3 in 0..k3n {
                            for k1 in 0..k1n {
                                let mut acc = vec![Complex64::new(0.0, 0.0); self.rows];
                                for k2 in 0..k2n {
                                    let a = &lf[k1 + k2 * k1n];
                                    let b = &rf[k2 + k3 * k2n];
                                    for ((o, x), z) in acc.iter_mut().zip(a).zip(b) {
                                        *o += x * z;
                                    }
                                }
                                y.col_mut(k1 + k3 * k1n)
                                    .copy_from_slice(&fft.inverse_real(acc));
                            }
                        }
                        out.push(Block {
                            y,
                            k_left: k1n,
                            k_right: k3n,
                        });
                    }
                }
            }
            ConvolutionMode::Direct => {
                for r in rs {
                    for l in ls {
                        debug_assert_eq!(l.k_right, r.k_left);
                        let (k1n, k2n, k3n) = (l.k_left, l.k_right, r.k_right);
                        let mut y = Matrix::zeros(self.rows, k1n * k3n);
                        for k3 in 0..k3n {
                            for k1 in 0..k1n {
                                let col = y.col_mut(k1 + k3 * k1n);
                                for k2 in 0..k2n {
                                    let a = sketch_col(ts.left(), l.y.col(k1 + k2 * k1n));
                                    let b = sketch_col(ts.right(), r.y.col(k2 + k3 * k2n));
                                    for (o, v) in col.iter_mut().zip(cyclic_convolution(&a, &b)) {
                                        *o += v;
                                    }
                                }
                            }
                        }
                        out.push(Block {
                            y,
                            k_left: k1n,
                            k_right: k3n,
                        });
                    }
                }
            }
        }
        out
    }

    /// Explicit `J × ∏I_j` matrix obtained by sketching every basis vector (test oracle).
    pub fn materialize(&self) -> Result<Matrix> {
        let total: usize = self.leaf_dims.iter().product();
        if total > MATERIALIZE_LIMIT {
            return Err(Error::SizeLimit(format!(
                "materializing a sketch over {total} > {MATERIALIZE_LIMIT} inputs"
            )));
        }
        let mut out = Matrix::zeros(self.rows, total);
        let m = self.leaf_dims.len();
        for p in 0..total {
            let mut rem = p;
            let mut idx = vec![0; m];
            for j in (0..m).rev() {
                idx[j] = rem % self.leaf_dims[j];
                rem /= self.leaf_dims[j];
            }
            let es: Vec<Vec<f64>> = (0..m)
                .map(|j| {
                    let mut e = vec![0.0; self.leaf_dims[j]];
                    e[idx[j]] = 1.0;
                    e
                })
                .collect();
            let col =
                self.apply_kron_vector(&es.iter().map(|e| e.as_slice()).collect::<Vec<_>>())?;
            out.col_mut(p).copy_from_slice(&col);
        }
        Ok(out)
    }

    fn check_leaves(&self, lens: impl ExactSizeIterator<Item = usize>) -> Result<()> {
        if lens.len() != self.leaf_dims.len() {
            return Err(Error::Shape(format!(
                "{} inputs for {} sketch leaves",
                lens.len(),
                self.leaf_dims.len()
            )));
        }
        for (j, (len, &d)) in lens.zip(&self.leaf_dims).enumerate() {
            if len != d {
                return Err(Error::Shape(format!(
                    "leaf {j} expects length {d}, got {len}"
                )));
            }
        }
        Ok(())
    }
}

fn sketch_col(cs: &CountSketchSpec, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cs.rows()];
    cs.apply_vec_into(x, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::khatri_rao;

    fn test_matrix(r: usize, c: usize, salt: f64) -> Matrix {
        Matrix::from_fn(r, c, |i, j| {
            ((i as f64 + 1.0) * salt + j as f64 * 0.7).sin()
        })
    }

    #[test]
    fn single_leaf_is_countsketch() {
        let ps = RecursiveSketch::new(9, &[5], 1).unwrap();
        assert_eq!(ps.q(), 0);
        let a = test_matrix(5, 3, 0.3);
        let y = ps.apply_kron_columns(&[&a]).unwrap();
        assert_eq!(y, countsketch_apply(ps.leaf(0), &a).unwrap());
        assert_eq!(ps.materialize().unwrap(), ps.leaf(0).matrix());
    }

    #[test]
    fn khatri_rao_columns_match_materialized() {
        let ps = RecursiveSketch::new(16, &[2, 3, 2], 7).unwrap();
        assert_eq!(ps.q(), 2);
        let f: Vec<Matrix> = [2, 3, 2]
            .iter()
            .enumerate()
            .map(|(j, &d)| test_matrix(d, 2, 0.4 + j as f64))
            .collect();
        let refs: Vec<&Matrix> = f.iter().collect();
        let fast = ps.apply_kron_columns(&refs).unwrap();
        let slow = ps
            .materialize()
            .unwrap()
            .matmul(&khatri_rao(&refs).unwrap())
            .unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-10);
    }

    #[test]
    fn multilinear_scaling() {
        let ps = RecursiveSketch::new(11, &[3, 3, 3], 2).unwrap();
        let f: Vec<Matrix> = (0..3).map(|j| test_matrix(3, 2, 0.2 + j as f64)).collect();
        let base = ps
            .apply_kron_columns(&f.iter().collect::<Vec<_>>())
            .unwrap();
        let scaled: Vec<Matrix> = f.iter().map(|a| a.scaled(2.0)).collect();
        let y = ps
            .apply_kron_columns(&scaled.iter().collect::<Vec<_>>())
            .unwrap();
        assert!(y.max_abs_diff(&base.scaled(8.0)) < 1e-10);
    }

    #[test]
    fn materialized_columns_have_unit_norm() {
        let ps = RecursiveSketch::new(13, &[3, 2, 4], 5).unwrap();
        let psi = ps.materialize().unwrap();
        for c in 0..psi.cols() {
            let n: f64 = psi.col(c).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_leaves_unroll_definition() {
        let ps = RecursiveSketch::new(10, &[4, 3], 9).unwrap();
        let x = [0.5, -1.0, 2.0, 0.25];
        let y = [1.5, 0.0, -0.75];
        let out = ps.apply_kron_vector(&[&x, &y]).unwrap();
        let cx = ps.leaf(0).apply_vec(&x).unwrap();
        let cy = ps.leaf(1).apply_vec(&y).unwrap();
        let expect = ps.node(1, 0).apply_pair(&cx, &cy).unwrap();
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tr_column_with_unit_ranks_is_kron_column() {
        let ps = RecursiveSketch::new(12, &[3, 2, 3], 4).unwrap();
        let f: Vec<Matrix> = (0..3)
            .map(|j| test_matrix([3, 2, 3][j], 1, 1.1 + j as f64))
            .collect();
        let refs: Vec<&Matrix> = f.iter().collect();
        let a = ps.apply_tr_column(&refs, &[1, 1, 1, 1]).unwrap();
        let b = ps.apply_kron_columns(&refs).unwrap();
        for (x, y) in a.iter().zip(b.col(0)) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(ps.apply_tr_column(&refs, &[1, 2, 1, 1]).is_err());
    }

    #[test]
    fn direct_and_fft_paths_agree() {
        let dims = [3, 4, 2, 3, 2];
        let ps = RecursiveSketch::new(17, &dims, 8).unwrap();
        let pd = ps.clone().with_convolution(ConvolutionMode::Direct);
        let f: Vec<Matrix> = dims
            .iter()
            .enumerate()
            .map(|(j, &d)| test_matrix(d, 3, 0.9 + j as f64))
            .collect();
        let refs: Vec<&Matrix> = f.iter().collect();
        let a = ps.apply_kron_columns(&refs).unwrap();
        let b = pd.apply_kron_columns(&refs).unwrap();
        let scale = b.frobenius_norm();
        assert!(a.max_abs_diff(&b) <= 1e-9 * scale);
    }

    #[test]
    fn deterministic_and_guarded() {
        let a = RecursiveSketch::new(8, &[4, 4], 3).unwrap();
        let b = RecursiveSketch::new(8, &[4, 4], 3).unwrap();
        let x = test_matrix(4, 2, 0.5);
        assert_eq!(
            a.apply_kron_columns(&[&x, &x]).unwrap(),
            b.apply_kron_columns(&[&x, &x]).unwrap()
        );
        let big = RecursiveSketch::new(8, &[100, 100], 3).unwrap();
        assert!(matches!(big.materialize(), Err(Error::SizeLimit(_))));
        assert!(RecursiveSketch::new(0, &[3], 1).is_err());
        assert!(a.apply_kron_columns(&[&x]).is_err());
    }
}
