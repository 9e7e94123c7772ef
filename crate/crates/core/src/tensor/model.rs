use super::matrix::khatri_rao;
use super::{DenseTensor, Matrix};
use crate::error::{Error, Result};

/// Flat column index of the rank pair `(a, b)` when `a` runs fastest over `len_a` values.
///
/// This is the single place where TR rank pairs are flattened, e.g. the design
/// column of `(r_{n−1}, r_n)`.
#[inline]
pub fn pair_index(a: usize, b: usize, len_a: usize) -> usize {
    a + b * len_a
}

/// Shared behaviour of the two decomposition models.
pub trait TensorModel {
    fn model_dims(&self) -> Vec<usize>;

    /// Calls `f(flat, value)` for every entry of the represented tensor in flat order.
    fn for_each_entry(&self, f: &mut dyn FnMut(usize, f64));

    fn entry(&self, idx: &[usize]) -> f64;

    fn reconstruct(&self) -> DenseTensor {
        let dims = self.model_dims();
        let len: usize = dims.iter().product();
        let mut data = vec![0.0; len];
        self.for_each_entry(&mut |f, v| data[f] = v);
        DenseTensor::new(dims, data).expect("model dims are valid")
    }

    /// `‖model − X‖_F / ‖X‖_F`.
    fn rel_error(&self, x: &DenseTensor) -> Result<f64> {
        if self.model_dims() != x.dims() {
            return Err(Error::Shape(format!(
                "model dims {:?} differ from tensor dims {:?}",
                self.model_dims(),
                x.dims()
            )));
        }
        let xn = x.norm();
        if xn == 0.0 {
            return Err(Error::Degenerate(
                "relative error against a zero tensor".into(),
            ));
        }
        let data = x.data();
        let mut err = 0.0;
        self.for_each_entry(&mut |f, v| {
            let d = data[f] - v;
            err += d * d;
        });
        Ok(err.sqrt() / xn)
    }

    /// Relative error restricted to the given flat positions.
    fn sampled_rel_error(&self, x: &DenseTensor, positions: &[usize]) -> Result<f64> {
        let dims = x.dims().to_vec();
        let mut num = 0.0;
        let mut den = 0.0;
        for &f in positions {
            let idx = super::delinearize(f, &dims)?;
            let xv = x.data()[f];
            let d = xv - self.entry(&idx);
            num += d * d;
            den += xv * xv;
        }
        if den == 0.0 {
            return Err(Error::Degenerate(
                "sampled entries of the tensor are all zero".into(),
            ));
        }
        Ok((num / den).sqrt())
    }
}

/// CP model `Σ_r a⁽¹⁾_r ∘ ⋯ ∘ a⁽ᴺ⁾_r` with factor matrices `A⁽ʲ⁾ ∈ ℝ^{I_j×R}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CpModel {
    factors: Vec<Matrix>,
}

impl CpModel {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        let r = match factors.first() {
            Some(f) => f.cols(),
            None => return Err(Error::Shape("a CP model needs at least one factor".into())),
        };
        if r == 0 || factors.iter().any(|f| f.cols() != r || f.rows() == 0) {
            return Err(Error::Shape(
                "CP factors must be nonempty and share the column count".into(),
            ));
        }
        Ok(CpModel { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &Matrix {
        &self.factors[j]
    }

    pub fn set_factor(&mut self, j: usize, a: Matrix) -> Result<()> {
        let old = &self.factors[j];
        if a.rows() != old.rows() || a.cols() != old.cols() {
            return Err(Error::Shape(format!(
                "factor {j} must stay {}x{}, got {}x{}",
                old.rows(),
                old.cols(),
                a.rows(),
                a.cols()
            )));
        }
        self.factors[j] = a;
        Ok(())
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    /// `A^{≠n} = A⁽ᴺ⁾ ⊙ ⋯ ⊙ A⁽ⁿ⁺¹⁾ ⊙ A⁽ⁿ⁻¹⁾ ⊙ ⋯ ⊙ A⁽¹⁾`, rows in classical order (test scale).
    pub fn design_matrix(&self, n: usize) -> Result<Matrix> {
        if self.order() < 2 {
            return Err(Error::Shape(
                "design matrix needs at least two modes".into(),
            ));
        }
        if n >= self.order() {
            return Err(Error::InvalidMode {
                mode: n,
                order: self.order(),
            });
        }
        let mats: Vec<&Matrix> = (0..self.order())
            .rev()
            .filter(|&j| j != n)
            .map(|j| &self.factors[j])
            .collect();
        khatri_rao(&mats)
    }

    /// Row of `A^{≠n}` at the multi-index `idx` (entry `n` ignored).
    pub fn design_row(&self, n: usize, idx: &[usize]) -> Vec<f64> {
        let mut row = vec![1.0; self.rank()];
        for (j, a) in self.factors.iter().enumerate() {
            if j == n {
                continue;
            }
            for (r, v) in row.iter_mut().enumerate() {
                *v *= a[(idx[j], r)];
            }
        }
        row
    }
}

impl TensorModel for CpModel {
    fn model_dims(&self) -> Vec<usize> {
        self.dims()
    }

    fn for_each_entry(&self, f: &mut dyn FnMut(usize, f64)) {
        let n = self.order();
        let r = self.rank();
        let dims = self.dims();
        // prods[m] holds the Hadamard product of rows A⁽ʲ⁾(i_j,:) for j ≥ m.
        let mut prods = vec![1.0; (n + 1) * r];
        let mut idx = vec![0usize; n];
        let refresh = |prods: &mut [f64], idx: &[usize], m: usize| {
            let (lo, hi) = prods.split_at_mut((m + 1) * r);
            let dst = &mut lo[m * r..];
            for c in 0..r {
                dst[c] = hi[c] * self.factors[m][(idx[m], c)];
            }
        };
        for m in (1..n).rev() {
            refresh(&mut prods, &idx, m);
        }
        let a0 = &self.factors[0];
        let i0 = dims[0];
        let mut buf = vec![0.0; i0];
        let mut flat = 0;
        loop {
            buf.iter_mut().for_each(|b| *b = 0.0);
            for c in 0..r {
                let p = prods[r + c];
                for (b, &a) in buf.iter_mut().zip(a0.col(c)) {
                    *b += a * p;
                }
            }
            for &v in &buf {
                f(flat, v);
                flat += 1;
            }
            let mut m = 1;
            loop {
                if m == n {
                    return;
                }
                idx[m] += 1;
                if idx[m] < dims[m] {
                    break;
                }
                idx[m] = 0;
                m += 1;
            }
            for mm in (1..=m).rev() {
                refresh(&mut prods, &idx, mm);
            }
        }
    }

    fn entry(&self, idx: &[usize]) -> f64 {
        let mut row = vec![1.0; self.rank()];
        for (j, a) in self.factors.iter().enumerate() {
            for (r, v) in row.iter_mut().enumerate() {
                *v *= a[(idx[j], r)];
            }
        }
        row.iter().sum()
    }
}

/// Tensor-ring model with cores `G⁽ʲ⁾ ∈ ℝ^{R_{j−1}×I_j×R_j}` and `R₀ = R_N`.
///
/// With 0-based core indices, `ranks()[c]` is the trailing rank of core `c`;
/// the leading rank of core `c` is `ranks()[c−1]`, wrapping around.
#[derive(Clone, Debug, PartialEq)]
pub struct TrModel {
    cores: Vec<DenseTensor>,
}

impl TrModel {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        let n = cores.len();
        if n == 0 {
            return Err(Error::Shape("a TR model needs at least one core".into()));
        }
        for (c, g) in cores.iter().enumerate() {
            if g.order() != 3 {
                return Err(Error::Shape(format!(
                    "core {c} is {}-way, expected 3-way",
                    g.order()
                )));
            }
            let next = &cores[(c + 1) % n];
            if g.dims()[2] != next.dims()[0] {
                return Err(Error::Shape(format!(
                    "core {c} trailing rank {} does not match core {} leading rank {}",
                    g.dims()[2],
                    (c + 1) % n,
                    next.dims()[0]
                )));
            }
        }
        Ok(TrModel { cores })
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|g| g.dims()[1]).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.cores.iter().map(|g| g.dims()[2]).collect()
    }

    /// Leading rank of core `c`.
    pub fn left_rank(&self, c: usize) -> usize {
        self.cores[c].dims()[0]
    }

    /// Trailing rank of core `c`.
    pub fn right_rank(&self, c: usize) -> usize {
        self.cores[c].dims()[2]
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, c: usize) -> &DenseTensor {
        &self.cores[c]
    }

    pub fn set_core(&mut self, c: usize, g: DenseTensor) -> Result<()> {
        if g.dims() != self.cores[c].dims() {
            return Err(Error::Shape(format!(
                "core {c} must stay {:?}, got {:?}",
                self.cores[c].dims(),
                g.dims()
            )));
        }
        self.cores[c] = g;
        Ok(())
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    /// Lateral slice `G⁽ᶜ⁾(:, i, :)` as an `R_{c−1} × R_c` matrix.
    pub fn slice(&self, c: usize, i: usize) -> Matrix {
        core_slice(&self.cores[c], i)
    }

    pub fn slices(&self, c: usize) -> Vec<Matrix> {
        (0..self.cores[c].dims()[1])
            .map(|i| self.slice(c, i))
            .collect()
    }

    /// Modes other than `n` in subchain order `n+1, …, N−1, 0, …, n−1`.
    pub fn subchain_modes(&self, n: usize) -> Vec<usize> {
        let big_n = self.order();
        (1..big_n).map(|k| (n + k) % big_n).collect()
    }

    /// Slice product `G⁽ⁿ⁺¹⁾(:,i_{n+1},:) ⋯ G⁽ⁿ⁻¹⁾(:,i_{n−1},:)`, an `R_n × R_{n−1}` matrix.
    pub fn subchain_slice_product(&self, n: usize, idx: &[usize]) -> Matrix {
        let modes = self.subchain_modes(n);
        let mut m = self.slice(modes[0], idx[modes[0]]);
        for &c in &modes[1..] {
            m = m
                .matmul(&self.slice(c, idx[c]))
                .expect("cyclic ranks are consistent");
        }
        m
    }

    /// Row of `G^{≠n}_{[2]}` at the multi-index `idx` (entry `n` ignored).
    ///
    /// Entry `overline{r_{n−1} r_n}` equals the slice product at `(r_n, r_{n−1})`.
    pub fn design_row(&self, n: usize, idx: &[usize]) -> Vec<f64> {
        let m = self.subchain_slice_product(n, idx);
        let (rn, rp) = (m.rows(), m.cols());
        let mut row = vec![0.0; rp * rn];
        for b in 0..rn {
            for a in 0..rp {
                row[pair_index(a, b, rp)] = m[(b, a)];
            }
        }
        row
    }

    /// Subchain tensor `G^{≠n} ∈ ℝ^{R_n × ∏_{j≠n} I_j × R_{n−1}}` (test scale).
    ///
    /// The middle index is `overline{i_{n+1} ⋯ i_N i_1 ⋯ i_{n−1}}`.
    pub fn subchain(&self, n: usize) -> Result<DenseTensor> {
        let g2 = self.subchain_unfold_2(n)?;
        let rp = self.left_rank(n);
        let rn = self.right_rank(n);
        DenseTensor::fold(&g2, 1, &[rn, g2.rows(), rp])
    }

    /// Mode-2 unfolding `G^{≠n}_{[2]}` with rows in subchain order and columns `overline{r_{n−1} r_n}`.
    pub fn subchain_unfold_2(&self, n: usize) -> Result<Matrix> {
        let big_n = self.order();
        if big_n < 2 {
            return Err(Error::Shape("subchain needs at least two cores".into()));
        }
        if n >= big_n {
            return Err(Error::InvalidMode {
                mode: n,
                order: big_n,
            });
        }
        let dims = self.dims();
        let modes = self.subchain_modes(n);
        let rows: usize = modes.iter().map(|&c| dims[c]).product();
        let cols = self.left_rank(n) * self.right_rank(n);
        let mut out = Matrix::zeros(rows, cols);
        let mut idx = vec![0usize; big_n];
        for row in 0..rows {
            out.set_row(row, &self.design_row(n, &idx));
            for &c in &modes {
                idx[c] += 1;
                if idx[c] < dims[c] {
                    break;
                }
                idx[c] = 0;
            }
        }
        Ok(out)
    }

    /// Cyclic mode-2 unfolding `G⁽ᶜ⁾_{[2]}` of core `c`, columns `overline{r_c r_{c−1}}`.
    pub fn core_unfold_2(&self, c: usize) -> Matrix {
        self.cores[c].unfold(1).expect("cores are 3-way")
    }
}

pub(crate) fn core_slice(g: &DenseTensor, i: usize) -> Matrix {
    let d = g.dims();
    let (l, len, r) = (d[0], d[1], d[2]);
    let data = g.data();
    Matrix::from_fn(l, r, |a, b| data[a + i * l + b * l * len])
}

impl TensorModel for TrModel {
    fn model_dims(&self) -> Vec<usize> {
        self.dims()
    }

    fn for_each_entry(&self, f: &mut dyn FnMut(usize, f64)) {
        let n = self.order();
        let dims = self.dims();
        let slices: Vec<Vec<Matrix>> = (0..n).map(|c| self.slices(c)).collect();
        let l0 = self.left_rank(0);
        // suffix[m] = S_m(i_m) ⋯ S_{N−1}(i_{N−1}), an R_{m−1} × R_{N−1} matrix; suffix[N] = I.
        let mut suffix: Vec<Matrix> = vec![Matrix::identity(l0); n + 1];
        let mut idx = vec![0usize; n];
        for m in (1..n).rev() {
            suffix[m] = slices[m][idx[m]]
                .matmul(&suffix[m + 1])
                .expect("consistent ranks");
        }
        let mut flat = 0;
        loop {
            let q = &suffix[1];
            for s in &slices[0] {
                let mut v = 0.0;
                for b in 0..s.cols() {
                    for a in 0..s.rows() {
                        v += s[(a, b)] * q[(b, a)];
                    }
                }
                f(flat, v);
                flat += 1;
            }
            let mut m = 1;
            loop {
                if m == n {
                    return;
                }
                idx[m] += 1;
                if idx[m] < dims[m] {
                    break;
                }
                idx[m] = 0;
                m += 1;
            }
            for mm in (1..=m).rev() {
                suffix[mm] = slices[mm][idx[mm]]
                    .matmul(&suffix[mm + 1])
                    .expect("consistent ranks");
            }
        }
    }

    fn entry(&self, idx: &[usize]) -> f64 {
        let mut m = self.slice(0, idx[0]);
        for c in 1..self.order() {
            m = m.matmul(&self.slice(c, idx[c])).expect("consistent ranks");
        }
        (0..m.rows()).map(|i| m[(i, i)]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| 1.0)
    }

    #[test]
    fn cp_all_ones_rank_one() {
        let m = CpModel::new(vec![ones(2, 1), ones(3, 1), ones(2, 1)]).unwrap();
        let x = m.reconstruct();
        assert!(x.data().iter().all(|&v| v == 1.0));
        assert_eq!(m.rel_error(&x).unwrap(), 0.0);
        let d = m.design_matrix(1).unwrap();
        assert!(d.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn cp_design_two_modes() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Matrix::from_rows(&[&[5.0, 6.0], &[7.0, 8.0], &[9.0, 1.0]]);
        let m = CpModel::new(vec![a.clone(), b]).unwrap();
        assert_eq!(m.design_matrix(1).unwrap(), a);
    }

    #[test]
    fn tr_rank_one_is_outer_product() {
        let u = [1.0, 2.0];
        let v = [3.0, -1.0, 0.5];
        let cores = vec![
            DenseTensor::new(vec![1, 2, 1], u.to_vec()).unwrap(),
            DenseTensor::new(vec![1, 3, 1], v.to_vec()).unwrap(),
        ];
        let m = TrModel::new(cores).unwrap();
        let x = m.reconstruct();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(x.get(&[i, j]).unwrap(), u[i] * v[j]);
            }
        }
    }

    #[test]
    fn tr_rejects_inconsistent_ranks() {
        let cores = vec![
            DenseTensor::zeros(vec![2, 2, 3]).unwrap(),
            DenseTensor::zeros(vec![2, 2, 2]).unwrap(),
        ];
        assert!(TrModel::new(cores).is_err());
    }

    #[test]
    fn rel_error_shape_mismatch() {
        let m = CpModel::new(vec![ones(2, 1), ones(2, 1)]).unwrap();
        let x = DenseTensor::zeros(vec![2, 3]).unwrap();
        assert!(m.rel_error(&x).is_err());
    }
}
