//! Dense tensors, index linearization, unfoldings and the CP/TR models.
//!
//! Storage is generalized column-major: the flat position of `(i₀,…,i_{N−1})`
//! is `Σ_n i_n ∏_{j<n} I_j`, so the first index varies fastest. All indices in
//! the public API are 0-based.

mod io;
mod matrix;
mod model;

pub use io::{
    read_cp_model, read_dt, read_tr_model, write_cp_model, write_dt, write_tr_model, DT_MAGIC,
    DT_VERSION,
};
pub use matrix::{khatri_rao, kron_vec, kronecker, Matrix};
pub use model::{pair_index, CpModel, TensorModel, TrModel};

use crate::error::{Error, Result};

/// N-way dense array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!(
                "{} values for a tensor with {} entries",
                data.len(),
                len
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims)?;
        let len = dims.iter().product();
        Ok(DenseTensor {
            dims,
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index in flat order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_dims(&dims)?;
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &dims);
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[linear_index(idx, &self.dims)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let f = linear_index(idx, &self.dims)?;
        self.data[f] = value;
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.dims.len() {
            return Err(Error::InvalidMode {
                mode: n,
                order: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Sizes of the index blocks before and after mode `n`.
    fn split(&self, n: usize) -> (usize, usize, usize) {
        let left: usize = self.dims[..n].iter().product();
        let right: usize = self.dims[n + 1..].iter().product();
        (left, self.dims[n], right)
    }

    /// Classical mode-`n` unfolding `X₍ₙ₎`: column index `i₀…i_{n−1} i_{n+1}…i_{N−1}`, first fastest.
    pub fn classical_unfold(&self, n: usize) -> Result<Matrix> {
        self.check_mode(n)?;
        let (l, m, r) = self.split(n);
        let mut out = Matrix::zeros(m, l * r);
        for k in 0..r {
            for i in 0..m {
                let src = &self.data[(k * m + i) * l..(k * m + i + 1) * l];
                for (a, &v) in src.iter().enumerate() {
                    out[(i, a + k * l)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Cyclic mode-`n` unfolding `X_[n]`: column index `i_{n+1}…i_{N−1} i₀…i_{n−1}`, first fastest.
    pub fn unfold(&self, n: usize) -> Result<Matrix> {
        self.check_mode(n)?;
        let (l, m, r) = self.split(n);
        let mut out = Matrix::zeros(m, l * r);
        for k in 0..r {
            for i in 0..m {
                let src = &self.data[(k * m + i) * l..(k * m + i + 1) * l];
                for (a, &v) in src.iter().enumerate() {
                    out[(i, k + a * r)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::classical_unfold`].
    pub fn fold_classical(m: &Matrix, n: usize, dims: &[usize]) -> Result<Self> {
        let mut t = Self::check_fold(m, n, dims)?;
        let (l, mm, r) = t.split(n);
        for k in 0..r {
            for i in 0..mm {
                for a in 0..l {
                    t.data[(k * mm + i) * l + a] = m[(i, a + k * l)];
                }
            }
        }
        Ok(t)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, n: usize, dims: &[usize]) -> Result<Self> {
        let mut t = Self::check_fold(m, n, dims)?;
        let (l, mm, r) = t.split(n);
        for k in 0..r {
            for i in 0..mm {
                for a in 0..l {
                    t.data[(k * mm + i) * l + a] = m[(i, k + a * r)];
                }
            }
        }
        Ok(t)
    }

    fn check_fold(m: &Matrix, n: usize, dims: &[usize]) -> Result<Self> {
        let t = DenseTensor::zeros(dims.to_vec())?;
        t.check_mode(n)?;
        let (l, mm, r) = t.split(n);
        if m.rows() != mm || m.cols() != l * r {
            return Err(Error::Shape(format!(
                "{}x{} matrix cannot fold into mode {} of {:?}",
                m.rows(),
                m.cols(),
                n,
                dims
            )));
        }
        Ok(t)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Shape("a tensor needs at least one mode".into()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Shape(format!("zero-length mode in {dims:?}")));
    }
    Ok(())
}

/// Flat position of a 0-based multi-index, `Σ_n i_n ∏_{j<n} I_j`.
///
/// In 1-based terms this is `1 + Σ_n (i_n − 1) ∏_{j<n} I_j`.
pub fn linear_index(idx: &[usize], dims: &[usize]) -> Result<usize> {
    if idx.len() != dims.len() {
        return Err(Error::Shape(format!(
            "{}-index for a {}-way tensor",
            idx.len(),
            dims.len()
        )));
    }
    let mut f = 0;
    let mut stride = 1;
    for (mode, (&i, &d)) in idx.iter().zip(dims).enumerate() {
        if i >= d {
            return Err(Error::IndexOutOfRange {
                mode,
                index: i,
                size: d,
            });
        }
        f += i * stride;
        stride *= d;
    }
    Ok(f)
}

/// Inverse of [`linear_index`].
pub fn delinearize(mut flat: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if flat >= total {
        return Err(Error::IndexOutOfRange {
            mode: 0,
            index: flat,
            size: total,
        });
    }
    let mut idx = Vec::with_capacity(dims.len());
    for &d in dims {
        idx.push(flat % d);
        flat /= d;
    }
    Ok(idx)
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(dims.len());
    let mut acc = 1;
    for &d in dims {
        s.push(acc);
        acc *= d;
    }
    s
}

/// Advances a multi-index in flat order; returns false after wrapping around.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) -> bool {
    for (i, &d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < d {
            return true;
        }
        *i = 0;
    }
    false
}

/// Like [`increment`] but skips mode `skip`; returns the highest mode that changed.
pub(crate) fn increment_except(idx: &mut [usize], dims: &[usize], skip: usize) -> Option<usize> {
    for m in 0..dims.len() {
        if m == skip {
            continue;
        }
        idx[m] += 1;
        if idx[m] < dims[m] {
            return Some(m);
        }
        idx[m] = 0;
    }
    None
}

/// Row of `A^{≠n}` holding the multi-index `idx`: modes other than `n` with mode 0 fastest.
pub fn classical_other_index(idx: &[usize], dims: &[usize], n: usize) -> usize {
    let mut row = 0;
    let mut stride = 1;
    for j in (0..dims.len()).filter(|&j| j != n) {
        row += idx[j] * stride;
        stride *= dims[j];
    }
    row
}

/// Row of `G^{≠n}_{[2]}` holding `idx`: modes `n+1, …, N−1, 0, …, n−1` with the first fastest.
pub fn cyclic_other_index(idx: &[usize], dims: &[usize], n: usize) -> usize {
    let big_n = dims.len();
    let mut row = 0;
    let mut stride = 1;
    for k in 1..big_n {
        let j = (n + k) % big_n;
        row += idx[j] * stride;
        stride *= dims[j];
    }
    row
}
