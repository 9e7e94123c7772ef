use std::time::Instant;

use crate::als::{
    check_size, gaussian_matrix, gaussian_range, orthonormalize, AlsOptions, AlsReport, Init,
    SweepDiagnostics, SweepLoop,
};
use crate::error::{Error, Result, ResultExt};
use crate::leverage::solve_normal_equations;
use crate::seed::{derive_seed, rng_for};
use crate::tensor::{khatri_rao, CpModel, DenseTensor, Matrix};

/// Initial factors of a rank-`r` CP model for `x`.
pub fn init_cp(x: &DenseTensor, r: usize, init: Init, seed: u64) -> Result<CpModel> {
    if r == 0 {
        return Err(Error::Config("CP rank must be at least 1".into()));
    }
    let mut rng = rng_for(seed, &[10]);
    let factors = match init {
        Init::Gaussian => x
            .dims()
            .iter()
            .map(|&d| gaussian_matrix(d, r, &mut rng))
            .collect(),
        Init::RangeFinder => {
            let mut out = Vec::with_capacity(x.order());
            for n in 0..x.order() {
                out.push(orthonormalize(&gaussian_range(x, n, r, &mut rng)?));
            }
            out
        }
    };
    CpModel::new(factors)
}

/// Khatri–Rao product of `factors[modes]` in the given order, or a row of ones when empty.
fn partial_khatri_rao(
    factors: &[Matrix],
    modes: impl Iterator<Item = usize>,
    r: usize,
) -> Result<Matrix> {
    let mats: Vec<&Matrix> = modes.map(|j| &factors[j]).collect();
    if mats.is_empty() {
        Ok(Matrix::from_fn(1, r, |_, _| 1.0))
    } else {
        khatri_rao(&mats)
    }
}

/// Matricized tensor times Khatri–Rao product `X₍ₙ₎ A^{≠n}` (`I_n × R`).
pub fn mttkrp(x: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
    let dims = x.dims();
    if factors.len() != dims.len() {
        return Err(Error::Shape(format!(
            "{} factors for an order-{} tensor",
            factors.len(),
            dims.len()
        )));
    }
    if n >= dims.len() {
        return Err(Error::InvalidMode {
            mode: n,
            order: dims.len(),
        });
    }
    let r = factors[0].cols();
    let left = partial_khatri_rao(factors, (0..n).rev(), r)?;
    let right = partial_khatri_rao(factors, (n + 1..dims.len()).rev(), r)?;
    let (l, m) = (left.rows(), dims[n]);
    let data = x.data();
    let mut out = Matrix::zeros(m, r);
    let mut t = vec![0.0; r];
    for k in 0..right.rows() {
        for i in 0..m {
            let block = &data[(k * m + i) * l..(k * m + i + 1) * l];
            for (c, tc) in t.iter_mut().enumerate() {
                *tc = block.iter().zip(left.col(c)).map(|(a, b)| a * b).sum();
            }
            for (c, tc) in t.iter().enumerate() {
                out[(i, c)] += tc * right[(k, c)];
            }
        }
    }
    Ok(out)
}

/// Hadamard product of all Gram matrices except mode `n`.
pub(crate) fn gram_product(grams: &[Matrix], n: usize) -> Matrix {
    let r = grams[0].rows();
    let mut v = Matrix::from_fn(r, r, |_, _| 1.0);
    for (j, g) in grams.iter().enumerate() {
        if j != n {
            v = v.hadamard(g).expect("Gram matrices share the rank");
        }
    }
    v
}

/// Exact CP-ALS with `iters` sweeps and Gaussian initialization.
pub fn cp_als(x: &DenseTensor, r: usize, iters: usize, seed: u64) -> Result<(CpModel, AlsReport)> {
    cp_als_with(
        x,
        r,
        &AlsOptions::default().with_iters(iters).with_seed(seed),
    )
}

pub fn cp_als_with(x: &DenseTensor, r: usize, opts: &AlsOptions) -> Result<(CpModel, AlsReport)> {
    check_size(x, opts)?;
    let model = init_cp(x, r, opts.init, derive_seed(opts.seed, &[1]))?;
    cp_als_from(x, model, opts)
}

/// Exact CP-ALS from a given initial model.
pub fn cp_als_from(
    x: &DenseTensor,
    mut model: CpModel,
    opts: &AlsOptions,
) -> Result<(CpModel, AlsReport)> {
    check_size(x, opts)?;
    if model.dims() != x.dims() {
        return Err(Error::Shape(format!(
            "model dims {:?} differ from tensor dims {:?}",
            model.dims(),
            x.dims()
        )));
    }
    let mut lp = SweepLoop::new(x, opts)?;
    let mut grams: Vec<Matrix> = model.factors().iter().map(Matrix::gram).collect();
    for it in 0.. {
        let start = Instant::now();
        let diag = SweepDiagnostics {
            iteration: it,
            ..Default::default()
        };
        for n in 0..model.order() {
            let step = || -> Result<Matrix> {
                let m = mttkrp(x, model.factors(), n)?;
                let v = gram_product(&grams, n);
                Ok(solve_normal_equations(&v, &m.transpose())?.transpose())
            };
            let a = step().context_with(|| format!("CP mode {n}, iteration {it}"))?;
            grams[n] = a.gram();
            model.set_factor(n, a)?;
        }
        if lp.finish_sweep(diag, &model, x, start)? {
            break;
        }
    }
    Ok((model, lp.into_report()))
}
