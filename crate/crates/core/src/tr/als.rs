use std::time::Instant;

use crate::als::{
    check_size, gaussian_range, AlsOptions, AlsReport, Init, SweepDiagnostics, SweepLoop,
};
use crate::error::{Error, Result, ResultExt};
use crate::leverage::solve_normal_equations;
use crate::seed::{derive_seed, rng_for};
use crate::tensor::{increment_except, DenseTensor, Matrix, TrModel};
use rand_distr::{Distribution, StandardNormal};

/// Checks `ranks` against `dims`; `ranks[c]` is the trailing rank of core `c`.
pub fn validate_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::Config(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    if dims.len() < 2 {
        return Err(Error::Config("tensor ring needs at least two modes".into()));
    }
    if ranks.iter().any(|&r| r == 0) {
        return Err(Error::Config("TR ranks must be positive".into()));
    }
    Ok(())
}

/// Core `G` of shape `(L, I, R)` from its classical mode-2 unfolding `G₍₂₎` (`I × LR`, columns `overline{a b}`).
pub fn core_from_unfolding(g2: &Matrix, left: usize, right: usize) -> Result<DenseTensor> {
    if g2.cols() != left * right {
        return Err(Error::Shape(format!(
            "unfolding has {} columns, expected {left}·{right}",
            g2.cols()
        )));
    }
    DenseTensor::fold_classical(g2, 1, &[left, g2.rows(), right])
}

/// Initial cores of a TR model with the given ranks.
pub fn init_tr(x: &DenseTensor, ranks: &[usize], init: Init, seed: u64) -> Result<TrModel> {
    let dims = x.dims();
    validate_ranks(dims, ranks)?;
    let big_n = dims.len();
    let mut rng = rng_for(seed, &[20]);
    let mut cores = Vec::with_capacity(big_n);
    for c in 0..big_n {
        let (l, r) = (ranks[(c + big_n - 1) % big_n], ranks[c]);
        let core = match init {
            Init::Gaussian => {
                let data = (0..l * dims[c] * r)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                DenseTensor::new(vec![l, dims[c], r], data)?
            }
            Init::RangeFinder => {
                let mut y = gaussian_range(x, c, l * r, &mut rng)?;
                let norm = y.frobenius_norm();
                if norm > 0.0 {
                    y.data_mut().iter_mut().for_each(|v| *v /= norm);
                }
                core_from_unfolding(&y, l, r)?
            }
        };
        cores.push(core);
    }
    TrModel::new(cores)
}

/// Left-orthonormalizes the cores `n+1, …, n−2` of the subchain around `n`, moving each
/// triangular factor into the next core.
///
/// Every subchain slice product, and so the represented tensor, is unchanged. Cores whose
/// left unfolding has fewer rows than columns are left as they are.
pub fn canonicalize_subchain(model: &mut TrModel, n: usize) -> Result<()> {
    let modes = model.subchain_modes(n);
    if modes.len() < 2 {
        return Ok(());
    }
    let mut cores = model.cores().to_vec();
    for w in modes.windows(2) {
        let (c, next) = (w[0], w[1]);
        let d = cores[c].dims().to_vec();
        let (rows, r) = (d[0] * d[1], d[2]);
        if rows < r {
            continue;
        }
        let qr = Matrix::from_col_major(rows, r, cores[c].data().to_vec())?
            .to_dmatrix()
            .qr();
        let (q, tri) = (Matrix::from_dmatrix(&qr.q()), Matrix::from_dmatrix(&qr.r()));
        cores[c] = DenseTensor::new(d, q.into_data())?;
        let nd = cores[next].dims().to_vec();
        let tail = Matrix::from_col_major(nd[0], nd[1] * nd[2], cores[next].data().to_vec())?;
        cores[next] = DenseTensor::new(nd, tri.matmul(&tail)?.into_data())?;
    }
    *model = TrModel::new(cores)?;
    Ok(())
}

/// Exact TR-ALS with `iters` sweeps and Gaussian initialization.
pub fn tr_als(
    x: &DenseTensor,
    ranks: &[usize],
    iters: usize,
    seed: u64,
) -> Result<(TrModel, AlsReport)> {
    tr_als_with(
        x,
        ranks,
        &AlsOptions::default().with_iters(iters).with_seed(seed),
    )
}

pub fn tr_als_with(
    x: &DenseTensor,
    ranks: &[usize],
    opts: &AlsOptions,
) -> Result<(TrModel, AlsReport)> {
    check_size(x, opts)?;
    let model = init_tr(x, ranks, opts.init, derive_seed(opts.seed, &[1]))?;
    tr_als_from(x, model, opts)
}

/// Exact TR-ALS from a given initial model.
pub fn tr_als_from(
    x: &DenseTensor,
    mut model: TrModel,
    opts: &AlsOptions,
) -> Result<(TrModel, AlsReport)> {
    check_size(x, opts)?;
    if model.dims() != x.dims() {
        return Err(Error::Shape(format!(
            "model dims {:?} differ from tensor dims {:?}",
            model.dims(),
            x.dims()
        )));
    }
    let mut lp = SweepLoop::new(x, opts)?;
    for it in 0.. {
        let start = Instant::now();
        let diag = SweepDiagnostics {
            iteration: it,
            ..Default::default()
        };
        for n in 0..model.order() {
            let g = exact_core_update(x, &model, n)
                .context_with(|| format!("TR mode {n}, iteration {it}"))?;
            model.set_core(n, g)?;
        }
        if lp.finish_sweep(diag, &model, x, start)? {
            break;
        }
    }
    Ok((model, lp.into_report()))
}

/// Solves the normal equations `(GᵀG) Z = Gᵀ X_{[n]}ᵀ` streamed over the design rows.
pub(crate) fn exact_core_update(x: &DenseTensor, model: &TrModel, n: usize) -> Result<DenseTensor> {
    let dims = x.dims();
    let (l, r) = (model.left_rank(n), model.right_rank(n));
    let p = l * r;
    let m = dims[n];
    let strides = x.strides();
    let data = x.data();
    let slices: Vec<Vec<Matrix>> = (0..model.order()).map(|c| model.slices(c)).collect();
    let modes = model.subchain_modes(n);
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = Matrix::zeros(p, m);
    let mut idx = vec![0usize; dims.len()];
    let mut z = vec![0.0; p];
    loop {
        let mut prod = slices[modes[0]][idx[modes[0]]].clone();
        for &c in &modes[1..] {
            prod = prod.matmul(&slices[c][idx[c]])?;
        }
        for b in 0..r {
            for a in 0..l {
                z[a + b * l] = prod[(b, a)];
            }
        }
        for k in 0..p {
            let zk = z[k];
            let col = gram.col_mut(k);
            for (g, &zj) in col.iter_mut().zip(&z).take(k + 1) {
                *g += zj * zk;
            }
        }
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        for i in 0..m {
            let xv = data[base + i * strides[n]];
            if xv != 0.0 {
                for (o, &zj) in rhs.col_mut(i).iter_mut().zip(&z) {
                    *o += xv * zj;
                }
            }
        }
        if increment_except(&mut idx, dims, n).is_none() {
            break;
        }
    }
    for k in 0..p {
        for j in 0..k {
            gram[(k, j)] = gram[(j, k)];
        }
    }
    let zsol = solve_normal_equations(&gram, &rhs)?;
    core_from_unfolding(&zsol.transpose(), l, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::TensorModel;

    #[test]
    fn unfolding_round_trip() {
        let g = DenseTensor::from_fn(vec![2, 3, 4], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64)
            .unwrap();
        let g2 = g.classical_unfold(1).unwrap();
        assert_eq!(core_from_unfolding(&g2, 2, 4).unwrap(), g);
    }

    #[test]
    fn canonicalization_keeps_tensor_and_orthonormalizes() {
        let x = DenseTensor::from_fn(vec![3, 4, 3, 2], |i| {
            (i[0] + 2 * i[1] + 3 * i[2] + i[3]) as f64
        })
        .unwrap();
        let model = init_tr(&x, &[2, 3, 2, 2], Init::Gaussian, 5).unwrap();
        for n in 0..4 {
            let mut m = model.clone();
            canonicalize_subchain(&mut m, n).unwrap();
            let (a, b) = (m.reconstruct(), model.reconstruct());
            let d = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-10);
            assert_eq!(m.core(n), model.core(n));
            let modes = m.subchain_modes(n);
            for &c in &modes[..modes.len() - 1] {
                let dd = m.core(c).dims().to_vec();
                if dd[0] * dd[1] < dd[2] {
                    continue;
                }
                let q = Matrix::from_col_major(dd[0] * dd[1], dd[2], m.core(c).data().to_vec())
                    .unwrap();
                assert!(q.gram().max_abs_diff(&Matrix::identity(dd[2])) < 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_ring_recovery() {
        let cores = vec![
            DenseTensor::new(vec![1, 3, 1], vec![1.0, -2.0, 0.5]).unwrap(),
            DenseTensor::new(vec![1, 2, 1], vec![1.5, 1.0]).unwrap(),
            DenseTensor::new(vec![1, 2, 1], vec![-1.0, 3.0]).unwrap(),
        ];
        let x = TrModel::new(cores).unwrap().reconstruct();
        let (m, _) = tr_als(&x, &[1, 1, 1], 10, 2).unwrap();
        assert!(m.rel_error(&x).unwrap() < 1e-8);
    }

    #[test]
    fn exact_update_matches_dense_solve() {
        let x = DenseTensor::from_fn(vec![3, 2, 3], |i| {
            ((i[0] * 7 + i[1] * 3 + i[2] * 5) % 4) as f64 - 1.0
        })
        .unwrap();
        let model = init_tr(&x, &[2, 2, 1], Init::Gaussian, 7).unwrap();
        for n in 0..3 {
            let g = exact_core_update(&x, &model, n).unwrap();
            let design = model.subchain_unfold_2(n).unwrap();
            let target = x.unfold(n).unwrap().transpose();
            let sol = crate::leverage::sampled_least_squares(&design, &target, &Default::default())
                .unwrap();
            let want =
                core_from_unfolding(&sol.x.transpose(), model.left_rank(n), model.right_rank(n))
                    .unwrap();
            let diff = g
                .data()
                .iter()
                .zip(want.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9, "mode {n}: {diff}");
        }
    }
}
