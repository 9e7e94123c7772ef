//! Brute-force oracles shared by the oracle and acceptance test targets.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tdals::als::{AlsOptions, Init};
use tdals::baselines::ProductSamplerState;
use tdals::cp::{
    cp_als_es_from, cp_als_from, cp_draw_indices, cp_leaf_modes, cp_marginal, cp_normalization,
    cp_sampled_update, cp_sketch_design, init_cp, CpEsConfig, CpSamplerState, SamplingMode,
};
use tdals::leverage::{
    chain_distribution, draw_chain, draw_from_weights, estimate_leverage_map,
    exact_leverage_scores, LeverageMap, SolveOptions,
};
use tdals::seed::rng_for;
use tdals::sketch::RecursiveSketch;
use tdals::tensor::TensorModel;
use tdals::tr::{
    init_tr, tr_als_es_from, tr_als_from, tr_draw_indices, tr_leaf_modes, tr_marginal,
    tr_normalization, tr_sketch_design, TrEsConfig, TrSamplerState,
};
use tdals::xbench::total_variation;
use tdals::{CpModel, DenseTensor, Matrix, TrModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, &[0x7E57])
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_cp(dims: &[usize], r: usize, rng: &mut ChaCha8Rng) -> CpModel {
    CpModel::new(dims.iter().map(|&i| uniform(i, r, rng)).collect()).unwrap()
}

/// `ranks[c]` is the trailing rank of core `c`.
pub fn random_tr(dims: &[usize], ranks: &[usize], rng: &mut ChaCha8Rng) -> TrModel {
    let n = dims.len();
    let cores = (0..n)
        .map(|c| {
            let l = ranks[(c + n - 1) % n];
            let len = l * dims[c] * ranks[c];
            let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            DenseTensor::new(vec![l, dims[c], ranks[c]], data).unwrap()
        })
        .collect();
    TrModel::new(cores).unwrap()
}

/// `BᵀB + I/2` for a random `B`.
pub fn random_spd(p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let b = uniform(p, p, rng);
    let mut g = b.tr_matmul(&b).unwrap();
    for i in 0..p {
        g[(i, i)] += 0.5;
    }
    g
}

/// Every multi-index of `dims`, first index fastest.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; dims.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for j in 0..dims.len() {
            idx[j] += 1;
            if idx[j] < dims[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    out
}

/// Row position of `idx` when the modes in `order` vary with the first fastest.
pub fn row_position(idx: &[usize], dims: &[usize], order: &[usize]) -> usize {
    let mut pos = 0;
    let mut stride = 1;
    for &j in order {
        pos += idx[j] * stride;
        stride *= dims[j];
    }
    pos
}

pub fn quad(phi: &Matrix, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..v.len() {
        for b in 0..v.len() {
            s += v[a] * phi[(a, b)] * v[b];
        }
    }
    s
}

pub fn cp_row(model: &CpModel, n: usize, idx: &[usize]) -> Vec<f64> {
    (0..model.rank())
        .map(|k| {
            (0..model.order())
                .filter(|&j| j != n)
                .map(|j| model.factor(j)[(idx[j], k)])
                .product()
        })
        .collect()
}

/// Entry `(l, r)` of lateral slice `i` of core `c`, read from the raw core data.
pub fn core_entry(model: &TrModel, c: usize, l: usize, i: usize, r: usize) -> f64 {
    let d = model.core(c).dims();
    model.core(c).data()[l + d[0] * (i + d[1] * r)]
}

/// Design row of the mode-`n` TR problem: entry `a + b·R_{n−1}` is the slice product at `(b, a)`.
pub fn tr_row(model: &TrModel, n: usize, idx: &[usize]) -> Vec<f64> {
    let big_n = model.order();
    let modes: Vec<usize> = (1..big_n).map(|k| (n + k) % big_n).collect();
    let rn = model.right_rank(n);
    let mut m: Vec<Vec<f64>> = (0..rn)
        .map(|b| (0..rn).map(|c| if b == c { 1.0 } else { 0.0 }).collect())
        .collect();
    for &c in &modes {
        let (l, r) = (model.left_rank(c), model.right_rank(c));
        let next: Vec<Vec<f64>> = m
            .iter()
            .map(|row| {
                (0..r)
                    .map(|k| (0..l).map(|j| row[j] * core_entry(model, c, j, idx[c], k)).sum())
                    .collect()
            })
            .collect();
        m = next;
    }
    let lp = model.left_rank(n);
    let mut out = vec![0.0; lp * rn];
    for b in 0..rn {
        for a in 0..lp {
            out[a + b * lp] = m[b][a];
        }
    }
    out
}

/// Draw order of the samplers: ascending modes with `n` skipped.
pub fn steps(order: usize, n: usize) -> Vec<usize> {
    (0..order).filter(|&j| j != n).collect()
}

/// Per-row estimates over the full grid (entry `n` of every index is zero).
fn grid_scores(
    dims: &[usize],
    n: usize,
    phi: &Matrix,
    row: impl Fn(&[usize]) -> Vec<f64>,
) -> Vec<(Vec<usize>, f64)> {
    let mut d = dims.to_vec();
    d[n] = 1;
    all_indices(&d)
        .into_iter()
        .map(|idx| {
            let s = quad(phi, &row(&idx));
            (idx, s)
        })
        .collect()
}

/// Largest deviation of `C`, every prefix marginal and the chain distribution from enumeration.
fn marginal_deviation(
    dims: &[usize],
    n: usize,
    scores: &[(Vec<usize>, f64)],
    c_impl: f64,
    marginal: impl Fn(&[usize]) -> f64,
    q_impl: &[f64],
    row_order: &[usize],
) -> f64 {
    let c: f64 = scores.iter().map(|s| s.1).sum();
    let mut worst = (c - c_impl).abs();
    let st = steps(dims.len(), n);
    for len in 0..=st.len() {
        let pd: Vec<usize> = st[..len].iter().map(|&j| dims[j]).collect();
        for prefix in all_indices(&pd) {
            let brute: f64 = scores
                .iter()
                .filter(|(idx, _)| (0..len).all(|s| idx[st[s]] == prefix[s]))
                .map(|s| s.1)
                .sum::<f64>()
                / c;
            worst = worst.max((brute - marginal(&prefix)).abs());
        }
    }
    for (idx, s) in scores {
        let pos = row_position(idx, dims, row_order);
        worst = worst.max((s / c - q_impl[pos]).abs());
    }
    worst
}

pub fn cp_marginal_deviation(model: &CpModel, n: usize, map: &LeverageMap) -> f64 {
    let dims = model.dims();
    let scores = grid_scores(&dims, n, map.phi(), |idx| cp_row(model, n, idx));
    let st = CpSamplerState::new(model, n, map).unwrap();
    let (q, _) = chain_distribution(&st);
    marginal_deviation(
        &dims,
        n,
        &scores,
        cp_normalization(&st),
        |p| cp_marginal(&st, p).unwrap(),
        &q,
        &steps(dims.len(), n),
    )
}

pub fn tr_marginal_deviation(model: &TrModel, n: usize, map: &LeverageMap) -> f64 {
    let dims = model.dims();
    let big_n = dims.len();
    let scores = grid_scores(&dims, n, map.phi(), |idx| tr_row(model, n, idx));
    let st = TrSamplerState::new(model, n, map).unwrap();
    let (q, _) = chain_distribution(&st);
    let cyclic: Vec<usize> = (1..big_n).map(|k| (n + k) % big_n).collect();
    marginal_deviation(
        &dims,
        n,
        &scores,
        tr_normalization(&st),
        |p| tr_marginal(&st, p).unwrap(),
        &q,
        &cyclic,
    )
}

/// Small enumerable instances: `N ∈ {2, 3, 4}`, `I ≤ 4`, ranks `≤ 3`.
pub fn small_grids() -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    for n in 2..=4 {
        for i in 2..=4 {
            for r in 1..=3 {
                out.push((vec![i; n], r));
            }
        }
        let mixed: Vec<usize> = (0..n).map(|j| 2 + (j * 3 + 1) % 3).collect();
        out.push((mixed, 2));
    }
    out
}

/// TR ranks for a grid: variant 0 is uniform `r`, 1 alternates `r` and `r − 1`,
/// 2 is a tensor train (`ranks[N−1] = 1`).
pub fn grid_ranks(order: usize, r: usize, variant: usize) -> Vec<usize> {
    (0..order)
        .map(|c| match variant {
            1 if c % 2 == 1 && r > 1 => r - 1,
            2 if c == order - 1 => 1,
            _ => r,
        })
        .collect()
}

pub const RANK_VARIANTS: usize = 3;

/// Criterion-style check (a): worst deviation over all grids, modes and two `Φ` sources.
pub fn oracle_marginals(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut g = rng(seed);
    for (dims, r) in small_grids() {
        let cp = random_cp(&dims, r, &mut g);
        for n in 0..dims.len() {
            let spd = LeverageMap::from_phi(random_spd(r, &mut g)).unwrap();
            worst = worst.max(cp_marginal_deviation(&cp, n, &spd));
            let leaf: Vec<usize> = cp_leaf_modes(dims.len(), n).iter().map(|&j| dims[j]).collect();
            let sk = RecursiveSketch::new(64, &leaf, seed + n as u64).unwrap();
            let sketched = LeverageMap::from_phi(
                estimate_leverage_map(&cp_sketch_design(&cp, n, &sk).unwrap())
                    .unwrap()
                    .phi()
                    .clone(),
            )
            .unwrap();
            worst = worst.max(cp_marginal_deviation(&cp, n, &sketched));
        }
        for variant in 0..RANK_VARIANTS {
            let ranks = grid_ranks(dims.len(), r, variant);
            let tr = random_tr(&dims, &ranks, &mut g);
            for n in 0..dims.len() {
                let p = tr.left_rank(n) * tr.right_rank(n);
                let map = LeverageMap::from_phi(random_spd(p, &mut g)).unwrap();
                worst = worst.max(tr_marginal_deviation(&tr, n, &map));
            }
        }
    }
    worst
}

/// `ΨA` against the explicit sketch times the explicit design for CP.
pub fn cp_sketch_deviation(model: &CpModel, n: usize, j1: usize, seed: u64) -> f64 {
    let dims = model.dims();
    let leaf: Vec<usize> = cp_leaf_modes(dims.len(), n).iter().map(|&j| dims[j]).collect();
    let sk = RecursiveSketch::new(j1, &leaf, seed).unwrap();
    let psi = sk.materialize().unwrap();
    let mut d = dims.clone();
    d[n] = 1;
    let order = steps(dims.len(), n);
    let rows: usize = d.iter().product();
    let mut design = Matrix::zeros(rows, model.rank());
    for idx in all_indices(&d) {
        design.set_row(row_position(&idx, &dims, &order), &cp_row(model, n, &idx));
    }
    let want = psi.matmul(&design).unwrap();
    cp_sketch_design(model, n, &sk).unwrap().max_abs_diff(&want)
}

/// `ΨG^{≠n}_{[2]}` against the explicit sketch times the explicit design for TR.
pub fn tr_sketch_deviation(model: &TrModel, n: usize, j1: usize, seed: u64) -> f64 {
    let dims = model.dims();
    let big_n = dims.len();
    let leaf: Vec<usize> = tr_leaf_modes(big_n, n).iter().map(|&j| dims[j]).collect();
    let sk = RecursiveSketch::new(j1, &leaf, seed).unwrap();
    let psi = sk.materialize().unwrap();
    let mut d = dims.clone();
    d[n] = 1;
    let order: Vec<usize> = (1..big_n).map(|k| (n + k) % big_n).collect();
    let rows: usize = d.iter().product();
    let cols = model.left_rank(n) * model.right_rank(n);
    let mut design = Matrix::zeros(rows, cols);
    for idx in all_indices(&d) {
        design.set_row(row_position(&idx, &dims, &order), &tr_row(model, n, &idx));
    }
    let want = psi.matmul(&design).unwrap();
    tr_sketch_design(model, n, &sk).unwrap().max_abs_diff(&want)
}

/// Check (b) over a set of small instances, including odd leaf counts.
pub fn oracle_sketched_designs(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut g = rng(seed ^ 0xB);
    let cases: [(&[usize], usize); 5] = [
        (&[3, 4], 2),
        (&[3, 2, 4], 3),
        (&[2, 3, 4, 2], 2),
        (&[4, 3, 2, 3, 2], 2),
        (&[2, 2, 3, 2, 2, 3], 3),
    ];
    for (k, (dims, r)) in cases.iter().enumerate() {
        let cp = random_cp(dims, *r, &mut g);
        let ranks = grid_ranks(dims.len(), *r, k % RANK_VARIANTS);
        let tr = random_tr(dims, &ranks, &mut g);
        for n in 0..dims.len() {
            for j1 in [8, 37] {
                let s = seed + (k * 100 + n * 10 + j1) as u64;
                worst = worst.max(cp_sketch_deviation(&cp, n, j1, s));
                worst = worst.max(tr_sketch_deviation(&tr, n, j1, s));
            }
        }
    }
    worst
}

/// Unnormalized prefix mass by expanding every pair of bond tuples `(r, k)`:
/// `Σ Φ(r_{n−1}r_n, k_{n−1}k_n) ∏_{drawn j} G_j(r,i_j,r)G_j(k,i_j,k) ∏_{free j} Σ_i G_j(r,i,r)G_j(k,i,k)`.
pub fn tr_bond_sum(model: &TrModel, n: usize, phi: &Matrix, fixed: &[Option<usize>]) -> f64 {
    let big_n = model.order();
    let ranks = model.ranks();
    let bonds = all_indices(&ranks);
    let lp = model.left_rank(n);
    let prev = (n + big_n - 1) % big_n;
    let mut total = 0.0;
    for r in &bonds {
        for k in &bonds {
            let mut t = phi[(r[prev] + r[n] * lp, k[prev] + k[n] * lp)];
            for c in (0..big_n).filter(|&c| c != n) {
                let cp = (c + big_n - 1) % big_n;
                let pick = |i: usize| {
                    core_entry(model, c, r[cp], i, r[c]) * core_entry(model, c, k[cp], i, k[c])
                };
                t *= match fixed[c] {
                    Some(i) => pick(i),
                    None => (0..model.dims()[c]).map(pick).sum(),
                };
                if t == 0.0 {
                    break;
                }
            }
            total += t;
        }
    }
    total
}

/// Check (c): trace-contraction marginals against the bond-tuple expansion.
pub fn oracle_bond_sums(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut g = rng(seed ^ 0xC);
    for (dims, r) in small_grids() {
        for variant in 0..RANK_VARIANTS {
            let ranks = grid_ranks(dims.len(), r, variant);
            let tr = random_tr(&dims, &ranks, &mut g);
            for n in 0..dims.len() {
                let p = tr.left_rank(n) * tr.right_rank(n);
                let phi = random_spd(p, &mut g);
                let st = TrSamplerState::new(&tr, n, &LeverageMap::from_phi(phi.clone()).unwrap())
                    .unwrap();
                let none = vec![None; dims.len()];
                let c = tr_bond_sum(&tr, n, &phi, &none);
                worst = worst.max((c - tr_normalization(&st)).abs() / c.max(1.0));
                let sts = steps(dims.len(), n);
                for len in 1..=sts.len() {
                    let pd: Vec<usize> = sts[..len].iter().map(|&j| dims[j]).collect();
                    for prefix in all_indices(&pd) {
                        let mut fixed = none.clone();
                        for (s, &i) in prefix.iter().enumerate() {
                            fixed[sts[s]] = Some(i);
                        }
                        let naive = tr_bond_sum(&tr, n, &phi, &fixed) / c;
                        worst = worst.max((naive - tr_marginal(&st, &prefix).unwrap()).abs());
                    }
                }
            }
        }
    }
    worst
}

fn max_abs(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Check (d): one ES sweep with every row drawn once equals one exact sweep.
///
/// CP factors are compared directly; TR cores only up to gauge, so the
/// represented tensors are compared.
pub fn oracle_exhaustive_sweeps(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut g = rng(seed ^ 0xD);
    let opts = AlsOptions::default().with_iters(1).with_tol(0.0);
    let cases: [(&[usize], usize); 4] = [(&[3, 4], 2), (&[3, 2, 4], 2), (&[2, 3, 4, 2], 3), (&[4, 3, 3], 3)];
    for (k, (dims, r)) in cases.iter().enumerate() {
        let truth = random_cp(dims, *r, &mut g);
        let mut x = truth.reconstruct();
        for v in x.data_mut() {
            *v += 0.05 * g.random_range(-1.0..1.0);
        }
        let init = init_cp(&x, *r, Init::Gaussian, seed + k as u64).unwrap();
        let (exact, _) = cp_als_from(&x, init.clone(), &opts).unwrap();
        let cfg = CpEsConfig::new(64, 0)
            .with_als(opts)
            .with_sampling(SamplingMode::Exhaustive);
        let (es, _) = cp_als_es_from(&x, init, &cfg).unwrap();
        for j in 0..dims.len() {
            worst = worst.max(es.factor(j).max_abs_diff(exact.factor(j)));
        }

        let ranks = grid_ranks(dims.len(), *r, (k + 1) % RANK_VARIANTS);
        let init = init_tr(&x, &ranks, Init::Gaussian, seed + 10 + k as u64).unwrap();
        let (exact, _) = tr_als_from(&x, init.clone(), &opts).unwrap();
        let cfg = TrEsConfig::new(256, 0)
            .with_als(opts)
            .with_sampling(SamplingMode::Exhaustive);
        let (es, _) = tr_als_es_from(&x, init, &cfg).unwrap();
        worst = worst.max(max_abs(&es.reconstruct(), &exact.reconstruct()));
    }
    worst
}

/// Fraction of random `256 × 4` matrices whose scores all satisfy `½ℓ ≤ ℓ̃ ≤ (3/2)ℓ`
/// under the materialized `(4096, (4,4,4,4))` recursive sketch.
pub fn leverage_bound_rate(trials: usize, seed: u64) -> f64 {
    let mut ok = 0;
    for t in 0..trials {
        let mut g = rng_for(seed, &[4, t as u64]);
        let a = Matrix::from_fn(256, 4, |_, _| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut g)
        });
        let sk = RecursiveSketch::new(64 * 4 * 16, &[4, 4, 4, 4], derive(seed, t)).unwrap();
        let psi = sk.materialize().unwrap();
        let map = estimate_leverage_map(&psi.matmul(&a).unwrap()).unwrap();
        let exact = exact_leverage_scores(&a).unwrap();
        let good = (0..256).all(|i| {
            let est = map.score(&a.row(i));
            0.5 * exact[i] <= est && est <= 1.5 * exact[i]
        });
        ok += usize::from(good);
    }
    ok as f64 / trials as f64
}

fn derive(seed: u64, t: usize) -> u64 {
    tdals::seed::derive_seed(seed, &[5, t as u64])
}

/// Sampled mode-3 solve on a `16 × 16 × 16 × 8` rank-4 CP problem (4096 design rows).
pub struct RelErrorInstance {
    pub x: DenseTensor,
    pub model: CpModel,
    pub opt: f64,
}

impl RelErrorInstance {
    pub const MODE: usize = 3;

    pub fn new(seed: u64) -> Self {
        let mut g = rng_for(seed, &[6]);
        let mut gauss = move || -> f64 {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut g)
        };
        let dims = [16, 16, 16, 8];
        let factors: Vec<Matrix> = dims
            .iter()
            .map(|&i| {
                let mut f = Matrix::from_fn(i, 4, |_, _| gauss());
                // A few heavy rows make the design coherent.
                for k in 0..4 {
                    f[(0, k)] *= 8.0;
                }
                f
            })
            .collect();
        let truth = CpModel::new(factors).unwrap();
        let mut x = truth.reconstruct();
        let scale = x.norm() / (x.len() as f64).sqrt();
        for v in x.data_mut() {
            *v += 0.3 * scale * gauss();
        }
        let mut model = truth.clone();
        for j in 0..Self::MODE {
            let f = Matrix::from_fn(dims[j], 4, |i, k| truth.factor(j)[(i, k)] * (1.0 + 0.1 * gauss()));
            model.set_factor(j, f).unwrap();
        }
        let best = exact_factor(&x, &model, Self::MODE);
        model.set_factor(Self::MODE, best).unwrap();
        let opt = residual(&x, &model);
        RelErrorInstance { x, model, opt }
    }

    /// Residual of one sketched, sampled solve over the ratio to the optimum.
    pub fn sampled_ratio(&self, j1: usize, j2: usize, seed: u64) -> f64 {
        let n = Self::MODE;
        let dims = self.model.dims();
        let leaf: Vec<usize> = cp_leaf_modes(4, n).iter().map(|&j| dims[j]).collect();
        let sk = RecursiveSketch::new(j1, &leaf, tdals::seed::derive_seed(seed, &[1])).unwrap();
        let map = estimate_leverage_map(&cp_sketch_design(&self.model, n, &sk).unwrap()).unwrap();
        let st = CpSamplerState::new(&self.model, n, &map).unwrap();
        let (sample, _) = cp_draw_indices(&st, j2, &mut rng_for(seed, &[2])).unwrap();
        let (a, _) = cp_sampled_update(&self.x, &self.model, n, &sample, &SolveOptions::default())
            .unwrap();
        let mut m = self.model.clone();
        m.set_factor(n, a).unwrap();
        residual(&self.x, &m) / self.opt
    }
}

/// Dense least-squares factor of mode `n` with the others fixed.
pub fn exact_factor(x: &DenseTensor, model: &CpModel, n: usize) -> Matrix {
    let design = model.design_matrix(n).unwrap().to_dmatrix();
    let rhs = x.classical_unfold(n).unwrap().transpose().to_dmatrix();
    let sol = design.svd(true, true).solve(&rhs, 1e-12).unwrap();
    Matrix::from_dmatrix(&sol.transpose())
}

pub fn residual(x: &DenseTensor, model: &CpModel) -> f64 {
    model.rel_error(x).unwrap() * x.norm()
}

/// `J₂ ≳ R max(log(R/δ), 1/(εδ))` with unit constant.
pub fn guaranteed_j2(r: usize, eps: f64, delta: f64) -> usize {
    let r = r as f64;
    (r * (r / delta).ln().max(1.0 / (eps * delta))).ceil() as usize
}

/// Empirical frequencies of design-row indices.
pub fn frequencies(indices: &[usize], len: usize) -> Vec<f64> {
    let mut f = vec![0.0; len];
    for &i in indices {
        f[i] += 1.0;
    }
    let n = indices.len() as f64;
    f.iter_mut().for_each(|v| *v /= n);
    f
}

/// Worst total-variation distance between `draws` empirical frequencies and the
/// enumerated distribution, over the CP, TR, product and flat samplers on instances
/// with at most 16 rows. Returns `(worst, instance count)`.
pub fn sampler_tv(draws: usize, seed: u64) -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut g = rng(seed ^ 0x7);
    let mut check = |q: &[f64], idx: &[usize]| {
        let tv = total_variation(q, &frequencies(idx, q.len())).unwrap();
        worst = worst.max(tv);
        count += 1;
    };
    let cp_cases: [(&[usize], usize); 3] = [(&[2, 2, 2], 2), (&[5, 3], 2), (&[2, 3, 2, 2], 3)];
    for (k, (dims, r)) in cp_cases.iter().enumerate() {
        let m = random_cp(dims, *r, &mut g);
        let map = LeverageMap::from_phi(random_spd(*r, &mut g)).unwrap();
        let n = k % dims.len();
        let st = CpSamplerState::new(&m, n, &map).unwrap();
        let (q, _) = chain_distribution(&st);
        let (s, _) = cp_draw_indices(&st, draws, &mut rng_for(seed, &[7, k as u64])).unwrap();
        check(&q, &s.indices);

        let ps = ProductSamplerState::for_cp(&m, n).unwrap();
        let (q, _) = chain_distribution(&ps);
        let (s, _) = draw_chain(&ps, draws, &mut rng_for(seed, &[8, k as u64])).unwrap();
        check(&q, &s.indices);
    }
    let tr_cases: [(&[usize], Vec<usize>); 4] = [
        (&[2, 2, 2], vec![2, 2, 2]),
        (&[3, 2, 2], vec![1, 1, 1]),
        (&[2, 4, 2, 2], vec![2, 1, 2, 1]),
        (&[4, 2, 2], vec![2, 3, 1]),
    ];
    for (k, (dims, ranks)) in tr_cases.iter().enumerate() {
        let m = random_tr(dims, ranks, &mut g);
        let n = (k + 1) % dims.len();
        let p = m.left_rank(n) * m.right_rank(n);
        let map = LeverageMap::from_phi(random_spd(p, &mut g)).unwrap();
        let st = TrSamplerState::new(&m, n, &map).unwrap();
        let (q, _) = chain_distribution(&st);
        let (s, _) = tr_draw_indices(&st, draws, &mut rng_for(seed, &[9, k as u64])).unwrap();
        check(&q, &s.indices);

        let ps = ProductSamplerState::for_tr(&m, n).unwrap();
        let (q, _) = chain_distribution(&ps);
        let (s, _) = draw_chain(&ps, draws, &mut rng_for(seed, &[10, k as u64])).unwrap();
        check(&q, &s.indices);
    }
    for (k, w) in [vec![1.0; 4], vec![0.1, 2.0, 0.0, 0.7, 3.3, 1.2, 0.05, 0.9]]
        .iter()
        .enumerate()
    {
        let total: f64 = w.iter().sum();
        let q: Vec<f64> = w.iter().map(|v| v / total).collect();
        let s = draw_from_weights(w, draws, &mut rng_for(seed, &[11, k as u64])).unwrap();
        check(&q, &s.indices);
    }
    (worst, count)
}
