//! Product leverage-score sampling baselines (CP-ARLS-LEV and TR-ALS-Sampled styles).
//!
//! Each mode `j ≠ n` gets its exact leverage distribution `p_j`; a design row is
//! drawn with probability `∏_j p_j(i_j)`. The same ALS loops and least-squares
//! solver as the ES pipelines are used.

use rand::Rng;

use crate::als::{AlsOptions, AlsReport};
use crate::cp::{init_cp, run_sampled_cp, Drawn as CpDrawn};
use crate::error::{Error, Result};
use crate::leverage::{
    draw_chain, exact_leverage_scores, ChainDiagnostics, IndexSample, SolveOptions, SubindexChain,
};
use crate::seed::{derive_seed, rng_for};
use crate::tensor::{classical_other_index, cyclic_other_index, CpModel, DenseTensor, TrModel};
use crate::tr::{init_tr, run_sampled_tr, Drawn as TrDrawn};

/// Row ordering of the design matrix a product sample indexes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowOrder {
    /// `A^{≠n}` order, mode 0 fastest.
    Classical,
    /// `G^{≠n}_{[2]}` order, mode `n+1` fastest.
    Cyclic,
}

/// Independent per-mode distributions `p_j`, `j ≠ n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductSamplerState {
    n: usize,
    dims: Vec<usize>,
    dists: Vec<Vec<f64>>,
    order: RowOrder,
}

impl ProductSamplerState {
    /// `dists[j]` is the distribution of mode `j`; entry `n` is ignored.
    pub fn new(n: usize, dists: Vec<Vec<f64>>, order: RowOrder) -> Result<Self> {
        if n >= dists.len() {
            return Err(Error::InvalidMode {
                mode: n,
                order: dists.len(),
            });
        }
        let mut dims = Vec::with_capacity(dists.len());
        let mut out = Vec::with_capacity(dists.len());
        for (j, p) in dists.into_iter().enumerate() {
            dims.push(p.len());
            if j == n {
                out.push(Vec::new());
                continue;
            }
            if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "mode {j} distribution has invalid entries"
                )));
            }
            let s: f64 = p.iter().sum();
            if !(s > 0.0) {
                return Err(Error::Degenerate(format!(
                    "mode {j} distribution has no mass"
                )));
            }
            out.push(p.into_iter().map(|v| v / s).collect());
        }
        Ok(ProductSamplerState {
            n,
            dims,
            dists: out,
            order,
        })
    }

    /// Exact leverage distributions of the CP factors.
    pub fn for_cp(model: &CpModel, n: usize) -> Result<Self> {
        let mut dists = Vec::with_capacity(model.order());
        for j in 0..model.order() {
            dists.push(if j == n {
                vec![0.0; model.factor(j).rows()]
            } else {
                exact_leverage_scores(model.factor(j))?
            });
        }
        Self::new(n, dists, RowOrder::Classical)
    }

    /// Exact leverage distributions of the cyclic mode-2 unfoldings of the TR cores.
    pub fn for_tr(model: &TrModel, n: usize) -> Result<Self> {
        let mut dists = Vec::with_capacity(model.order());
        for j in 0..model.order() {
            dists.push(if j == n {
                vec![0.0; model.dims()[j]]
            } else {
                exact_leverage_scores(&model.core_unfold_2(j))?
            });
        }
        Self::new(n, dists, RowOrder::Cyclic)
    }

    pub fn mode(&self) -> usize {
        self.n
    }

    /// Normalized distribution of mode `j ≠ n`.
    pub fn distribution(&self, j: usize) -> &[f64] {
        &self.dists[j]
    }

    /// Joint probability `∏_{j≠n} p_j(i_j)`.
    pub fn probability(&self, multi: &[usize]) -> f64 {
        (0..self.dims.len())
            .filter(|&j| j != self.n)
            .map(|j| self.dists[j][multi[j]])
            .product()
    }
}

impl SubindexChain for ProductSamplerState {
    type Prefix = f64;

    fn order(&self) -> usize {
        self.dims.len()
    }

    fn num_steps(&self) -> usize {
        self.dims.len() - 1
    }

    fn step_mode(&self, step: usize) -> usize {
        if step < self.n {
            step
        } else {
            step + 1
        }
    }

    fn step_size(&self, step: usize) -> usize {
        self.dims[self.step_mode(step)]
    }

    fn root(&self) -> f64 {
        1.0
    }

    fn masses(&self, prefix: &f64, step: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.dists[self.step_mode(step)].iter().map(|p| prefix * p));
    }

    fn extend(&self, prefix: &f64, step: usize, index: usize) -> f64 {
        prefix * self.dists[self.step_mode(step)][index]
    }

    fn row_index(&self, multi: &[usize]) -> usize {
        match self.order {
            RowOrder::Classical => classical_other_index(multi, &self.dims, self.n),
            RowOrder::Cyclic => cyclic_other_index(multi, &self.dims, self.n),
        }
    }
}

/// `J₂` independent product draws, duplicates merged with accumulated weights.
pub fn product_draw<R: Rng + ?Sized>(
    state: &ProductSamplerState,
    j2: usize,
    rng: &mut R,
) -> Result<(IndexSample, ChainDiagnostics)> {
    let (s, d) = draw_chain(state, j2, rng)?;
    Ok((s.deduplicated(), d))
}

/// CP-ALS with product leverage sampling and Gaussian initialization.
pub fn cp_arls_lev(
    x: &DenseTensor,
    r: usize,
    j2: usize,
    iters: usize,
    seed: u64,
) -> Result<(CpModel, AlsReport)> {
    let opts = AlsOptions::default().with_iters(iters).with_seed(seed);
    let model = init_cp(x, r, opts.init, derive_seed(seed, &[1]))?;
    cp_arls_lev_from(x, model, j2, &opts, &SolveOptions::default())
}

pub fn cp_arls_lev_from(
    x: &DenseTensor,
    model: CpModel,
    j2: usize,
    opts: &AlsOptions,
    solve: &SolveOptions,
) -> Result<(CpModel, AlsReport)> {
    if j2 == 0 {
        return Err(Error::Config("J2 must be positive".into()));
    }
    let seed = opts.seed;
    run_sampled_cp(x, model, opts, solve, |m, _, n, it| {
        let state = ProductSamplerState::for_cp(m, n)?;
        let mut rng = rng_for(seed, &[31, it as u64, n as u64]);
        let (sample, diag) = product_draw(&state, j2, &mut rng)?;
        Ok(CpDrawn {
            sample,
            diag,
            normalization: 1.0,
        })
    })
}

/// TR-ALS with product leverage sampling and Gaussian initialization.
pub fn tr_als_sampled(
    x: &DenseTensor,
    ranks: &[usize],
    j2: usize,
    iters: usize,
    seed: u64,
) -> Result<(TrModel, AlsReport)> {
    let opts = AlsOptions::default().with_iters(iters).with_seed(seed);
    let model = init_tr(x, ranks, opts.init, derive_seed(seed, &[1]))?;
    tr_als_sampled_from(x, model, j2, &opts, &SolveOptions::default())
}

pub fn tr_als_sampled_from(
    x: &DenseTensor,
    model: TrModel,
    j2: usize,
    opts: &AlsOptions,
    solve: &SolveOptions,
) -> Result<(TrModel, AlsReport)> {
    if j2 == 0 {
        return Err(Error::Config("J2 must be positive".into()));
    }
    let seed = opts.seed;
    run_sampled_tr(x, model, opts, solve, false, |m, n, it| {
        let state = ProductSamplerState::for_tr(m, n)?;
        let mut rng = rng_for(seed, &[32, it as u64, n as u64]);
        let (sample, diag) = product_draw(&state, j2, &mut rng)?;
        Ok(TrDrawn {
            sample,
            diag,
            normalization: 1.0,
        })
    })
}
