use std::time::Instant;

use rand::Rng;

use super::als::{canonicalize_subchain, core_from_unfolding, init_tr};
use crate::als::{gather_weighted_rhs, AlsOptions, AlsReport, SweepDiagnostics, SweepLoop};
use crate::cp::SamplingMode;
use crate::error::{Error, Result, ResultExt};
use crate::leverage::{
    draw_chain, estimate_leverage_map, quad_form, sampled_least_squares, ChainDiagnostics,
    IndexSample, LeverageMap, LsSolution, SolveOptions, SubindexChain,
};
use crate::seed::{derive_seed, rng_for};
use crate::sketch::{countsketch_apply, ConvolutionMode, RecursiveSketch};
use crate::tensor::{cyclic_other_index, kronecker, pair_index, DenseTensor, Matrix, TrModel};

/// Configuration of TR-ALS-ES.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrEsConfig {
    /// Recursive sketch dimension `J₁`.
    pub j1: usize,
    /// Sampled rows per solve `J₂`.
    pub j2: usize,
    pub als: AlsOptions,
    pub convolution: ConvolutionMode,
    pub sampling: SamplingMode,
    pub solve: SolveOptions,
}

impl TrEsConfig {
    pub fn new(j1: usize, j2: usize) -> Self {
        TrEsConfig {
            j1,
            j2,
            als: AlsOptions::default(),
            convolution: ConvolutionMode::Fft,
            sampling: SamplingMode::Chain,
            solve: SolveOptions::default(),
        }
    }

    pub fn with_als(mut self, als: AlsOptions) -> Self {
        self.als = als;
        self
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    /// Soft warnings for sizes below the design column count `R_{n−1}R_n`.
    pub fn warnings(&self, model: &TrModel) -> Vec<String> {
        let cols = (0..model.order())
            .map(|n| model.left_rank(n) * model.right_rank(n))
            .max()
            .unwrap_or(0);
        let mut w = Vec::new();
        if self.j1 < cols * cols {
            w.push(format!(
                "J1 = {} is below the squared design width {}",
                self.j1,
                cols * cols
            ));
        }
        if self.sampling == SamplingMode::Chain && self.j2 < cols {
            w.push(format!("J2 = {} is below the design width {cols}", self.j2));
        }
        w
    }

    fn validate(&self) -> Result<()> {
        if self.j1 == 0 {
            return Err(Error::Config("J1 must be positive".into()));
        }
        if self.sampling == SamplingMode::Chain && self.j2 == 0 {
            return Err(Error::Config("J2 must be positive".into()));
        }
        Ok(())
    }
}

/// Sketch leaf order `w = (n−1, …, 0, N−1, …, n+1)`.
pub fn tr_leaf_modes(order: usize, n: usize) -> Vec<usize> {
    (1..order).map(|t| (n + order - t) % order).collect()
}

/// `Ψ G^{≠n}_{[2]}`, one column per rank pair `overline{r_{n−1} r_n}`.
///
/// Every leaf is CountSketched once; the per-column work is the tree recursion.
pub fn tr_sketch_design(model: &TrModel, n: usize, sketch: &RecursiveSketch) -> Result<Matrix> {
    let big_n = model.order();
    if n >= big_n {
        return Err(Error::InvalidMode {
            mode: n,
            order: big_n,
        });
    }
    if big_n < 2 {
        return Err(Error::Shape("subchain needs at least two cores".into()));
    }
    let modes = tr_leaf_modes(big_n, n);
    let dims = model.dims();
    let want: Vec<usize> = modes.iter().map(|&j| dims[j]).collect();
    if sketch.leaf_dims() != want.as_slice() {
        return Err(Error::Shape(format!(
            "sketch leaf dims {:?} differ from {:?}",
            sketch.leaf_dims(),
            want
        )));
    }
    let m = modes.len();
    // Columns of the cyclic unfolding are overline{trailing leading}.
    let sketched: Vec<Matrix> = modes
        .iter()
        .enumerate()
        .map(|(t, &c)| countsketch_apply(sketch.leaf(t), &model.core_unfold_2(c)))
        .collect::<Result<_>>()?;
    let mut k = vec![1usize; m + 1];
    for t in 1..m {
        k[t] = model.right_rank(modes[t]);
    }
    let (ln, rn) = (model.left_rank(n), model.right_rank(n));
    let pick = |y: &Matrix, cols: &[usize]| -> Matrix {
        let mut out = Matrix::zeros(y.rows(), cols.len());
        for (o, &c) in cols.iter().enumerate() {
            out.col_mut(o).copy_from_slice(y.col(c));
        }
        out
    };
    let mut leaves: Vec<Vec<Matrix>> = sketched.iter().map(|y| vec![y.clone()]).collect();
    if m == 1 {
        let rr = model.right_rank(modes[0]);
        leaves[0] = (0..rn)
            .flat_map(|b| (0..ln).map(move |a| a + rr * b))
            .map(|c| pick(&sketched[0], &[c]))
            .collect();
    } else {
        // First leaf: core n−1 with trailing index a fixed, leading index free.
        let c0 = modes[0];
        let rr0 = model.right_rank(c0);
        leaves[0] = (0..ln)
            .map(|a| {
                pick(
                    &sketched[0],
                    &(0..model.left_rank(c0))
                        .map(|kk| a + rr0 * kk)
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        // Last leaf: core n+1 with leading index b fixed, trailing index free.
        let cl = modes[m - 1];
        let rrl = model.right_rank(cl);
        leaves[m - 1] = (0..rn)
            .map(|b| {
                pick(
                    &sketched[m - 1],
                    &(0..rrl).map(|kk| kk + rrl * b).collect::<Vec<_>>(),
                )
            })
            .collect();
    }
    // Variant order a + L·b is the pair index of the design column.
    let cols = sketch.combine_tr_variants(leaves, &k)?;
    let mut out = Matrix::zeros(sketch.rows(), ln * rn);
    for (j, col) in cols.iter().enumerate() {
        out.col_mut(j).copy_from_slice(col);
    }
    Ok(out)
}

/// Maps `Φ` over `overline{r_{n−1} r_n}` to the `L² × R²` contraction core of mode `n`.
fn phi_core(phi: &Matrix, l: usize, r: usize) -> Matrix {
    Matrix::from_fn(l * l, r * r, |row, col| {
        let (x, y) = (row % l, row / l);
        let (u, v) = (col % r, col / r);
        phi[(pair_index(y, v, l), pair_index(x, u, l))]
    })
}

/// Sampling state for the mode-`n` core solve.
///
/// Each core is replaced by an `L_c² × R_c²` matrix: `S⊗S` for a drawn slice `S`,
/// `Σᵢ Sᵢ⊗Sᵢ` for a summed mode, and the rearranged `Φ/C` at mode `n`. A
/// marginal is the trace of their ring product.
#[derive(Clone, Debug)]
pub struct TrSamplerState {
    n: usize,
    dims: Vec<usize>,
    phi: Matrix,
    c: f64,
    steps: Vec<usize>,
    slices: Vec<Vec<Matrix>>,
    /// `Sᵢ⊗Sᵢ` for every core and slice (empty for mode `n`).
    kron_slices: Vec<Vec<Matrix>>,
    /// `Σᵢ Sᵢ⊗Sᵢ` for every core other than `n`.
    gram_cores: Vec<Matrix>,
    /// Rearranged `Φ/C`.
    phi_core: Matrix,
    /// Ring product of the cores after each step's mode.
    suffix: Vec<Matrix>,
}

impl TrSamplerState {
    pub fn new(model: &TrModel, n: usize, map: &LeverageMap) -> Result<Self> {
        let big_n = model.order();
        if n >= big_n {
            return Err(Error::InvalidMode {
                mode: n,
                order: big_n,
            });
        }
        let (ln, rn) = (model.left_rank(n), model.right_rank(n));
        if map.dim() != ln * rn {
            return Err(Error::Shape(format!(
                "leverage map of dimension {} for {} columns",
                map.dim(),
                ln * rn
            )));
        }
        let slices: Vec<Vec<Matrix>> = (0..big_n).map(|c| model.slices(c)).collect();
        let mut kron_slices = Vec::with_capacity(big_n);
        let mut gram_cores = Vec::with_capacity(big_n);
        for (c, sl) in slices.iter().enumerate() {
            let (l, r) = (model.left_rank(c), model.right_rank(c));
            if c == n {
                kron_slices.push(Vec::new());
                gram_cores.push(Matrix::zeros(l * l, r * r));
                continue;
            }
            let ks: Vec<Matrix> = sl.iter().map(|s| kronecker(&[s, s])).collect();
            let mut g = Matrix::zeros(l * l, r * r);
            for k in &ks {
                g.data_mut()
                    .iter_mut()
                    .zip(k.data())
                    .for_each(|(a, b)| *a += b);
            }
            kron_slices.push(ks);
            gram_cores.push(g);
        }
        let raw = phi_core(map.phi(), ln, rn);
        let ring = |phi_c: &Matrix, from: usize| -> Matrix {
            let l0 = model.left_rank(from % big_n);
            let mut p = Matrix::identity(l0 * l0);
            for c in from..big_n {
                let core = if c == n { phi_c } else { &gram_cores[c] };
                p = p.matmul(core).expect("cyclic ranks are consistent");
            }
            p
        };
        let full = ring(&raw, 0);
        let c: f64 = (0..full.rows()).map(|i| full[(i, i)]).sum();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Degenerate(format!(
                "normalization constant C = {c} is not positive"
            )));
        }
        let scaled = raw.scaled(1.0 / c);
        let steps: Vec<usize> = (0..big_n).filter(|&j| j != n).collect();
        let l0 = model.left_rank(0);
        let suffix = steps
            .iter()
            .map(|&s| {
                if s + 1 < big_n {
                    ring(&scaled, s + 1)
                } else {
                    Matrix::identity(l0 * l0)
                }
            })
            .collect();
        Ok(TrSamplerState {
            n,
            dims: model.dims(),
            phi: map.phi().clone(),
            c,
            steps,
            slices,
            kron_slices,
            gram_cores,
            phi_core: scaled,
            suffix,
        })
    }

    pub fn mode(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn normalization(&self) -> f64 {
        self.c
    }

    /// Contraction core `Σᵢ Sᵢ⊗Sᵢ` of core `c ≠ n`.
    pub fn gram_core(&self, c: usize) -> &Matrix {
        &self.gram_cores[c]
    }

    /// Gram matrix `G⁽ᶜ⁾_{[2]}ᵀ G⁽ᶜ⁾_{[2]}` recovered from the contraction core.
    ///
    /// Entry `(r' + R_c r, k' + R_c k)` equals core entry `(r + L_c k, r' + R_c k')`.
    pub fn gram(&self, c: usize) -> Matrix {
        let g = &self.gram_cores[c];
        let l = (g.rows() as f64).sqrt().round() as usize;
        let r = (g.cols() as f64).sqrt().round() as usize;
        let mut out = Matrix::zeros(l * r, l * r);
        for k in 0..l {
            for rr in 0..l {
                for k2 in 0..r {
                    for r2 in 0..r {
                        out[(r2 + r * rr, k2 + r * k)] = g[(rr + l * k, r2 + r * k2)];
                    }
                }
            }
        }
        out
    }

    /// Unnormalized estimate `ℓ̃ᵢ` of the design row at a multi-index.
    pub fn estimate(&self, multi: &[usize]) -> f64 {
        let big_n = self.dims.len();
        let mut m = self.slices[(self.n + 1) % big_n][multi[(self.n + 1) % big_n]].clone();
        for k in 2..big_n {
            let c = (self.n + k) % big_n;
            m = m
                .matmul(&self.slices[c][multi[c]])
                .expect("cyclic ranks are consistent");
        }
        let (rn, ln) = (m.rows(), m.cols());
        let mut z = vec![0.0; ln * rn];
        for b in 0..rn {
            for a in 0..ln {
                z[pair_index(a, b, ln)] = m[(b, a)];
            }
        }
        quad_form(&self.phi, &z)
    }

    fn core_for(&self, c: usize, drawn: Option<usize>) -> &Matrix {
        if c == self.n {
            &self.phi_core
        } else if let Some(i) = drawn {
            &self.kron_slices[c][i]
        } else {
            &self.gram_cores[c]
        }
    }
}

impl SubindexChain for TrSamplerState {
    /// Ring product of the cores before the next step's mode.
    type Prefix = Matrix;

    fn order(&self) -> usize {
        self.dims.len()
    }

    fn num_steps(&self) -> usize {
        self.steps.len()
    }

    fn step_mode(&self, step: usize) -> usize {
        self.steps[step]
    }

    fn step_size(&self, step: usize) -> usize {
        self.dims[self.steps[step]]
    }

    fn root(&self) -> Matrix {
        if self.n == 0 {
            self.phi_core.clone()
        } else {
            let l0 = self.slices[0][0].rows();
            Matrix::identity(l0 * l0)
        }
    }

    fn masses(&self, prefix: &Matrix, step: usize, out: &mut Vec<f64>) {
        // value(i) = trace(P (Sᵢ⊗Sᵢ) Q) = Σ K(x, y) W(y, x) with W = Q P.
        let w = self.suffix[step].matmul(prefix).expect("ring shapes agree");
        out.clear();
        for k in &self.kron_slices[self.steps[step]] {
            let mut v = 0.0;
            for y in 0..k.cols() {
                let kc = k.col(y);
                for (x, kv) in kc.iter().enumerate() {
                    v += kv * w[(y, x)];
                }
            }
            out.push(v);
        }
    }

    fn extend(&self, prefix: &Matrix, step: usize, index: usize) -> Matrix {
        let c = self.steps[step];
        let mut p = prefix
            .matmul(&self.kron_slices[c][index])
            .expect("ring shapes agree");
        if c + 1 == self.n {
            p = p.matmul(&self.phi_core).expect("ring shapes agree");
        }
        p
    }

    fn row_index(&self, multi: &[usize]) -> usize {
        cyclic_other_index(multi, &self.dims, self.n)
    }
}

/// Normalization constant `C = Σᵢ ℓ̃ᵢ`, the trace of the ring of Gram cores around `Φ`.
pub fn tr_normalization(state: &TrSamplerState) -> f64 {
    state.normalization()
}

/// Marginal probability of the first `prefix.len()` subindices in draw order (ascending modes, `n` skipped).
///
/// Evaluated as one trace of the full ring product.
pub fn tr_marginal(state: &TrSamplerState, prefix: &[usize]) -> Result<f64> {
    if prefix.len() > state.steps.len() {
        return Err(Error::Shape(format!(
            "prefix of length {} exceeds {} steps",
            prefix.len(),
            state.steps.len()
        )));
    }
    let big_n = state.dims.len();
    let mut drawn = vec![None; big_n];
    for (s, &i) in prefix.iter().enumerate() {
        let c = state.steps[s];
        if i >= state.dims[c] {
            return Err(Error::IndexOutOfRange {
                mode: c,
                index: i,
                size: state.dims[c],
            });
        }
        drawn[c] = Some(i);
    }
    let mut p = state.core_for(0, drawn[0]).clone();
    for c in 1..big_n {
        p = p.matmul(state.core_for(c, drawn[c]))?;
    }
    let t: f64 = (0..p.rows()).map(|i| p[(i, i)]).sum();
    Ok(t.max(0.0))
}

/// `J₂` i.i.d. draws by the chain rule over subindices.
pub fn tr_draw_indices<R: Rng + ?Sized>(
    state: &TrSamplerState,
    j2: usize,
    rng: &mut R,
) -> Result<(IndexSample, ChainDiagnostics)> {
    draw_chain(state, j2, rng)
}

/// Weighted design rows `w_j · vec(G⁽ⁿ⁺¹⁾(:,i_{n+1},:) ⋯ G⁽ⁿ⁻¹⁾(:,i_{n−1},:))`.
pub fn tr_sampled_rows(model: &TrModel, n: usize, sample: &IndexSample) -> Result<Matrix> {
    if n >= model.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: model.order(),
        });
    }
    if sample.multi.len() != sample.len() || sample.weights.len() != sample.len() {
        return Err(Error::Shape(
            "sample needs multi-indices and weights for every draw".into(),
        ));
    }
    let dims = model.dims();
    let p = model.left_rank(n) * model.right_rank(n);
    let mut out = Matrix::zeros(sample.len(), p);
    for (j, (multi, &w)) in sample.multi.iter().zip(&sample.weights).enumerate() {
        for (c, (&i, &d)) in multi.iter().zip(&dims).enumerate() {
            if c != n && i >= d {
                return Err(Error::IndexOutOfRange {
                    mode: c,
                    index: i,
                    size: d,
                });
            }
        }
        let row: Vec<f64> = model
            .design_row(n, multi)
            .into_iter()
            .map(|v| v * w)
            .collect();
        out.set_row(j, &row);
    }
    Ok(out)
}

/// Sampled least-squares update of core `n`; returns the new core and the solve record.
///
/// The `(R_{n−1}R_n) × I_n` solution is the transpose of the classical mode-2 unfolding
/// `G₍₂₎`, whose column `a + b·R_{n−1}` holds `G(a, :, b)`.
pub fn tr_sampled_update(
    x: &DenseTensor,
    model: &TrModel,
    n: usize,
    sample: &IndexSample,
    opts: &SolveOptions,
) -> Result<(DenseTensor, LsSolution)> {
    let design = tr_sampled_rows(model, n, sample)?;
    let rhs = gather_weighted_rhs(x, n, sample)?;
    let sol = sampled_least_squares(&design, &rhs, opts)?;
    let core = core_from_unfolding(&sol.x.transpose(), model.left_rank(n), model.right_rank(n))?;
    Ok((core, sol))
}

/// Rows drawn for one solve.
pub(crate) struct Drawn {
    pub sample: IndexSample,
    pub diag: ChainDiagnostics,
    pub normalization: f64,
}

/// Sampled TR-ALS loop; `draw(model, n, iteration)` supplies each solve's rows.
pub(crate) fn run_sampled_tr<F>(
    x: &DenseTensor,
    mut model: TrModel,
    opts: &AlsOptions,
    solve: &SolveOptions,
    canonicalize: bool,
    mut draw: F,
) -> Result<(TrModel, AlsReport)>
where
    F: FnMut(&TrModel, usize, usize) -> Result<Drawn>,
{
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
        let mut diag = SweepDiagnostics {
            iteration: it,
            ..Default::default()
        };
        for n in 0..model.order() {
            if canonicalize {
                canonicalize_subchain(&mut model, n)?;
            }
            let mut step = || -> Result<(DenseTensor, f64, LsSolution, ChainDiagnostics)> {
                let d = draw(&model, n, it)?;
                let (g, sol) = tr_sampled_update(x, &model, n, &d.sample, solve)?;
                Ok((g, d.normalization, sol, d.diag))
            };
            let (g, c, sol, cd) = step().context_with(|| format!("TR mode {n}, iteration {it}"))?;
            diag.clamped += cd.clamped;
            diag.retries += cd.retries;
            diag.normalization.push(c);
            diag.rank_deficient_solves += usize::from(sol.rank_deficient);
            model.set_core(n, g)?;
        }
        if lp.finish_sweep(diag, &model, x, start)? {
            break;
        }
    }
    Ok((model, lp.into_report()))
}

/// TR-ALS-ES from the configured initialization.
pub fn tr_als_es(
    x: &DenseTensor,
    ranks: &[usize],
    cfg: &TrEsConfig,
) -> Result<(TrModel, AlsReport)> {
    let model = init_tr(x, ranks, cfg.als.init, derive_seed(cfg.als.seed, &[1]))?;
    tr_als_es_from(x, model, cfg)
}

/// TR-ALS-ES from a given initial model.
pub fn tr_als_es_from(
    x: &DenseTensor,
    model: TrModel,
    cfg: &TrEsConfig,
) -> Result<(TrModel, AlsReport)> {
    cfg.validate()?;
    let warnings = cfg.warnings(&model);
    let seed = cfg.als.seed;
    let dims = x.dims().to_vec();
    let draw = |m: &TrModel, n: usize, it: usize| -> Result<Drawn> {
        let leaf_dims: Vec<usize> = tr_leaf_modes(m.order(), n)
            .iter()
            .map(|&j| dims[j])
            .collect();
        let sketch = RecursiveSketch::new(
            cfg.j1,
            &leaf_dims,
            derive_seed(seed, &[21, it as u64, n as u64]),
        )?
        .with_convolution(cfg.convolution);
        let y = tr_sketch_design(m, n, &sketch)?;
        let map = estimate_leverage_map(&y)?;
        let state = TrSamplerState::new(m, n, &map)?;
        let (sample, diag) = match cfg.sampling {
            SamplingMode::Chain => {
                let mut rng = rng_for(seed, &[22, it as u64, n as u64]);
                tr_draw_indices(&state, cfg.j2, &mut rng)?
            }
            SamplingMode::Exhaustive => (
                IndexSample::exhaustive(&dims, n, |idx| cyclic_other_index(idx, &dims, n)),
                ChainDiagnostics::default(),
            ),
        };
        Ok(Drawn {
            sample,
            diag,
            normalization: state.normalization(),
        })
    };
    let (model, mut report) = run_sampled_tr(x, model, &cfg.als, &cfg.solve, true, draw)?;
    report.warnings = warnings;
    Ok((model, report))
}
