use std::time::Instant;

use rand::Rng;

use super::als::init_cp;
use crate::als::{gather_weighted_rhs, AlsOptions, AlsReport, SweepDiagnostics, SweepLoop};
use crate::error::{Error, Result, ResultExt};
use crate::leverage::{
    draw_chain, estimate_leverage_map, quad_form, sampled_least_squares, ChainDiagnostics,
    IndexSample, LeverageMap, LsSolution, SolveOptions, SubindexChain,
};
use crate::seed::{derive_seed, rng_for};
use crate::sketch::{ConvolutionMode, RecursiveSketch};
use crate::tensor::{classical_other_index, CpModel, DenseTensor, Matrix};

/// How each least-squares solve picks its rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplingMode {
    /// `J₂` draws from the conditional subindex chain.
    #[default]
    Chain,
    /// Every design row once with unit weight (test scale).
    Exhaustive,
}

/// Configuration of CP-ALS-ES.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpEsConfig {
    /// Recursive sketch dimension `J₁`.
    pub j1: usize,
    /// Sampled rows per solve `J₂`.
    pub j2: usize,
    pub als: AlsOptions,
    pub convolution: ConvolutionMode,
    pub sampling: SamplingMode,
    pub solve: SolveOptions,
}

impl CpEsConfig {
    pub fn new(j1: usize, j2: usize) -> Self {
        CpEsConfig {
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

    /// Soft warnings for sizes below `J₁ ≥ R²` and `J₂ ≥ R`.
    pub fn warnings(&self, rank: usize) -> Vec<String> {
        let mut w = Vec::new();
        if self.j1 < rank * rank {
            w.push(format!("J1 = {} is below R^2 = {}", self.j1, rank * rank));
        }
        if self.sampling == SamplingMode::Chain && self.j2 < rank {
            w.push(format!("J2 = {} is below R = {rank}", self.j2));
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

/// Sketch leaf order `v = (N−1, …, n+1, n−1, …, 0)`.
pub fn cp_leaf_modes(order: usize, n: usize) -> Vec<usize> {
    (0..order).rev().filter(|&j| j != n).collect()
}

/// `Ψ A^{≠n}` computed factor by factor.
pub fn cp_sketch_design(model: &CpModel, n: usize, sketch: &RecursiveSketch) -> Result<Matrix> {
    if n >= model.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: model.order(),
        });
    }
    let modes = cp_leaf_modes(model.order(), n);
    let dims = model.dims();
    let want: Vec<usize> = modes.iter().map(|&j| dims[j]).collect();
    if sketch.leaf_dims() != want.as_slice() {
        return Err(Error::Shape(format!(
            "sketch leaf dims {:?} differ from {:?}",
            sketch.leaf_dims(),
            want
        )));
    }
    let mats: Vec<&Matrix> = modes.iter().map(|&j| model.factor(j)).collect();
    sketch.apply_kron_columns(&mats)
}

/// Sampling state for the mode-`n` solve: `Φ`, the Gram matrices and `C`.
#[derive(Clone, Debug)]
pub struct CpSamplerState {
    n: usize,
    dims: Vec<usize>,
    factors: Vec<Matrix>,
    grams: Vec<Matrix>,
    phi: Matrix,
    c: f64,
    steps: Vec<usize>,
    /// `Φ/C ⊛` Grams of the modes drawn after each step.
    weights: Vec<Matrix>,
}

impl CpSamplerState {
    pub fn new(model: &CpModel, n: usize, map: &LeverageMap) -> Result<Self> {
        let grams: Vec<Matrix> = model.factors().iter().map(Matrix::gram).collect();
        Self::with_grams(model, n, map, &grams)
    }

    /// Like [`CpSamplerState::new`] with cached Gram matrices (entry `n` unused).
    pub fn with_grams(
        model: &CpModel,
        n: usize,
        map: &LeverageMap,
        grams: &[Matrix],
    ) -> Result<Self> {
        let order = model.order();
        if n >= order {
            return Err(Error::InvalidMode { mode: n, order });
        }
        let r = model.rank();
        if map.dim() != r {
            return Err(Error::Shape(format!(
                "leverage map of dimension {} for rank {r}",
                map.dim()
            )));
        }
        if grams.len() != order {
            return Err(Error::Shape(format!(
                "{} Gram matrices for order {order}",
                grams.len()
            )));
        }
        let steps: Vec<usize> = (0..order).filter(|&j| j != n).collect();
        let mut weights = vec![Matrix::zeros(r, r); steps.len()];
        let mut acc = map.phi().clone();
        for s in (0..steps.len()).rev() {
            weights[s] = acc.clone();
            acc = acc.hadamard(&grams[steps[s]])?;
        }
        let c: f64 = acc.data().iter().sum();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Degenerate(format!(
                "normalization constant C = {c} is not positive"
            )));
        }
        for w in &mut weights {
            w.data_mut().iter_mut().for_each(|v| *v /= c);
        }
        Ok(CpSamplerState {
            n,
            dims: model.dims(),
            factors: model.factors().to_vec(),
            grams: grams.to_vec(),
            phi: map.phi().clone(),
            c,
            steps,
            weights,
        })
    }

    pub fn mode(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn grams(&self) -> &[Matrix] {
        &self.grams
    }

    pub fn normalization(&self) -> f64 {
        self.c
    }

    /// Unnormalized estimate `ℓ̃ᵢ` of the design row at a multi-index.
    pub fn estimate(&self, multi: &[usize]) -> f64 {
        let mut row = vec![1.0; self.phi.rows()];
        for &j in &self.steps {
            for (r, v) in row.iter_mut().enumerate() {
                *v *= self.factors[j][(multi[j], r)];
            }
        }
        quad_form(&self.phi, &row)
    }
}

impl SubindexChain for CpSamplerState {
    /// Hadamard product of the rank-1 factors `a aᵀ` of the drawn subindices.
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
        let r = self.phi.rows();
        Matrix::from_fn(r, r, |_, _| 1.0)
    }

    fn masses(&self, prefix: &Matrix, step: usize, out: &mut Vec<f64>) {
        let w = prefix
            .hadamard(&self.weights[step])
            .expect("prefix has rank shape");
        let a = &self.factors[self.steps[step]];
        out.clear();
        let mut row = vec![0.0; a.cols()];
        for i in 0..a.rows() {
            for (r, v) in row.iter_mut().enumerate() {
                *v = a[(i, r)];
            }
            out.push(quad_form(&w, &row));
        }
    }

    fn extend(&self, prefix: &Matrix, step: usize, index: usize) -> Matrix {
        let a = &self.factors[self.steps[step]];
        let r = a.cols();
        Matrix::from_fn(r, r, |p, q| prefix[(p, q)] * a[(index, p)] * a[(index, q)])
    }

    fn row_index(&self, multi: &[usize]) -> usize {
        classical_other_index(multi, &self.dims, self.n)
    }
}

/// Normalization constant `C = Σ_{r,k} Φ(r,k) ∏_{j≠n} (A⁽ʲ⁾ᵀA⁽ʲ⁾)(r,k)`.
pub fn cp_normalization(state: &CpSamplerState) -> f64 {
    state.normalization()
}

/// Marginal probability of the first `prefix.len()` subindices in draw order (ascending modes, `n` skipped).
///
/// Evaluated directly from `Φ`, the factor rows and the Gram matrices.
pub fn cp_marginal(state: &CpSamplerState, prefix: &[usize]) -> Result<f64> {
    if prefix.len() > state.steps.len() {
        return Err(Error::Shape(format!(
            "prefix of length {} exceeds {} steps",
            prefix.len(),
            state.steps.len()
        )));
    }
    let r = state.phi.rows();
    let mut total = 0.0;
    for k in 0..r {
        for p in 0..r {
            let mut t = state.phi[(p, k)];
            for (s, &j) in state.steps.iter().enumerate() {
                if let Some(&i) = prefix.get(s) {
                    if i >= state.dims[j] {
                        return Err(Error::IndexOutOfRange {
                            mode: j,
                            index: i,
                            size: state.dims[j],
                        });
                    }
                    let a = &state.factors[j];
                    t *= a[(i, p)] * a[(i, k)];
                } else {
                    t *= state.grams[j][(p, k)];
                }
            }
            total += t;
        }
    }
    Ok((total / state.c).max(0.0))
}

/// `J₂` i.i.d. draws by the chain rule over subindices.
pub fn cp_draw_indices<R: Rng + ?Sized>(
    state: &CpSamplerState,
    j2: usize,
    rng: &mut R,
) -> Result<(IndexSample, ChainDiagnostics)> {
    draw_chain(state, j2, rng)
}

/// Sampled least-squares update of factor `n`; returns the new `A⁽ⁿ⁾` and the solve record.
pub fn cp_sampled_update(
    x: &DenseTensor,
    model: &CpModel,
    n: usize,
    sample: &IndexSample,
    opts: &SolveOptions,
) -> Result<(Matrix, LsSolution)> {
    if n >= model.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: model.order(),
        });
    }
    let rhs = gather_weighted_rhs(x, n, sample)?;
    let mut design = Matrix::zeros(sample.len(), model.rank());
    for (j, (multi, &w)) in sample.multi.iter().zip(&sample.weights).enumerate() {
        let row: Vec<f64> = model
            .design_row(n, multi)
            .into_iter()
            .map(|v| v * w)
            .collect();
        design.set_row(j, &row);
    }
    let sol = sampled_least_squares(&design, &rhs, opts)?;
    Ok((sol.x.transpose(), sol))
}

/// Rows drawn for one solve.
pub(crate) struct Drawn {
    pub sample: IndexSample,
    pub diag: ChainDiagnostics,
    pub normalization: f64,
}

/// Sampled CP-ALS loop; `draw(model, grams, n, iteration)` supplies each solve's rows.
pub(crate) fn run_sampled_cp<F>(
    x: &DenseTensor,
    mut model: CpModel,
    opts: &AlsOptions,
    solve: &SolveOptions,
    mut draw: F,
) -> Result<(CpModel, AlsReport)>
where
    F: FnMut(&CpModel, &[Matrix], usize, usize) -> Result<Drawn>,
{
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
        let mut diag = SweepDiagnostics {
            iteration: it,
            ..Default::default()
        };
        for n in 0..model.order() {
            let mut step = || -> Result<(Matrix, f64, LsSolution, ChainDiagnostics)> {
                let d = draw(&model, &grams, n, it)?;
                let (a, sol) = cp_sampled_update(x, &model, n, &d.sample, solve)?;
                Ok((a, d.normalization, sol, d.diag))
            };
            let (a, c, sol, cd) = step().context_with(|| format!("CP mode {n}, iteration {it}"))?;
            diag.clamped += cd.clamped;
            diag.retries += cd.retries;
            diag.normalization.push(c);
            diag.rank_deficient_solves += usize::from(sol.rank_deficient);
            grams[n] = a.gram();
            model.set_factor(n, a)?;
        }
        if lp.finish_sweep(diag, &model, x, start)? {
            break;
        }
    }
    Ok((model, lp.into_report()))
}

/// CP-ALS-ES from the configured initialization.
pub fn cp_als_es(x: &DenseTensor, r: usize, cfg: &CpEsConfig) -> Result<(CpModel, AlsReport)> {
    let model = init_cp(x, r, cfg.als.init, derive_seed(cfg.als.seed, &[1]))?;
    cp_als_es_from(x, model, cfg)
}

/// CP-ALS-ES from a given initial model.
pub fn cp_als_es_from(
    x: &DenseTensor,
    model: CpModel,
    cfg: &CpEsConfig,
) -> Result<(CpModel, AlsReport)> {
    cfg.validate()?;
    let warnings = cfg.warnings(model.rank());
    let seed = cfg.als.seed;
    let dims = x.dims().to_vec();
    let draw = |m: &CpModel, grams: &[Matrix], n: usize, it: usize| -> Result<Drawn> {
        let leaf_dims: Vec<usize> = cp_leaf_modes(m.order(), n)
            .iter()
            .map(|&j| dims[j])
            .collect();
        let sketch = RecursiveSketch::new(
            cfg.j1,
            &leaf_dims,
            derive_seed(seed, &[11, it as u64, n as u64]),
        )?
        .with_convolution(cfg.convolution);
        let y = cp_sketch_design(m, n, &sketch)?;
        let map = estimate_leverage_map(&y)?;
        let state = CpSamplerState::with_grams(m, n, &map, grams)?;
        let (sample, diag) = match cfg.sampling {
            SamplingMode::Chain => {
                let mut rng = rng_for(seed, &[12, it as u64, n as u64]);
                cp_draw_indices(&state, cfg.j2, &mut rng)?
            }
            SamplingMode::Exhaustive => (
                IndexSample::exhaustive(&dims, n, |idx| classical_other_index(idx, &dims, n)),
                ChainDiagnostics::default(),
            ),
        };
        Ok(Drawn {
            sample,
            diag,
            normalization: state.normalization(),
        })
    };
    let (model, mut report) = run_sampled_cp(x, model, &cfg.als, &cfg.solve, draw)?;
    report.warnings = warnings;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leverage::chain_distribution;
    use crate::tensor::TensorModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_model() -> CpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = |r: usize, rng: &mut ChaCha8Rng| {
            Matrix::from_fn(r, 2, |_, _| rng.random_range(-1.0..1.0))
        };
        CpModel::new(vec![f(2, &mut rng), f(3, &mut rng), f(2, &mut rng)]).unwrap()
    }

    #[test]
    fn chain_distribution_is_normalized_estimate() {
        let model = small_model();
        let phi = Matrix::from_rows(&[&[1.0, 0.2], &[0.2, 0.5]]);
        let map = LeverageMap::from_phi(phi).unwrap();
        for n in 0..3 {
            let st = CpSamplerState::new(&model, n, &map).unwrap();
            let design = model.design_matrix(n).unwrap();
            let est: Vec<f64> = (0..design.rows())
                .map(|i| map.score(design.row(i).as_slice()))
                .collect();
            let c: f64 = est.iter().sum();
            assert!((st.normalization() - c).abs() < 1e-12);
            let (q, _) = chain_distribution(&st);
            for (a, b) in q.iter().zip(&est) {
                assert!((a - b / c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_prefix_marginal_is_one() {
        let model = small_model();
        let map = LeverageMap::from_phi(Matrix::identity(2)).unwrap();
        let st = CpSamplerState::new(&model, 1, &map).unwrap();
        assert!((cp_marginal(&st, &[]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_es_matches_exact_sweep() {
        let model = small_model();
        let x = model.reconstruct();
        let init = init_cp(&x, 2, crate::als::Init::Gaussian, 4).unwrap();
        let opts = AlsOptions::default().with_iters(1);
        let (exact, _) = super::super::als::cp_als_from(&x, init.clone(), &opts).unwrap();
        let cfg = CpEsConfig::new(16, 0)
            .with_als(opts)
            .with_sampling(SamplingMode::Exhaustive);
        let (es, _) = cp_als_es_from(&x, init, &cfg).unwrap();
        for j in 0..3 {
            assert!(es.factor(j).max_abs_diff(exact.factor(j)) < 1e-8);
        }
    }
}
