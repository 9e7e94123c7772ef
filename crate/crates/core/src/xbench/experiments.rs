use std::time::Instant;

use super::dist::{exact_sampling_distribution, kl_divergence};
use super::report::ExperimentReport;
use super::synth::{synth_cp, synth_tr, DEFAULT_SYNTH_LIMIT};
use crate::als::{AlsOptions, AlsReport, ErrorEval, Init};
use crate::baselines::{cp_arls_lev_from, tr_als_sampled_from, ProductSamplerState};
use crate::cp::{
    cp_als_es_from, cp_als_with, cp_leaf_modes, cp_sketch_design, init_cp, CpEsConfig,
    CpSamplerState,
};
use crate::error::{Error, Result};
use crate::leverage::{chain_distribution, estimate_leverage_map, SolveOptions, SubindexChain};
use crate::seed::derive_seed;
use crate::sketch::RecursiveSketch;
use crate::tensor::{CpModel, DenseTensor, TensorModel, TrModel};
use crate::tr::{
    init_tr, tr_als_es_from, tr_als_with, tr_leaf_modes, tr_sketch_design, TrEsConfig,
    TrSamplerState,
};

/// Decomposition family and target rank(s).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decomposition {
    Cp {
        rank: usize,
    },
    /// `ranks[c]` is the trailing rank of core `c`.
    Tr {
        ranks: Vec<usize>,
    },
}

impl Decomposition {
    fn label(&self) -> String {
        match self {
            Decomposition::Cp { rank } => format!("cp rank={rank}"),
            Decomposition::Tr { ranks } => format!("tr ranks={ranks:?}"),
        }
    }
}

/// Settings of the sampling-distribution comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionConfig {
    pub decomposition: Decomposition,
    /// Mode whose least-squares problem is studied; defaults to the last.
    pub mode: Option<usize>,
    pub j1_grid: Vec<usize>,
    /// Sketch seeds; one report per (method, seed).
    pub seeds: Vec<u64>,
    /// Sweeps of the exact ALS fit that produces the frozen model.
    pub fit_iters: usize,
    pub fit_seed: u64,
}

/// KL divergences of the ES and product distributions from the exact one for a frozen model.
pub trait FrozenDesign {
    fn exact_distribution(&self, n: usize) -> Result<Vec<f64>>;
    fn baseline_distribution(&self, n: usize) -> Result<Vec<f64>>;
    fn es_distribution(&self, n: usize, j1: usize, seed: u64) -> Result<(Vec<f64>, usize)>;
}

fn check_grid<C: SubindexChain>(c: &C, q: &[f64]) -> Result<()> {
    let rows: usize = (0..c.num_steps()).map(|s| c.step_size(s)).product();
    if rows != q.len() {
        return Err(Error::Shape(format!(
            "distribution over {} rows, expected {rows}",
            q.len()
        )));
    }
    Ok(())
}

impl FrozenDesign for CpModel {
    fn exact_distribution(&self, n: usize) -> Result<Vec<f64>> {
        exact_sampling_distribution(&self.design_matrix(n)?)
    }

    fn baseline_distribution(&self, n: usize) -> Result<Vec<f64>> {
        let st = ProductSamplerState::for_cp(self, n)?;
        let (q, _) = chain_distribution(&st);
        check_grid(&st, &q)?;
        Ok(q)
    }

    fn es_distribution(&self, n: usize, j1: usize, seed: u64) -> Result<(Vec<f64>, usize)> {
        let dims = self.dims();
        let leaf: Vec<usize> = cp_leaf_modes(self.order(), n)
            .iter()
            .map(|&j| dims[j])
            .collect();
        let sketch = RecursiveSketch::new(j1, &leaf, seed)?;
        let map = estimate_leverage_map(&cp_sketch_design(self, n, &sketch)?)?;
        let st = CpSamplerState::new(self, n, &map)?;
        let (q, d) = chain_distribution(&st);
        Ok((q, d.clamped))
    }
}

impl FrozenDesign for TrModel {
    fn exact_distribution(&self, n: usize) -> Result<Vec<f64>> {
        exact_sampling_distribution(&self.subchain_unfold_2(n)?)
    }

    fn baseline_distribution(&self, n: usize) -> Result<Vec<f64>> {
        let st = ProductSamplerState::for_tr(self, n)?;
        let (q, _) = chain_distribution(&st);
        check_grid(&st, &q)?;
        Ok(q)
    }

    fn es_distribution(&self, n: usize, j1: usize, seed: u64) -> Result<(Vec<f64>, usize)> {
        let dims = self.dims();
        let leaf: Vec<usize> = tr_leaf_modes(self.order(), n)
            .iter()
            .map(|&j| dims[j])
            .collect();
        let sketch = RecursiveSketch::new(j1, &leaf, seed)?;
        let map = estimate_leverage_map(&tr_sketch_design(self, n, &sketch)?)?;
        let st = TrSamplerState::new(self, n, &map)?;
        let (q, d) = chain_distribution(&st);
        Ok((q, d.clamped))
    }
}

/// Reports of the distribution comparison for an already fitted model.
pub fn distribution_reports<M: FrozenDesign>(
    model: &M,
    n: usize,
    j1_grid: &[usize],
    seeds: &[u64],
    label: &str,
) -> Result<Vec<ExperimentReport>> {
    let p = model.exact_distribution(n)?;
    let mut out = Vec::new();
    let t = Instant::now();
    let qb = model.baseline_distribution(n)?;
    out.push(ExperimentReport {
        experiment: "distribution".into(),
        method: "product-baseline".into(),
        seconds: t.elapsed().as_secs_f64(),
        metric_name: "kl".into(),
        metric: Some(kl_divergence(&p, &qb)?),
        config: format!("{label} mode={n}"),
        ..Default::default()
    });
    for &seed in seeds {
        for &j1 in j1_grid {
            let t = Instant::now();
            let (q, clamped) = model.es_distribution(n, j1, derive_seed(seed, &[60, j1 as u64]))?;
            out.push(ExperimentReport {
                experiment: "distribution".into(),
                method: format!("es-j1-{j1}"),
                seed,
                seconds: t.elapsed().as_secs_f64(),
                metric_name: "kl".into(),
                metric: Some(kl_divergence(&p, &q)?),
                clamped,
                config: format!("{label} mode={n} j1={j1}"),
                ..Default::default()
            });
        }
    }
    Ok(out)
}

/// Fits an exact ALS model, freezes it and compares sampling distributions for one solve.
pub fn run_distribution_experiment(
    x: &DenseTensor,
    cfg: &DistributionConfig,
) -> Result<Vec<ExperimentReport>> {
    let n = cfg.mode.unwrap_or(x.order() - 1);
    if n >= x.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: x.order(),
        });
    }
    let opts = AlsOptions::default()
        .with_iters(cfg.fit_iters)
        .with_seed(cfg.fit_seed);
    let label = cfg.decomposition.label();
    match &cfg.decomposition {
        Decomposition::Cp { rank } => {
            let (m, _) = cp_als_with(x, *rank, &opts)?;
            distribution_reports(&m, n, &cfg.j1_grid, &cfg.seeds, &label)
        }
        Decomposition::Tr { ranks } => {
            let (m, _) = tr_als_with(x, ranks, &opts)?;
            distribution_reports(&m, n, &cfg.j1_grid, &cfg.seeds, &label)
        }
    }
}

/// Settings of a planted-model recovery run (ES versus the product baseline).
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryConfig {
    pub dims: Vec<usize>,
    pub decomposition: Decomposition,
    pub spike: f64,
    pub noise_sd: f64,
    pub j1: usize,
    pub j2: usize,
    pub j2_baseline: usize,
    pub iters: usize,
    pub seed: u64,
    pub error_eval: ErrorEval,
    pub max_entries: usize,
    /// Run the two arms on separate threads.
    pub parallel: bool,
}

impl RecoveryConfig {
    /// 10-way, `I = 6`, rank-4 planted CP instance with spike 4 and noise 0.01.
    pub fn planted_cp(seed: u64) -> Self {
        RecoveryConfig {
            dims: vec![6; 10],
            decomposition: Decomposition::Cp { rank: 4 },
            spike: 4.0,
            noise_sd: 0.01,
            j1: 1000,
            j2: 50,
            j2_baseline: 50,
            iters: 20,
            seed,
            error_eval: ErrorEval::Auto,
            max_entries: DEFAULT_SYNTH_LIMIT,
            parallel: false,
        }
    }

    /// 8-way, `I = 6`, ranks 3 planted TR instance with spike 3 and noise 0.01.
    pub fn planted_tr(seed: u64) -> Self {
        RecoveryConfig {
            dims: vec![6; 8],
            decomposition: Decomposition::Tr { ranks: vec![3; 8] },
            spike: 3.0,
            noise_sd: 0.01,
            j1: 10_000,
            j2: 1000,
            j2_baseline: 1000,
            iters: 20,
            seed,
            error_eval: ErrorEval::Auto,
            max_entries: DEFAULT_SYNTH_LIMIT,
            parallel: false,
        }
    }

    fn echo(&self) -> String {
        format!(
            "{} dims={:?} spike={} noise={} j1={} j2={} j2_baseline={} iters={}",
            self.decomposition.label(),
            self.dims,
            self.spike,
            self.noise_sd,
            self.j1,
            self.j2,
            self.j2_baseline,
            self.iters
        )
    }
}

fn arm_report(
    method: &str,
    cfg: &RecoveryConfig,
    x: &DenseTensor,
    model: &dyn TensorModel,
    rep: &AlsReport,
) -> Result<ExperimentReport> {
    Ok(ExperimentReport {
        experiment: "recovery".into(),
        method: method.into(),
        seed: cfg.seed,
        seconds: rep.seconds,
        final_rel_error: Some(model.rel_error(x)?),
        metric_name: "rel_error".into(),
        metric: rep.final_error(),
        error_trace: rep.error_trace(),
        clamped: rep.total_clamped(),
        normalization: rep
            .sweeps
            .iter()
            .flat_map(|s| s.normalization.iter().copied())
            .collect(),
        config: cfg.echo(),
    })
}

fn run_arms<A, B>(
    parallel: bool,
    a: A,
    b: B,
) -> (Result<ExperimentReport>, Result<ExperimentReport>)
where
    A: FnOnce() -> Result<ExperimentReport> + Send,
    B: FnOnce() -> Result<ExperimentReport> + Send,
{
    if parallel {
        std::thread::scope(|s| {
            let hb = s.spawn(b);
            let ra = a();
            let rb = hb
                .join()
                .unwrap_or_else(|_| Err(Error::Config("baseline arm panicked".into())));
            (ra, rb)
        })
    } else {
        let ra = a();
        (ra, b())
    }
}

/// Generates the planted instance, builds one range-finder initialization and runs both arms from it.
///
/// The final relative error of each arm is exact; the trace follows `error_eval`.
pub fn run_recovery_experiment(cfg: &RecoveryConfig) -> Result<Vec<ExperimentReport>> {
    let opts = AlsOptions {
        max_iters: cfg.iters,
        tol: 0.0,
        seed: cfg.seed,
        init: Init::RangeFinder,
        error_eval: cfg.error_eval,
        size_limit: usize::MAX,
    };
    let solve = SolveOptions::default();
    let init_seed = derive_seed(cfg.seed, &[70]);
    let (ra, rb) = match &cfg.decomposition {
        Decomposition::Cp { rank } => {
            let (x, _) = synth_cp(
                &cfg.dims,
                *rank,
                cfg.spike,
                cfg.noise_sd,
                cfg.seed,
                cfg.max_entries,
            )?;
            let init = init_cp(&x, *rank, Init::RangeFinder, init_seed)?;
            let es_cfg = CpEsConfig::new(cfg.j1, cfg.j2).with_als(opts);
            let (x, i1, i2) = (&x, init.clone(), init);
            run_arms(
                cfg.parallel,
                || {
                    let (m, rep) = cp_als_es_from(x, i1, &es_cfg)?;
                    arm_report("cp-als-es", cfg, x, &m, &rep)
                },
                || {
                    let (m, rep) = cp_arls_lev_from(x, i2, cfg.j2_baseline, &opts, &solve)?;
                    arm_report("cp-arls-lev", cfg, x, &m, &rep)
                },
            )
        }
        Decomposition::Tr { ranks } => {
            let (x, _) = synth_tr(
                &cfg.dims,
                ranks,
                cfg.spike,
                cfg.noise_sd,
                cfg.seed,
                cfg.max_entries,
            )?;
            let init = init_tr(&x, ranks, Init::RangeFinder, init_seed)?;
            let es_cfg = TrEsConfig::new(cfg.j1, cfg.j2).with_als(opts);
            let (x, i1, i2) = (&x, init.clone(), init);
            run_arms(
                cfg.parallel,
                || {
                    let (m, rep) = tr_als_es_from(x, i1, &es_cfg)?;
                    arm_report("tr-als-es", cfg, x, &m, &rep)
                },
                || {
                    let (m, rep) = tr_als_sampled_from(x, i2, cfg.j2_baseline, &opts, &solve)?;
                    arm_report("tr-als-sampled", cfg, x, &m, &rep)
                },
            )
        }
    };
    Ok(vec![ra?, rb?])
}
