use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::report::ExperimentReport;
use crate::als::{AlsOptions, AlsReport, Init};
use crate::baselines::{cp_arls_lev_from, tr_als_sampled_from};
use crate::cp::{cp_als_es_from, cp_als_from, gram_product, init_cp, mttkrp, CpEsConfig};
use crate::error::{Error, Result};
use crate::leverage::{solve_normal_equations, SolveOptions};
use crate::seed::{derive_seed, rng_for};
use crate::tensor::{CpModel, DenseTensor, Matrix, TensorModel, TrModel};
use crate::tr::{exact_core_update, init_tr, tr_als_es_from, tr_als_from, TrEsConfig};

/// Decomposition used to extract features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMethod {
    CpExact,
    CpEs,
    CpArlsLev,
    TrExact,
    TrEs,
    TrSampled,
}

impl FeatureMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMethod::CpExact => "cp-als",
            FeatureMethod::CpEs => "cp-als-es",
            FeatureMethod::CpArlsLev => "cp-arls-lev",
            FeatureMethod::TrExact => "tr-als",
            FeatureMethod::TrEs => "tr-als-es",
            FeatureMethod::TrSampled => "tr-als-sampled",
        }
    }

    pub fn is_cp(&self) -> bool {
        matches!(
            self,
            FeatureMethod::CpExact | FeatureMethod::CpEs | FeatureMethod::CpArlsLev
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub method: FeatureMethod,
    pub rank: usize,
    /// TR ranks; `ranks[c]` is the trailing rank of core `c`.
    pub ranks: Vec<usize>,
    /// Mode indexing the samples; defaults to the last.
    pub sample_mode: Option<usize>,
    pub j1: usize,
    pub j2: usize,
    pub iters: usize,
    pub seed: u64,
    pub folds: usize,
}

/// A fitted model of either family.
#[derive(Clone, Debug, PartialEq)]
pub enum FittedModel {
    Cp(CpModel),
    Tr(TrModel),
}

impl FittedModel {
    /// Feature matrix of `mode`: the CP factor, or the classical mode-2 unfolding of the TR core.
    pub fn features(&self, mode: usize) -> Matrix {
        match self {
            FittedModel::Cp(m) => m.factor(mode).clone(),
            FittedModel::Tr(m) => m.core(mode).classical_unfold(1).expect("cores are 3-way"),
        }
    }

    pub fn as_model(&self) -> &dyn TensorModel {
        match self {
            FittedModel::Cp(m) => m,
            FittedModel::Tr(m) => m,
        }
    }
}

/// One integer label per line; blank lines are skipped.
pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<i64>()
                .map_err(|e| Error::Format(format!("bad label {l:?}: {e}")))
        })
        .collect()
}

/// Fold of every sample: within each class a seeded shuffle, then round-robin over folds.
pub fn stratified_folds(labels: &[i64], folds: usize, seed: u64) -> Vec<usize> {
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = rng_for(seed, &[80]);
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[i] = next % folds;
            next += 1;
        }
    }
    out
}

/// Euclidean 1-NN accuracy under `folds`-fold stratified cross-validation.
///
/// With `folds` equal to the sample count this is leave-one-out.
pub fn knn_cv_accuracy(features: &Matrix, labels: &[i64], folds: usize, seed: u64) -> Result<f64> {
    let n = features.rows();
    if labels.len() != n {
        return Err(Error::Config(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if folds < 2 || folds > n {
        return Err(Error::Config(format!(
            "fold count {folds} must be in 2..={n}"
        )));
    }
    let fold = if folds == n {
        (0..n).collect()
    } else {
        stratified_folds(labels, folds, seed)
    };
    let rows: Vec<Vec<f64>> = (0..n).map(|i| features.row(i)).collect();
    let mut correct = 0;
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if fold[j] == fold[i] {
                continue;
            }
            let d: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        if best.1 != usize::MAX && labels[best.1] == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}

/// Decomposes `x` with the configured method.
pub fn fit_model(x: &DenseTensor, cfg: &FeatureConfig) -> Result<(FittedModel, AlsReport)> {
    let opts = AlsOptions::default()
        .with_iters(cfg.iters)
        .with_seed(cfg.seed)
        .with_tol(0.0);
    let init_seed = derive_seed(cfg.seed, &[1]);
    let solve = SolveOptions::default();
    if cfg.method.is_cp() {
        let init = init_cp(x, cfg.rank, Init::Gaussian, init_seed)?;
        let (m, rep) = match cfg.method {
            FeatureMethod::CpExact => cp_als_from(x, init, &opts)?,
            FeatureMethod::CpEs => {
                cp_als_es_from(x, init, &CpEsConfig::new(cfg.j1, cfg.j2).with_als(opts))?
            }
            _ => cp_arls_lev_from(x, init, cfg.j2, &opts, &solve)?,
        };
        Ok((FittedModel::Cp(m), rep))
    } else {
        let init = init_tr(x, &cfg.ranks, Init::Gaussian, init_seed)?;
        let (m, rep) = match cfg.method {
            FeatureMethod::TrExact => tr_als_from(x, init, &opts)?,
            FeatureMethod::TrEs => {
                tr_als_es_from(x, init, &TrEsConfig::new(cfg.j1, cfg.j2).with_als(opts))?
            }
            _ => tr_als_sampled_from(x, init, cfg.j2, &opts, &solve)?,
        };
        Ok((FittedModel::Tr(m), rep))
    }
}

/// Decomposes, extracts the sample-mode features and scores them by 1-NN cross-validation.
pub fn run_feature_extraction(
    x: &DenseTensor,
    labels: &[i64],
    cfg: &FeatureConfig,
) -> Result<(ExperimentReport, FittedModel)> {
    let mode = cfg.sample_mode.unwrap_or(x.order() - 1);
    if mode >= x.order() {
        return Err(Error::InvalidMode {
            mode,
            order: x.order(),
        });
    }
    if labels.len() != x.dims()[mode] {
        return Err(Error::Config(format!(
            "{} labels for {} samples",
            labels.len(),
            x.dims()[mode]
        )));
    }
    let t = Instant::now();
    let (model, rep) = fit_model(x, cfg)?;
    let seconds = t.elapsed().as_secs_f64();
    let acc = knn_cv_accuracy(&model.features(mode), labels, cfg.folds, cfg.seed)?;
    let report = ExperimentReport {
        experiment: "features".into(),
        method: cfg.method.name().into(),
        seed: cfg.seed,
        seconds,
        final_rel_error: Some(model.as_model().rel_error(x)?),
        metric_name: "accuracy".into(),
        metric: Some(acc),
        error_trace: rep.error_trace(),
        clamped: rep.total_clamped(),
        normalization: Vec::new(),
        config: format!(
            "rank={} ranks={:?} mode={mode} j1={} j2={} iters={} folds={}",
            cfg.rank, cfg.ranks, cfg.j1, cfg.j2, cfg.iters, cfg.folds
        ),
    };
    Ok((report, model))
}

/// Features of new samples: least-squares fit of the sample-mode factor or core with
/// every other factor or core held fixed.
///
/// `x_new` matches the fitted tensor in every mode except `mode`.
pub fn project(model: &FittedModel, mode: usize, x_new: &DenseTensor) -> Result<Matrix> {
    let dims = match model {
        FittedModel::Cp(m) => m.dims(),
        FittedModel::Tr(m) => m.dims(),
    };
    if mode >= dims.len() {
        return Err(Error::InvalidMode {
            mode,
            order: dims.len(),
        });
    }
    if x_new.order() != dims.len()
        || (0..dims.len()).any(|j| j != mode && x_new.dims()[j] != dims[j])
    {
        return Err(Error::Shape(format!(
            "new tensor dims {:?} do not match model dims {dims:?}",
            x_new.dims()
        )));
    }
    match model {
        FittedModel::Cp(m) => {
            let grams: Vec<Matrix> = m.factors().iter().map(Matrix::gram).collect();
            let v = gram_product(&grams, mode);
            let rhs = mttkrp(x_new, m.factors(), mode)?;
            Ok(solve_normal_equations(&v, &rhs.transpose())?.transpose())
        }
        FittedModel::Tr(m) => Ok(exact_core_update(x_new, m, mode)?.classical_unfold(1)?),
    }
}
