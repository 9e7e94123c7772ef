use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tdals::als::{AlsOptions, AlsReport, Init};
use tdals::baselines::{cp_arls_lev_from, tr_als_sampled_from};
use tdals::cp::{cp_als_es_from, cp_als_from, init_cp, CpEsConfig};
use tdals::leverage::SolveOptions;
use tdals::seed::derive_seed;
use tdals::tensor::{
    read_cp_model, read_dt, read_tr_model, write_cp_model, write_dt, write_tr_model,
    TensorModel,
};
use tdals::tr::{init_tr, tr_als_es_from, tr_als_from, TrEsConfig};
use tdals::xbench::{
    project, read_labels, run_distribution_experiment, run_feature_extraction,
    run_recovery_experiment, synth_cp, synth_tr, write_reports, Decomposition,
    DistributionConfig, ExperimentReport, FeatureConfig, FeatureMethod, FittedModel,
    RecoveryConfig, DEFAULT_SYNTH_LIMIT, LARGE_SYNTH_LIMIT,
};
use tdals::{DenseTensor, Error, Result};

#[derive(Parser)]
#[command(name = "tdals", version, about = "Sampled ALS for CP and tensor-ring decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Planted CP tensor.
    SynthCp(SynthCpArgs),
    /// Planted tensor-ring tensor.
    SynthTr(SynthTrArgs),
    /// CP decomposition of a .dt tensor.
    Cp(CpArgs),
    /// Tensor-ring decomposition of a .dt tensor.
    Tr(TrArgs),
    /// KL divergence of the ES and product sampling distributions from the exact one.
    CompareDist(CompareArgs),
    /// Planted-model recovery, ES against the product baseline.
    Recovery(RecoveryArgs),
    /// Decomposition features scored by 1-NN cross-validation.
    Features(FeatureArgs),
    /// Features of new samples from a saved model.
    Project(ProjectArgs),
}

#[derive(Args)]
struct RankArgs {
    /// CP rank, or the common TR rank when --ranks is absent.
    #[arg(long)]
    rank: Option<usize>,
    /// TR ranks, comma separated; entry c is the trailing rank of core c.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Tensor-train boundary: forces R₀ = R_N = 1.
    #[arg(long)]
    tt: bool,
}

impl RankArgs {
    fn cp_rank(&self) -> Result<usize> {
        self.rank.ok_or_else(|| Error::Config("--rank is required".into()))
    }

    fn tr_ranks(&self, order: usize) -> Result<Vec<usize>> {
        let mut ranks = match (&self.ranks, self.rank) {
            (Some(r), _) => r.clone(),
            (None, Some(r)) => vec![r; order],
            (None, None) => return Err(Error::Config("--ranks or --rank is required".into())),
        };
        if ranks.len() != order {
            return Err(Error::Config(format!("{} ranks for an order-{order} tensor", ranks.len())));
        }
        if self.tt {
            ranks[order - 1] = 1;
        }
        Ok(ranks)
    }
}

#[derive(Args)]
struct AlsArgs {
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Gaussian)]
    init: InitArg,
    /// Sketch dimension J₁.
    #[arg(long, default_value_t = 1000)]
    j1: usize,
    /// Sampled rows per solve J₂.
    #[arg(long, default_value_t = 1000)]
    j2: usize,
    /// Tikhonov weight of every least-squares solve.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
}

impl AlsArgs {
    fn options(&self) -> AlsOptions {
        let init = match self.init {
            InitArg::Gaussian => Init::Gaussian,
            InitArg::Range => Init::RangeFinder,
        };
        AlsOptions::default().with_iters(self.iters).with_tol(self.tol).with_seed(self.seed).with_init(init)
    }

    fn solve(&self) -> SolveOptions {
        SolveOptions { ridge: self.ridge }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Gaussian,
    Range,
}

#[derive(Args)]
struct SynthCommon {
    /// Mode sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    spike: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Also write the planted model with this file prefix.
    #[arg(long)]
    model_prefix: Option<String>,
    /// Raise the entry guard for large instances.
    #[arg(long)]
    large_memory: bool,
}

impl SynthCommon {
    fn limit(&self) -> usize {
        if self.large_memory {
            LARGE_SYNTH_LIMIT
        } else {
            DEFAULT_SYNTH_LIMIT
        }
    }
}

#[derive(Args)]
struct SynthCpArgs {
    #[command(flatten)]
    common: SynthCommon,
    #[arg(long)]
    rank: usize,
}

#[derive(Args)]
struct SynthTrArgs {
    #[command(flatten)]
    common: SynthCommon,
    #[command(flatten)]
    ranks: RankArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CpMethod {
    Exact,
    Es,
    ArlsLev,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrMethod {
    Exact,
    Es,
    Sampled,
}

#[derive(Args)]
struct CpArgs {
    #[arg(long)]
    input: PathBuf,
    /// Prefix of the factor files written on success.
    #[arg(long)]
    output: Option<String>,
    #[arg(long, value_enum, default_value_t = CpMethod::Es)]
    method: CpMethod,
    #[command(flatten)]
    ranks: RankArgs,
    #[command(flatten)]
    als: AlsArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrArgs {
    #[arg(long)]
    input: PathBuf,
    /// Prefix of the core files written on success.
    #[arg(long)]
    output: Option<String>,
    #[arg(long, value_enum, default_value_t = TrMethod::Es)]
    method: TrMethod,
    #[command(flatten)]
    ranks: RankArgs,
    #[command(flatten)]
    als: AlsArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Family {
    Cp,
    Tr,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    family: Family,
    #[command(flatten)]
    ranks: RankArgs,
    /// Mode of the studied solve; defaults to the last.
    #[arg(long)]
    mode: Option<usize>,
    /// Sketch dimensions to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
    j1: Vec<usize>,
    /// Number of sketch seeds.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Sweeps of the exact fit that produces the frozen model.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Preset {
    /// 10-way CP, I = 6, R = 4.
    Cp,
    /// 8-way TR, I = 6, ranks 3.
    Tr,
    /// 10-way TR, I = 6, ranks 3; needs --large-memory.
    Tr10,
}

#[derive(Args)]
struct RecoveryArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    j1: Option<usize>,
    #[arg(long)]
    j2: Option<usize>,
    /// Samples per solve of the baseline; defaults to J₂.
    #[arg(long)]
    j2_baseline: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Run the two arms concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    large_memory: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureMethodArg {
    CpExact,
    CpEs,
    CpArlsLev,
    TrExact,
    TrEs,
    TrSampled,
}

impl From<FeatureMethodArg> for FeatureMethod {
    fn from(m: FeatureMethodArg) -> Self {
        match m {
            FeatureMethodArg::CpExact => FeatureMethod::CpExact,
            FeatureMethodArg::CpEs => FeatureMethod::CpEs,
            FeatureMethodArg::CpArlsLev => FeatureMethod::CpArlsLev,
            FeatureMethodArg::TrExact => FeatureMethod::TrExact,
            FeatureMethodArg::TrEs => FeatureMethod::TrEs,
            FeatureMethodArg::TrSampled => FeatureMethod::TrSampled,
        }
    }
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long)]
    input: PathBuf,
    /// One integer label per line.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value_t = FeatureMethodArg::CpEs)]
    method: FeatureMethodArg,
    #[command(flatten)]
    ranks: RankArgs,
    /// Sample mode; defaults to the last.
    #[arg(long)]
    mode: Option<usize>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1000)]
    j1: usize,
    #[arg(long, default_value_t = 1000)]
    j2: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefix of the model files written on success.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Prefix of a saved model.
    #[arg(long)]
    model: String,
    #[arg(long, value_enum)]
    family: Family,
    /// Sample mode of the new tensor; defaults to the last.
    #[arg(long)]
    mode: Option<usize>,
    #[arg(long)]
    input: PathBuf,
    /// Feature matrix (samples × features) as a 2-way .dt file.
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::SynthCp(a) => {
            let c = &a.common;
            let (x, m) = synth_cp(&c.dims, a.rank, c.spike, c.noise, c.seed, c.limit())?;
            write_dt(&c.output, &x)?;
            if let Some(p) = &c.model_prefix {
                write_cp_model(p, &m)?;
            }
            Ok(())
        }
        Command::SynthTr(a) => {
            let c = &a.common;
            let ranks = a.ranks.tr_ranks(c.dims.len())?;
            let (x, m) = synth_tr(&c.dims, &ranks, c.spike, c.noise, c.seed, c.limit())?;
            write_dt(&c.output, &x)?;
            if let Some(p) = &c.model_prefix {
                write_tr_model(p, &m)?;
            }
            Ok(())
        }
        Command::Cp(a) => run_cp(a),
        Command::Tr(a) => run_tr(a),
        Command::CompareDist(a) => {
            let x = read_dt(&a.input)?;
            let decomposition = match a.family {
                Family::Cp => Decomposition::Cp { rank: a.ranks.cp_rank()? },
                Family::Tr => Decomposition::Tr { ranks: a.ranks.tr_ranks(x.order())? },
            };
            let cfg = DistributionConfig {
                decomposition,
                mode: a.mode,
                j1_grid: a.j1,
                seeds: (a.seed..a.seed + a.seeds).collect(),
                fit_iters: a.iters,
                fit_seed: a.seed,
            };
            let reports = run_distribution_experiment(&x, &cfg)?;
            emit(&reports, a.report.as_deref())
        }
        Command::Recovery(a) => {
            let mut reports = Vec::new();
            for seed in a.seed..a.seed + a.seeds {
                let mut cfg = match a.preset {
                    Preset::Cp => RecoveryConfig::planted_cp(seed),
                    Preset::Tr => RecoveryConfig::planted_tr(seed),
                    Preset::Tr10 => {
                        if !a.large_memory {
                            return Err(Error::Config("the 10-way TR preset needs --large-memory".into()));
                        }
                        let mut c = RecoveryConfig::planted_tr(seed);
                        c.dims = vec![6; 10];
                        c.decomposition = Decomposition::Tr { ranks: vec![3; 10] };
                        c.max_entries = LARGE_SYNTH_LIMIT;
                        c
                    }
                };
                if let Some(v) = a.j1 {
                    cfg.j1 = v;
                }
                if let Some(v) = a.j2 {
                    cfg.j2 = v;
                    cfg.j2_baseline = v;
                }
                if let Some(v) = a.j2_baseline {
                    cfg.j2_baseline = v;
                }
                if let Some(v) = a.iters {
                    cfg.iters = v;
                }
                cfg.parallel = a.parallel;
                reports.extend(run_recovery_experiment(&cfg)?);
            }
            emit(&reports, a.report.as_deref())
        }
        Command::Features(a) => {
            let x = read_dt(&a.input)?;
            let labels = read_labels(&a.labels)?;
            let method = FeatureMethod::from(a.method);
            let cfg = FeatureConfig {
                method,
                rank: if method.is_cp() { a.ranks.cp_rank()? } else { 0 },
                ranks: if method.is_cp() { Vec::new() } else { a.ranks.tr_ranks(x.order())? },
                sample_mode: a.mode,
                j1: a.j1,
                j2: a.j2,
                iters: a.iters,
                seed: a.seed,
                folds: a.folds,
            };
            let (report, model) = run_feature_extraction(&x, &labels, &cfg)?;
            if let Some(p) = &a.output {
                match &model {
                    FittedModel::Cp(m) => write_cp_model(p, m)?,
                    FittedModel::Tr(m) => write_tr_model(p, m)?,
                }
            }
            emit(&[report], a.report.as_deref())
        }
        Command::Project(a) => {
            let model = match a.family {
                Family::Cp => FittedModel::Cp(read_cp_model(&a.model)?),
                Family::Tr => FittedModel::Tr(read_tr_model(&a.model)?),
            };
            let x = read_dt(&a.input)?;
            let mode = a.mode.unwrap_or(x.order() - 1);
            let f = project(&model, mode, &x)?;
            write_dt(&a.output, &DenseTensor::new(vec![f.rows(), f.cols()], f.into_data())?)
        }
    }
}

fn run_cp(a: CpArgs) -> Result<()> {
    let x = read_dt(&a.input)?;
    let rank = a.ranks.cp_rank()?;
    let opts = a.als.options();
    let t = Instant::now();
    let init = init_cp(&x, rank, opts.init, derive_seed(opts.seed, &[1]))?;
    let (m, rep) = match a.method {
        CpMethod::Exact => cp_als_from(&x, init, &opts)?,
        CpMethod::Es => {
            let mut cfg = CpEsConfig::new(a.als.j1, a.als.j2).with_als(opts.clone());
            cfg.solve = a.als.solve();
            cp_als_es_from(&x, init, &cfg)?
        }
        CpMethod::ArlsLev => cp_arls_lev_from(&x, init, a.als.j2, &opts, &a.als.solve())?,
    };
    let name = match a.method {
        CpMethod::Exact => "cp-als",
        CpMethod::Es => "cp-als-es",
        CpMethod::ArlsLev => "cp-arls-lev",
    };
    let report = decomposition_report(name, &x, &m, &rep, &opts, t, format!("rank={rank}"))?;
    if let Some(p) = &a.output {
        write_cp_model(p, &m)?;
    }
    emit(&[report], a.report.as_deref())
}

fn run_tr(a: TrArgs) -> Result<()> {
    let x = read_dt(&a.input)?;
    let ranks = a.ranks.tr_ranks(x.order())?;
    let opts = a.als.options();
    let t = Instant::now();
    let init = init_tr(&x, &ranks, opts.init, derive_seed(opts.seed, &[1]))?;
    let (m, rep) = match a.method {
        TrMethod::Exact => tr_als_from(&x, init, &opts)?,
        TrMethod::Es => {
            let mut cfg = TrEsConfig::new(a.als.j1, a.als.j2).with_als(opts.clone());
            cfg.solve = a.als.solve();
            tr_als_es_from(&x, init, &cfg)?
        }
        TrMethod::Sampled => tr_als_sampled_from(&x, init, a.als.j2, &opts, &a.als.solve())?,
    };
    let name = match a.method {
        TrMethod::Exact => "tr-als",
        TrMethod::Es => "tr-als-es",
        TrMethod::Sampled => "tr-als-sampled",
    };
    let report = decomposition_report(name, &x, &m, &rep, &opts, t, format!("ranks={ranks:?}"))?;
    if let Some(p) = &a.output {
        write_tr_model(p, &m)?;
    }
    emit(&[report], a.report.as_deref())
}

fn decomposition_report(
    method: &str,
    x: &DenseTensor,
    model: &dyn TensorModel,
    rep: &AlsReport,
    opts: &AlsOptions,
    start: Instant,
    config: String,
) -> Result<ExperimentReport> {
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExperimentReport {
        experiment: "decompose".into(),
        method: method.into(),
        seed: opts.seed,
        seconds: start.elapsed().as_secs_f64(),
        final_rel_error: Some(model.rel_error(x)?),
        metric_name: "sweeps".into(),
        metric: Some(rep.sweeps.len() as f64),
        error_trace: rep.error_trace(),
        clamped: rep.total_clamped(),
        normalization: rep.sweeps.iter().flat_map(|s| s.normalization.iter().copied()).collect(),
        config: format!("{config} iters={} tol={}", opts.max_iters, opts.tol),
    })
}

/// Writes the reports to `path` as CSV, or to stdout.
fn emit(reports: &[ExperimentReport], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_reports(File::create(p)?, reports),
        None => write_reports(std::io::stdout().lock(), reports),
    }
}
