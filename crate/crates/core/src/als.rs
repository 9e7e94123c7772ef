//! Options, initializers and diagnostics shared by the ALS drivers.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::leverage::IndexSample;
use crate::seed::rng_for;
use crate::tensor::{DenseTensor, Matrix, TensorModel};

/// Tensors with at most this many entries get an exact error trace under [`ErrorEval::Auto`].
pub const AUTO_EXACT_LIMIT: usize = 1 << 22;
/// Entry count of the fixed error-estimation sample under [`ErrorEval::Auto`].
pub const DEFAULT_ERROR_SAMPLES: usize = 100_000;
/// Default cap on tensor entries for exact ALS.
pub const DEFAULT_SIZE_LIMIT: usize = 1 << 30;

/// Factor / core initialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Init {
    /// I.i.d. standard normal entries.
    #[default]
    Gaussian,
    /// Per mode, sketch the unfolding with a Gaussian matrix and normalize.
    RangeFinder,
}

/// How the per-sweep relative error is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorEval {
    /// Exact for small tensors, otherwise a fixed random sample of entries.
    #[default]
    Auto,
    Exact,
    /// Fixed random sample of this many entries.
    Sampled(usize),
    /// No error trace; only the iteration cap terminates the loop.
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlsOptions {
    pub max_iters: usize,
    /// Stop when the relative error changes by less than this over a sweep.
    pub tol: f64,
    pub seed: u64,
    pub init: Init,
    pub error_eval: ErrorEval,
    /// Memory guard on tensor entries for exact ALS.
    pub size_limit: usize,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_iters: 50,
            tol: 1e-6,
            seed: 0,
            init: Init::Gaussian,
            error_eval: ErrorEval::Auto,
            size_limit: DEFAULT_SIZE_LIMIT,
        }
    }
}

impl AlsOptions {
    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_error_eval(mut self, e: ErrorEval) -> Self {
        self.error_eval = e;
        self
    }
}

/// Diagnostics of one sweep over all modes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepDiagnostics {
    pub iteration: usize,
    pub rel_error: Option<f64>,
    /// Clamped negative conditionals, summed over modes.
    pub clamped: usize,
    pub retries: usize,
    /// Normalization constant `C` of each mode's sampling distribution.
    pub normalization: Vec<f64>,
    pub rank_deficient_solves: usize,
    pub seconds: f64,
}

/// Result trace of an ALS run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlsReport {
    pub sweeps: Vec<SweepDiagnostics>,
    /// Soft configuration warnings, e.g. sample counts below the column count.
    pub warnings: Vec<String>,
    pub converged: bool,
    pub seconds: f64,
}

impl AlsReport {
    pub fn final_error(&self) -> Option<f64> {
        self.sweeps.iter().rev().find_map(|s| s.rel_error)
    }

    pub fn error_trace(&self) -> Vec<f64> {
        self.sweeps.iter().filter_map(|s| s.rel_error).collect()
    }

    pub fn total_clamped(&self) -> usize {
        self.sweeps.iter().map(|s| s.clamped).sum()
    }
}

/// Evaluates the error trace according to an [`ErrorEval`] policy.
pub(crate) struct ErrorTracker {
    positions: Option<Vec<usize>>,
    off: bool,
}

impl ErrorTracker {
    pub(crate) fn new(x: &DenseTensor, eval: ErrorEval, seed: u64) -> Self {
        let sample = |count: usize| {
            let mut rng = rng_for(seed, &[0xE7]);
            (0..count)
                .map(|_| rng.random_range(0..x.len()))
                .collect::<Vec<_>>()
        };
        match eval {
            ErrorEval::Off => ErrorTracker {
                positions: None,
                off: true,
            },
            ErrorEval::Exact => ErrorTracker {
                positions: None,
                off: false,
            },
            ErrorEval::Sampled(c) => ErrorTracker {
                positions: Some(sample(c)),
                off: false,
            },
            ErrorEval::Auto if x.len() <= AUTO_EXACT_LIMIT => ErrorTracker {
                positions: None,
                off: false,
            },
            ErrorEval::Auto => ErrorTracker {
                positions: Some(sample(DEFAULT_ERROR_SAMPLES)),
                off: false,
            },
        }
    }

    pub(crate) fn eval(&self, model: &dyn TensorModel, x: &DenseTensor) -> Result<Option<f64>> {
        if self.off {
            return Ok(None);
        }
        match &self.positions {
            None => model.rel_error(x).map(Some),
            Some(p) => model.sampled_rel_error(x, p).map(Some),
        }
    }
}

/// Loop bookkeeping shared by every ALS driver.
pub(crate) struct SweepLoop {
    tracker: ErrorTracker,
    opts: AlsOptions,
    pub(crate) report: AlsReport,
    start: Instant,
    last: Option<f64>,
}

impl SweepLoop {
    pub(crate) fn new(x: &DenseTensor, opts: &AlsOptions) -> Result<Self> {
        if opts.max_iters == 0 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if !(opts.tol >= 0.0) {
            return Err(Error::Config("tolerance must be nonnegative".into()));
        }
        Ok(SweepLoop {
            tracker: ErrorTracker::new(x, opts.error_eval, opts.seed),
            opts: *opts,
            report: AlsReport::default(),
            start: Instant::now(),
            last: None,
        })
    }

    /// Records a finished sweep; returns true when the loop should stop.
    pub(crate) fn finish_sweep(
        &mut self,
        mut diag: SweepDiagnostics,
        model: &dyn TensorModel,
        x: &DenseTensor,
        sweep_start: Instant,
    ) -> Result<bool> {
        let err = self.tracker.eval(model, x)?;
        diag.rel_error = err;
        diag.seconds = sweep_start.elapsed().as_secs_f64();
        self.report.sweeps.push(diag);
        let mut stop = self.report.sweeps.len() >= self.opts.max_iters;
        if let (Some(e), Some(prev)) = (err, self.last) {
            if (prev - e).abs() < self.opts.tol {
                self.report.converged = true;
                stop = true;
            }
        }
        if err.is_some() {
            self.last = err;
        }
        Ok(stop)
    }

    pub(crate) fn into_report(mut self) -> AlsReport {
        self.report.seconds = self.start.elapsed().as_secs_f64();
        self.report
    }
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `X₍ₙ₎ Ω` for a Gaussian `Ω` with `width` columns, streamed block by block.
pub fn gaussian_range<R: Rng + ?Sized>(
    x: &DenseTensor,
    n: usize,
    width: usize,
    rng: &mut R,
) -> Result<Matrix> {
    if n >= x.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: x.order(),
        });
    }
    let dims = x.dims();
    let l: usize = dims[..n].iter().product();
    let m = dims[n];
    let r: usize = dims[n + 1..].iter().product();
    let data = x.data();
    let mut y = Matrix::zeros(m, width);
    let mut omega = vec![0.0; l * width];
    for k in 0..r {
        // Rows a + k·l of Ω, stored column-major in an l × width block.
        omega
            .iter_mut()
            .for_each(|v| *v = StandardNormal.sample(rng));
        for i in 0..m {
            let block = &data[(k * m + i) * l..(k * m + i + 1) * l];
            for c in 0..width {
                let om = &omega[c * l..(c + 1) * l];
                y[(i, c)] += block.iter().zip(om).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    Ok(y)
}

/// Orthonormal basis of the columns of `y` when it is tall enough, otherwise column-normalized `y`.
pub(crate) fn orthonormalize(y: &Matrix) -> Matrix {
    if y.rows() >= y.cols() {
        let q = y.to_dmatrix().qr().q();
        Matrix::from_dmatrix(&q)
    } else {
        let mut out = y.clone();
        for c in 0..y.cols() {
            let n: f64 = y.col(c).iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                out.col_mut(c).iter_mut().for_each(|v| *v /= n);
            }
        }
        out
    }
}

/// Weighted right-hand side rows `w_j · X(i_{≠n} = multi_j, i_n = :)` gathered from the flat tensor.
pub(crate) fn gather_weighted_rhs(
    x: &DenseTensor,
    n: usize,
    sample: &IndexSample,
) -> Result<Matrix> {
    let dims = x.dims();
    if sample.multi.len() != sample.len() || sample.weights.len() != sample.len() {
        return Err(Error::Shape(
            "sample needs multi-indices and weights for every draw".into(),
        ));
    }
    let strides = x.strides();
    let data = x.data();
    let m = dims[n];
    let mut rhs = Matrix::zeros(sample.len(), m);
    for (j, (multi, &w)) in sample.multi.iter().zip(&sample.weights).enumerate() {
        if multi.len() != dims.len() {
            return Err(Error::Shape(format!(
                "multi-index {multi:?} does not match order {}",
                dims.len()
            )));
        }
        let mut base = 0;
        for (mode, (&i, &d)) in multi.iter().zip(dims).enumerate() {
            if mode == n {
                continue;
            }
            if i >= d {
                return Err(Error::IndexOutOfRange {
                    mode,
                    index: i,
                    size: d,
                });
            }
            base += i * strides[mode];
        }
        for i in 0..m {
            rhs[(j, i)] = w * data[base + i * strides[n]];
        }
    }
    Ok(rhs)
}

/// Rejects tensors above the exact-ALS memory guard.
pub(crate) fn check_size(x: &DenseTensor, opts: &AlsOptions) -> Result<()> {
    if x.len() > opts.size_limit {
        return Err(Error::SizeLimit(format!(
            "tensor has {} entries, above the exact-ALS limit {}",
            x.len(),
            opts.size_limit
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_range_matches_unfolding_product() {
        let x = DenseTensor::from_fn(vec![3, 4, 2], |i| {
            (i[0] + 2 * i[1]) as f64 - 1.5 * i[2] as f64
        })
        .unwrap();
        for n in 0..3 {
            let mut r1 = ChaCha8Rng::seed_from_u64(5);
            let y = gaussian_range(&x, n, 2, &mut r1).unwrap();
            // Rebuild Ω in the same generation order and multiply explicitly.
            let mut r2 = ChaCha8Rng::seed_from_u64(5);
            let dims = x.dims();
            let l: usize = dims[..n].iter().product();
            let r: usize = dims[n + 1..].iter().product();
            let mut omega = Matrix::zeros(l * r, 2);
            for k in 0..r {
                let block: Vec<f64> = (0..l * 2).map(|_| StandardNormal.sample(&mut r2)).collect();
                for c in 0..2 {
                    for a in 0..l {
                        omega[(a + k * l, c)] = block[c * l + a];
                    }
                }
            }
            let expect = x.classical_unfold(n).unwrap().matmul(&omega).unwrap();
            assert!(y.max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn orthonormalize_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = gaussian_matrix(6, 3, &mut rng);
        let q = orthonormalize(&y);
        assert!(q.gram().max_abs_diff(&Matrix::identity(3)) < 1e-12);
        let w = gaussian_matrix(2, 4, &mut rng);
        let q = orthonormalize(&w);
        assert_eq!((q.rows(), q.cols()), (2, 4));
    }
}
