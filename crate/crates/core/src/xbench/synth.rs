use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tensor::{CpModel, DenseTensor, Matrix, TensorModel, TrModel};

/// Default entry cap for generated tensors (about 512 MiB of `f64`).
pub const DEFAULT_SYNTH_LIMIT: usize = 1 << 26;
/// Entry cap unlocked by the large-memory flag.
pub const LARGE_SYNTH_LIMIT: usize = 1 << 31;

fn check_entries(dims: &[usize], limit: usize) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::Config(format!("invalid dims {dims:?}")));
    }
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    match total {
        Some(t) if t <= limit => Ok(()),
        _ => Err(Error::SizeLimit(format!(
            "tensor with dims {dims:?} exceeds {limit} entries"
        ))),
    }
}

fn add_noise(x: &mut DenseTensor, sd: f64, seed: u64) {
    if sd > 0.0 {
        let mut rng = rng_for(seed, &[41]);
        for v in x.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sd * z;
        }
    }
}

/// Planted CP tensor: `A⁽ʲ⁾(0,0) = spike`, i.i.d. normal entries for rows `1..` and
/// columns `1..R`, zeros elsewhere, plus Gaussian noise.
pub fn synth_cp(
    dims: &[usize],
    r: usize,
    spike: f64,
    noise_sd: f64,
    seed: u64,
    max_entries: usize,
) -> Result<(DenseTensor, CpModel)> {
    if r == 0 {
        return Err(Error::Config("CP rank must be at least 1".into()));
    }
    if noise_sd < 0.0 {
        return Err(Error::Config(
            "noise standard deviation must be nonnegative".into(),
        ));
    }
    check_entries(dims, max_entries)?;
    let mut rng = rng_for(seed, &[40]);
    let factors: Vec<Matrix> = dims
        .iter()
        .map(|&d| {
            let mut a = Matrix::zeros(d, r);
            a[(0, 0)] = spike;
            for j in 1..r {
                for i in 1..d {
                    a[(i, j)] = StandardNormal.sample(&mut rng);
                }
            }
            a
        })
        .collect();
    let model = CpModel::new(factors)?;
    let mut x = model.reconstruct();
    add_noise(&mut x, noise_sd, seed);
    Ok((x, model))
}

/// Planted TR tensor: every core is zero except `G⁽ʲ⁾(0,0,0) = spike`, plus Gaussian noise.
///
/// `ranks[c]` is the trailing rank of core `c`.
pub fn synth_tr(
    dims: &[usize],
    ranks: &[usize],
    spike: f64,
    noise_sd: f64,
    seed: u64,
    max_entries: usize,
) -> Result<(DenseTensor, TrModel)> {
    crate::tr::validate_ranks(dims, ranks)?;
    if noise_sd < 0.0 {
        return Err(Error::Config(
            "noise standard deviation must be nonnegative".into(),
        ));
    }
    check_entries(dims, max_entries)?;
    let big_n = dims.len();
    let cores = (0..big_n)
        .map(|c| {
            let mut g =
                DenseTensor::zeros(vec![ranks[(c + big_n - 1) % big_n], dims[c], ranks[c]])?;
            g.data_mut()[0] = spike;
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = TrModel::new(cores)?;
    let mut x = model.reconstruct();
    add_noise(&mut x, noise_sd, seed);
    Ok((x, model))
}
