use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tensor::{DenseTensor, Matrix};

/// Per-axis digit base and digit count for tensorizing a `size × size` image into `order` modes.
fn layout(size: usize, order: usize) -> Result<(usize, usize)> {
    if size == 0 || !size.is_power_of_two() {
        return Err(Error::Config(format!(
            "image side {size} is not a power of two"
        )));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::Config(format!(
            "target order {order} must be even and positive"
        )));
    }
    let digits = order / 2;
    let bits = size.trailing_zeros() as usize;
    if bits % digits != 0 {
        return Err(Error::Config(format!(
            "a {size}x{size} image does not split into {digits} equal digits per axis"
        )));
    }
    Ok((1 << (bits / digits), digits))
}

/// Reshapes a square image into an `order`-way tensor.
///
/// Each axis is split into `order/2` equal digits, least significant first; mode `2k`
/// holds row digit `k` and mode `2k+1` holds column digit `k`.
pub fn tensorize_image(img: &Matrix, order: usize) -> Result<DenseTensor> {
    if img.rows() != img.cols() {
        return Err(Error::Config(format!(
            "image must be square, got {}x{}",
            img.rows(),
            img.cols()
        )));
    }
    let (base, digits) = layout(img.rows(), order)?;
    let dims = vec![base; order];
    let mut data = vec![0.0; img.rows() * img.cols()];
    for col in 0..img.cols() {
        let src = img.col(col);
        let cpart = interleave(col, base, digits, 1);
        for (row, &v) in src.iter().enumerate() {
            data[cpart + interleave(row, base, digits, 0)] = v;
        }
    }
    DenseTensor::new(dims, data)
}

/// Flat tensor offset contributed by the digits of `value` placed on modes `2k + parity`.
fn interleave(mut value: usize, base: usize, digits: usize, parity: usize) -> usize {
    let mut off = 0;
    for k in 0..digits {
        off += (value % base) * base.pow((2 * k + parity) as u32);
        value /= base;
    }
    off
}

/// Inverse of [`tensorize_image`].
pub fn untensorize_image(x: &DenseTensor) -> Result<Matrix> {
    let order = x.order();
    let base = x.dims()[0];
    if x.dims().iter().any(|&d| d != base) || order % 2 != 0 {
        return Err(Error::Shape(format!(
            "dims {:?} are not an interleaved image layout",
            x.dims()
        )));
    }
    let digits = order / 2;
    let size = base.pow(digits as u32);
    let data = x.data();
    Ok(Matrix::from_fn(size, size, |row, col| {
        data[interleave(row, base, digits, 0) + interleave(col, base, digits, 1)]
    }))
}

/// Deterministic grayscale test image: smooth Gaussian blobs, soft-edged discs, a
/// gentle gradient and a little pixel noise, values roughly in `[0, 1]`.
pub fn synthetic_image(size: usize, seed: u64) -> Matrix {
    let mut rng = rng_for(seed, &[50]);
    let s = size as f64;
    let mut img = Matrix::from_fn(size, size, |r, c| {
        0.15 + 0.1 * (r as f64 / s) + 0.05 * (c as f64 / s)
    });
    for _ in 0..14 {
        let (cr, cc) = (rng.random::<f64>() * s, rng.random::<f64>() * s);
        let (wr, wc) = (
            (0.02 + 0.15 * rng.random::<f64>()) * s,
            (0.02 + 0.15 * rng.random::<f64>()) * s,
        );
        let amp = 0.1 + 0.5 * rng.random::<f64>();
        let gr: Vec<f64> = (0..size)
            .map(|r| (-((r as f64 - cr) / wr).powi(2) / 2.0).exp())
            .collect();
        let gc: Vec<f64> = (0..size)
            .map(|c| (-((c as f64 - cc) / wc).powi(2) / 2.0).exp())
            .collect();
        for (c, &vc) in gc.iter().enumerate() {
            if vc < 1e-6 {
                continue;
            }
            for (o, &vr) in img.col_mut(c).iter_mut().zip(&gr) {
                *o += amp * vr * vc;
            }
        }
    }
    for _ in 0..6 {
        let (cr, cc) = (rng.random::<f64>() * s, rng.random::<f64>() * s);
        let rad = (0.03 + 0.12 * rng.random::<f64>()) * s;
        let edge = 0.004 * s + 1.0;
        let amp = if rng.random::<bool>() { 0.3 } else { -0.2 };
        let lo_c = (cc - rad - 8.0 * edge).max(0.0) as usize;
        let hi_c = ((cc + rad + 8.0 * edge) as usize).min(size);
        let lo_r = (cr - rad - 8.0 * edge).max(0.0) as usize;
        let hi_r = ((cr + rad + 8.0 * edge) as usize).min(size);
        for c in lo_c..hi_c {
            let col = img.col_mut(c);
            for (r, o) in col.iter_mut().enumerate().take(hi_r).skip(lo_r) {
                let d = ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt();
                *o += amp / (1.0 + ((d - rad) / edge).exp());
            }
        }
    }
    for v in img.data_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += 0.01 * z;
    }
    img
}
