use rand::Rng;

use crate::error::{Error, Result};

/// Mersenne prime `2⁶¹ − 1`, the modulus of the polynomial hash field.
pub const PRIME: u64 = (1 << 61) - 1;

#[inline]
fn mulmod(a: u64, b: u64) -> u64 {
    let p = (a as u128) * (b as u128);
    let lo = (p as u64) & PRIME;
    let hi = (p >> 61) as u64;
    let s = lo + hi;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

#[inline]
fn addmod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

/// Random polynomial of degree `k − 1` over `GF(2⁶¹ − 1)`; a `k`-wise independent family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashFamily {
    coeffs: Vec<u64>,
}

impl HashFamily {
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let coeffs = (0..k).map(|_| rng.random_range(0..PRIME)).collect();
        HashFamily { coeffs }
    }

    pub fn from_coefficients(coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|&c| c >= PRIME) {
            return Err(Error::Config(
                "hash coefficients must be nonempty field elements".into(),
            ));
        }
        Ok(HashFamily { coeffs })
    }

    /// Independence degree `k`.
    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coeffs
    }

    /// Polynomial value at `x` in the field (Horner's rule).
    pub fn eval(&self, x: u64) -> u64 {
        debug_assert!(x < PRIME);
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| addmod(mulmod(acc, x), c))
    }

    /// Bucket in `0..range`.
    pub fn bucket(&self, x: u64, range: usize) -> usize {
        (self.eval(x) % range as u64) as usize
    }

    /// Sign in `{−1, +1}` from the low bit of the field value.
    pub fn sign(&self, x: u64) -> f64 {
        if self.eval(x) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}
