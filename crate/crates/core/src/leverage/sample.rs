use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

/// `J₂` sampled design rows with their probabilities and `1/√(J₂q)` weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndexSample {
    /// Design-row index `f(j)` of each draw.
    pub indices: Vec<usize>,
    /// Full tensor multi-index of each draw (left empty for flat draws); the
    /// entry of the mode being solved is unused and set to zero.
    pub multi: Vec<Vec<usize>>,
    /// Sampling probability `q(f(j))` of each draw.
    pub probabilities: Vec<f64>,
    /// Row weight applied to the design and right-hand side.
    pub weights: Vec<f64>,
}

impl IndexSample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Fills weights `1/√(J₂ q)` from the recorded probabilities.
    pub fn set_standard_weights(&mut self) {
        let j2 = self.indices.len() as f64;
        self.weights = self
            .probabilities
            .iter()
            .map(|&q| 1.0 / (j2 * q).sqrt())
            .collect();
    }

    /// Every design row exactly once with `q = 1/rows`, hence unit weights.
    ///
    /// `dims` are the tensor dims, `n` the solved mode, and `row_index` maps a
    /// full multi-index to its design row.
    pub fn exhaustive(dims: &[usize], n: usize, row_index: impl Fn(&[usize]) -> usize) -> Self {
        let rows: usize = dims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != n)
            .map(|(_, &d)| d)
            .product();
        let mut s = IndexSample::default();
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..rows {
            s.indices.push(row_index(&idx));
            s.multi.push(idx.clone());
            s.probabilities.push(1.0 / rows as f64);
            crate::tensor::increment_except(&mut idx, dims, n);
        }
        s.set_standard_weights();
        s
    }

    /// Merges repeated draws: a row drawn `c` times becomes one row of weight `√c/√(J₂q)`.
    pub fn deduplicated(&self) -> IndexSample {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&k| self.indices[k]);
        let mut out = IndexSample::default();
        let mut k = 0;
        while k < order.len() {
            let first = order[k];
            let mut w2 = 0.0;
            while k < order.len() && self.indices[order[k]] == self.indices[first] {
                w2 += self.weights[order[k]] * self.weights[order[k]];
                k += 1;
            }
            out.indices.push(self.indices[first]);
            if !self.multi.is_empty() {
                out.multi.push(self.multi[first].clone());
            }
            out.probabilities.push(self.probabilities[first]);
            out.weights.push(w2.sqrt());
        }
        out
    }
}

/// `count` i.i.d. draws from `q = weights / Σ weights`.
pub fn draw_from_weights<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<IndexSample> {
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Config(
            "sampling weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("sampling weights sum to zero".into()));
    }
    let dist = WeightedIndex::new(weights).map_err(|e| Error::Degenerate(e.to_string()))?;
    let mut s = IndexSample::default();
    for _ in 0..count {
        let i = dist.sample(rng);
        s.indices.push(i);
        s.probabilities.push(weights[i] / total);
    }
    s.set_standard_weights();
    Ok(s)
}
