use rand::Rng;

use super::sample::IndexSample;
use crate::error::{Error, Result};

/// Draw attempts per sample before a zero-mass chain is reported.
pub const MAX_RETRIES: usize = 10;

/// A distribution over multi-indices that is drawn one subindex at a time.
///
/// Step `s` draws the subindex of tensor mode [`SubindexChain::step_mode`]`(s)`.
/// [`SubindexChain::masses`] returns the joint marginals `P(prefix ∪ {i})` for
/// every candidate `i`; conditionals are their ratios to the prefix mass.
pub trait SubindexChain {
    type Prefix: Clone;

    /// Tensor order `N`.
    fn order(&self) -> usize;
    fn num_steps(&self) -> usize;
    fn step_mode(&self, step: usize) -> usize;
    fn step_size(&self, step: usize) -> usize;
    fn root(&self) -> Self::Prefix;
    fn masses(&self, prefix: &Self::Prefix, step: usize, out: &mut Vec<f64>);
    fn extend(&self, prefix: &Self::Prefix, step: usize, index: usize) -> Self::Prefix;
    /// Design-row index of a full multi-index.
    fn row_index(&self, multi: &[usize]) -> usize;
}

/// Counters collected while drawing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChainDiagnostics {
    /// Negative or non-finite candidate masses set to zero.
    pub clamped: usize,
    /// Draws restarted because a prefix had no mass left.
    pub retries: usize,
}

/// Clamps negative masses to zero and returns the remaining total.
fn clamp(masses: &mut [f64], diag: &mut ChainDiagnostics) -> f64 {
    let mut total = 0.0;
    for m in masses.iter_mut() {
        if !(*m >= 0.0) || !m.is_finite() {
            *m = 0.0;
            diag.clamped += 1;
        }
        total += *m;
    }
    total
}

/// `count` i.i.d. draws by the chain rule; each draw records the product of its conditionals.
pub fn draw_chain<C: SubindexChain, R: Rng + ?Sized>(
    chain: &C,
    count: usize,
    rng: &mut R,
) -> Result<(IndexSample, ChainDiagnostics)> {
    let mut diag = ChainDiagnostics::default();
    let mut sample = IndexSample::default();
    let mut buf = Vec::new();
    for _ in 0..count {
        let mut attempt = 0;
        let (multi, prob) = loop {
            match draw_one(chain, rng, &mut buf, &mut diag) {
                Some(d) => break d,
                None => {
                    attempt += 1;
                    diag.retries += 1;
                    if attempt >= MAX_RETRIES {
                        return Err(Error::Degenerate(format!(
                            "sampling chain hit zero conditional mass {MAX_RETRIES} times"
                        )));
                    }
                }
            }
        };
        sample.indices.push(chain.row_index(&multi));
        sample.multi.push(multi);
        sample.probabilities.push(prob);
    }
    sample.set_standard_weights();
    Ok((sample, diag))
}

fn draw_one<C: SubindexChain, R: Rng + ?Sized>(
    chain: &C,
    rng: &mut R,
    buf: &mut Vec<f64>,
    diag: &mut ChainDiagnostics,
) -> Option<(Vec<usize>, f64)> {
    let mut prefix = chain.root();
    let mut multi = vec![0usize; chain.order()];
    let mut prob = 1.0;
    for step in 0..chain.num_steps() {
        chain.masses(&prefix, step, buf);
        let total = clamp(buf, diag);
        if !(total > 0.0) {
            return None;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &m) in buf.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            acc += m;
            pick = Some(i);
            if u < acc {
                break;
            }
        }
        let i = pick?;
        prob *= buf[i] / total;
        multi[chain.step_mode(step)] = i;
        prefix = chain.extend(&prefix, step, i);
    }
    Some((multi, prob))
}

/// Probability of every design row under the chain's sampling rule, indexed by
/// [`SubindexChain::row_index`]. Enumerates the whole grid (test scale).
pub fn chain_distribution<C: SubindexChain>(chain: &C) -> (Vec<f64>, ChainDiagnostics) {
    let rows: usize = (0..chain.num_steps()).map(|s| chain.step_size(s)).product();
    let mut out = vec![0.0; rows];
    let mut diag = ChainDiagnostics::default();
    let mut multi = vec![0usize; chain.order()];
    visit(chain, chain.root(), 0, 1.0, &mut multi, &mut out, &mut diag);
    (out, diag)
}

fn visit<C: SubindexChain>(
    chain: &C,
    prefix: C::Prefix,
    step: usize,
    prob: f64,
    multi: &mut Vec<usize>,
    out: &mut [f64],
    diag: &mut ChainDiagnostics,
) {
    if step == chain.num_steps() {
        out[chain.row_index(multi)] = prob;
        return;
    }
    let mut buf = Vec::new();
    chain.masses(&prefix, step, &mut buf);
    let total = clamp(&mut buf, diag);
    if !(total > 0.0) {
        return;
    }
    let mode = chain.step_mode(step);
    for (i, &m) in buf.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        multi[mode] = i;
        let child = chain.extend(&prefix, step, i);
        visit(chain, child, step + 1, prob * m / total, multi, out, diag);
    }
    multi[mode] = 0;
}
