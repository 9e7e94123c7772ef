//! Hash families, CountSketch, degree-two TensorSketch and the recursive sketch `Ψ`.

mod countsketch;
mod hash;
mod recursive;
mod tensorsketch;

pub use countsketch::{countsketch_apply, CountSketchSpec};
pub use hash::{HashFamily, PRIME};
pub use recursive::{RecursiveSketch, MATERIALIZE_LIMIT};
pub use tensorsketch::{cyclic_convolution, ConvolutionMode, FftPair, TensorSketchSpec};
