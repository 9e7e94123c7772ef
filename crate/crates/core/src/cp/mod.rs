//! CP-ALS and CP-ALS-ES.

mod als;
mod es;

#[allow(unused_imports)]
pub(crate) use als::gram_product;
pub use als::{cp_als, cp_als_from, cp_als_with, init_cp, mttkrp};
pub use es::{
    cp_als_es, cp_als_es_from, cp_draw_indices, cp_leaf_modes, cp_marginal, cp_normalization,
    cp_sampled_update, cp_sketch_design, CpEsConfig, CpSamplerState, SamplingMode,
};
pub(crate) use es::{run_sampled_cp, Drawn};
