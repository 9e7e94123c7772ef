//! TR-ALS and TR-ALS-ES.

mod als;
mod es;

#[allow(unused_imports)]
pub(crate) use als::exact_core_update;
pub use als::{
    canonicalize_subchain, core_from_unfolding, init_tr, tr_als, tr_als_from, tr_als_with,
    validate_ranks,
};
pub(crate) use es::{run_sampled_tr, Drawn};
pub use es::{
    tr_als_es, tr_als_es_from, tr_draw_indices, tr_leaf_modes, tr_marginal, tr_normalization,
    tr_sampled_rows, tr_sampled_update, tr_sketch_design, TrEsConfig, TrSamplerState,
};
