//! Oracle time-frequency masks computed from the true source images.

mod hermitian;
mod masks;
mod mwf;
mod separate;

pub use masks::{apply_mask, ibm_mask, irm_mask, MatrixMask, ScalarMask, SourceImages, TfMask};
pub use mwf::{
    estimate_mwf_model, mwf_mask, mwf_mask_with_loading, SpatialModel, DEFAULT_MWF_ITERATIONS, DEFAULT_MWF_LOADING,
};
pub use separate::{oracle_separate, OracleConfig, OracleMethod};
