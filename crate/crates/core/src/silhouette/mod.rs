//! Silhouette-domain transforms, temporal preprocessing, the synthetic
//! walker corpus, and the on-disk sequence format.

mod binarize;
pub mod io;
mod sequence;
mod walker;

pub use binarize::{
    gray_fraction, hard_binarize, preprocess_length, soft_binarize, soft_binarize_var, BinarizationConfig, GRAY_BAND,
    THRESHOLD,
};
pub use sequence::{Dims, SequenceMeta, SilhouetteSequence};
pub use walker::{
    condition_tag, identity_tag, render_walker_soft, synth_corpus, synth_walker, CorpusSpec, CorpusSubject,
    WalkerBounds, WalkerIdentity,
};
