//! Quality-score prediction from sequential language-model logit features.
//!
//! The pipeline projects an `L × d_vocab` logit sequence into a hidden width,
//! runs a stack of sLSTM/mLSTM blocks over it, pools the sequence into one
//! vector and regresses a Mean Opinion Score. Around the model sit the
//! conversation templates, dataset manifests and fixture files, evaluation
//! metrics, and a training/evaluation harness.
//!
//! Batch work (per-sample gradients, evaluation, fixture generation) fans out
//! through [`exec::Exec`]; the `parallel` feature (on by default) backs it with
//! rayon, and every reduction runs in a fixed order so results do not depend
//! on the thread count.

pub mod datasets;
pub mod error;
pub mod exec;
pub mod fsio;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod predictor;
pub mod protocol;
pub mod xlstm;

pub use error::{Error, Result};
