//! sLSTM and mLSTM recurrent blocks with exponential gating, stacked into a
//! sequence feature extractor, with hand-derived reverse passes.
//!
//! Both cells keep a running stabilizer `m` (a max over log-gate values) so the
//! exponential gates stay bounded. Outputs are invariant to the stabilizer,
//! which lets the backward passes treat it as a constant.

mod layout;
mod mlstm;
mod norm;
mod slstm;
mod stack;

pub use layout::{BlockKind, BlockLayout};
pub use mlstm::{mlstm_forward, MlstmParams, MlstmState};
pub use slstm::{slstm_forward, SlstmParams, SlstmState};
pub use stack::{BlockParams, CellParams, StackCache, XlstmStack};
