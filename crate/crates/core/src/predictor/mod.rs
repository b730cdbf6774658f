//! The regression model: projection, xLSTM stack, pooling and a two-layer head.

mod checkpoint;
mod gradcheck;
mod model;
mod pool;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{MosLabel, MosRange};
use crate::xlstm::{BlockKind, BlockLayout, BlockParams};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{batch_mse, batch_mse_grad, gradient_check, GradCheckReport, GroupCheck};
pub use model::{mse_loss, mse_loss_grad, ForwardCache, PredictorParams};
pub use pool::{pool, pool_backward, Pooling};

/// Where the input sequence comes from: vocabulary logits or the language
/// model's last hidden layer. The model only sees a different input width.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    #[default]
    Logits,
    HiddenStates,
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSource::Logits => "logits",
            FeatureSource::HiddenStates => "hidden_states",
        })
    }
}

impl FromStr for FeatureSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "logits" => Ok(FeatureSource::Logits),
            "hidden_states" | "hidden" => Ok(FeatureSource::HiddenStates),
            other => Err(Error::InvalidConfig(format!("unknown feature source '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// Width of each input row (vocabulary size, or hidden-state width).
    pub d_vocab: usize,
    pub d_h: usize,
    pub layout: BlockLayout,
    pub heads: usize,
    pub pooling: Pooling,
    pub bypass_xlstm: bool,
    pub feature_source: FeatureSource,
    /// Hidden width of the regression head; `None` means `d_h`.
    pub head_hidden: Option<usize>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            d_vocab: 128_256,
            d_h: 512,
            layout: BlockLayout::default(),
            heads: 1,
            pooling: Pooling::Mean,
            bypass_xlstm: false,
            feature_source: FeatureSource::Logits,
            head_hidden: None,
        }
    }
}

impl PredictorConfig {
    /// Small configuration used by gradient checks and smoke runs.
    pub fn tiny() -> Self {
        Self {
            d_vocab: 32,
            d_h: 8,
            layout: "m,s".parse().expect("static layout"),
            ..Self::default()
        }
    }

    pub fn hidden(&self) -> usize {
        self.head_hidden.unwrap_or(self.d_h)
    }

    /// Whether the xLSTM stack takes part in the forward pass.
    pub fn uses_stack(&self) -> bool {
        !self.bypass_xlstm && !self.layout.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_vocab == 0 || self.d_h == 0 || self.hidden() == 0 {
            return Err(Error::InvalidConfig(format!(
                "widths must be ≥ 1 (d_vocab {}, d_h {}, head hidden {})",
                self.d_vocab,
                self.d_h,
                self.hidden()
            )));
        }
        let has_m = self.layout.kinds().contains(&BlockKind::Mlstm);
        if has_m && (self.heads == 0 || self.d_h % self.heads != 0) {
            return Err(Error::InvalidConfig(format!(
                "d_h {} not divisible into {} heads",
                self.d_h, self.heads
            )));
        }
        Ok(())
    }

    /// Short tag of the architecture variant, recorded with predictions.
    pub fn variant(&self) -> String {
        let mut tag = self.pooling.to_string();
        if self.bypass_xlstm {
            tag.push_str("+bypass_xlstm");
        }
        if self.feature_source == FeatureSource::HiddenStates {
            tag.push_str("+hidden_states");
        }
        tag
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub y_hat: f64,
    pub label: MosLabel,
    pub variant: String,
}

impl Prediction {
    pub fn new(id: impl Into<String>, y_hat: f64, range: MosRange, variant: impl Into<String>) -> Result<Self> {
        if !y_hat.is_finite() {
            return Err(Error::NonFinite(format!("prediction {y_hat}")));
        }
        Ok(Self {
            id: id.into(),
            y_hat,
            label: range.label_clamped(y_hat),
            variant: variant.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub projection: usize,
    pub blocks: Vec<usize>,
    pub head: usize,
    pub total: usize,
}

/// Exact parameter counts, computed from shapes alone.
pub fn param_count(config: &PredictorConfig) -> Result<ParamCount> {
    config.validate()?;
    let d = config.d_h;
    let hid = config.hidden();
    let projection = config.d_vocab * d;
    let blocks: Vec<usize> = config
        .layout
        .kinds()
        .iter()
        .map(|&k| BlockParams::<f32>::count(k, d, config.heads))
        .collect();
    let head = d * hid + hid + hid + 1;
    let total = projection + blocks.iter().sum::<usize>() + head;
    Ok(ParamCount {
        projection,
        blocks,
        head,
        total,
    })
}
