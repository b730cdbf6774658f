//! Conversation scaffolding: aspects, the five-level label lexicon, MOS
//! records, prompt templates and conversation assembly.

mod conversation;
mod label;
mod record;
mod templates;

pub use conversation::{render_multiround, Conversation, Role, Turn};
pub use label::{mos_to_label, parse_label_word, MosLabel};
pub use record::{AspectScores, MosRange, MosRecord};
pub use templates::{render_description_prompt, render_oneround};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scored aspect; each one gets its own predictor instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Quality,
    Correspondence,
    Authenticity,
}

impl Aspect {
    pub const ALL: [Aspect; 3] = [Aspect::Quality, Aspect::Correspondence, Aspect::Authenticity];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::Quality => "quality",
            Aspect::Correspondence => "correspondence",
            Aspect::Authenticity => "authenticity",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quality" | "qual" | "q" => Ok(Aspect::Quality),
            "correspondence" | "corr" | "alignment" | "c" => Ok(Aspect::Correspondence),
            "authenticity" | "auth" | "a" => Ok(Aspect::Authenticity),
            other => Err(Error::InvalidConfig(format!("unknown aspect '{other}'"))),
        }
    }
}
