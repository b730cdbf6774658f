use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Mlstm,
    Slstm,
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "mlstm" => Ok(BlockKind::Mlstm),
            "s" | "slstm" => Ok(BlockKind::Slstm),
            other => Err(Error::InvalidConfig(format!("unknown block kind '{other}'"))),
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Mlstm => "m",
            BlockKind::Slstm => "s",
        })
    }
}

/// Ordered block kinds of an xLSTM stack.
///
/// The default is `[m, s, m, m]`: three mLSTM blocks with one sLSTM block in
/// the second position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BlockLayout(Vec<BlockKind>);

impl BlockLayout {
    pub fn new(kinds: Vec<BlockKind>) -> Self {
        Self(kinds)
    }

    pub fn kinds(&self) -> &[BlockKind] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for BlockLayout {
    fn default() -> Self {
        use BlockKind::*;
        Self(vec![Mlstm, Slstm, Mlstm, Mlstm])
    }
}

impl FromStr for BlockLayout {
    type Err = Error;

    /// Comma-separated kinds, e.g. `m,s,m,m`. An empty string is the empty layout.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self(Vec::new()));
        }
        s.split(',').map(str::parse).collect::<Result<_>>().map(Self)
    }
}

impl fmt::Display for BlockLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<String> for BlockLayout {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BlockLayout> for String {
    fn from(l: BlockLayout) -> String {
        l.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let l: BlockLayout = "m, s,mlstm,M".parse().unwrap();
        assert_eq!(l, BlockLayout::default());
        assert_eq!(l.to_string(), "m,s,m,m");
        assert!("m,x".parse::<BlockLayout>().is_err());
        assert!("".parse::<BlockLayout>().unwrap().is_empty());
    }
}
