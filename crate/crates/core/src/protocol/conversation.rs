use std::fmt;

use serde::{Deserialize, Serialize};

use super::templates::multiround_turns;
use super::{parse_label_word, Aspect};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::User => "User",
            Role::Assistant => "Assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

/// Alternating user/assistant turns for one sample and aspect.
///
/// Without the final answer turn this is the "with description" form that ends
/// on the user's request for a rating; `full_conv` appends the one-word answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub aspect: Aspect,
    pub turns: Vec<Turn>,
    pub full_conv: bool,
}

impl Conversation {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Plain-text transcript, turns separated by blank lines.
    pub fn transcript(&self) -> String {
        self.turns
            .iter()
            .map(|t| format!("{}: {}", t.role, t.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Assembles the multi-round conversation.
///
/// `response0` is the assistant's description; when present the rating request
/// follows it. `response1` is the one-word answer and requires `response0`.
pub fn render_multiround(
    id: &str,
    aspect: Aspect,
    prompt: &str,
    response0: Option<&str>,
    response1: Option<&str>,
) -> Result<Conversation> {
    let (analysis, request) = multiround_turns(aspect, prompt);
    let mut turns = vec![Turn {
        role: Role::User,
        text: analysis,
    }];
    if let Some(desc) = response0 {
        turns.push(Turn {
            role: Role::Assistant,
            text: desc.to_string(),
        });
        turns.push(Turn {
            role: Role::User,
            text: request,
        });
    }
    if let Some(answer) = response1 {
        let label = parse_label_word(answer)?;
        if response0.is_none() {
            return Err(Error::InvalidConfig(
                "an answer turn needs the description turn before it".into(),
            ));
        }
        turns.push(Turn {
            role: Role::Assistant,
            text: label.word().to_string(),
        });
    }
    Ok(Conversation {
        id: id.to_string(),
        aspect,
        turns,
        full_conv: response1.is_some(),
    })
}
