//! Two-tier response parser.
//!
//! Tier 1 looks for candidate labels anywhere in the response, ignoring
//! case; the earliest occurrence wins and, at the same position, the
//! longest label. Tier 2 runs only when no label occurs: the first run of
//! ASCII digits is read as a 1-based candidate number. Anything else is
//! misformatted.

use serde::{Deserialize, Serialize};

use crate::model::RelationId;

use super::render::Candidates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchedBy {
    Raw,
    Index,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub prediction: Option<RelationId>,
    pub matched_by: MatchedBy,
}

impl ParsedAnswer {
    pub const MISFORMATTED: ParsedAnswer = ParsedAnswer {
        prediction: None,
        matched_by: MatchedBy::None,
    };

    pub fn is_misformatted(&self) -> bool {
        self.matched_by == MatchedBy::None
    }
}

/// Candidate index matched by label, if any.
pub fn match_label(text: &str, labels: &[String]) -> Option<usize> {
    let hay = text.to_lowercase();
    let mut best: Option<(usize, usize, usize)> = None; // (pos, label len, index)
    for (i, label) in labels.iter().enumerate() {
        let needle = label.to_lowercase();
        if needle.is_empty() {
            continue;
        }
        if let Some(pos) = hay.find(&needle) {
            let better = match best {
                None => true,
                Some((bp, bl, _)) => pos < bp || (pos == bp && needle.len() > bl),
            };
            if better {
                best = Some((pos, needle.len(), i));
            }
        }
    }
    best.map(|b| b.2)
}

/// Candidate index from the first integer in the text, if it is in range.
pub fn match_index(text: &str, n: usize) -> Option<usize> {
    let start = text.find(|c: char| c.is_ascii_digit())?;
    let digits = &text[start..];
    let end = digits.find(|c: char| !c.is_ascii_digit()).unwrap_or(digits.len());
    let digits = digits[..end].trim_start_matches('0');
    // an overlong run cannot be a valid index
    let i: usize = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    (1..=n).contains(&i).then(|| i - 1)
}

pub fn parse_response(text: &str, candidates: &Candidates) -> ParsedAnswer {
    if let Some(i) = match_label(text, &candidates.labels) {
        return ParsedAnswer {
            prediction: Some(candidates.ids[i]),
            matched_by: MatchedBy::Raw,
        };
    }
    match match_index(text, candidates.len()) {
        Some(i) => ParsedAnswer {
            prediction: Some(candidates.ids[i]),
            matched_by: MatchedBy::Index,
        },
        None => ParsedAnswer::MISFORMATTED,
    }
}
