use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Conversation;
use crate::Result;

const DEFAULT_ENTRIES: &[&str] = &[
    "yeah", "mm-hmm", "uh-huh", "mhm", "right", "okay", "ok", "sure", "wow", "really",
    "interesting", "i see", "gotcha", "yep", "huh",
];

/// Leading phrases that mark an utterance as self-referential content.
const SELF_REFERENTIAL: &[&[&str]] = &[&["i'm"], &["i", "am"], &["i"]];

/// Lowercase and strip surrounding punctuation, keeping apostrophes and hyphens.
pub fn normalize_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-')
        .to_lowercase()
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Backchannel lexicon. Entries may span several tokens ("i see").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeSet<Vec<String>>,
    max_len: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_entries(DEFAULT_ENTRIES.iter().copied())
    }
}

impl Lexicon {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a str>) -> Self {
        let entries: BTreeSet<Vec<String>> = entries
            .into_iter()
            .map(tokenize)
            .filter(|e| !e.is_empty())
            .collect();
        let max_len = entries.iter().map(Vec::len).max().unwrap_or(0);
        Self { entries, max_len }
    }

    /// Newline-separated entries; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_entries(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.entries.contains(tokens)
    }

    /// Number of tokens covered by a greedy longest-match scan.
    pub fn covered_tokens(&self, tokens: &[String]) -> usize {
        let mut i = 0;
        let mut covered = 0;
        while i < tokens.len() {
            let longest = (1..=self.max_len.min(tokens.len() - i))
                .rev()
                .find(|&n| self.entries.contains(&tokens[i..i + n]));
            match longest {
                Some(n) => {
                    covered += n;
                    i += n;
                }
                None => i += 1,
            }
        }
        covered
    }

    /// The backchannel heuristic: fewer than three tokens, at least half of
    /// them lexicon items, and not opening with a self-referential phrase.
    /// An utterance that is exactly one lexicon entry ("i see") qualifies
    /// regardless of its first token.
    pub fn is_backchannel(&self, tokens: &[String]) -> bool {
        if tokens.is_empty() || tokens.len() >= 3 {
            return false;
        }
        if self.contains(tokens) {
            return true;
        }
        let self_ref = SELF_REFERENTIAL
            .iter()
            .any(|p| tokens.len() >= p.len() && tokens.iter().zip(p.iter()).all(|(t, p)| t == p));
        if self_ref {
            return false;
        }
        2 * self.covered_tokens(tokens) >= tokens.len()
    }
}

/// Mark backchannel utterances with the lexicon heuristic.
///
/// Conversations whose source already annotates backchannels are returned
/// unchanged.
pub fn detect_backchannels(conv: &Conversation, lexicon: &Lexicon) -> Conversation {
    let mut out = conv.clone();
    if conv.backchannels_annotated || lexicon.is_empty() {
        return out;
    }
    for u in &mut out.utterances {
        let tokens = tokenize(&u.text());
        u.is_backchannel = lexicon.is_backchannel(&tokens);
        if u.is_backchannel {
            u.subtype = crate::Subtype::None;
        }
    }
    out
}
