use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Listener behavior at a word boundary.
///
/// The discriminant order is the classifier's output order and is part of the
/// checkpoint format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    TurnClaim = 0,
    Backchannel = 1,
    StaySilent = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::TurnClaim, Label::Backchannel, Label::StaySilent];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::TurnClaim => "turn_claim",
            Label::Backchannel => "backchannel",
            Label::StaySilent => "stay_silent",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "turn_claim" => Ok(Label::TurnClaim),
            "backchannel" => Ok(Label::Backchannel),
            "stay_silent" => Ok(Label::StaySilent),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Geometry of a turn claim relative to the speaker's activity.
///
/// Subtypes are kept on windows for analysis; classification collapses them
/// into [`Label::TurnClaim`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Interruption,
    Overlap,
    TurnTaking,
    #[default]
    None,
}
