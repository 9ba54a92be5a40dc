use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ground-truth outcome class of a case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Severe,
    NonSevere,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {0:?} (expected severe or non_severe)")]
pub struct LabelParseError(pub String);

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Severe => "severe",
            Label::NonSevere => "non_severe",
        }
    }

    pub fn is_severe(self) -> bool {
        self == Label::Severe
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tokens are trimmed, lowercased and `-` is read as `_`, so `"Severe "` and
/// `"Non-Severe"` are accepted.
impl FromStr for Label {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let canonical = s.trim().to_ascii_lowercase().replace('-', "_");
        match canonical.as_str() {
            "severe" => Ok(Label::Severe),
            "non_severe" => Ok(Label::NonSevere),
            _ => Err(LabelParseError(s.to_string())),
        }
    }
}
