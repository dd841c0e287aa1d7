use serde::{Deserialize, Serialize};

/// Ground-truth class. `Generated` is the positive class (index 1) everywhere:
/// logits, scores, metrics and CSV exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Real,
    Generated,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Real => 0,
            Label::Generated => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Real),
            1 => Some(Label::Generated),
            _ => None,
        }
    }

    pub fn is_generated(self) -> bool {
        self == Label::Generated
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Generated => "generated",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
