//! Typed event frames, ingestion and per-node count matrices.

mod config;
mod counts;
mod frame;
mod io;

pub use config::{FrameConfig, GroupSpec};
pub use counts::CountMatrix;
pub use frame::{Frame, Schema};
pub use io::{load_csv, write_csv};

use serde::{Deserialize, Serialize};

/// What a column is used for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Predictor,
    Response,
    /// Event time in days. Also used as a split predictor.
    Time,
    Ignore,
}

/// Column type. Ordinal levels are coded `1..=levels.len()` in listed order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    Numeric,
    #[serde(alias = "categorical")]
    Ordinal {
        levels: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
    #[serde(default)]
    pub role: Role,
}

impl VariableSpec {
    pub fn numeric(name: impl Into<String>, role: Role) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Numeric,
            role,
        }
    }

    pub fn ordinal<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
        role: Role,
    ) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Ordinal {
                levels: levels.into_iter().map(Into::into).collect(),
            },
            role,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            VariableKind::Numeric => None,
            VariableKind::Ordinal { levels } => Some(levels),
        }
    }

    /// Integer code of a level label, starting at 1.
    pub fn code_of(&self, label: &str) -> Option<f64> {
        self.levels()?
            .iter()
            .position(|l| l == label)
            .map(|i| (i + 1) as f64)
    }

    pub fn label_of(&self, code: f64) -> Option<&str> {
        let levels = self.levels()?;
        if code.fract() != 0.0 || code < 1.0 {
            return None;
        }
        levels.get(code as usize - 1).map(String::as_str)
    }
}
