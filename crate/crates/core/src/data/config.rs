use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Role, VariableSpec};
use crate::error::{Error, Result};

fn default_missing_tokens() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

/// Schema and grouping description for CSV ingestion.
///
/// Stored as TOML:
///
/// ```toml
/// missing_tokens = ["", "NA"]
///
/// [[variables]]
/// name = "label"
/// kind = "ordinal"
/// levels = ["other", "suspicious"]
/// role = "response"
///
/// [groups]
/// time_cutoffs = [731.0]
/// start = 1.0
/// rebase_time = true
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub groups: GroupSpec,
}

/// How rows are assigned to datasets.
///
/// With neither `column` nor `time_cutoffs` set, every input file is one group.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    /// Column holding a group tag per row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    /// Group tag order; defaults to sorted distinct tags (or file names).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Boundaries on the time column: group `k` holds `[b[k-1], b[k])`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_cutoffs: Option<Vec<f64>>,
    /// Lower boundary of the first group; earlier rows are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    /// Shift times so every group starts at `start`.
    #[serde(default)]
    pub rebase_time: bool,
}

impl FrameConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: FrameConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("frame config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for v in &self.variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateColumn(v.name.clone()));
            }
            if let Some(levels) = v.levels() {
                let mut ls = std::collections::HashSet::new();
                if let Some(dup) = levels.iter().find(|l| !ls.insert(l.as_str())) {
                    return Err(Error::Config(format!(
                        "column `{}` lists level `{dup}` twice",
                        v.name
                    )));
                }
            }
        }
        let responses: Vec<_> = self
            .variables
            .iter()
            .filter(|v| v.role == Role::Response)
            .collect();
        match responses.as_slice() {
            [r] => {
                if r.levels().is_none_or(|l| l.is_empty()) {
                    return Err(Error::Config(format!(
                        "response `{}` must be ordinal with at least one level",
                        r.name
                    )));
                }
            }
            [] => return Err(Error::Config("no column has role = \"response\"".into())),
            _ => return Err(Error::Config("more than one response column".into())),
        }
        let times = self
            .variables
            .iter()
            .filter(|v| v.role == Role::Time)
            .count();
        if times > 1 {
            return Err(Error::Config("more than one time column".into()));
        }
        if let Some(t) = self.variables.iter().find(|v| v.role == Role::Time) {
            if t.levels().is_some() {
                return Err(Error::Config(format!(
                    "time column `{}` must be numeric",
                    t.name
                )));
            }
        }
        let g = &self.groups;
        if g.column.is_some() && g.time_cutoffs.is_some() {
            return Err(Error::Config(
                "groups: `column` and `time_cutoffs` are mutually exclusive".into(),
            ));
        }
        if let Some(cuts) = &g.time_cutoffs {
            if times == 0 {
                return Err(Error::Config(
                    "groups.time_cutoffs needs a time column".into(),
                ));
            }
            if cuts.is_empty() || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "groups.time_cutoffs must be nonempty and strictly increasing".into(),
                ));
            }
            if let Some(s) = g.start {
                if s >= cuts[0] {
                    return Err(Error::Config(
                        "groups.start must precede the first cutoff".into(),
                    ));
                }
            } else if g.rebase_time {
                return Err(Error::Config(
                    "groups.rebase_time requires groups.start".into(),
                ));
            }
        }
        if let Some(col) = &g.column {
            if self.variables.iter().any(|v| &v.name == col) {
                return Err(Error::Config(format!(
                    "group column `{col}` must not also be a variable"
                )));
            }
        }
        Ok(())
    }

    pub fn response(&self) -> &VariableSpec {
        self.variables
            .iter()
            .find(|v| v.role == Role::Response)
            .expect("validated config has a response")
    }

    /// Makes `name` the response, demoting any previous response to a predictor.
    pub fn set_response(&mut self, name: &str) -> Result<()> {
        let idx = self
            .variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        for v in &mut self.variables {
            if v.role == Role::Response {
                v.role = Role::Predictor;
            }
        }
        self.variables[idx].role = Role::Response;
        self.validate()
    }

    pub fn set_time(&mut self, name: &str) -> Result<()> {
        let idx = self
            .variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        for v in &mut self.variables {
            if v.role == Role::Time {
                v.role = Role::Predictor;
            }
        }
        self.variables[idx].role = Role::Time;
        self.validate()
    }
}
