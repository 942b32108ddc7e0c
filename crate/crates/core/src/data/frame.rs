use std::sync::Arc;

use super::{CountMatrix, FrameConfig, GroupSpec, Role, VariableKind, VariableSpec};
use crate::error::{Error, Result};

/// Validated list of the non-ignored variables of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    variables: Vec<VariableSpec>,
    response: usize,
    time: Option<usize>,
    predictors: Vec<usize>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let variables: Vec<_> = variables
            .into_iter()
            .filter(|v| v.role != Role::Ignore)
            .collect();
        FrameConfig {
            missing_tokens: vec![],
            variables: variables.clone(),
            groups: GroupSpec::default(),
        }
        .validate()?;
        let response = variables
            .iter()
            .position(|v| v.role == Role::Response)
            .expect("validated");
        let time = variables.iter().position(|v| v.role == Role::Time);
        let predictors = variables
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v.role, Role::Predictor | Role::Time))
            .map(|(i, _)| i)
            .collect();
        Ok(Schema {
            variables,
            response,
            time,
            predictors,
        })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &VariableSpec {
        &self.variables[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn response_index(&self) -> usize {
        self.response
    }

    pub fn response_levels(&self) -> &[String] {
        self.variables[self.response].levels().expect("validated")
    }

    pub fn time_index(&self) -> Option<usize> {
        self.time
    }

    /// Variables eligible for splitting, in schema order.
    pub fn predictors(&self) -> &[usize] {
        &self.predictors
    }
}

/// Immutable event table: one row per event, tagged with the dataset it belongs to.
///
/// Predictor cells are stored as `f64` (ordinal levels by their 1-based code);
/// missing cells are `NaN`. Cloning and regrouping share the column storage.
#[derive(Clone, Debug)]
pub struct Frame {
    schema: Arc<Schema>,
    columns: Arc<Vec<Vec<f64>>>,
    response: Arc<Vec<u32>>,
    groups: Arc<Vec<u32>>,
    group_labels: Arc<Vec<String>>,
}

impl Frame {
    /// `columns` is indexed like the schema; the response slot may be empty.
    pub fn new(
        schema: Schema,
        mut columns: Vec<Vec<f64>>,
        response: Vec<u32>,
        groups: Vec<u32>,
        group_labels: Vec<String>,
    ) -> Result<Self> {
        let n = response.len();
        if columns.len() != schema.variables.len() {
            return Err(Error::precondition(
                "one column per schema variable expected",
            ));
        }
        for (idx, (col, var)) in columns.iter_mut().zip(&schema.variables).enumerate() {
            if idx == schema.response {
                col.clear();
                continue;
            }
            if col.len() != n {
                return Err(Error::precondition(format!(
                    "column `{}` has {} cells, expected {n}",
                    var.name,
                    col.len()
                )));
            }
            if let VariableKind::Ordinal { levels } = &var.kind {
                for (row, &v) in col.iter().enumerate() {
                    if !v.is_nan() && var.label_of(v).is_none() {
                        return Err(Error::UnknownLevel {
                            row,
                            column: var.name.clone(),
                            value: format!("code {v} of {} levels", levels.len()),
                        });
                    }
                }
            }
        }
        let c = schema.response_levels().len() as u32;
        if let Some(row) = response.iter().position(|&r| r >= c) {
            return Err(Error::MissingResponse { row });
        }
        if groups.len() != n {
            return Err(Error::precondition("one group tag per row expected"));
        }
        let d = group_labels.len() as u32;
        if let Some(&g) = groups.iter().find(|&&g| g >= d) {
            return Err(Error::precondition(format!("group tag {g} out of range")));
        }
        Ok(Frame {
            schema: Arc::new(schema),
            columns: Arc::new(columns),
            response: Arc::new(response),
            groups: Arc::new(groups),
            group_labels: Arc::new(group_labels),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    /// Number of response levels `c`.
    pub fn n_levels(&self) -> usize {
        self.schema.response_levels().len()
    }

    /// Number of datasets `d`.
    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn column(&self, variable: usize) -> &[f64] {
        &self.columns[variable]
    }

    #[inline]
    pub fn value(&self, row: usize, variable: usize) -> f64 {
        self.columns[variable][row]
    }

    #[inline]
    pub fn is_missing(&self, row: usize, variable: usize) -> bool {
        self.columns[variable][row].is_nan()
    }

    /// 0-based response level per row.
    pub fn responses(&self) -> &[u32] {
        &self.response
    }

    /// 0-based group tag per row.
    pub fn groups(&self) -> &[u32] {
        &self.groups
    }

    pub fn time(&self) -> Option<&[f64]> {
        self.schema.time.map(|t| self.column(t))
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        for &g in self.groups.iter() {
            sizes[g as usize] += 1;
        }
        sizes
    }

    /// Same rows and cells under new group tags.
    pub fn with_groups(&self, groups: Vec<u32>, group_labels: Vec<String>) -> Result<Self> {
        if groups.len() != self.n_rows() {
            return Err(Error::precondition("one group tag per row expected"));
        }
        let d = group_labels.len() as u32;
        if groups.iter().any(|&g| g >= d) {
            return Err(Error::precondition("group tag out of range"));
        }
        Ok(Frame {
            schema: Arc::clone(&self.schema),
            columns: Arc::clone(&self.columns),
            response: Arc::clone(&self.response),
            groups: Arc::new(groups),
            group_labels: Arc::new(group_labels),
        })
    }

    /// New frame holding the listed rows in order; rows may repeat.
    pub fn select_rows(&self, rows: &[u32]) -> Frame {
        self.select_rows_with(rows, |_, g| g, |_, _, v| v)
    }

    /// Row selection with per-row group remapping and cell rewriting.
    ///
    /// `regroup(row, group)` gives the new tag; `rewrite(row, variable, value)`
    /// the new cell. The group label list is kept.
    pub(crate) fn select_rows_with(
        &self,
        rows: &[u32],
        regroup: impl Fn(usize, u32) -> u32,
        rewrite: impl Fn(usize, usize, f64) -> f64,
    ) -> Frame {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(var, col)| {
                if col.is_empty() {
                    Vec::new()
                } else {
                    rows.iter()
                        .map(|&r| rewrite(r as usize, var, col[r as usize]))
                        .collect()
                }
            })
            .collect();
        Frame {
            schema: Arc::clone(&self.schema),
            columns: Arc::new(columns),
            response: Arc::new(rows.iter().map(|&r| self.response[r as usize]).collect()),
            groups: Arc::new(
                rows.iter()
                    .map(|&r| regroup(r as usize, self.groups[r as usize]))
                    .collect(),
            ),
            group_labels: Arc::clone(&self.group_labels),
        }
    }

    /// Replaces the group label list (and hence `d`); tags must stay in range.
    pub fn relabel_groups(&self, group_labels: Vec<String>) -> Result<Self> {
        self.with_groups(self.groups.to_vec(), group_labels)
    }

    /// Concatenates frames sharing a schema; group tags are kept as-is.
    pub fn concat(frames: &[Frame]) -> Result<Frame> {
        let first = frames
            .first()
            .ok_or_else(|| Error::precondition("nothing to concatenate"))?;
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); first.columns.len()];
        let mut response = Vec::new();
        let mut groups = Vec::new();
        for f in frames {
            if f.schema != first.schema {
                return Err(Error::precondition("frames have different schemas"));
            }
            for (dst, src) in columns.iter_mut().zip(f.columns.iter()) {
                dst.extend_from_slice(src);
            }
            response.extend_from_slice(&f.response);
            groups.extend_from_slice(&f.groups);
        }
        let d = frames.iter().map(|f| f.n_groups()).max().unwrap_or(0);
        let labels = frames
            .iter()
            .find(|f| f.n_groups() == d)
            .map(|f| f.group_labels.to_vec())
            .unwrap_or_default();
        Frame::new(
            first.schema.as_ref().clone(),
            columns,
            response,
            groups,
            labels,
        )
    }

    pub fn all_rows(&self) -> Vec<u32> {
        (0..self.n_rows() as u32).collect()
    }

    /// Tally of response level by group over `rows`.
    pub fn count_matrix(&self, rows: &[u32]) -> CountMatrix {
        let mut m = CountMatrix::zeros(self.n_levels(), self.n_groups());
        for &r in rows {
            let r = r as usize;
            m.increment(self.response[r] as usize, self.groups[r] as usize);
        }
        m
    }

    /// Config that reloads a frame written by [`super::write_csv`].
    pub fn roundtrip_config(&self, group_column: &str) -> FrameConfig {
        FrameConfig {
            missing_tokens: vec!["NA".to_string()],
            variables: self.schema.variables.clone(),
            groups: GroupSpec {
                column: Some(group_column.to_string()),
                labels: Some(self.group_labels.to_vec()),
                ..GroupSpec::default()
            },
        }
    }
}

/// Cell-level equality, including missing masks and group tags.
impl PartialEq for Frame {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.response == other.response
            && self.groups == other.groups
            && self.group_labels == other.group_labels
            && self.columns.len() == other.columns.len()
            && self.columns.iter().zip(other.columns.iter()).all(|(a, b)| {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| (x.is_nan() && y.is_nan()) || x == y)
            })
    }
}
