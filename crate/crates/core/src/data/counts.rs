use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c x d` matrix of event counts: rows are response levels, columns datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMatrix {
    levels: usize,
    datasets: usize,
    counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exposures: Option<Vec<f64>>,
}

impl CountMatrix {
    pub fn zeros(levels: usize, datasets: usize) -> Self {
        CountMatrix {
            levels,
            datasets,
            counts: vec![0; levels * datasets],
            exposures: None,
        }
    }

    /// Builds a matrix from level rows, each holding one count per dataset.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let levels = rows.len();
        if levels == 0 {
            return Err(Error::precondition("count matrix needs at least one level"));
        }
        let datasets = rows[0].as_ref().len();
        let mut counts = Vec::with_capacity(levels * datasets);
        for row in rows {
            let row = row.as_ref();
            if row.len() != datasets {
                return Err(Error::precondition("ragged count matrix"));
            }
            counts.extend_from_slice(row);
        }
        Ok(CountMatrix {
            levels,
            datasets,
            counts,
            exposures: None,
        })
    }

    pub fn with_exposures(mut self, exposures: Vec<f64>) -> Result<Self> {
        if exposures.len() != self.datasets {
            return Err(Error::precondition(format!(
                "expected {} exposures, got {}",
                self.datasets,
                exposures.len()
            )));
        }
        if let Some(e) = exposures.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::precondition(format!("exposure {e} is not positive")));
        }
        self.exposures = Some(exposures);
        Ok(self)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn datasets(&self) -> usize {
        self.datasets
    }

    pub fn exposures(&self) -> Option<&[f64]> {
        self.exposures.as_deref()
    }

    #[inline]
    pub fn get(&self, level: usize, dataset: usize) -> u64 {
        self.counts[level * self.datasets + dataset]
    }

    #[inline]
    pub fn increment(&mut self, level: usize, dataset: usize) {
        self.counts[level * self.datasets + dataset] += 1;
    }

    #[inline]
    pub fn decrement(&mut self, level: usize, dataset: usize) {
        self.counts[level * self.datasets + dataset] -= 1;
    }

    pub fn row(&self, level: usize) -> &[u64] {
        &self.counts[level * self.datasets..(level + 1) * self.datasets]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.datasets.max(1))
    }

    pub fn column_total(&self, dataset: usize) -> u64 {
        (0..self.levels).map(|i| self.get(i, dataset)).sum()
    }

    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.datasets).map(|j| self.column_total(j)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Cell-wise difference `self - other`; panics on underflow.
    pub fn minus(&self, other: &CountMatrix) -> CountMatrix {
        assert_eq!(self.counts.len(), other.counts.len());
        CountMatrix {
            levels: self.levels,
            datasets: self.datasets,
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a - b)
                .collect(),
            exposures: self.exposures.clone(),
        }
    }

    /// Per-dataset count vectors, as printed in tree renderings: `[dataset][level]`.
    pub fn by_dataset(&self) -> Vec<Vec<u64>> {
        (0..self.datasets)
            .map(|j| (0..self.levels).map(|i| self.get(i, j)).collect())
            .collect()
    }
}

impl AddAssign<&CountMatrix> for CountMatrix {
    fn add_assign(&mut self, rhs: &CountMatrix) {
        assert_eq!(self.levels, rhs.levels);
        assert_eq!(self.datasets, rhs.datasets);
        for (a, b) in self.counts.iter_mut().zip(&rhs.counts) {
            *a += b;
        }
    }
}
