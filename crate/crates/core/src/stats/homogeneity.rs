use serde::{Deserialize, Serialize};

use super::TestResult;
use crate::data::CountMatrix;
use crate::error::{Error, Result};

/// Atomic model used at every node of a tree.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AtomicModel {
    /// Equal Poisson rates per level across datasets.
    #[default]
    Poisson,
    /// Poisson rates scaled by a known exposure per dataset.
    Exposure { exposures: Vec<f64> },
    /// Equal level proportions across datasets; totals are unconstrained.
    Multinomial,
}

impl AtomicModel {
    pub fn dof(&self, levels: usize, datasets: usize) -> u32 {
        match self {
            AtomicModel::Poisson | AtomicModel::Exposure { .. } => ((datasets - 1) * levels) as u32,
            AtomicModel::Multinomial => ((levels.saturating_sub(1)) * (datasets - 1)) as u32,
        }
    }

    pub fn check(&self, levels: usize, datasets: usize) -> Result<()> {
        if levels < 1 {
            return Err(Error::precondition(
                "at least one response level is required",
            ));
        }
        if datasets < 2 {
            return Err(Error::precondition("at least two datasets are required"));
        }
        match self {
            AtomicModel::Poisson => Ok(()),
            AtomicModel::Exposure { exposures } => {
                if exposures.len() != datasets {
                    return Err(Error::precondition(format!(
                        "{} exposures for {datasets} datasets",
                        exposures.len()
                    )));
                }
                if exposures.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                    return Err(Error::precondition("exposures must be positive"));
                }
                Ok(())
            }
            AtomicModel::Multinomial if levels < 2 => Err(Error::precondition(
                "the multinomial model needs at least two response levels",
            )),
            AtomicModel::Multinomial => Ok(()),
        }
    }

    /// Log-likelihood ratio statistic of a row-major `levels x datasets` block.
    ///
    /// Lenient: a dataset with no events contributes nothing under the
    /// multinomial model instead of failing.
    pub fn statistic(&self, counts: &[u64], levels: usize, datasets: usize) -> f64 {
        let w = match self {
            AtomicModel::Poisson => poisson_deviance(counts, levels, datasets),
            AtomicModel::Exposure { exposures } => {
                exposure_deviance(counts, levels, datasets, exposures)
            }
            AtomicModel::Multinomial => multinomial_deviance(counts, levels, datasets),
        };
        w.max(0.0)
    }

    pub fn test(&self, counts: &CountMatrix) -> TestResult {
        let (c, d) = (counts.levels(), counts.datasets());
        let w = self.statistic(counts_slice(counts).as_slice(), c, d);
        TestResult::new(w, self.dof(c, d))
    }
}

fn counts_slice(m: &CountMatrix) -> Vec<u64> {
    m.rows().flat_map(|r| r.iter().copied()).collect()
}

#[inline]
fn xlogy_ratio(y: f64, mu: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y * (y / mu).ln()
    }
}

fn poisson_deviance(counts: &[u64], levels: usize, datasets: usize) -> f64 {
    let d = datasets as f64;
    let mut w = 0.0;
    for row in counts.chunks_exact(datasets).take(levels) {
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let mean = total as f64 / d;
        for &y in row {
            let y = y as f64;
            w += xlogy_ratio(y, mean) - (y - mean);
        }
    }
    2.0 * w
}

fn exposure_deviance(counts: &[u64], levels: usize, datasets: usize, e: &[f64]) -> f64 {
    let e_total: f64 = e.iter().sum();
    let mut w = 0.0;
    for row in counts.chunks_exact(datasets).take(levels) {
        let weighted: f64 = row.iter().zip(e).map(|(&y, &ej)| ej * y as f64).sum();
        let mean = weighted / e_total;
        for (&y, &ej) in row.iter().zip(e) {
            let y = y as f64;
            let mu = ej * mean;
            w += xlogy_ratio(y, mu) - (y - mu);
        }
    }
    2.0 * w
}

fn multinomial_deviance(counts: &[u64], levels: usize, datasets: usize) -> f64 {
    let col_totals: Vec<f64> = (0..datasets)
        .map(|j| (0..levels).map(|i| counts[i * datasets + j]).sum::<u64>() as f64)
        .collect();
    let grand: f64 = col_totals.iter().sum();
    let mut w = 0.0;
    for row in counts.chunks_exact(datasets).take(levels) {
        let level_total: u64 = row.iter().sum();
        if level_total == 0 {
            continue;
        }
        let pooled = level_total as f64 / grand;
        for (&y, &n) in row.iter().zip(&col_totals) {
            if y > 0 {
                let y = y as f64;
                w += y * ((y / n) / pooled).ln();
            }
        }
    }
    2.0 * w
}

/// Test of equal Poisson rates per response level across datasets.
pub fn poisson_homogeneity(counts: &CountMatrix) -> Result<TestResult> {
    let model = AtomicModel::Poisson;
    model.check(counts.levels(), counts.datasets())?;
    Ok(model.test(counts))
}

/// Poisson homogeneity with the exposures attached to `counts`.
pub fn exposure_homogeneity(counts: &CountMatrix) -> Result<TestResult> {
    let exposures = counts
        .exposures()
        .ok_or_else(|| Error::precondition("count matrix carries no exposures"))?;
    let model = AtomicModel::Exposure {
        exposures: exposures.to_vec(),
    };
    model.check(counts.levels(), counts.datasets())?;
    Ok(model.test(counts))
}

/// G-test of equal level proportions across datasets.
pub fn multinomial_homogeneity(counts: &CountMatrix) -> Result<TestResult> {
    let model = AtomicModel::Multinomial;
    model.check(counts.levels(), counts.datasets())?;
    if let Some(j) = (0..counts.datasets()).find(|&j| counts.column_total(j) == 0) {
        return Err(Error::precondition(format!("dataset {j} has no events")));
    }
    Ok(model.test(counts))
}
