//! Multiplicity adjustment of a tree's minimum p-value.
//!
//! `p' = min(m p, 1)` corrects for the `m` candidate splits searched. A second
//! step maps `p'` through replicate values computed after randomly
//! reallocating group tags, interpolating between order statistics.

mod sample;

pub use sample::{Estimator, NullProvenance, NullSample, Statistic};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::tree::{grow, DiffTree, GrowConfig};

/// `min(m p, 1)`.
pub fn bonferroni(p: f64, m: u64) -> f64 {
    (p * m as f64).min(1.0)
}

/// Log-scale companion of [`bonferroni`], exact for tiny `p`.
pub fn ln_bonferroni(ln_p: f64, m: u64) -> f64 {
    (ln_p + (m as f64).ln()).min(0.0)
}

/// Carried p-value of a grown tree.
pub fn tree_statistic(tree: &DiffTree, statistic: Statistic) -> f64 {
    match statistic {
        Statistic::Bonferroni => ln_bonferroni(tree.min_ln_p(), tree.test_count.max(1)).exp(),
        Statistic::Raw => tree.min_p(),
    }
}

/// Draws a fresh group tag for every row, uniform over `0..d`.
pub fn coin_toss_reassign(frame: &Frame, d: usize, seed: u64) -> Result<Frame> {
    coin_toss_with(frame, d, &mut stream(seed, 0))
}

fn group_labels_for(frame: &Frame, d: usize) -> Vec<String> {
    if frame.n_groups() == d {
        frame.group_labels().to_vec()
    } else {
        (1..=d).map(|g| format!("g{g}")).collect()
    }
}

pub(crate) fn coin_toss_with<R: Rng>(frame: &Frame, d: usize, rng: &mut R) -> Result<Frame> {
    if d < 2 {
        return Err(Error::precondition(
            "reallocation needs at least two groups",
        ));
    }
    let groups = (0..frame.n_rows())
        .map(|_| rng.random_range(0..d as u32))
        .collect();
    frame.with_groups(groups, group_labels_for(frame, d))
}

/// Order-statistic interpolation of `p_prime` against `null`.
///
/// With sentinels `0` and `1` around the sorted sample, locates the bracket
/// `[v_j, v_{j+1}]` holding `p_prime` (largest `j` on ties) and returns
/// `(j + r) / (R + 1)` with `r` the position inside the bracket.
pub fn interpolate(p_prime: f64, null: &NullSample) -> f64 {
    let v = null.values();
    let r_count = v.len();
    let p = p_prime.clamp(0.0, 1.0);
    let j = v.partition_point(|&x| x <= p);
    let lo = if j == 0 { 0.0 } else { v[j - 1] };
    let hi = if j == r_count { 1.0 } else { v[j] };
    let frac = if hi > lo { (p - lo) / (hi - lo) } else { 0.0 };
    ((j as f64 + frac) / (r_count as f64 + 1.0)).clamp(0.0, 1.0)
}

/// How replicate p-values are computed in [`permutation_null_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullOptions {
    pub estimator: Estimator,
    pub statistic: Statistic,
    pub provenance: NullProvenance,
}

/// `r` reallocations of `frame` into `d` groups, one tree each.
pub fn permutation_null(
    frame: &Frame,
    d: usize,
    r: usize,
    config: &GrowConfig,
    seed: u64,
) -> Result<NullSample> {
    permutation_null_with(frame, d, r, config, seed, &NullOptions::default())
}

pub fn permutation_null_with(
    frame: &Frame,
    d: usize,
    r: usize,
    config: &GrowConfig,
    seed: u64,
    options: &NullOptions,
) -> Result<NullSample> {
    if r == 0 {
        return Err(Error::precondition("R must be at least 1"));
    }
    config.validate()?;
    let values = (0..r as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let shuffled = coin_toss_with(frame, d, &mut rng)?;
            replicate_value(&shuffled, config, options, rng.random())
        })
        .collect::<Result<Vec<f64>>>()?;
    log::info!(
        "null sample: R={r} seed={seed} estimator={}",
        options.estimator
    );
    Ok(NullSample::new(
        values,
        seed,
        options.provenance,
        options.estimator,
        options.statistic,
    )?
    .with_grow(config.clone()))
}

fn replicate_value(
    frame: &Frame,
    config: &GrowConfig,
    options: &NullOptions,
    bag_seed: u64,
) -> Result<f64> {
    match options.estimator {
        Estimator::Tree => Ok(tree_statistic(&grow(frame, config)?, options.statistic)),
        Estimator::Bagged { b } => {
            Ok(bag_estimate_with(frame, b, config, bag_seed, options.statistic)?.median)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BagEstimate {
    pub median: f64,
    /// Replicate values in replicate order.
    pub values: Vec<f64>,
}

/// Median of an unsorted sample; the mean of the central pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    assert!(n > 0, "median of an empty sample");
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Bootstrap each group separately `b` times and take the median `p'`.
pub fn bag_estimate(
    frame: &Frame,
    b: usize,
    config: &GrowConfig,
    seed: u64,
) -> Result<BagEstimate> {
    bag_estimate_with(frame, b, config, seed, Statistic::Bonferroni)
}

pub fn bag_estimate_with(
    frame: &Frame,
    b: usize,
    config: &GrowConfig,
    seed: u64,
    statistic: Statistic,
) -> Result<BagEstimate> {
    if b == 0 {
        return Err(Error::precondition("B must be at least 1"));
    }
    let mut by_group: Vec<Vec<u32>> = vec![Vec::new(); frame.n_groups()];
    for (row, &g) in frame.groups().iter().enumerate() {
        by_group[g as usize].push(row as u32);
    }
    let values = (0..b as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let mut rows = Vec::with_capacity(frame.n_rows());
            for members in &by_group {
                for _ in 0..members.len() {
                    rows.push(members[rng.random_range(0..members.len())]);
                }
            }
            let tree = grow(&frame.select_rows(&rows), config)?;
            Ok(tree_statistic(&tree, statistic))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BagEstimate {
        median: median(&values),
        values,
    })
}

/// Observed minimum p-value with both adjustments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentReport {
    /// Smallest atomic p-value of the observed tree.
    pub p: f64,
    pub ln_p: f64,
    /// Candidate splits examined.
    pub m: u64,
    /// Bonferroni value, or the bagged median when bagging.
    pub p_bonferroni: f64,
    pub p_permutation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bagged: Option<BagEstimate>,
    pub null_r: usize,
    pub null_seed: u64,
    pub provenance: NullProvenance,
    pub estimator: Estimator,
    pub statistic: Statistic,
}

/// Grows the observed tree, then adjusts its minimum p-value against `null`.
///
/// A bagged null requires `bag_seed`; the observed value is then the bagged
/// median built with the same `B`.
pub fn adjust_full(
    frame: &Frame,
    null: &NullSample,
    config: &GrowConfig,
    bag_seed: Option<u64>,
) -> Result<(AdjustmentReport, DiffTree)> {
    if let Some(g) = &null.grow {
        if g != config {
            log::warn!("null sample was built with different grow settings");
        }
    }
    let tree = grow(frame, config)?;
    let (p_prime, bagged) = match null.estimator {
        Estimator::Tree => (tree_statistic(&tree, null.statistic), None),
        Estimator::Bagged { b } => {
            let seed = bag_seed
                .ok_or_else(|| Error::precondition("a bagged null sample needs a bagging seed"))?;
            let est = bag_estimate_with(frame, b, config, seed, null.statistic)?;
            (est.median, Some(est))
        }
    };
    let report = AdjustmentReport {
        p: tree.min_p(),
        ln_p: tree.min_ln_p(),
        m: tree.test_count,
        p_bonferroni: p_prime,
        p_permutation: interpolate(p_prime, null),
        bagged,
        null_r: null.r(),
        null_seed: null.seed,
        provenance: null.provenance,
        estimator: null.estimator,
        statistic: null.statistic,
    };
    Ok((report, tree))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(values: &[f64]) -> NullSample {
        NullSample::new(
            values.to_vec(),
            0,
            NullProvenance::SelfPermutation,
            Estimator::Tree,
            Statistic::Bonferroni,
        )
        .unwrap()
    }

    #[test]
    fn bonferroni_caps_and_scales() {
        assert_eq!(bonferroni(0.5, 3), 1.0);
        assert!((bonferroni(0.01, 10) - 0.1).abs() < 1e-15);
        let p = bonferroni(1.4e-14, 13414);
        assert!((p / 1.87796e-10 - 1.0).abs() < 1e-12);
        assert!((ln_bonferroni(1.4e-14f64.ln(), 13414).exp() / p - 1.0).abs() < 1e-12);
        assert_eq!(ln_bonferroni(-1e-3, 1000), 0.0);
    }

    #[test]
    fn interpolation_below_first_order_statistic() {
        // (1.9e-10 / 8.4e-6) / 1001
        let mut vals = vec![8.4e-6];
        vals.extend((1..1000).map(|i| i as f64 / 1000.0));
        let null = sample(&vals);
        let p = interpolate(1.9e-10, &null);
        assert!((p / 2.259645e-8 - 1.0).abs() < 1e-5, "{p}");
    }

    #[test]
    fn interpolation_exact_at_order_statistics() {
        let null = sample(&[0.1, 0.2, 0.4, 0.8]);
        for (j, v) in null.values().iter().enumerate() {
            assert!((interpolate(*v, &null) - (j + 1) as f64 / 5.0).abs() < 1e-15);
        }
        assert_eq!(interpolate(0.0, &null), 0.0);
        assert_eq!(interpolate(1.0, &null), 1.0);
        assert!((interpolate(0.3, &null) - 2.5 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_ties_take_largest_index() {
        let null = sample(&[0.1, 0.3, 0.3, 0.3, 0.9]);
        assert!((interpolate(0.3, &null) - 4.0 / 6.0).abs() < 1e-15);
        let ones = sample(&[0.5, 1.0, 1.0]);
        assert!((interpolate(1.0, &ones) - 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_is_monotone() {
        let null = sample(&[0.01, 0.05, 0.05, 0.2, 0.6, 1.0]);
        let mut last = 0.0;
        for k in 0..=1000 {
            let p = interpolate(k as f64 / 1000.0, &null);
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn median_of_even_sample_is_central_mean() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
