//! Power simulations by duplicate-and-reassign.
//!
//! A base event set is duplicated and split at random into two equal groups,
//! so the groups are exchangeable. Signal replicates then append `n_delta`
//! events drawn from a signal pool to the second group. Each replicate is
//! scored by the direct root test, the single-tree adjusted value and,
//! optionally, the bagged adjusted value.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::{
    bag_estimate_with, interpolate, tree_statistic, Estimator, NullProvenance, NullSample,
    Statistic,
};
use crate::data::Frame;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::tree::{grow, GrowConfig, Pattern};

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Events that are duplicated into both groups.
    pub base: Frame,
    /// Events injected into the second group.
    pub pool: Frame,
    pub n_delta: Vec<usize>,
    pub reps: usize,
    /// Share of injected events per response level.
    pub mix: Vec<f64>,
    /// Bootstrap trees per bagged estimate; `None` skips that estimator.
    pub bagging: Option<usize>,
    pub r: usize,
    pub seed: u64,
    pub grow: GrowConfig,
    pub statistic: Statistic,
}

impl SimConfig {
    /// Defaults: `n_delta` in 0, 10, ..., 50, 100 reps, a 30/70 mix,
    /// `R = 1000`, `B = 50`.
    pub fn new(base: Frame, pool: Frame) -> Self {
        SimConfig {
            base,
            pool,
            n_delta: (0..=50).step_by(10).collect(),
            reps: 100,
            mix: vec![0.3, 0.7],
            bagging: Some(50),
            r: 1000,
            seed: 0,
            grow: GrowConfig::default(),
            statistic: Statistic::Bonferroni,
        }
    }

    /// Rows of `frame` inside `pattern`, as a signal pool.
    pub fn pool_from_pattern(frame: &Frame, pattern: &Pattern) -> Result<Frame> {
        let mut pattern = pattern.clone();
        pattern.rebind(frame.schema())?;
        Ok(frame.select_rows(&pattern.select(frame)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.base.schema() != self.pool.schema() {
            return Err(Error::precondition("base and pool must share a schema"));
        }
        if self.mix.len() != self.base.n_levels() {
            return Err(Error::precondition(format!(
                "mix has {} shares for {} response levels",
                self.mix.len(),
                self.base.n_levels()
            )));
        }
        let sum: f64 = self.mix.iter().sum();
        if self.mix.iter().any(|&s| s < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::precondition(
                "mix shares must be nonnegative and sum to 1",
            ));
        }
        if self.reps == 0 || self.r == 0 || self.bagging == Some(0) {
            return Err(Error::precondition("reps, R and B must be positive"));
        }
        if self.base.n_rows() == 0 {
            return Err(Error::precondition("empty base frame"));
        }
        for &n in &self.n_delta {
            let need = injection_counts(n, &self.mix);
            let have = level_rows(&self.pool);
            for (level, (&k, rows)) in need.iter().zip(&have).enumerate() {
                if k > rows.len() {
                    return Err(Error::precondition(format!(
                        "pool has {} events of level {level}, {k} needed for n_delta = {n}",
                        rows.len()
                    )));
                }
            }
        }
        self.grow.validate()
    }
}

/// Per-level injection counts by largest remainder; they sum to `n`.
pub fn injection_counts(n: usize, mix: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = mix.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let short = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..mix.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (raw[a] - raw[a].floor(), raw[b] - raw[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn level_rows(frame: &Frame) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); frame.n_levels()];
    for (row, &level) in frame.responses().iter().enumerate() {
        out[level as usize].push(row as u32);
    }
    out
}

const NULL_LABEL: u64 = u64::MAX;

/// Replicate `rep` at signal size `n_delta`: the duplicated base split into
/// two equal random halves, plus `n_delta` pool events in the second group.
pub fn make_replicate(config: &SimConfig, n_delta: usize, rep: usize) -> Result<Frame> {
    build_replicate(
        config,
        n_delta,
        derive_seed(config.seed, n_delta as u64),
        rep,
    )
}

fn build_replicate(config: &SimConfig, n_delta: usize, seed: u64, rep: usize) -> Result<Frame> {
    let mut rng = stream(seed, rep as u64);
    let n = config.base.n_rows();
    let mut slots: Vec<u32> = (0..2 * n as u32).collect();
    slots.shuffle(&mut rng);
    let mut group = vec![0u32; 2 * n];
    for &s in &slots[n..] {
        group[s as usize] = 1;
    }
    let rows: Vec<u32> = (0..2 * n as u32).map(|s| s % n as u32).collect();
    let labels = vec!["g1".to_string(), "g2".to_string()];
    let base = config
        .base
        .select_rows(&rows)
        .with_groups(group, labels.clone())?;
    if n_delta == 0 {
        return Ok(base);
    }
    let counts = injection_counts(n_delta, &config.mix);
    let mut picked = Vec::with_capacity(n_delta);
    for (level, mut pool) in level_rows(&config.pool).into_iter().enumerate() {
        let k = counts[level];
        if k > pool.len() {
            return Err(Error::precondition(format!(
                "signal pool exhausted at level {level}: {k} of {} requested",
                pool.len()
            )));
        }
        let (chosen, _) = pool.partial_shuffle(&mut rng, k);
        picked.extend_from_slice(chosen);
    }
    let signal = config
        .pool
        .select_rows(&picked)
        .with_groups(vec![1; picked.len()], labels)?;
    Frame::concat(&[base, signal])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEstimator {
    /// Root homogeneity test, no search.
    Direct,
    Tree,
    Bagged,
}

impl SimEstimator {
    pub fn name(self) -> &'static str {
        match self {
            SimEstimator::Direct => "direct",
            SimEstimator::Tree => "tree",
            SimEstimator::Bagged => "bagged",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub n_delta: usize,
    pub rep: usize,
    pub estimator: SimEstimator,
    /// `None` when the replicate failed.
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub n_delta: usize,
    pub estimator: SimEstimator,
    pub n: usize,
    pub failed: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub records: Vec<SimRecord>,
    pub summaries: Vec<SimSummary>,
    pub tree_null: NullSample,
    pub bagged_null: Option<NullSample>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov-Smirnov distance of a sample from the uniform law on `[0, 1]`.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max)
}

struct Scores {
    direct: f64,
    tree: f64,
    bagged: Option<f64>,
}

fn score(config: &SimConfig, frame: &Frame, bag_seed: u64) -> Result<Scores> {
    let tree = grow(frame, &config.grow)?;
    let bagged = match config.bagging {
        Some(b) => {
            Some(bag_estimate_with(frame, b, &config.grow, bag_seed, config.statistic)?.median)
        }
        None => None,
    };
    Ok(Scores {
        direct: tree.root.test.p,
        tree: tree_statistic(&tree, config.statistic),
        bagged,
    })
}

pub fn run_simulation(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let null_seed = derive_seed(config.seed, NULL_LABEL);
    let null_scores = (0..config.r)
        .into_par_iter()
        .map(|i| {
            let frame = build_replicate(config, 0, null_seed, i)?;
            score(config, &frame, derive_seed(null_seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let make_null = |values: Vec<f64>, estimator| {
        NullSample::new(
            values,
            null_seed,
            NullProvenance::SelfPermutation,
            estimator,
            config.statistic,
        )
        .map(|s| s.with_grow(config.grow.clone()))
    };
    let tree_null = make_null(
        null_scores.iter().map(|s| s.tree).collect(),
        Estimator::Tree,
    )?;
    let bagged_null = match config.bagging {
        Some(b) => Some(make_null(
            null_scores.iter().filter_map(|s| s.bagged).collect(),
            Estimator::Bagged { b },
        )?),
        None => None,
    };

    let cells: Vec<(usize, usize)> = config
        .n_delta
        .iter()
        .flat_map(|&n| (0..config.reps).map(move |rep| (n, rep)))
        .collect();
    let scored: Vec<(usize, usize, Option<Scores>)> = cells
        .into_par_iter()
        .map(|(n, rep)| {
            let bag_seed = derive_seed(derive_seed(config.seed, n as u64), rep as u64);
            let outcome = make_replicate(config, n, rep).and_then(|f| score(config, &f, bag_seed));
            if let Err(e) = &outcome {
                log::warn!("replicate n_delta={n} rep={rep} failed: {e}");
            }
            (n, rep, outcome.ok())
        })
        .collect();

    let mut records = Vec::new();
    for (n, rep, s) in &scored {
        let (n, rep) = (*n, *rep);
        records.push(SimRecord {
            n_delta: n,
            rep,
            estimator: SimEstimator::Direct,
            p: s.as_ref().map(|s| s.direct),
        });
        records.push(SimRecord {
            n_delta: n,
            rep,
            estimator: SimEstimator::Tree,
            p: s.as_ref().map(|s| interpolate(s.tree, &tree_null)),
        });
        if let Some(null) = &bagged_null {
            records.push(SimRecord {
                n_delta: n,
                rep,
                estimator: SimEstimator::Bagged,
                p: s.as_ref()
                    .and_then(|s| s.bagged)
                    .map(|b| interpolate(b, null)),
            });
        }
    }
    let summaries = summarize(&records, &config.n_delta);
    Ok(SimResult {
        records,
        summaries,
        tree_null,
        bagged_null,
    })
}

fn summarize(records: &[SimRecord], grid: &[usize]) -> Vec<SimSummary> {
    let mut out = Vec::new();
    for &n in grid {
        for est in [
            SimEstimator::Direct,
            SimEstimator::Tree,
            SimEstimator::Bagged,
        ] {
            let cell: Vec<&SimRecord> = records
                .iter()
                .filter(|r| r.n_delta == n && r.estimator == est)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let mut ps: Vec<f64> = cell.iter().filter_map(|r| r.p).collect();
            ps.sort_by(f64::total_cmp);
            out.push(SimSummary {
                n_delta: n,
                estimator: est,
                n: ps.len(),
                failed: cell.len() - ps.len(),
                median: quantile(&ps, 0.5),
                q25: quantile(&ps, 0.25),
                q75: quantile(&ps, 0.75),
            });
        }
    }
    out
}

impl SimResult {
    pub fn summary(&self, n_delta: usize, estimator: SimEstimator) -> Option<&SimSummary> {
        self.summaries
            .iter()
            .find(|s| s.n_delta == n_delta && s.estimator == estimator)
    }

    pub fn values(&self, n_delta: usize, estimator: SimEstimator) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.n_delta == n_delta && r.estimator == estimator)
            .filter_map(|r| r.p)
            .collect()
    }

    /// Long format: `n_delta,rep,estimator,p`.
    pub fn write_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_records_csv_to(file)
    }

    pub fn write_records_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n_delta", "rep", "estimator", "p"])?;
        for r in &self.records {
            w.write_record([
                r.n_delta.to_string(),
                r.rep.to_string(),
                r.estimator.name().to_string(),
                r.p.map(|p| format!("{p:e}")).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))
    }

    pub fn write_summary_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_summary_csv_to(file)
    }

    pub fn write_summary_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n_delta",
            "estimator",
            "n",
            "failed",
            "median",
            "q25",
            "q75",
        ])?;
        for s in &self.summaries {
            w.write_record([
                s.n_delta.to_string(),
                s.estimator.name().to_string(),
                s.n.to_string(),
                s.failed.to_string(),
                format!("{:e}", s.median),
                format!("{:e}", s.q25),
                format!("{:e}", s.q75),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))
    }
}
