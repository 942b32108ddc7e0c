//! Sliding two-window surveillance.
//!
//! For a detection day `t` the events in `[t - 2L, t - L)` and `[t - L, t)`
//! form two groups, time is re-based to the start of each window, and the
//! resulting tree's minimum p-value is adjusted against a shared null.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::{
    bag_estimate_with, interpolate, permutation_null_with, tree_statistic, Estimator, NullOptions,
    NullProvenance, NullSample, Statistic,
};
use crate::data::Frame;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::tree::{grow, GrowConfig, Pattern};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_length: i64,
    pub step: i64,
    /// First and last day of the data, inclusive.
    pub start_day: i64,
    pub end_day: i64,
}

/// Detection days `start + 2L, start + 2L + step, ...` up to `end + 1`.
pub fn plan_windows(
    start_day: i64,
    end_day: i64,
    window_length: i64,
    step: i64,
) -> Result<WindowPlan> {
    if window_length <= 0 || step <= 0 {
        return Err(Error::precondition(
            "window length and step must be positive",
        ));
    }
    if end_day - start_day + 1 < 2 * window_length {
        return Err(Error::precondition(format!(
            "days {start_day}..={end_day} cannot hold two windows of {window_length} days"
        )));
    }
    Ok(WindowPlan {
        window_length,
        step,
        start_day,
        end_day,
    })
}

impl WindowPlan {
    /// Plan covering the integer days spanned by the frame's time column.
    pub fn for_frame(frame: &Frame, window_length: i64, step: i64) -> Result<Self> {
        let time = frame
            .time()
            .ok_or_else(|| Error::precondition("sequential detection needs a time column"))?;
        let (lo, hi) = time
            .iter()
            .filter(|t| !t.is_nan())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
                (lo.min(t), hi.max(t))
            });
        if !lo.is_finite() {
            return Err(Error::precondition("time column has no values"));
        }
        plan_windows(lo.floor() as i64, hi.floor() as i64, window_length, step)
    }

    pub fn first_day(&self) -> i64 {
        self.start_day + 2 * self.window_length
    }

    pub fn detection_days(&self) -> Vec<i64> {
        let last = self.end_day + 1;
        (0..)
            .map(|k| self.first_day() + k * self.step)
            .take_while(|&t| t <= last)
            .collect()
    }

    /// Rows in `[t - 2L, t - L)` as group 0 and `[t - L, t)` as group 1, with
    /// time shifted so each window starts at 0. Rows with missing time are
    /// left out.
    pub fn slice(&self, frame: &Frame, day: i64) -> Result<Frame> {
        let tcol = frame
            .schema()
            .time_index()
            .ok_or_else(|| Error::precondition("sequential detection needs a time column"))?;
        let l = self.window_length as f64;
        let t = day as f64;
        let window = |v: f64| -> Option<u32> {
            if v >= t - 2.0 * l && v < t - l {
                Some(0)
            } else if v >= t - l && v < t {
                Some(1)
            } else {
                None
            }
        };
        let time = frame.column(tcol);
        let rows: Vec<u32> = (0..frame.n_rows())
            .filter(|&r| window(time[r]).is_some())
            .map(|r| r as u32)
            .collect();
        let sliced = frame.select_rows_with(
            &rows,
            |r, _| window(time[r]).expect("selected"),
            |r, var, v| {
                if var == tcol {
                    let start = t - l * (2 - window(time[r]).expect("selected")) as f64;
                    v - start
                } else {
                    v
                }
            },
        );
        sliced.relabel_groups(vec![
            format!(
                "[{}, {})",
                day - 2 * self.window_length,
                day - self.window_length
            ),
            format!("[{}, {})", day - self.window_length, day),
        ])
    }
}

/// Where the shared null sample comes from.
#[derive(Clone, Debug)]
pub enum NullSource {
    Sample(NullSample),
    /// Reallocations of separate reference events.
    Historical(Frame),
    /// Reallocations of the two windows of the first detection day.
    FirstWindows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialOptions {
    pub grow: GrowConfig,
    pub statistic: Statistic,
    /// Replicates for a null that has to be built.
    pub r: usize,
    /// Bootstrap trees per bagged estimate; `None` disables bagging.
    pub bagging: Option<usize>,
    pub seed: u64,
}

impl Default for SequentialOptions {
    fn default() -> Self {
        SequentialOptions {
            grow: GrowConfig::default(),
            statistic: Statistic::Bonferroni,
            r: 1000,
            bagging: None,
            seed: 0,
        }
    }
}

/// Null samples used across a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct SequentialNulls {
    pub tree: NullSample,
    pub bagged: Option<NullSample>,
}

/// Builds the null sample(s) once for the whole plan.
pub fn build_nulls(
    frame: &Frame,
    plan: &WindowPlan,
    source: &NullSource,
    options: &SequentialOptions,
) -> Result<SequentialNulls> {
    let reference = match source {
        NullSource::Sample(sample) => {
            if options.bagging.is_some() {
                return Err(Error::precondition(
                    "bagging needs a null built here, not a stored sample",
                ));
            }
            return Ok(SequentialNulls {
                tree: sample.clone(),
                bagged: None,
            });
        }
        NullSource::Historical(h) => (h.clone(), NullProvenance::HistoricalPermutation),
        NullSource::FirstWindows => (
            plan.slice(frame, plan.first_day())?,
            NullProvenance::SelfPermutation,
        ),
    };
    let (data, provenance) = reference;
    let build = |estimator, label| {
        permutation_null_with(
            &data,
            2,
            options.r,
            &options.grow,
            derive_seed(options.seed, label),
            &NullOptions {
                estimator,
                statistic: options.statistic,
                provenance,
            },
        )
    };
    let tree = build(Estimator::Tree, 1)?;
    let bagged = match options.bagging {
        Some(b) => Some(build(Estimator::Bagged { b }, 2)?),
        None => None,
    };
    Ok(SequentialNulls { tree, bagged })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayFlag {
    Ok,
    /// A window held too few events to test.
    Gap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: i64,
    pub n_previous: usize,
    pub n_current: usize,
    pub p: f64,
    pub m: u64,
    pub p_bonferroni: f64,
    pub p_permutation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bagged_p_bonferroni: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bagged_p_permutation: Option<f64>,
    pub flag: DayFlag,
    /// Smallest-p terminal node of the day's tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialReport {
    pub plan: WindowPlan,
    pub null_r: usize,
    pub null_seed: u64,
    pub null_provenance: NullProvenance,
    pub records: Vec<DayRecord>,
}

/// Evaluates every detection day of `plan` against `nulls`.
///
/// Days are independent and evaluated in parallel; records come back in day
/// order.
pub fn run_sequential(
    frame: &Frame,
    plan: &WindowPlan,
    nulls: &SequentialNulls,
    options: &SequentialOptions,
) -> Result<SequentialReport> {
    if frame.schema().time_index().is_none() {
        return Err(Error::precondition(
            "sequential detection needs a time column",
        ));
    }
    let min_events = 2 * options.grow.min_child_for(frame.n_levels());
    let records = plan
        .detection_days()
        .into_par_iter()
        .map(|day| evaluate_day(frame, plan, day, nulls, options, min_events))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequentialReport {
        plan: *plan,
        null_r: nulls.tree.r(),
        null_seed: nulls.tree.seed,
        null_provenance: nulls.tree.provenance,
        records,
    })
}

fn evaluate_day(
    frame: &Frame,
    plan: &WindowPlan,
    day: i64,
    nulls: &SequentialNulls,
    options: &SequentialOptions,
    min_events: usize,
) -> Result<DayRecord> {
    let windows = plan.slice(frame, day)?;
    let sizes = windows.group_sizes();
    let mut record = DayRecord {
        day,
        n_previous: sizes[0],
        n_current: sizes[1],
        p: 1.0,
        m: 0,
        p_bonferroni: 1.0,
        p_permutation: 1.0,
        bagged_p_bonferroni: None,
        bagged_p_permutation: None,
        flag: DayFlag::Gap,
        pattern: None,
    };
    if sizes.iter().any(|&n| n < min_events) {
        return Ok(record);
    }
    let tree = grow(&windows, &options.grow)?;
    let p_prime = tree_statistic(&tree, options.statistic);
    record.p = tree.min_p();
    record.m = tree.test_count;
    record.p_bonferroni = p_prime;
    record.p_permutation = interpolate(p_prime, &nulls.tree);
    record.pattern = tree.pattern(tree.top_pattern().id);
    record.flag = DayFlag::Ok;
    if let (Some(b), Some(null)) = (options.bagging, &nulls.bagged) {
        let seed = derive_seed(options.seed, 1000 + day as u64);
        let est = bag_estimate_with(&windows, b, &options.grow, seed, options.statistic)?;
        record.bagged_p_bonferroni = Some(est.median);
        record.bagged_p_permutation = Some(interpolate(est.median, null));
    }
    Ok(record)
}

impl SequentialReport {
    pub fn has_bagging(&self) -> bool {
        self.records.iter().any(|r| r.bagged_p_bonferroni.is_some())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    /// CSV with columns `day,p,m,p_bonferroni,p_permutation,flag`, plus the
    /// bagged pair when present.
    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let bag = self.has_bagging();
        let mut header = vec!["day", "p", "m", "p_bonferroni", "p_permutation", "flag"];
        if bag {
            header.extend(["bagged_p_bonferroni", "bagged_p_permutation"]);
        }
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.day.to_string(),
                format!("{:e}", r.p),
                r.m.to_string(),
                format!("{:e}", r.p_bonferroni),
                format!("{:e}", r.p_permutation),
                match r.flag {
                    DayFlag::Ok => "ok".to_string(),
                    DayFlag::Gap => "gap".to_string(),
                },
            ];
            if bag {
                row.push(opt(r.bagged_p_bonferroni));
                row.push(opt(r.bagged_p_permutation));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
