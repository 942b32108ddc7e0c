use super::{Direction, GrowConfig, Split, Surrogate};
use crate::data::Frame;
use crate::error::{Error, Result};
use crate::stats::{AtomicModel, TestResult};

/// Best admissible split of one variable at a node.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableBest {
    pub variable: usize,
    pub threshold: f64,
    pub test: TestResult,
    /// Rows at the node with the variable present.
    pub complete: usize,
    /// `ln` of the missing-value adjusted p-value.
    pub adjusted_ln_p: f64,
}

/// Outcome of the primary split search at one node.
#[derive(Clone, Debug)]
pub struct PrimaryChoice {
    /// Winning split, without surrogates; `None` if nothing was admissible.
    pub split: Option<Split>,
    pub per_variable: Vec<VariableBest>,
    /// Number of admissible candidates evaluated.
    pub evaluated: u64,
}

/// Threshold halfway between two consecutive distinct values.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid > lo && mid < hi {
        mid
    } else {
        lo
    }
}

fn sorted_complete(frame: &Frame, rows: &[u32], variable: usize) -> Vec<(f64, u32)> {
    let col = frame.column(variable);
    let mut vals: Vec<(f64, u32)> = rows
        .iter()
        .filter_map(|&r| {
            let v = col[r as usize];
            (!v.is_nan()).then_some((v, r))
        })
        .collect();
    vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    vals
}

/// Admissible thresholds of `variable` at the node holding `rows`.
///
/// Midpoints of consecutive distinct present values, keeping those that leave
/// at least `min_child_total` present rows on each side.
pub fn enumerate_splits(
    frame: &Frame,
    rows: &[u32],
    variable: usize,
    min_child_total: usize,
) -> Vec<f64> {
    let vals = sorted_complete(frame, rows, variable);
    let n = vals.len();
    let mut out = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let left = i + 1;
        if vals[i].0 < vals[i + 1].0 && left >= min_child_total && n - left >= min_child_total {
            out.push(midpoint(vals[i].0, vals[i + 1].0));
        }
    }
    out
}

/// Two-child statistic `W(left) + W(right)` of one split.
///
/// Rows missing `variable` are left out.
pub fn split_statistic(
    frame: &Frame,
    rows: &[u32],
    variable: usize,
    threshold: f64,
    model: &AtomicModel,
) -> Result<TestResult> {
    let (c, d) = (frame.n_levels(), frame.n_groups());
    model.check(c, d)?;
    let col = frame.column(variable);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &r in rows {
        let v = col[r as usize];
        if v.is_nan() {
            continue;
        }
        if v <= threshold {
            left.push(r)
        } else {
            right.push(r)
        }
    }
    if left.is_empty() || right.is_empty() {
        return Err(Error::precondition("split leaves an empty child"));
    }
    let w = model.test(&frame.count_matrix(&left)).statistic
        + model.test(&frame.count_matrix(&right)).statistic;
    Ok(TestResult::new(w, 2 * model.dof(c, d)))
}

/// `p + gamma * sqrt(p (1 - p) / n)`.
pub fn adjusted_p(p: f64, n: usize, gamma: f64) -> f64 {
    p + gamma * (p * (1.0 - p) / n as f64).sqrt()
}

/// Log-space form of [`adjusted_p`], exact for p-values far below `f64` range.
pub fn adjusted_ln_p(ln_p: f64, n: usize, gamma: f64) -> f64 {
    if gamma == 0.0 || ln_p == f64::NEG_INFINITY || n == 0 {
        return ln_p;
    }
    let ln_q = (-ln_p.exp()).ln_1p();
    let ln_term = gamma.ln() + 0.5 * (ln_p + ln_q - (n as f64).ln());
    let (hi, lo) = if ln_p >= ln_term {
        (ln_p, ln_term)
    } else {
        (ln_term, ln_p)
    };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Searches every predictor for the primary split at a node.
///
/// Within a variable candidates compare by statistic (ties: smallest
/// threshold). Across variables, the raw comparison is used when every
/// variable has the same number of present rows, otherwise the adjusted
/// p-values decide. Ties go to the lowest variable index.
pub fn choose_primary_split(frame: &Frame, rows: &[u32], config: &GrowConfig) -> PrimaryChoice {
    let (c, d) = (frame.n_levels(), frame.n_groups());
    let model = &config.model;
    let min_child = config.min_child_for(c);
    let split_dof = 2 * model.dof(c, d);
    let cells = c * d;
    let mut left = vec![0u64; cells];
    let mut total = vec![0u64; cells];
    let mut right = vec![0u64; cells];
    let responses = frame.responses();
    let groups = frame.groups();
    let mut evaluated = 0u64;
    let mut per_variable = Vec::new();

    for &var in frame.schema().predictors() {
        let vals = sorted_complete(frame, rows, var);
        let n = vals.len();
        if n < 2 * min_child {
            continue;
        }
        total.iter_mut().for_each(|x| *x = 0);
        left.iter_mut().for_each(|x| *x = 0);
        for &(_, r) in &vals {
            total[responses[r as usize] as usize * d + groups[r as usize] as usize] += 1;
        }
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            let r = vals[i].1 as usize;
            left[responses[r] as usize * d + groups[r] as usize] += 1;
            let n_left = i + 1;
            if n - n_left < min_child {
                break;
            }
            if n_left < min_child || vals[i].0 == vals[i + 1].0 {
                continue;
            }
            evaluated += 1;
            for k in 0..cells {
                right[k] = total[k] - left[k];
            }
            let w = model.statistic(&left, c, d) + model.statistic(&right, c, d);
            if best.is_none_or(|(bw, _)| w > bw) {
                best = Some((w, midpoint(vals[i].0, vals[i + 1].0)));
            }
        }
        if let Some((w, threshold)) = best {
            let test = TestResult::new(w, split_dof);
            per_variable.push(VariableBest {
                variable: var,
                threshold,
                test,
                complete: n,
                adjusted_ln_p: adjusted_ln_p(test.ln_p, n, config.gamma),
            });
        }
    }

    let uniform = per_variable
        .windows(2)
        .all(|w| w[0].complete == w[1].complete);
    let mut winner: Option<&VariableBest> = None;
    for cand in &per_variable {
        let better = match winner {
            None => true,
            Some(w) if uniform => cand.test.beats(&w.test),
            Some(w) => cand.adjusted_ln_p < w.adjusted_ln_p,
        };
        if better {
            winner = Some(cand);
        }
    }
    let split = winner.map(|w| {
        let col = frame.column(w.variable);
        let n_left = rows
            .iter()
            .filter(|&&r| col[r as usize] <= w.threshold)
            .count();
        Split {
            variable: w.variable,
            name: frame.schema().variable(w.variable).name.clone(),
            threshold: w.threshold,
            test: w.test,
            complete: w.complete,
            surrogates: Vec::new(),
            fallback: if n_left * 2 >= w.complete {
                Direction::Left
            } else {
                Direction::Right
            },
        }
    });
    PrimaryChoice {
        split,
        per_variable,
        evaluated,
    }
}

/// Ranks substitute splits on the other predictors by agreement with `primary`.
///
/// Agreement is counted over rows present in both variables; a surrogate is
/// kept only if it beats sending all those rows to the primary's majority side.
pub fn find_surrogates(
    frame: &Frame,
    rows: &[u32],
    primary: &Split,
    max_surrogates: usize,
) -> Vec<Surrogate> {
    if max_surrogates == 0 {
        return Vec::new();
    }
    let pcol = frame.column(primary.variable);
    let mut out = Vec::new();
    for &var in frame.schema().predictors() {
        if var == primary.variable {
            continue;
        }
        let col = frame.column(var);
        let mut vals: Vec<(f64, bool)> = rows
            .iter()
            .filter_map(|&r| {
                let (pv, v) = (pcol[r as usize], col[r as usize]);
                (!pv.is_nan() && !v.is_nan()).then_some((v, pv <= primary.threshold))
            })
            .collect();
        if vals.len() < 2 {
            continue;
        }
        vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let total_left = vals.iter().filter(|v| v.1).count();
        let total_right = vals.len() - total_left;
        let baseline = total_left.max(total_right);
        let (mut low_left, mut low_right) = (0usize, 0usize);
        let mut best: Option<(usize, f64, bool)> = None;
        for i in 0..vals.len() - 1 {
            if vals[i].1 {
                low_left += 1;
            } else {
                low_right += 1;
            }
            if vals[i].0 == vals[i + 1].0 {
                continue;
            }
            let same = low_left + (total_right - low_right);
            let flipped = low_right + (total_left - low_left);
            let thr = midpoint(vals[i].0, vals[i + 1].0);
            for (agree, flip) in [(same, false), (flipped, true)] {
                if best.is_none_or(|(b, _, _)| agree > b) {
                    best = Some((agree, thr, flip));
                }
            }
        }
        if let Some((agreement, threshold, flipped)) = best {
            if agreement > baseline {
                out.push(Surrogate {
                    variable: var,
                    name: frame.schema().variable(var).name.clone(),
                    threshold,
                    flipped,
                    agreement,
                });
            }
        }
    }
    // stable: equal agreement keeps schema order
    out.sort_by(|a, b| b.agreement.cmp(&a.agreement));
    out.truncate(max_surrogates);
    out
}

/// Side of `split` that `row` belongs to.
pub fn route(frame: &Frame, row: usize, split: &Split) -> Direction {
    let v = frame.value(row, split.variable);
    if !v.is_nan() {
        return if v <= split.threshold {
            Direction::Left
        } else {
            Direction::Right
        };
    }
    for s in &split.surrogates {
        let v = frame.value(row, s.variable);
        if !v.is_nan() {
            return if (v <= s.threshold) != s.flipped {
                Direction::Left
            } else {
                Direction::Right
            };
        }
    }
    split.fallback
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Role, Schema, VariableSpec};

    fn frame(cols: Vec<Vec<f64>>, resp: Vec<u32>, groups: Vec<u32>, c: usize) -> Frame {
        let mut vars: Vec<VariableSpec> = (0..cols.len())
            .map(|i| VariableSpec::numeric(format!("v{i}"), Role::Predictor))
            .collect();
        let levels: Vec<String> = (0..c).map(|i| format!("l{i}")).collect();
        vars.push(VariableSpec::ordinal("resp", levels, Role::Response));
        let mut columns = cols;
        columns.push(vec![]);
        Frame::new(
            Schema::new(vars).unwrap(),
            columns,
            resp,
            groups,
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn midpoints_of_distinct_values() {
        let f = frame(
            vec![vec![1.0, 2.0, 4.0, 4.0, 1.0]],
            vec![0; 5],
            vec![0, 1, 0, 1, 0],
            1,
        );
        assert_eq!(enumerate_splits(&f, &f.all_rows(), 0, 1), vec![1.5, 3.0]);
    }

    #[test]
    fn too_few_rows_for_admissible_split() {
        let f = frame(
            vec![(0..8).map(f64::from).collect()],
            vec![0, 1, 0, 1, 0, 1, 0, 1],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            2,
        );
        assert!(enumerate_splits(&f, &f.all_rows(), 0, 10).is_empty());
    }

    #[test]
    fn ordinal_codes_split_at_half_levels() {
        let schema = Schema::new(vec![
            VariableSpec::ordinal("k", ["a", "b", "c"], Role::Predictor),
            VariableSpec::ordinal("r", ["x"], Role::Response),
        ])
        .unwrap();
        let f = Frame::new(
            schema,
            vec![vec![1.0, 2.0, 3.0, 3.0], vec![]],
            vec![0; 4],
            vec![0, 1, 0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(enumerate_splits(&f, &f.all_rows(), 0, 1), vec![1.5, 2.5]);
    }

    #[test]
    fn adjusted_p_examples() {
        let p = adjusted_p(0.01, 100, 2.0);
        assert!((p - (0.01 + 2.0 * (0.0099f64 / 100.0).sqrt())).abs() < 1e-15);
        assert!((p - 0.0299).abs() < 1e-4);
        assert_eq!(adjusted_p(0.0, 7, 2.0), 0.0);
        assert!((adjusted_ln_p(0.01f64.ln(), 100, 2.0).exp() - p).abs() < 1e-15);
        assert_eq!(adjusted_ln_p(f64::NEG_INFINITY, 7, 2.0), f64::NEG_INFINITY);
        // far below f64 range: sqrt term dominates
        let ln = adjusted_ln_p(-3000.0, 100, 2.0);
        assert!((ln - (2f64.ln() + 0.5 * (-3000.0 - 100f64.ln()))).abs() < 1e-9);
    }

    #[test]
    fn equal_children_give_zero() {
        // both halves hold one level-0 and one level-1 event in each group
        let f = frame(
            vec![vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]],
            vec![0, 1, 0, 1, 0, 1, 0, 1],
            vec![0, 0, 1, 1, 0, 0, 1, 1],
            2,
        );
        let t = split_statistic(&f, &f.all_rows(), 0, 1.5, &AtomicModel::Poisson).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 4);
        assert!(split_statistic(&f, &f.all_rows(), 0, 5.0, &AtomicModel::Poisson).is_err());
    }

    fn split_on(variable: usize, threshold: f64) -> Split {
        Split {
            variable,
            name: format!("v{variable}"),
            threshold,
            test: TestResult::null(2),
            complete: 0,
            surrogates: vec![],
            fallback: Direction::Right,
        }
    }

    #[test]
    fn duplicate_column_is_perfect_surrogate() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let f = frame(vec![x.clone(), x], vec![0; 12], [0, 1].repeat(6), 1);
        let s = find_surrogates(&f, &f.all_rows(), &split_on(0, 4.5), 5);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].variable, 1);
        assert_eq!(s[0].agreement, 12);
        assert_eq!(s[0].threshold, 4.5);
        assert!(!s[0].flipped);
    }

    #[test]
    fn surrogate_equal_to_baseline_is_dropped() {
        // primary: 4 left, 6 right; constant surrogate column can only
        // reproduce the majority baseline of 6
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let z = vec![1.0; 10];
        let f = frame(vec![x, z], vec![0; 10], [0, 1].repeat(5), 1);
        assert!(find_surrogates(&f, &f.all_rows(), &split_on(0, 3.5), 5).is_empty());
        // best cut of z (at 0.5) agrees on rows 0 and 5..9: 6 of 10, which
        // only ties the baseline
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let z = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let f = frame(vec![x, z], vec![0; 10], [0, 1].repeat(5), 1);
        assert!(find_surrogates(&f, &f.all_rows(), &split_on(0, 3.5), 5).is_empty());
        // reversing z makes the flipped pairing perfect
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let z = vec![9.0, 9.0, 9.0, 9.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let f = frame(vec![x, z], vec![0; 10], [0, 1].repeat(5), 1);
        let s = find_surrogates(&f, &f.all_rows(), &split_on(0, 3.5), 5);
        assert_eq!(s.len(), 1);
        assert!(s[0].flipped);
        assert_eq!(s[0].agreement, 10);
    }

    #[test]
    fn nine_of_ten_surrogate() {
        // primary x <= 4.5 sends rows 0..4 left. Column z agrees except row 9.
        // Hand enumeration over z thresholds: z <= 4.6 catches rows 0..4 plus
        // row 9 (z = 0) -> 9 agreements; every other cut does worse.
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let z = vec![1.0, 2.0, 3.0, 4.0, 4.2, 5.0, 6.0, 7.0, 8.0, 0.0];
        let w = vec![5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0];
        let f = frame(vec![w, x, z], vec![0; 10], [0, 1].repeat(5), 1);
        let s = find_surrogates(&f, &f.all_rows(), &split_on(1, 4.5), 5);
        assert_eq!(s[0].variable, 2);
        assert_eq!(s[0].agreement, 9);
        assert!(s.iter().all(|s| s.variable != 1));
        assert!(s.windows(2).all(|p| p[0].agreement >= p[1].agreement));
    }

    #[test]
    fn routing_rules() {
        let nan = f64::NAN;
        let f = frame(
            vec![
                vec![1.0, 9.0, nan, nan, nan],
                vec![0.0, 0.0, 7.0, nan, 2.0],
                vec![0.0, 0.0, nan, nan, 3.0],
            ],
            vec![0; 5],
            vec![0, 1, 0, 1, 0],
            1,
        );
        let mut s = split_on(0, 5.0);
        s.fallback = Direction::Right;
        s.surrogates = vec![
            Surrogate {
                variable: 1,
                name: "v1".into(),
                threshold: 5.0,
                flipped: true,
                agreement: 3,
            },
            Surrogate {
                variable: 2,
                name: "v2".into(),
                threshold: 5.0,
                flipped: false,
                agreement: 2,
            },
        ];
        assert_eq!(route(&f, 0, &s), Direction::Left);
        assert_eq!(route(&f, 1, &s), Direction::Right);
        // primary missing, first surrogate (flipped) decides: 7 > 5 -> left
        assert_eq!(route(&f, 2, &s), Direction::Left);
        // everything missing -> fallback
        assert_eq!(route(&f, 3, &s), Direction::Right);
        // first surrogate present: 2 <= 5, flipped -> right
        assert_eq!(route(&f, 4, &s), Direction::Right);
    }

    #[test]
    fn chooses_most_significant_variable() {
        // v0 separates groups perfectly, v1 is noise
        let n = 40;
        let v0: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let v1: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64).collect();
        let groups: Vec<u32> = (0..n)
            .map(|i| if i % 2 == 0 { 0 } else { u32::from(i % 3 == 0) })
            .collect();
        let f = frame(vec![v1, v0], vec![0; n], groups, 1);
        let choice = choose_primary_split(&f, &f.all_rows(), &GrowConfig::default());
        let split = choice.split.unwrap();
        assert_eq!(split.variable, 1);
        assert_eq!(split.threshold, 0.5);
        assert!(choice.evaluated > 1);
    }
}
