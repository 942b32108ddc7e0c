//! Shared fixtures for integration and acceptance tests.
#![allow(dead_code)]

use difftree::data::{Frame, Role, Schema, VariableSpec};
use difftree::stats::{AtomicModel, TestResult};
use difftree::tree::{DiffTree, GrowConfig, Node, PruneRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small complete frame with two groups and random shape.
pub fn random_instance(seed: u64) -> (Frame, GrowConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(12..=60);
    let p = rng.random_range(1..=4);
    let c = rng.random_range(1..=3);
    let levels: Vec<String> = (0..c).map(|i| format!("r{i}")).collect();
    let mut vars = Vec::new();
    let mut columns = Vec::new();
    for j in 0..p {
        // Few distinct values give plenty of ties.
        let spread = [3, 6, 20, 1000][rng.random_range(0..4)];
        if rng.random_bool(0.25) {
            let k = rng.random_range(2..=5);
            vars.push(VariableSpec::ordinal(
                format!("o{j}"),
                (1..=k).map(|l| format!("l{l}")),
                Role::Predictor,
            ));
            columns.push((0..n).map(|_| rng.random_range(1..=k) as f64).collect());
        } else {
            vars.push(VariableSpec::numeric(format!("v{j}"), Role::Predictor));
            columns.push(
                (0..n)
                    .map(|_| rng.random_range(0..spread) as f64 / 4.0)
                    .collect(),
            );
        }
    }
    vars.push(VariableSpec::ordinal("resp", levels, Role::Response));
    columns.push(Vec::new());
    // Skewed responses make significant splits likely.
    let response = (0..n)
        .map(|i| {
            let bias = columns[0][i] > 1.0;
            if bias && rng.random_bool(0.5) {
                0
            } else {
                rng.random_range(0..c) as u32
            }
        })
        .collect();
    let groups: Vec<u32> = (0..n)
        .map(|i| {
            if columns[0][i] > 1.0 && rng.random_bool(0.4) {
                1
            } else {
                rng.random_range(0..2)
            }
        })
        .collect();
    let frame = Frame::new(
        Schema::new(vars).unwrap(),
        columns,
        response,
        groups,
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let config = GrowConfig {
        min_child_total: [None, Some(2), Some(3), Some(5)][rng.random_range(0..4)],
        p_cut: [1e-6, 0.05, 0.5, 1.0][rng.random_range(0..4)],
        ..GrowConfig::default()
    };
    (frame, config)
}

/// Exhaustive reference tree: every threshold of every predictor is tried by
/// filtering rows directly, then p-min pruning is applied to the finished tree.
#[derive(Debug, Clone)]
pub struct OracleNode {
    pub id: usize,
    pub counts: Vec<u64>,
    pub w: f64,
    pub ln_p: f64,
    pub split: Option<(usize, f64)>,
    pub children: Option<Box<(OracleNode, OracleNode)>>,
}

pub struct Oracle {
    pub root: OracleNode,
    pub m: u64,
}

struct OracleGrower<'a> {
    frame: &'a Frame,
    min_child: usize,
    next_id: usize,
    m: u64,
}

fn tally(frame: &Frame, rows: &[usize]) -> Vec<u64> {
    let d = frame.n_groups();
    let mut out = vec![0; frame.n_levels() * d];
    for &r in rows {
        out[frame.responses()[r] as usize * d + frame.groups()[r] as usize] += 1;
    }
    out
}

impl OracleGrower<'_> {
    fn stat(&self, counts: &[u64]) -> f64 {
        AtomicModel::Poisson.statistic(counts, self.frame.n_levels(), self.frame.n_groups())
    }

    fn grow(&mut self, rows: Vec<usize>) -> OracleNode {
        let counts = tally(self.frame, &rows);
        let w = self.stat(&counts);
        let dof = (self.frame.n_levels() * (self.frame.n_groups() - 1)) as u32;
        let ln_p = TestResult::new(w, dof).ln_p;
        let id = self.next_id;
        self.next_id += 1;
        let mut node = OracleNode {
            id,
            counts,
            w,
            ln_p,
            split: None,
            children: None,
        };
        if rows.len() < 2 * self.min_child {
            return node;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for &var in self.frame.schema().predictors() {
            let col = self.frame.column(var);
            let mut distinct: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            for pair in distinct.windows(2) {
                let thr = 0.5 * (pair[0] + pair[1]);
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&row| col[row] <= thr);
                if l.len() < self.min_child || r.len() < self.min_child {
                    continue;
                }
                self.m += 1;
                let total = self.stat(&tally(self.frame, &l)) + self.stat(&tally(self.frame, &r));
                if best.is_none_or(|(bw, _, _)| total > bw) {
                    best = Some((total, var, thr));
                }
            }
        }
        if let Some((_, var, thr)) = best {
            let col = self.frame.column(var);
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| col[row] <= thr);
            node.split = Some((var, thr));
            let left = self.grow(l);
            let right = self.grow(r);
            node.children = Some(Box::new((left, right)));
        }
        node
    }
}

/// Minimum `ln p` over the terminals of a (pruned) oracle subtree.
pub fn oracle_terminal_min(node: &OracleNode) -> f64 {
    match &node.children {
        None => node.ln_p,
        Some(ch) => oracle_terminal_min(&ch.0).min(oracle_terminal_min(&ch.1)),
    }
}

fn oracle_prune(mut node: OracleNode, ln_cut: f64) -> OracleNode {
    if let Some(ch) = node.children.take() {
        let (l, r) = *ch;
        let l = oracle_prune(l, ln_cut);
        let r = oracle_prune(r, ln_cut);
        let sub = oracle_terminal_min(&l).min(oracle_terminal_min(&r));
        if sub < node.ln_p && sub < ln_cut {
            node.children = Some(Box::new((l, r)));
        } else {
            node.split = None;
        }
    }
    node
}

pub fn oracle_tree(frame: &Frame, config: &GrowConfig) -> Oracle {
    let mut g = OracleGrower {
        frame,
        min_child: config.min_child_for(frame.n_levels()),
        next_id: 1,
        m: 0,
    };
    let grown = g.grow((0..frame.n_rows()).collect());
    let root = match config.prune_rule {
        PruneRule::Pmin => oracle_prune(grown, config.p_cut.ln()),
        PruneRule::None => grown,
        PruneRule::CostComplexity => panic!("oracle implements p-min pruning only"),
    };
    Oracle { root, m: g.m }
}

/// Node-by-node comparison; returns the first difference found.
pub fn compare(tree: &DiffTree, oracle: &Oracle) -> Result<(), String> {
    if tree.test_count != oracle.m {
        return Err(format!("m: {} vs oracle {}", tree.test_count, oracle.m));
    }
    compare_node(&tree.root, &oracle.root)
}

fn compare_node(node: &Node, o: &OracleNode) -> Result<(), String> {
    let here = format!("node {}", node.id);
    if node.id != o.id {
        return Err(format!("{here}: id vs oracle {}", o.id));
    }
    if node.counts.rows().flatten().copied().collect::<Vec<_>>() != o.counts {
        return Err(format!("{here}: counts differ"));
    }
    if node.test.statistic != o.w || node.test.ln_p != o.ln_p {
        return Err(format!("{here}: W {} vs {}", node.test.statistic, o.w));
    }
    match (&node.split, &node.children, &o.split, &o.children) {
        (None, None, None, None) => Ok(()),
        (Some(s), Some(ch), Some((var, thr)), Some(och)) => {
            if s.variable != *var || s.threshold != *thr {
                return Err(format!(
                    "{here}: split ({}, {}) vs oracle ({var}, {thr})",
                    s.variable, s.threshold
                ));
            }
            compare_node(&ch[0], &och.0)?;
            compare_node(&ch[1], &och.1)
        }
        _ => Err(format!("{here}: terminal status differs")),
    }
}

/// `(x, dof, p)` rows of the high-precision chi-square table.
pub fn chisq_oracle() -> Vec<(f64, u32, f64)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/chisq_oracle.csv");
    let mut rdr = csv::Reader::from_path(path).expect("oracle table present");
    rdr.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (
                rec[0].parse().unwrap(),
                rec[1].parse().unwrap(),
                rec[2].parse().unwrap(),
            )
        })
        .collect()
}

/// Frame shaped like the fire incident table: 10 predictors (two with heavy
/// missingness) plus a two-level response, split over two periods.
pub fn wide_frame(n: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars = vec![
        VariableSpec::numeric("x", Role::Predictor),
        VariableSpec::numeric("y", Role::Predictor),
        VariableSpec::numeric("urban", Role::Predictor),
        VariableSpec::numeric("alarm", Role::Predictor),
        VariableSpec::numeric("firetype", Role::Predictor),
        VariableSpec::numeric("heatsource", Role::Predictor),
        VariableSpec::numeric("objignited", Role::Predictor),
        VariableSpec::numeric("time", Role::Predictor),
        VariableSpec::numeric("day", Role::Time),
        VariableSpec::numeric("dayweek", Role::Predictor),
    ];
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); vars.len()];
    for _ in 0..n {
        let row = [
            rng.random::<f64>() * 10_000.0,
            rng.random::<f64>() * 10_000.0,
            rng.random_range(0..2) as f64,
            rng.random_range(1..=6) as f64,
            rng.random_range(1..=6) as f64,
            if rng.random_bool(0.49) {
                f64::NAN
            } else {
                rng.random_range(1..=9) as f64
            },
            if rng.random_bool(0.39) {
                f64::NAN
            } else {
                rng.random_range(1..=9) as f64
            },
            (rng.random::<f64>() * 24.0 * 100.0).round() / 100.0,
            rng.random_range(1..=730) as f64,
            rng.random_range(1..=7) as f64,
        ];
        for (col, v) in columns.iter_mut().zip(row) {
            col.push(v);
        }
    }
    vars.push(VariableSpec::ordinal(
        "label",
        ["other", "suspicious"],
        Role::Response,
    ));
    columns.push(Vec::new());
    let response = (0..n).map(|_| rng.random_bool(0.24) as u32).collect();
    let groups = (0..n).map(|i| (i >= n / 2) as u32).collect();
    Frame::new(
        Schema::new(vars).unwrap(),
        columns,
        response,
        groups,
        vec!["first".into(), "second".into()],
    )
    .unwrap()
}
