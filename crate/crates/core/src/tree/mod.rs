//! Differential tree construction.
//!
//! A tree is grown top-down on all rows of a grouped [`Frame`]: each node tests
//! homogeneity of its count matrix, the primary split maximizes the summed
//! statistic of the two children, surrogate splits route rows whose split
//! variable is missing, and pruning runs bottom-up as each subtree completes.

mod grow;
mod prune;
mod report;
mod split;

pub use grow::grow;
pub use prune::{prune_cost_complexity, prune_pmin, prune_tree};
pub use report::{NodeReport, Pattern, PatternStep, SplitReport, TreeReport};
pub use split::{
    adjusted_ln_p, adjusted_p, choose_primary_split, enumerate_splits, find_surrogates, route,
    split_statistic, PrimaryChoice, VariableBest,
};

use serde::{Deserialize, Serialize};

use crate::data::{CountMatrix, Frame};
use crate::error::{Error, Result};
use crate::stats::{AtomicModel, TestResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    /// Keep whichever of node and subtree has the smaller minimum p-value.
    #[default]
    Pmin,
    /// Keep the subtree iff its penalized statistic is larger.
    CostComplexity,
    None,
}

impl std::str::FromStr for PruneRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmin" => Ok(PruneRule::Pmin),
            "cost_complexity" | "cost-complexity" | "cc" => Ok(PruneRule::CostComplexity),
            "none" => Ok(PruneRule::None),
            other => Err(Error::Config(format!("unknown prune rule `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowConfig {
    /// Smallest admissible child size; `None` means `5 * c`.
    #[serde(default)]
    pub min_child_total: Option<usize>,
    /// Weight of the missing-value adjustment of per-variable best p-values.
    pub gamma: f64,
    /// Subtrees whose minimum p-value is at least this are cut off.
    pub p_cut: f64,
    pub max_surrogates: usize,
    /// Complexity parameter for [`PruneRule::CostComplexity`].
    #[serde(default)]
    pub alpha: Option<f64>,
    pub prune_rule: PruneRule,
    #[serde(default)]
    pub model: AtomicModel,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            min_child_total: None,
            gamma: 2.0,
            p_cut: 1e-6,
            max_surrogates: 5,
            alpha: None,
            prune_rule: PruneRule::Pmin,
            model: AtomicModel::Poisson,
        }
    }
}

impl GrowConfig {
    pub fn min_child_for(&self, levels: usize) -> usize {
        self.min_child_total.unwrap_or(5 * levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_child_total == Some(0) {
            return Err(Error::Config("min_child_total must be at least 1".into()));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config("gamma must be finite and nonnegative".into()));
        }
        if !(self.p_cut > 0.0 && self.p_cut <= 1.0) {
            return Err(Error::Config("p_cut must lie in (0, 1]".into()));
        }
        if self.prune_rule == PruneRule::CostComplexity {
            match self.alpha {
                Some(a) if a.is_finite() => {}
                _ => {
                    return Err(Error::Config(
                        "cost-complexity pruning needs a finite alpha".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
}

/// Substitute split used when the primary variable is missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub variable: usize,
    pub name: String,
    pub threshold: f64,
    /// When set, values `<= threshold` go right instead of left.
    pub flipped: bool,
    /// Rows (complete in both variables) sent the same way as the primary split.
    pub agreement: usize,
}

/// Univariate binary split: `value <= threshold` goes left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub variable: usize,
    pub name: String,
    pub threshold: f64,
    /// Two-child statistic on the rows complete in `variable`.
    pub test: TestResult,
    /// Rows complete in `variable` at the node.
    pub complete: usize,
    pub surrogates: Vec<Surrogate>,
    pub fallback: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: usize,
    pub depth: usize,
    pub counts: CountMatrix,
    pub test: TestResult,
    pub split: Option<Split>,
    pub children: Option<Box<[Node; 2]>>,
    /// `ln` of the smallest atomic p-value over this subtree's terminal nodes.
    pub min_ln_p: f64,
    pub rows: Vec<u32>,
}

impl Node {
    pub fn is_terminal(&self) -> bool {
        self.children.is_none()
    }

    pub fn min_p(&self) -> f64 {
        self.min_ln_p.exp().max(crate::stats::P_FLOOR)
    }

    /// Turns the node into a terminal, dropping its split and children.
    pub fn collapse(&mut self) {
        self.split = None;
        self.children = None;
        self.min_ln_p = self.test.ln_p;
    }

    pub fn terminals(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if n.is_terminal() {
                out.push(n)
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        if let Some(ch) = &self.children {
            ch[0].visit(f);
            ch[1].visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Sum of terminal statistics and degrees of freedom.
    pub fn subtree_statistic(&self) -> (f64, u64) {
        match &self.children {
            None => (self.test.statistic, self.test.dof as u64),
            Some(ch) => {
                let (wl, dl) = ch[0].subtree_statistic();
                let (wr, dr) = ch[1].subtree_statistic();
                (wl + wr, dl + dr)
            }
        }
    }

    pub fn find(&self, id: usize) -> Option<&Node> {
        if self.id == id {
            return Some(self);
        }
        let ch = self.children.as_ref()?;
        ch[0].find(id).or_else(|| ch[1].find(id))
    }
}

/// A grown (and pruned) differential tree.
#[derive(Clone, Debug)]
pub struct DiffTree {
    pub root: Node,
    /// Admissible candidate splits evaluated while growing.
    pub test_count: u64,
    /// `ln` of the smallest atomic p-value over every node created while growing.
    pub grown_min_ln_p: f64,
    pub config: GrowConfig,
    pub variable_names: Vec<String>,
    pub group_labels: Vec<String>,
    pub level_labels: Vec<String>,
}

impl DiffTree {
    /// Smallest atomic p-value found while growing.
    ///
    /// Equals the pruned tree's smallest terminal p-value whenever that is
    /// below `p_cut` under p-min pruning.
    pub fn min_p(&self) -> f64 {
        self.grown_min_ln_p.exp().max(crate::stats::P_FLOOR)
    }

    pub fn min_ln_p(&self) -> f64 {
        self.grown_min_ln_p
    }

    /// Terminal node with the smallest p-value (ties: lowest id).
    pub fn top_pattern(&self) -> &Node {
        self.root
            .terminals()
            .into_iter()
            .min_by(|a, b| a.test.ln_p.total_cmp(&b.test.ln_p).then(a.id.cmp(&b.id)))
            .expect("a tree has at least one terminal")
    }

    /// Routes an arbitrary frame row down the tree to a terminal node id.
    pub fn locate(&self, frame: &Frame, row: usize) -> usize {
        let mut node = &self.root;
        while let (Some(split), Some(ch)) = (&node.split, &node.children) {
            node = match route(frame, row, split) {
                Direction::Left => &ch[0],
                Direction::Right => &ch[1],
            };
        }
        node.id
    }
}
