use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{route, DiffTree, Direction, GrowConfig, Node, Split};
use crate::data::{Frame, Schema};
use crate::error::{Error, Result};

/// Structured form of a tree, serializable to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub test_count: u64,
    pub min_p: f64,
    pub min_ln_p: f64,
    pub groups: Vec<String>,
    pub levels: Vec<String>,
    pub config: GrowConfig,
    pub root: NodeReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: usize,
    pub depth: usize,
    /// Condition on the edge from the parent; `None` at the root.
    pub condition: Option<String>,
    /// Event counts per dataset, one entry per response level.
    pub counts: Vec<Vec<u64>>,
    #[serde(rename = "W")]
    pub statistic: f64,
    pub dof: u32,
    pub p: f64,
    pub ln_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeReport>,
}

pub type SplitReport = Split;

// Ten significant digits hide midpoint noise such as 0.7998000000000001.
fn short(t: f64) -> f64 {
    format!("{t:.9e}").parse().unwrap_or(t)
}

fn condition(split: &Split, dir: Direction) -> String {
    let t = short(split.threshold);
    match dir {
        Direction::Left => format!("{} <= {t}", split.name),
        Direction::Right => format!("{} > {t}", split.name),
    }
}

fn node_report(node: &Node, cond: Option<String>) -> NodeReport {
    let children = match (&node.split, &node.children) {
        (Some(split), Some(ch)) => vec![
            node_report(&ch[0], Some(condition(split, Direction::Left))),
            node_report(&ch[1], Some(condition(split, Direction::Right))),
        ],
        _ => Vec::new(),
    };
    NodeReport {
        id: node.id,
        depth: node.depth,
        condition: cond,
        counts: node.counts.by_dataset(),
        statistic: node.test.statistic,
        dof: node.test.dof,
        p: node.test.p,
        ln_p: node.test.ln_p,
        split: node.split.clone(),
        children,
    }
}

impl DiffTree {
    pub fn report(&self) -> TreeReport {
        TreeReport {
            test_count: self.test_count,
            min_p: self.min_p(),
            min_ln_p: self.grown_min_ln_p,
            groups: self.group_labels.clone(),
            levels: self.level_labels.clone(),
            config: self.config.clone(),
            root: node_report(&self.root, None),
        }
    }

    pub fn render_text(&self) -> String {
        self.report().render_text()
    }

    /// Path predicate of node `id`.
    pub fn pattern(&self, id: usize) -> Option<Pattern> {
        self.report().pattern(id)
    }
}

fn fmt_p(p: f64) -> String {
    if p < 1e-5 {
        "***".to_string()
    } else if p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.2e}")
    }
}

impl NodeReport {
    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a NodeReport)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    fn counts_text(&self) -> String {
        self.counts
            .iter()
            .map(|g| {
                let inner: Vec<String> = g.iter().map(u64::to_string).collect();
                format!("({})", inner.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TreeReport {
    /// Indented text: one line per node with counts per dataset, W, dof and p
    /// (`***` below 1e-5). Terminal nodes end in ` *`.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "differential tree: groups [{}], levels [{}], m = {}, min p = {:.3e}",
            self.groups.join(" | "),
            self.levels.join(", "),
            self.test_count,
            self.min_p
        );
        self.root.visit(&mut |n| {
            let _ = writeln!(
                out,
                "{}[{}] {} {} W={:.2} dof={} p={}{}",
                "  ".repeat(n.depth),
                n.id,
                n.condition.as_deref().unwrap_or("root"),
                n.counts_text(),
                n.statistic,
                n.dof,
                fmt_p(n.p),
                if n.is_terminal() { " *" } else { "" }
            );
        });
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("tree report: {e}")))
    }

    pub fn terminals(&self) -> Vec<&NodeReport> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| {
            if n.is_terminal() {
                out.push(n)
            }
        });
        out
    }

    /// Terminal node with the smallest p-value.
    pub fn top_pattern(&self) -> &NodeReport {
        self.terminals()
            .into_iter()
            .min_by(|a, b| a.ln_p.total_cmp(&b.ln_p).then(a.id.cmp(&b.id)))
            .expect("a tree has at least one terminal")
    }

    pub fn pattern(&self, id: usize) -> Option<Pattern> {
        fn walk(node: &NodeReport, id: usize, steps: &mut Vec<PatternStep>) -> Option<Pattern> {
            if node.id == id {
                return Some(Pattern {
                    node_id: id,
                    steps: steps.clone(),
                    counts: node.counts.clone(),
                    p: node.p,
                });
            }
            let split = node.split.as_ref()?;
            for (child, dir) in node
                .children
                .iter()
                .zip([Direction::Left, Direction::Right])
            {
                steps.push(PatternStep {
                    split: split.clone(),
                    direction: dir,
                });
                if let Some(p) = walk(child, id, steps) {
                    return Some(p);
                }
                steps.pop();
            }
            None
        }
        walk(&self.root, id, &mut Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternStep {
    pub split: Split,
    pub direction: Direction,
}

/// Region of a node: the chain of routed splits from the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub node_id: usize,
    pub steps: Vec<PatternStep>,
    pub counts: Vec<Vec<u64>>,
    pub p: f64,
}

impl Pattern {
    pub fn contains(&self, frame: &Frame, row: usize) -> bool {
        self.steps
            .iter()
            .all(|s| route(frame, row, &s.split) == s.direction)
    }

    /// Rows of `frame` inside the region.
    pub fn select(&self, frame: &Frame) -> Vec<u32> {
        (0..frame.n_rows())
            .filter(|&r| self.contains(frame, r))
            .map(|r| r as u32)
            .collect()
    }

    /// Re-resolves variable indices by name against another schema.
    pub fn rebind(&mut self, schema: &Schema) -> Result<()> {
        let lookup = |name: &str| {
            schema
                .index_of(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        for step in &mut self.steps {
            step.split.variable = lookup(&step.split.name)?;
            for s in &mut step.split.surrogates {
                s.variable = lookup(&s.name)?;
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        if self.steps.is_empty() {
            return "all events".to_string();
        }
        self.steps
            .iter()
            .map(|s| condition(&s.split, s.direction))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}
