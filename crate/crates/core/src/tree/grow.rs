use super::{
    choose_primary_split, find_surrogates, prune_cost_complexity, prune_pmin, route, DiffTree,
    Direction, GrowConfig, Node, PruneRule,
};
use crate::data::Frame;
use crate::error::Result;

struct Grower<'a> {
    frame: &'a Frame,
    config: &'a GrowConfig,
    min_child: usize,
    next_id: usize,
    evaluated: u64,
    min_ln_p: f64,
}

/// Grows and prunes a differential tree over every row of `frame`.
///
/// Deterministic: the same frame and config give the same tree.
pub fn grow(frame: &Frame, config: &GrowConfig) -> Result<DiffTree> {
    config.validate()?;
    config.model.check(frame.n_levels(), frame.n_groups())?;
    let mut grower = Grower {
        frame,
        config,
        min_child: config.min_child_for(frame.n_levels()),
        next_id: 1,
        evaluated: 0,
        min_ln_p: 0.0,
    };
    let root = grower.node(frame.all_rows(), 0);
    let schema = frame.schema();
    Ok(DiffTree {
        root,
        test_count: grower.evaluated,
        grown_min_ln_p: grower.min_ln_p,
        config: config.clone(),
        variable_names: schema.variables().iter().map(|v| v.name.clone()).collect(),
        group_labels: frame.group_labels().to_vec(),
        level_labels: schema.response_levels().to_vec(),
    })
}

impl Grower<'_> {
    fn node(&mut self, rows: Vec<u32>, depth: usize) -> Node {
        let counts = self.frame.count_matrix(&rows);
        let test = self.config.model.test(&counts);
        let id = self.next_id;
        self.next_id += 1;
        self.min_ln_p = self.min_ln_p.min(test.ln_p);
        let mut node = Node {
            id,
            depth,
            counts,
            test,
            split: None,
            children: None,
            min_ln_p: test.ln_p,
            rows,
        };
        if node.rows.len() < 2 * self.min_child {
            return node;
        }
        let choice = choose_primary_split(self.frame, &node.rows, self.config);
        self.evaluated += choice.evaluated;
        let Some(mut split) = choice.split else {
            return node;
        };
        split.surrogates =
            find_surrogates(self.frame, &node.rows, &split, self.config.max_surrogates);

        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &r in &node.rows {
            match route(self.frame, r as usize, &split) {
                Direction::Left => left.push(r),
                Direction::Right => right.push(r),
            }
        }
        let left = self.node(left, depth + 1);
        let right = self.node(right, depth + 1);
        node.min_ln_p = left.min_ln_p.min(right.min_ln_p);
        node.split = Some(split);
        node.children = Some(Box::new([left, right]));

        match self.config.prune_rule {
            PruneRule::Pmin => prune_pmin(node, self.config.p_cut),
            PruneRule::CostComplexity => {
                prune_cost_complexity(node, self.config.alpha.unwrap_or(0.0))
            }
            PruneRule::None => node,
        }
    }
}
