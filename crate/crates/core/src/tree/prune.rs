use super::{GrowConfig, Node, PruneRule};

/// Local p-min decision at a node whose children are already pruned.
///
/// The subtree is cut when its smallest terminal p-value reaches `p_cut`, or
/// when the node's own test is at least as significant (ties collapse).
pub fn prune_pmin(mut node: Node, p_cut: f64) -> Node {
    let Some(children) = &node.children else {
        return node;
    };
    let subtree = children[0].min_ln_p.min(children[1].min_ln_p);
    if subtree >= p_cut.ln() || node.test.ln_p <= subtree {
        node.collapse();
    } else {
        node.min_ln_p = subtree;
    }
    node
}

/// Local cost-complexity decision: keep the subtree iff
/// `W(subtree) - alpha * dof(subtree) > W(node) - alpha * dof(node)`.
pub fn prune_cost_complexity(mut node: Node, alpha: f64) -> Node {
    if node.is_terminal() {
        return node;
    }
    let (w_sub, dof_sub) = node.subtree_statistic();
    let keep = w_sub - alpha * dof_sub as f64 > node.test.statistic - alpha * node.test.dof as f64;
    if keep {
        let ch = node.children.as_ref().expect("internal node");
        node.min_ln_p = ch[0].min_ln_p.min(ch[1].min_ln_p);
    } else {
        node.collapse();
    }
    node
}

/// Re-prunes a whole tree bottom-up under `config`'s rule.
pub fn prune_tree(mut node: Node, config: &GrowConfig) -> Node {
    if let Some(children) = node.children.take() {
        let [l, r] = *children;
        let (l, r) = (prune_tree(l, config), prune_tree(r, config));
        node.min_ln_p = l.min_ln_p.min(r.min_ln_p);
        node.children = Some(Box::new([l, r]));
    }
    match config.prune_rule {
        PruneRule::Pmin => prune_pmin(node, config.p_cut),
        PruneRule::CostComplexity => prune_cost_complexity(node, config.alpha.unwrap_or(0.0)),
        PruneRule::None => node,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CountMatrix;
    use crate::stats::TestResult;

    fn leaf(id: usize, ln_p: f64, w: f64, dof: u32) -> Node {
        let test = TestResult {
            statistic: w,
            dof,
            p: ln_p.exp(),
            ln_p,
            clamped: false,
        };
        Node {
            id,
            depth: 1,
            counts: CountMatrix::zeros(1, 2),
            test,
            split: None,
            children: None,
            min_ln_p: ln_p,
            rows: vec![],
        }
    }

    fn parent(ln_p: f64, w: f64, dof: u32, l: Node, r: Node) -> Node {
        let mut n = leaf(0, ln_p, w, dof);
        n.min_ln_p = l.min_ln_p.min(r.min_ln_p);
        n.children = Some(Box::new([l, r]));
        n
    }

    #[test]
    fn keeps_more_significant_subtree() {
        let n = parent(
            1e-3f64.ln(),
            0.0,
            2,
            leaf(1, 1e-8f64.ln(), 0.0, 2),
            leaf(2, 0.5f64.ln(), 0.0, 2),
        );
        let n = prune_pmin(n, 1e-6);
        assert!(!n.is_terminal());
        assert!((n.min_ln_p - 1e-8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cuts_subtree_above_p_cut() {
        let n = parent(
            0.5f64.ln(),
            0.0,
            2,
            leaf(1, 1e-4f64.ln(), 0.0, 2),
            leaf(2, 0.3f64.ln(), 0.0, 2),
        );
        let n = prune_pmin(n, 1e-6);
        assert!(n.is_terminal());
        assert_eq!(n.min_ln_p, 0.5f64.ln());
    }

    #[test]
    fn tie_collapses() {
        let lp = 1e-9f64.ln();
        let n = parent(
            lp,
            0.0,
            2,
            leaf(1, lp, 0.0, 2),
            leaf(2, 0.3f64.ln(), 0.0, 2),
        );
        assert!(prune_pmin(n, 1e-6).is_terminal());
    }

    #[test]
    fn cost_complexity_cases() {
        let make = || {
            parent(
                0.1f64.ln(),
                5.0,
                2,
                leaf(1, 0.1f64.ln(), 6.0, 2),
                leaf(2, 0.1f64.ln(), 4.0, 2),
            )
        };
        // alpha = 0: 10 > 5
        assert!(!prune_cost_complexity(make(), 0.0).is_terminal());
        // alpha = 2: 10 - 8 = 2 > 5 - 4 = 1
        assert!(!prune_cost_complexity(make(), 2.0).is_terminal());
        // large alpha penalizes the extra degrees of freedom
        assert!(prune_cost_complexity(make(), 1e6).is_terminal());
        // equal penalized statistic collapses: 10 - 4a = 5 - 2a at a = 2.5
        assert!(prune_cost_complexity(make(), 2.5).is_terminal());
    }
}
