//! Traversal helpers over the scalar DAG.

use std::collections::HashMap;
use std::sync::Arc;

use super::node::{LeafInfo, Node, Scalar};

/// Nodes reachable from `roots` in post-order (operands before users),
/// each node listed once.
pub(crate) fn topo_order<'a>(roots: impl IntoIterator<Item = &'a Scalar>) -> Vec<Scalar> {
    let mut seen: HashMap<usize, ()> = HashMap::new();
    let mut order = Vec::new();
    // (node, children already pushed)
    let mut stack: Vec<(Scalar, bool)> = Vec::new();
    for root in roots {
        if seen.contains_key(&root.key()) {
            continue;
        }
        stack.push((root.clone(), false));
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if seen.contains_key(&node.key()) {
                continue;
            }
            seen.insert(node.key(), ());
            stack.push((node.clone(), true));
            node.children().for_each(|c| {
                if !seen.contains_key(&c.key()) {
                    stack.push((c.clone(), false));
                }
            });
        }
    }
    order
}

/// Position of every node of `order` keyed by pointer identity.
pub(crate) fn index_of(order: &[Scalar]) -> HashMap<usize, usize> {
    order.iter().enumerate().map(|(i, s)| (s.key(), i)).collect()
}

/// Distinct leaf nodes reachable from `roots`.
pub(crate) fn leaf_nodes<'a>(roots: impl IntoIterator<Item = &'a Scalar>) -> Vec<Scalar> {
    topo_order(roots).into_iter().filter(|s| s.leaf_info().is_some()).collect()
}

/// Distinct leaves reachable from `roots`, in first-visit order.
pub(crate) fn leaves<'a>(roots: impl IntoIterator<Item = &'a Scalar>) -> Vec<Arc<LeafInfo>> {
    topo_order(roots)
        .into_iter()
        .filter_map(|s| match &*s.0 {
            Node::Leaf(info) => Some(info.clone()),
            _ => None,
        })
        .collect()
}

/// Rebuild the graph bottom-up, replacing leaves found in `subst` and
/// re-applying the local simplification rules everywhere.
pub(crate) fn rebuild(roots: &[Scalar], subst: &HashMap<u64, Scalar>) -> Vec<Scalar> {
    let order = topo_order(roots.iter());
    let mut new: HashMap<usize, Scalar> = HashMap::with_capacity(order.len());
    for s in &order {
        let get = |c: &Scalar| new[&c.key()].clone();
        let out = match &*s.0 {
            Node::Const(_) => s.clone(),
            Node::Leaf(info) => subst.get(&info.id).cloned().unwrap_or_else(|| s.clone()),
            Node::Unary(op, a) => Scalar::unary(*op, &get(a)),
            Node::Binary(op, a, b) => Scalar::binary(*op, &get(a), &get(b)),
            Node::Select(c, a, b) => Scalar::select(&get(c), &get(a), &get(b)),
        };
        new.insert(s.key(), out);
    }
    roots.iter().map(|r| new[&r.key()].clone()).collect()
}
