//! Forward-mode symbolic differentiation by graph transformation.
//!
//! For each independent leaf a single pass over the topologically sorted
//! graph produces the derivative of every node as a new expression. The
//! passes are independent and run in parallel when the `parallel` feature is
//! enabled. Zero derivatives are tracked as `None` so untouched subgraphs
//! cost nothing beyond the visit.

use std::collections::HashMap;

use super::graph::{index_of, topo_order};
use super::matrix::Expr;
use super::node::{BinaryOp, Node, Scalar, UnaryOp};
use super::ExprError;
use crate::par;

/// Leaf ids of a matrix whose elements must all be leaves.
pub(crate) fn leaf_ids(wrt: &Expr) -> Result<Vec<u64>, ExprError> {
    wrt.elements()
        .iter()
        .map(|s| s.leaf_info().map(|i| i.id).ok_or(ExprError::NotALeaf))
        .collect()
}

fn one() -> Scalar {
    Scalar::constant(1.0)
}

fn derivative_pass(order: &[Scalar], index: &HashMap<usize, usize>, leaf: u64) -> Vec<Option<Scalar>> {
    let mut d: Vec<Option<Scalar>> = Vec::with_capacity(order.len());
    for s in order {
        let get = |c: &Scalar| d[index[&c.key()]].clone();
        let out = match s.node() {
            Node::Const(_) => None,
            Node::Leaf(info) => (info.id == leaf).then(one),
            Node::Unary(op, a) => get(a).map(|da| unary_rule(*op, s, a, &da)),
            Node::Binary(op, a, b) => {
                let (da, db) = (get(a), get(b));
                if da.is_none() && db.is_none() {
                    None
                } else {
                    Some(binary_rule(*op, s, a, b, da, db))
                }
            }
            Node::Select(c, a, b) => {
                let (da, db) = (get(a), get(b));
                if da.is_none() && db.is_none() {
                    None
                } else {
                    let zero = Scalar::constant(0.0);
                    Some(Scalar::select(c, da.as_ref().unwrap_or(&zero), db.as_ref().unwrap_or(&zero)))
                }
            }
        };
        // drop structurally-zero results so they do not propagate
        d.push(out.filter(|x| !x.is_zero()));
    }
    d
}

fn unary_rule(op: UnaryOp, this: &Scalar, a: &Scalar, da: &Scalar) -> Scalar {
    match op {
        UnaryOp::Neg => da.neg(),
        UnaryOp::Sin => a.cos().mul(da),
        UnaryOp::Cos => a.sin().neg().mul(da),
        UnaryOp::Tan => da.div(&a.cos().square()),
        UnaryOp::Sqrt => da.div(&Scalar::constant(2.0).mul(this)),
        UnaryOp::Exp => this.mul(da),
        UnaryOp::Log => da.div(a),
    }
}

fn binary_rule(
    op: BinaryOp,
    this: &Scalar,
    a: &Scalar,
    b: &Scalar,
    da: Option<Scalar>,
    db: Option<Scalar>,
) -> Scalar {
    let zero = Scalar::constant(0.0);
    let dav = da.clone().unwrap_or_else(|| zero.clone());
    let dbv = db.clone().unwrap_or_else(|| zero.clone());
    match op {
        BinaryOp::Add => dav.add(&dbv),
        BinaryOp::Sub => dav.sub(&dbv),
        BinaryOp::Mul => dav.mul(b).add(&a.mul(&dbv)),
        BinaryOp::Div => dav.sub(&this.mul(&dbv)).div(b),
        BinaryOp::Pow => {
            let via_base = match &da {
                Some(da) => {
                    let em1 = b.sub(&one());
                    b.mul(&a.powf(&em1)).mul(da)
                }
                None => zero.clone(),
            };
            let via_exp = match &db {
                Some(db) => this.mul(&a.ln()).mul(db),
                None => zero,
            };
            via_base.add(&via_exp)
        }
        BinaryOp::Atan2 => {
            // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
            let den = a.square().add(&b.square());
            b.mul(&dav).sub(&a.mul(&dbv)).div(&den)
        }
    }
}

/// `result[i][j]` = d outputs[i] / d leaf[j].
pub(crate) fn derivative_table(outputs: &[Scalar], leaves: &[u64]) -> Vec<Vec<Scalar>> {
    let order = topo_order(outputs.iter());
    let index = index_of(&order);
    let out_idx: Vec<usize> = outputs.iter().map(|o| index[&o.key()]).collect();
    let present: std::collections::HashSet<u64> = order.iter().filter_map(|s| s.leaf_info().map(|i| i.id)).collect();
    let columns: Vec<Vec<Scalar>> = par::map(leaves, |&leaf| {
        if !present.contains(&leaf) {
            return vec![Scalar::constant(0.0); out_idx.len()];
        }
        let d = derivative_pass(&order, &index, leaf);
        out_idx
            .iter()
            .map(|&i| d[i].clone().unwrap_or_else(|| Scalar::constant(0.0)))
            .collect()
    });
    (0..outputs.len())
        .map(|i| columns.iter().map(|col| col[i].clone()).collect())
        .collect()
}

/// Jacobian of a column vector `e` (m x 1) with respect to the leaves of
/// `wrt` (flattened column-major), as an m x n expression.
pub fn jacobian(e: &Expr, wrt: &Expr) -> Result<Expr, ExprError> {
    if !e.is_column() {
        return Err(ExprError::NotAVector { rows: e.rows(), cols: e.cols() });
    }
    let ids = leaf_ids(wrt)?;
    let table = derivative_table(e.elements(), &ids);
    Ok(Expr::from_fn(e.rows(), ids.len(), |r, c| table[r][c].clone()))
}

/// Gradient of a scalar as an n x 1 column.
pub fn gradient(e: &Expr, wrt: &Expr) -> Result<Expr, ExprError> {
    e.as_scalar()?;
    Ok(jacobian(e, wrt)?.transpose())
}

/// Hessian of a scalar. Only the lower triangle is differentiated; the upper
/// triangle mirrors it, so the result is exactly symmetric.
pub fn hessian(e: &Expr, wrt: &Expr) -> Result<Expr, ExprError> {
    let g = gradient(e, wrt)?;
    let ids = leaf_ids(wrt)?;
    let table = derivative_table(g.elements(), &ids);
    let n = ids.len();
    Ok(Expr::from_fn(n, n, |r, c| if c <= r { table[r][c].clone() } else { table[c][r].clone() }))
}
