//! Symbolic expression engine.
//!
//! Expressions are matrices of scalar DAG nodes over constants, decision
//! variable leaves and parameter leaves. They support numeric evaluation,
//! compilation to reusable evaluators, forward-mode symbolic differentiation
//! to any order, and structural classification (constant / linear /
//! quadratic / nonlinear) with respect to a leaf set.

mod diff;
mod function;
mod graph;
mod matrix;
mod node;
mod registry;

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use nalgebra::DMatrix;
use thiserror::Error;

pub use diff::{gradient, hessian, jacobian};
pub use function::Function;
pub use matrix::Expr;
pub use node::{BinaryOp, LeafInfo, LeafKind, Node, Scalar, UnaryOp};
pub use registry::{leaf_block, LeafBlock, LeafRegistry};

/// Named numeric blocks, in insertion order.
pub type NamedValues = IndexMap<String, DMatrix<f64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("name `{0}` is already registered")]
    DuplicateName(String),
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("expected a 1x1 expression, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("expected a column vector, got {rows}x{cols}")]
    NotAVector { rows: usize, cols: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("closed-form determinant supports at most 3x3, got {0}x{0}")]
    DeterminantTooLarge(usize),
    #[error("index ({row},{col}) out of range for {rows}x{cols}")]
    IndexOutOfRange { row: usize, col: usize, rows: usize, cols: usize },
    #[error("differentiation target must consist of leaves")]
    NotALeaf,
    #[error("no binding for `{0}`")]
    MissingBinding(String),
    #[error("binding `{name}` has shape {got:?}, expected {expected:?}")]
    BindingShape { name: String, expected: (usize, usize), got: (usize, usize) },
    #[error("leaf of block `{0}` is not an input of the function")]
    UnboundLeaf(String),
    #[error("input length {got}, expected {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("expression is {0:?} in the given leaves, expected affine")]
    NotAffine(StructureClass),
}

/// Tightest polynomial class of an expression in a given leaf set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructureClass {
    Constant,
    Linear,
    Quadratic,
    Nonlinear,
}

/// Evaluate `e` with leaves bound by block name.
pub fn evaluate(e: &Expr, bindings: &NamedValues) -> Result<DMatrix<f64>, ExprError> {
    let leaves = graph::leaf_nodes(e.elements());
    let mut x = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let info = leaf.leaf_info().expect("leaf node");
        let m = bindings
            .get(info.block.as_ref())
            .ok_or_else(|| ExprError::MissingBinding(info.block.to_string()))?;
        if m.shape() != (info.block_rows, info.block_cols) {
            return Err(ExprError::BindingShape {
                name: info.block.to_string(),
                expected: (info.block_rows, info.block_cols),
                got: m.shape(),
            });
        }
        x.push(m[(info.row, info.col)]);
    }
    let inputs = Expr::vector(leaves);
    let f = Function::new(&[&inputs], &[e])?;
    Ok(f.eval(&x)?.remove(0))
}

/// Ids of all leaves appearing in `e`.
pub fn free_leaf_ids(e: &Expr) -> HashSet<u64> {
    graph::leaves(e.elements()).into_iter().map(|i| i.id).collect()
}

/// Does `e` reference any leaf of `wrt`?
pub fn depends_on(e: &Expr, wrt: &HashSet<u64>) -> bool {
    graph::leaves(e.elements()).iter().any(|i| wrt.contains(&i.id))
}

/// Re-apply the local rewrite rules (constant folding, 0+x, 1*x, 0*x,
/// double negation) throughout the graph.
pub fn simplify(e: &Expr) -> Expr {
    let out = graph::rebuild(e.elements(), &HashMap::new());
    Expr::from_scalars(e.rows(), e.cols(), out)
}

/// Replace leaves by expressions. `pairs` holds (leaf matrix, replacement)
/// of equal element count.
pub fn substitute(e: &Expr, pairs: &[(&Expr, &Expr)]) -> Result<Expr, ExprError> {
    let mut map = HashMap::new();
    for (leaves, values) in pairs {
        if leaves.len() != values.len() {
            return Err(ExprError::ShapeMismatch { op: "substitute", left: leaves.shape(), right: values.shape() });
        }
        for (l, v) in leaves.elements().iter().zip(values.elements()) {
            let id = l.leaf_info().ok_or(ExprError::NotALeaf)?.id;
            map.insert(id, v.clone());
        }
    }
    let out = graph::rebuild(e.elements(), &map);
    Ok(Expr::from_scalars(e.rows(), e.cols(), out))
}

/// Structural class of `e` (any shape, judged elementwise; the result is the
/// loosest element class) with respect to the leaves of `wrt`.
///
/// Linear iff the first derivative is free of `wrt` leaves after
/// simplification; quadratic iff the second derivative is.
pub fn classify(e: &Expr, wrt: &Expr) -> Result<StructureClass, ExprError> {
    let ids = diff::leaf_ids(wrt)?;
    let set: HashSet<u64> = ids.iter().copied().collect();
    classify_in(e, &set)
}

pub(crate) fn classify_in(e: &Expr, set: &HashSet<u64>) -> Result<StructureClass, ExprError> {
    let present: Vec<u64> = graph::leaves(e.elements())
        .into_iter()
        .map(|i| i.id)
        .filter(|id| set.contains(id))
        .collect();
    if present.is_empty() {
        return Ok(StructureClass::Constant);
    }
    let first: Vec<Scalar> = diff::derivative_table(e.elements(), &present).into_iter().flatten().collect();
    let first_present: Vec<u64> = graph::leaves(first.iter())
        .into_iter()
        .map(|i| i.id)
        .filter(|id| set.contains(id))
        .collect();
    if first_present.is_empty() {
        return Ok(StructureClass::Linear);
    }
    let second: Vec<Scalar> = diff::derivative_table(&first, &first_present).into_iter().flatten().collect();
    if graph::leaves(second.iter()).iter().any(|i| set.contains(&i.id)) {
        Ok(StructureClass::Nonlinear)
    } else {
        Ok(StructureClass::Quadratic)
    }
}

/// Decompose an affine `e` as `M * vec(wrt) + c`, where `M` and `c` are free
/// of `wrt` leaves. `e` is flattened column-major first.
pub fn extract_affine(e: &Expr, wrt: &Expr) -> Result<(Expr, Expr), ExprError> {
    let class = classify(e, wrt)?;
    if class > StructureClass::Linear {
        return Err(ExprError::NotAffine(class));
    }
    let v = e.vec();
    let m = jacobian(&v, wrt)?;
    let zeros = Expr::zeros(wrt.rows(), wrt.cols());
    let c = substitute(&v, &[(wrt, &zeros)])?;
    Ok((m, c))
}

/// Residuals `r` with `e == sum_i r_i^2` up to an additive term free of
/// `set` leaves, when the scalar `e` is visibly a weighted sum of squares:
/// sums of `a * a` (shared node) and `a ^ 2`, scaled or divided by factors
/// free of `set` leaves. Weights move into the residuals as square roots.
/// Returns `None` for any other shape or a negative constant weight.
pub(crate) fn least_squares_residuals(e: &Scalar, set: &HashSet<u64>) -> Option<Vec<Scalar>> {
    fn depends(s: &Scalar, set: &HashSet<u64>, memo: &mut HashMap<usize, bool>) -> bool {
        if let Some(&d) = memo.get(&s.key()) {
            return d;
        }
        let d = match s.node() {
            Node::Const(_) => false,
            Node::Leaf(info) => set.contains(&info.id),
            Node::Unary(_, a) => depends(a, set, memo),
            Node::Binary(_, a, b) => depends(a, set, memo) || depends(b, set, memo),
            Node::Select(c, a, b) => depends(c, set, memo) || depends(a, set, memo) || depends(b, set, memo),
        };
        memo.insert(s.key(), d);
        d
    }

    fn push(r: &Scalar, w: &Option<Scalar>, out: &mut Vec<Scalar>) -> bool {
        match w {
            None => out.push(r.clone()),
            Some(w) => {
                if w.as_const().is_some_and(|v| v < 0.0) {
                    return false;
                }
                out.push(w.sqrt().mul(r));
            }
        }
        true
    }

    fn scaled(w: &Option<Scalar>, k: &Scalar, op: BinaryOp) -> Option<Scalar> {
        Some(match (w, op) {
            (None, BinaryOp::Mul) => k.clone(),
            (None, _) => Scalar::constant(1.0).div(k),
            (Some(w), BinaryOp::Mul) => w.mul(k),
            (Some(w), _) => w.div(k),
        })
    }

    fn walk(
        s: &Scalar,
        w: Option<Scalar>,
        set: &HashSet<u64>,
        memo: &mut HashMap<usize, bool>,
        out: &mut Vec<Scalar>,
    ) -> bool {
        if !depends(s, set, memo) {
            return true;
        }
        match s.node() {
            Node::Binary(BinaryOp::Add, a, b) => walk(a, w.clone(), set, memo, out) && walk(b, w, set, memo, out),
            Node::Binary(BinaryOp::Mul, a, b) if a.key() == b.key() => push(a, &w, out),
            Node::Binary(BinaryOp::Pow, a, k) if k.as_const() == Some(2.0) => push(a, &w, out),
            Node::Binary(BinaryOp::Mul, a, b) if !depends(a, set, memo) => {
                walk(b, scaled(&w, a, BinaryOp::Mul), set, memo, out)
            }
            Node::Binary(BinaryOp::Mul, a, b) if !depends(b, set, memo) => {
                walk(a, scaled(&w, b, BinaryOp::Mul), set, memo, out)
            }
            Node::Binary(BinaryOp::Div, a, b) if !depends(b, set, memo) => {
                walk(a, scaled(&w, b, BinaryOp::Div), set, memo, out)
            }
            _ => false,
        }
    }

    let mut memo = HashMap::new();
    let mut out = Vec::new();
    walk(e, None, set, &mut memo, &mut out).then_some(out)
}

/// Convenience for building binding maps.
pub fn named_values<'a>(items: impl IntoIterator<Item = (&'a str, DMatrix<f64>)>) -> NamedValues {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
