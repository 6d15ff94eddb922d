use std::sync::Arc;

use indexmap::IndexMap;

use super::matrix::Expr;
use super::node::{fresh_leaf_id, LeafInfo, LeafKind, Scalar};
use super::ExprError;

#[derive(Debug, Clone)]
pub struct LeafBlock {
    pub name: String,
    pub kind: LeafKind,
    pub rows: usize,
    pub cols: usize,
    pub expr: Expr,
}

/// Registry of named leaf blocks. Each `(name, kind)` pair may be used once.
#[derive(Debug, Default, Clone)]
pub struct LeafRegistry {
    blocks: IndexMap<(LeafKind, String), LeafBlock>,
}

impl LeafRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fresh matrix of decision-variable leaves.
    pub fn make_variable(&mut self, name: &str, rows: usize, cols: usize) -> Result<Expr, ExprError> {
        self.make(name, LeafKind::Variable, rows, cols)
    }

    /// Fresh matrix of parameter leaves.
    pub fn make_parameter(&mut self, name: &str, rows: usize, cols: usize) -> Result<Expr, ExprError> {
        self.make(name, LeafKind::Parameter, rows, cols)
    }

    fn make(&mut self, name: &str, kind: LeafKind, rows: usize, cols: usize) -> Result<Expr, ExprError> {
        let key = (kind, name.to_string());
        if self.blocks.contains_key(&key) {
            return Err(ExprError::DuplicateName(name.to_string()));
        }
        let expr = leaf_block(name, kind, rows, cols);
        self.blocks.insert(key, LeafBlock { name: name.to_string(), kind, rows, cols, expr: expr.clone() });
        Ok(expr)
    }

    pub fn get(&self, name: &str, kind: LeafKind) -> Option<&LeafBlock> {
        self.blocks.get(&(kind, name.to_string()))
    }

    pub fn blocks(&self) -> impl Iterator<Item = &LeafBlock> {
        self.blocks.values()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Unregistered block of fresh leaves. Used internally where a temporary
/// symbol is needed (e.g. differentiating a map at a numeric point).
pub fn leaf_block(name: &str, kind: LeafKind, rows: usize, cols: usize) -> Expr {
    let block: Arc<str> = Arc::from(name);
    Expr::from_fn(rows, cols, |r, c| {
        Scalar::leaf(LeafInfo {
            id: fresh_leaf_id(),
            kind,
            block: block.clone(),
            row: r,
            col: c,
            block_rows: rows,
            block_cols: cols,
        })
    })
}
