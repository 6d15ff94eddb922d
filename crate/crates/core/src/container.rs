//! Ordered registry of named symbolic blocks with a fixed flat layout.
//!
//! Blocks are stacked in insertion order; each block is flattened
//! column-major. Names that are absent at vectorization time are filled with
//! zeros.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{Expr, NamedValues};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContainerError {
    #[error("block `{0}` is already registered")]
    DuplicateName(String),
    #[error("unknown block `{0}`")]
    UnknownName(String),
    #[error("block `{name}` has shape {expected:?}, got {got:?}")]
    ShapeMismatch { name: String, expected: (usize, usize), got: (usize, usize) },
    #[error("flat vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone)]
pub struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub expr: Expr,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct VariableContainer {
    slots: IndexMap<String, Slot>,
    total: usize,
}

impl VariableContainer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a block; returns its offset into the flat vector.
    pub fn register(&mut self, name: &str, block: Expr) -> Result<usize, ContainerError> {
        if self.slots.contains_key(name) {
            return Err(ContainerError::DuplicateName(name.to_string()));
        }
        let offset = self.total;
        let (rows, cols) = block.shape();
        self.total += rows * cols;
        self.slots.insert(name.to_string(), Slot { offset, rows, cols, expr: block });
        Ok(offset)
    }

    /// Total flat length.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn get(&self, name: &str) -> Option<&Slot> {
        self.slots.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    /// Blocks in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Slot)> {
        self.slots.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    /// All symbols stacked into one column, in flat order.
    pub fn flat_expr(&self) -> Expr {
        let data = self.slots.values().flat_map(|s| s.expr.elements().iter().cloned()).collect();
        Expr::vector(data)
    }

    /// Flatten named values; absent names become zeros. Unknown names are
    /// rejected.
    pub fn vectorize(&self, values: &NamedValues) -> Result<DVector<f64>, ContainerError> {
        let mut out = DVector::zeros(self.total);
        self.write_into(values, &mut out)?;
        Ok(out)
    }

    /// Overwrite the named blocks inside an existing flat vector, leaving the
    /// other entries untouched.
    pub fn write_into(&self, values: &NamedValues, flat: &mut DVector<f64>) -> Result<(), ContainerError> {
        if flat.len() != self.total {
            return Err(ContainerError::LengthMismatch { expected: self.total, got: flat.len() });
        }
        for (name, m) in values {
            let slot = self.slots.get(name).ok_or_else(|| ContainerError::UnknownName(name.clone()))?;
            if m.shape() != (slot.rows, slot.cols) {
                return Err(ContainerError::ShapeMismatch {
                    name: name.clone(),
                    expected: (slot.rows, slot.cols),
                    got: m.shape(),
                });
            }
            flat.rows_mut(slot.offset, slot.len()).copy_from_slice(m.as_slice());
        }
        Ok(())
    }

    /// Split a flat vector back into named blocks.
    pub fn devectorize(&self, flat: &DVector<f64>) -> Result<NamedValues, ContainerError> {
        if flat.len() != self.total {
            return Err(ContainerError::LengthMismatch { expected: self.total, got: flat.len() });
        }
        let mut out = IndexMap::with_capacity(self.slots.len());
        for (name, slot) in &self.slots {
            let m = DMatrix::from_column_slice(slot.rows, slot.cols, &flat.as_slice()[slot.range()]);
            out.insert(name.clone(), m);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LeafRegistry;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn ab() -> VariableContainer {
        let mut reg = LeafRegistry::new();
        let mut c = VariableContainer::new();
        assert_eq!(c.register("a", reg.make_variable("a", 2, 1).unwrap()).unwrap(), 0);
        assert_eq!(c.register("b", reg.make_variable("b", 2, 2).unwrap()).unwrap(), 2);
        c
    }

    #[test]
    fn register_offsets() {
        let c = ab();
        assert_eq!(c.len(), 6);
        assert_eq!(c.get("b").unwrap().offset, 2);
        assert_eq!(VariableContainer::new().len(), 0);
    }

    #[test]
    fn duplicate_rejected() {
        let mut c = ab();
        let e = Expr::zeros(1, 1);
        assert_eq!(c.register("a", e), Err(ContainerError::DuplicateName("a".into())));
    }

    #[test]
    fn vectorize_column_major() {
        let c = ab();
        let v = NamedValues::from([
            ("a".to_string(), dmatrix![1.0; 2.0]),
            ("b".to_string(), dmatrix![3.0, 5.0; 4.0, 6.0]),
        ]);
        assert_eq!(c.vectorize(&v).unwrap().as_slice(), &[1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn missing_block_zero_filled() {
        let c = ab();
        let v = NamedValues::from([("a".to_string(), dmatrix![1.0; 2.0])]);
        assert_eq!(c.vectorize(&v).unwrap().as_slice(), &[1., 2., 0., 0., 0., 0.]);
    }

    #[test]
    fn wrong_shape_rejected() {
        let c = ab();
        let v = NamedValues::from([("a".to_string(), dmatrix![1.0, 2.0])]);
        assert!(matches!(c.vectorize(&v), Err(ContainerError::ShapeMismatch { .. })));
    }

    #[test]
    fn devectorize_inverse() {
        let c = ab();
        let out = c.devectorize(&DVector::from_vec(vec![1., 2., 3., 4., 5., 6.])).unwrap();
        assert_eq!(out["a"], dmatrix![1.0; 2.0]);
        assert_eq!(out["b"], dmatrix![3.0, 5.0; 4.0, 6.0]);
        assert!(matches!(c.devectorize(&DVector::zeros(5)), Err(ContainerError::LengthMismatch { .. })));
        let names: Vec<&str> = out.keys().map(String::as_str).collect();
        assert_eq!(names, ["a", "b"]);
    }

    #[test]
    fn registration_order_sets_offsets() {
        let mut reg = LeafRegistry::new();
        let mut c = VariableContainer::new();
        c.register("b", reg.make_variable("b", 2, 2).unwrap()).unwrap();
        c.register("a", reg.make_variable("a", 2, 1).unwrap()).unwrap();
        assert_eq!(c.get("a").unwrap().offset, 4);
        assert_eq!(c.get("b").unwrap().offset, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 6)) {
            let c = ab();
            let flat = DVector::from_vec(vals);
            let named = c.devectorize(&flat).unwrap();
            prop_assert_eq!(c.vectorize(&named).unwrap(), flat.clone());
            let again = c.devectorize(&c.vectorize(&named).unwrap()).unwrap();
            prop_assert_eq!(again, named);
        }
    }
}
