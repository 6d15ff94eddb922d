use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;

use super::node::Scalar;
use super::ExprError;

/// A dense matrix of scalar expression nodes, stored column-major.
///
/// Shape is fixed at construction. All arithmetic goes through the
/// simplifying constructors, so operations on constant operands fold
/// immediately and numeric inputs stay numeric.
#[derive(Clone)]
pub struct Expr {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Expr {
    pub fn from_scalars(rows: usize, cols: usize, data: Vec<Scalar>) -> Self {
        assert_eq!(data.len(), rows * cols, "element count does not match shape");
        Expr { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Expr { rows, cols, data }
    }

    pub fn scalar(s: Scalar) -> Self {
        Expr::from_scalars(1, 1, vec![s])
    }

    pub fn constant(v: f64) -> Self {
        Expr::scalar(Scalar::constant(v))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Expr::from_fn(rows, cols, |_, _| Scalar::constant(0.0))
    }

    pub fn identity(n: usize) -> Self {
        Expr::from_fn(n, n, |r, c| Scalar::constant(if r == c { 1.0 } else { 0.0 }))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Expr::from_fn(m.nrows(), m.ncols(), |r, c| Scalar::constant(m[(r, c)]))
    }

    /// Column vector of constants.
    pub fn column(values: &[f64]) -> Self {
        Expr::from_fn(values.len(), 1, |r, _| Scalar::constant(values[r]))
    }

    /// Column vector from scalar nodes.
    pub fn vector(items: Vec<Scalar>) -> Self {
        let n = items.len();
        Expr::from_scalars(n, 1, items)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }
    pub fn is_column(&self) -> bool {
        self.cols == 1
    }

    /// Elements in column-major order.
    pub fn elements(&self) -> &[Scalar] {
        &self.data
    }

    pub fn into_elements(self) -> Vec<Scalar> {
        self.data
    }

    pub fn at(&self, r: usize, c: usize) -> &Scalar {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of {}x{}", self.rows, self.cols);
        &self.data[c * self.rows + r]
    }

    pub fn get(&self, r: usize, c: usize) -> Result<Expr, ExprError> {
        if r >= self.rows || c >= self.cols {
            return Err(ExprError::IndexOutOfRange { row: r, col: c, rows: self.rows, cols: self.cols });
        }
        Ok(Expr::scalar(self.at(r, c).clone()))
    }

    /// Element of a vector (either orientation).
    pub fn elem(&self, i: usize) -> Expr {
        Expr::scalar(self.data[i].clone())
    }

    /// The single node of a 1x1 expression.
    pub fn as_scalar(&self) -> Result<&Scalar, ExprError> {
        if self.is_scalar() {
            Ok(&self.data[0])
        } else {
            Err(ExprError::NotScalar { rows: self.rows, cols: self.cols })
        }
    }

    pub fn column_at(&self, c: usize) -> Expr {
        Expr::from_scalars(self.rows, 1, self.data[c * self.rows..(c + 1) * self.rows].to_vec())
    }

    pub fn row_at(&self, r: usize) -> Expr {
        Expr::from_fn(1, self.cols, |_, c| self.at(r, c).clone())
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Expr {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        Expr::from_fn(nr, nc, |r, c| self.at(r0 + r, c0 + c).clone())
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Expr {
        Expr::from_fn(rows.len(), self.cols, |r, c| self.at(rows[r], c).clone())
    }

    pub fn transpose(&self) -> Expr {
        Expr::from_fn(self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    /// Column-major flattening into a column vector.
    pub fn vec(&self) -> Expr {
        Expr::from_scalars(self.len(), 1, self.data.clone())
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Result<Expr, ExprError> {
        if rows * cols != self.len() {
            return Err(ExprError::ShapeMismatch {
                op: "reshape",
                left: self.shape(),
                right: (rows, cols),
            });
        }
        Ok(Expr::from_scalars(rows, cols, self.data.clone()))
    }

    pub fn map(&self, f: impl Fn(&Scalar) -> Scalar) -> Expr {
        Expr::from_scalars(self.rows, self.cols, self.data.iter().map(f).collect())
    }

    fn zip_broadcast(
        &self,
        other: &Expr,
        op: &'static str,
        f: impl Fn(&Scalar, &Scalar) -> Scalar,
    ) -> Result<Expr, ExprError> {
        if self.shape() == other.shape() {
            let data = self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect();
            Ok(Expr::from_scalars(self.rows, self.cols, data))
        } else if other.is_scalar() {
            let b = &other.data[0];
            Ok(self.map(|a| f(a, b)))
        } else if self.is_scalar() {
            let a = &self.data[0];
            Ok(other.map(|b| f(a, b)))
        } else {
            Err(ExprError::ShapeMismatch { op, left: self.shape(), right: other.shape() })
        }
    }

    pub fn try_add(&self, other: &Expr) -> Result<Expr, ExprError> {
        self.zip_broadcast(other, "add", Scalar::add)
    }
    pub fn try_sub(&self, other: &Expr) -> Result<Expr, ExprError> {
        self.zip_broadcast(other, "sub", Scalar::sub)
    }
    /// Elementwise product (scalars broadcast).
    pub fn try_elem_mul(&self, other: &Expr) -> Result<Expr, ExprError> {
        self.zip_broadcast(other, "elementwise mul", Scalar::mul)
    }
    /// Elementwise quotient (scalars broadcast).
    pub fn try_elem_div(&self, other: &Expr) -> Result<Expr, ExprError> {
        self.zip_broadcast(other, "div", Scalar::div)
    }
    pub fn try_atan2(&self, x: &Expr) -> Result<Expr, ExprError> {
        self.zip_broadcast(x, "atan2", Scalar::atan2)
    }
    pub fn try_pow(&self, e: &Expr) -> Result<Expr, ExprError> {
        self.zip_broadcast(e, "pow", Scalar::powf)
    }

    /// Matrix product; a 1x1 operand scales the other.
    pub fn try_matmul(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.is_scalar() || other.is_scalar() {
            return self.try_elem_mul(other);
        }
        if self.cols != other.rows {
            return Err(ExprError::ShapeMismatch { op: "matmul", left: self.shape(), right: other.shape() });
        }
        Ok(Expr::from_fn(self.rows, other.cols, |r, c| {
            sum_products((0..self.cols).map(|k| (self.at(r, k), other.at(k, c))))
        }))
    }

    pub fn neg(&self) -> Expr {
        self.map(Scalar::neg)
    }
    pub fn sin(&self) -> Expr {
        self.map(Scalar::sin)
    }
    pub fn cos(&self) -> Expr {
        self.map(Scalar::cos)
    }
    pub fn tan(&self) -> Expr {
        self.map(Scalar::tan)
    }
    pub fn sqrt(&self) -> Expr {
        self.map(Scalar::sqrt)
    }
    pub fn exp(&self) -> Expr {
        self.map(Scalar::exp)
    }
    pub fn ln(&self) -> Expr {
        self.map(Scalar::ln)
    }
    pub fn powf(&self, e: f64) -> Expr {
        let e = Scalar::constant(e);
        self.map(|a| a.powf(&e))
    }
    pub fn scale(&self, k: f64) -> Expr {
        let k = Scalar::constant(k);
        self.map(|a| k.mul(a))
    }

    /// Sum of all elements.
    pub fn sum(&self) -> Expr {
        Expr::scalar(sum_scalars(self.data.iter().cloned()))
    }

    /// Sum of squares of all elements.
    pub fn sumsqr(&self) -> Expr {
        Expr::scalar(sum_products(self.data.iter().map(|a| (a, a))))
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> Expr {
        self.sumsqr().sqrt()
    }

    pub fn try_dot(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.len() != other.len() {
            return Err(ExprError::ShapeMismatch { op: "dot", left: self.shape(), right: other.shape() });
        }
        Ok(Expr::scalar(sum_products(self.data.iter().zip(&other.data))))
    }

    /// 3-vector cross product.
    pub fn try_cross(&self, other: &Expr) -> Result<Expr, ExprError> {
        if self.len() != 3 || other.len() != 3 {
            return Err(ExprError::ShapeMismatch { op: "cross", left: self.shape(), right: other.shape() });
        }
        let (a, b) = (&self.data, &other.data);
        Ok(Expr::vector(vec![
            a[1].mul(&b[2]).sub(&a[2].mul(&b[1])),
            a[2].mul(&b[0]).sub(&a[0].mul(&b[2])),
            a[0].mul(&b[1]).sub(&a[1].mul(&b[0])),
        ]))
    }

    /// Closed-form determinant for square matrices up to 3x3.
    pub fn det(&self) -> Result<Expr, ExprError> {
        if self.rows != self.cols {
            return Err(ExprError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let m = |r, c| self.at(r, c);
        let d = match self.rows {
            0 => Scalar::constant(1.0),
            1 => m(0, 0).clone(),
            2 => m(0, 0).mul(m(1, 1)).sub(&m(0, 1).mul(m(1, 0))),
            3 => {
                let c0 = m(1, 1).mul(m(2, 2)).sub(&m(1, 2).mul(m(2, 1)));
                let c1 = m(1, 0).mul(m(2, 2)).sub(&m(1, 2).mul(m(2, 0)));
                let c2 = m(1, 0).mul(m(2, 1)).sub(&m(1, 1).mul(m(2, 0)));
                m(0, 0).mul(&c0).sub(&m(0, 1).mul(&c1)).add(&m(0, 2).mul(&c2))
            }
            n => return Err(ExprError::DeterminantTooLarge(n)),
        };
        Ok(Expr::scalar(d))
    }

    /// Vertical concatenation.
    pub fn vcat(parts: &[&Expr]) -> Result<Expr, ExprError> {
        let parts: Vec<&Expr> = parts.iter().copied().filter(|p| !p.is_empty()).collect();
        let Some(first) = parts.first() else {
            return Ok(Expr::zeros(0, 1));
        };
        let cols = first.cols;
        if let Some(bad) = parts.iter().find(|p| p.cols != cols) {
            return Err(ExprError::ShapeMismatch { op: "vcat", left: first.shape(), right: bad.shape() });
        }
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let mut offsets = Vec::with_capacity(parts.len());
        let mut acc = 0;
        for p in &parts {
            offsets.push(acc);
            acc += p.rows;
        }
        Ok(Expr::from_fn(rows, cols, |r, c| {
            let k = offsets.partition_point(|&o| o <= r) - 1;
            parts[k].at(r - offsets[k], c).clone()
        }))
    }

    /// Horizontal concatenation.
    pub fn hcat(parts: &[&Expr]) -> Result<Expr, ExprError> {
        let parts: Vec<&Expr> = parts.iter().copied().filter(|p| !p.is_empty()).collect();
        let Some(first) = parts.first() else {
            return Ok(Expr::zeros(1, 0));
        };
        let rows = first.rows;
        if let Some(bad) = parts.iter().find(|p| p.rows != rows) {
            return Err(ExprError::ShapeMismatch { op: "hcat", left: first.shape(), right: bad.shape() });
        }
        let data = parts.iter().flat_map(|p| p.data.iter().cloned()).collect::<Vec<_>>();
        let cols = data.len() / rows.max(1);
        Ok(Expr::from_scalars(rows, cols, data))
    }

    /// Numeric value when every element is a constant.
    pub fn to_matrix(&self) -> Option<DMatrix<f64>> {
        let vals: Option<Vec<f64>> = self.data.iter().map(Scalar::as_const).collect();
        vals.map(|v| DMatrix::from_vec(self.rows, self.cols, v))
    }

    pub fn is_constant(&self) -> bool {
        self.data.iter().all(Scalar::is_const)
    }
}

/// Sum with zero terms skipped.
pub(crate) fn sum_scalars(items: impl Iterator<Item = Scalar>) -> Scalar {
    let mut acc: Option<Scalar> = None;
    for s in items {
        if s.is_zero() {
            continue;
        }
        acc = Some(match acc {
            None => s,
            Some(a) => a.add(&s),
        });
    }
    acc.unwrap_or_else(|| Scalar::constant(0.0))
}

fn sum_products<'a>(pairs: impl Iterator<Item = (&'a Scalar, &'a Scalar)>) -> Scalar {
    sum_scalars(pairs.map(|(a, b)| a.mul(b)))
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr{}x{}[", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.at(r, c))?;
            }
        }
        write!(f, "]")
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::constant(v)
    }
}

impl From<&Expr> for Expr {
    fn from(e: &Expr) -> Self {
        e.clone()
    }
}

impl From<Scalar> for Expr {
    fn from(s: Scalar) -> Self {
        Expr::scalar(s)
    }
}

impl From<&DMatrix<f64>> for Expr {
    fn from(m: &DMatrix<f64>) -> Self {
        Expr::from_matrix(m)
    }
}

// Operator sugar. Shape errors panic here; the `try_*` methods return them.

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $call:ident) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                self.$call(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$call(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$call(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$call(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                self.$call(&Expr::constant(rhs)).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                (&self).$call(&Expr::constant(rhs)).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::constant(self).$call(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::constant(self).$call(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}

impl_binop!(Add, add, try_add);
impl_binop!(Sub, sub, try_sub);
impl_binop!(Mul, mul, try_matmul);
impl_binop!(Div, div, try_elem_div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}
