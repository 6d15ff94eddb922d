use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Whether a leaf is optimized over or held fixed during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeafKind {
    Variable,
    Parameter,
}

/// Identity and provenance of a single scalar leaf.
///
/// Every leaf belongs to a named block (a `rows x cols` matrix of leaves) and
/// records its position inside that block.
#[derive(Debug)]
pub struct LeafInfo {
    pub id: u64,
    pub kind: LeafKind,
    pub block: Arc<str>,
    pub row: usize,
    pub col: usize,
    pub block_rows: usize,
    pub block_cols: usize,
}

static NEXT_LEAF_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn fresh_leaf_id() -> u64 {
    NEXT_LEAF_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Exp,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Atan2,
}

impl UnaryOp {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Neg => -a,
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Tan => a.tan(),
            UnaryOp::Sqrt => a.sqrt(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => a.ln(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }
}

impl BinaryOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
            BinaryOp::Atan2 => a.atan2(b),
        }
    }
}

/// `cond >= 0 ? a : b`
#[inline]
pub fn select_apply(cond: f64, a: f64, b: f64) -> f64 {
    if cond >= 0.0 {
        a
    } else {
        b
    }
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Leaf(Arc<LeafInfo>),
    Unary(UnaryOp, Scalar),
    Binary(BinaryOp, Scalar, Scalar),
    Select(Scalar, Scalar, Scalar),
}

/// A scalar node of the expression DAG. Cloning is a reference-count bump;
/// shared subgraphs keep their identity.
#[derive(Clone)]
pub struct Scalar(pub(crate) Arc<Node>);

impl Scalar {
    pub fn constant(v: f64) -> Self {
        Scalar(Arc::new(Node::Const(v)))
    }

    pub(crate) fn leaf(info: LeafInfo) -> Self {
        Scalar(Arc::new(Node::Leaf(Arc::new(info))))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    /// Pointer identity, stable while the node is alive.
    #[inline]
    pub(crate) fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.as_const().is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn leaf_info(&self) -> Option<&Arc<LeafInfo>> {
        match &*self.0 {
            Node::Leaf(info) => Some(info),
            _ => None,
        }
    }

    pub(crate) fn children(&self) -> Children<'_> {
        match &*self.0 {
            Node::Const(_) | Node::Leaf(_) => Children::None,
            Node::Unary(_, a) => Children::One(a),
            Node::Binary(_, a, b) => Children::Two(a, b),
            Node::Select(c, a, b) => Children::Three(c, a, b),
        }
    }

    // Raw constructors: no folding, no rewriting.

    pub(crate) fn raw_unary(op: UnaryOp, a: Scalar) -> Scalar {
        Scalar(Arc::new(Node::Unary(op, a)))
    }

    pub(crate) fn raw_binary(op: BinaryOp, a: Scalar, b: Scalar) -> Scalar {
        Scalar(Arc::new(Node::Binary(op, a, b)))
    }

    pub(crate) fn raw_select(c: Scalar, a: Scalar, b: Scalar) -> Scalar {
        Scalar(Arc::new(Node::Select(c, a, b)))
    }

    // Simplifying constructors.

    pub fn unary(op: UnaryOp, a: &Scalar) -> Scalar {
        if let Some(v) = a.as_const() {
            return Scalar::constant(op.apply(v));
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = &*a.0 {
                return inner.clone();
            }
        }
        Scalar::raw_unary(op, a.clone())
    }

    pub fn binary(op: BinaryOp, a: &Scalar, b: &Scalar) -> Scalar {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Scalar::constant(op.apply(x, y));
        }
        match op {
            BinaryOp::Add => {
                if a.is_zero() {
                    return b.clone();
                }
                if b.is_zero() {
                    return a.clone();
                }
            }
            BinaryOp::Sub => {
                if b.is_zero() {
                    return a.clone();
                }
                if a.is_zero() {
                    return Scalar::unary(UnaryOp::Neg, b);
                }
            }
            BinaryOp::Mul => {
                if a.is_zero() || b.is_zero() {
                    return Scalar::constant(0.0);
                }
                if a.is_one() {
                    return b.clone();
                }
                if b.is_one() {
                    return a.clone();
                }
                if a.as_const() == Some(-1.0) {
                    return Scalar::unary(UnaryOp::Neg, b);
                }
                if b.as_const() == Some(-1.0) {
                    return Scalar::unary(UnaryOp::Neg, a);
                }
            }
            BinaryOp::Div => {
                if a.is_zero() {
                    return Scalar::constant(0.0);
                }
                if b.is_one() {
                    return a.clone();
                }
            }
            BinaryOp::Pow => {
                if b.is_one() {
                    return a.clone();
                }
                if b.is_zero() {
                    return Scalar::constant(1.0);
                }
            }
            BinaryOp::Atan2 => {}
        }
        Scalar::raw_binary(op, a.clone(), b.clone())
    }

    pub fn select(c: &Scalar, a: &Scalar, b: &Scalar) -> Scalar {
        if let Some(v) = c.as_const() {
            return if v >= 0.0 { a.clone() } else { b.clone() };
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if x == y {
                return a.clone();
            }
        }
        Scalar::raw_select(c.clone(), a.clone(), b.clone())
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        Scalar::binary(BinaryOp::Add, self, o)
    }
    pub fn sub(&self, o: &Scalar) -> Scalar {
        Scalar::binary(BinaryOp::Sub, self, o)
    }
    pub fn mul(&self, o: &Scalar) -> Scalar {
        Scalar::binary(BinaryOp::Mul, self, o)
    }
    pub fn div(&self, o: &Scalar) -> Scalar {
        Scalar::binary(BinaryOp::Div, self, o)
    }
    pub fn neg(&self) -> Scalar {
        Scalar::unary(UnaryOp::Neg, self)
    }
    pub fn sin(&self) -> Scalar {
        Scalar::unary(UnaryOp::Sin, self)
    }
    pub fn cos(&self) -> Scalar {
        Scalar::unary(UnaryOp::Cos, self)
    }
    pub fn tan(&self) -> Scalar {
        Scalar::unary(UnaryOp::Tan, self)
    }
    pub fn sqrt(&self) -> Scalar {
        Scalar::unary(UnaryOp::Sqrt, self)
    }
    pub fn exp(&self) -> Scalar {
        Scalar::unary(UnaryOp::Exp, self)
    }
    pub fn ln(&self) -> Scalar {
        Scalar::unary(UnaryOp::Log, self)
    }
    pub fn powf(&self, e: &Scalar) -> Scalar {
        Scalar::binary(BinaryOp::Pow, self, e)
    }
    pub fn atan2(&self, x: &Scalar) -> Scalar {
        Scalar::binary(BinaryOp::Atan2, self, x)
    }
    pub fn square(&self) -> Scalar {
        self.mul(self)
    }
}

pub(crate) enum Children<'a> {
    None,
    One(&'a Scalar),
    Two(&'a Scalar, &'a Scalar),
    Three(&'a Scalar, &'a Scalar, &'a Scalar),
}

impl<'a> Children<'a> {
    pub(crate) fn for_each(self, mut f: impl FnMut(&'a Scalar)) {
        match self {
            Children::None => {}
            Children::One(a) => f(a),
            Children::Two(a, b) => {
                f(a);
                f(b);
            }
            Children::Three(a, b, c) => {
                f(a);
                f(b);
                f(c);
            }
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::constant(v)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(v) => write!(f, "{v}"),
            Node::Leaf(info) => {
                if info.block_rows * info.block_cols == 1 {
                    write!(f, "{}", info.block)
                } else {
                    write!(f, "{}[{},{}]", info.block, info.row, info.col)
                }
            }
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(BinaryOp::Pow, a, b) => write!(f, "pow({a},{b})"),
            Node::Binary(BinaryOp::Atan2, a, b) => write!(f, "atan2({a},{b})"),
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    _ => "/",
                };
                write!(f, "({a}{sym}{b})")
            }
            Node::Select(c, a, b) => write!(f, "select({c}>=0,{a},{b})"),
        }
    }
}
