use std::collections::HashMap;

use nalgebra::DMatrix;

use super::graph::{index_of, topo_order};
use super::matrix::Expr;
use super::node::{select_apply, BinaryOp, Node, Scalar, UnaryOp};
use super::ExprError;

#[derive(Debug, Clone, Copy)]
enum Instr {
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
    Select(u32, u32, u32),
}

/// A compiled, reusable evaluator for a fixed list of output expressions
/// over a flat input vector.
///
/// Every slot of the tape is either a constant, an input, or the result of
/// one instruction. Shared subgraphs are computed once. Evaluation allocates
/// its own scratch, so a `Function` can be shared across threads.
#[derive(Debug, Clone)]
pub struct Function {
    n_inputs: usize,
    n_slots: usize,
    consts: Vec<(u32, f64)>,
    loads: Vec<(u32, u32)>,
    // (destination slot, instruction), in execution order
    instrs: Vec<(u32, Instr)>,
    outputs: Vec<u32>,
    shapes: Vec<(usize, usize)>,
}

impl Function {
    /// Compile `outputs` as functions of the leaves listed in `inputs`
    /// (each a matrix of leaves; flattened column-major and concatenated).
    /// Leaves that appear in the outputs but not in `inputs` are an error.
    pub fn new(inputs: &[&Expr], outputs: &[&Expr]) -> Result<Function, ExprError> {
        let mut input_pos: HashMap<u64, u32> = HashMap::new();
        let mut n_inputs = 0usize;
        for block in inputs {
            for s in block.elements() {
                let info = s.leaf_info().ok_or(ExprError::NotALeaf)?;
                input_pos.insert(info.id, n_inputs as u32);
                n_inputs += 1;
            }
        }
        let roots: Vec<&Scalar> = outputs.iter().flat_map(|e| e.elements()).collect();
        let order = topo_order(roots.iter().copied());
        let index = index_of(&order);
        let mut consts = Vec::new();
        let mut loads = Vec::new();
        let mut instrs = Vec::new();
        for (slot, s) in order.iter().enumerate() {
            let slot = slot as u32;
            let at = |c: &Scalar| index[&c.key()] as u32;
            match s.node() {
                Node::Const(v) => consts.push((slot, *v)),
                Node::Leaf(info) => {
                    let pos = input_pos
                        .get(&info.id)
                        .ok_or_else(|| ExprError::UnboundLeaf(info.block.to_string()))?;
                    loads.push((slot, *pos));
                }
                Node::Unary(op, a) => instrs.push((slot, Instr::Unary(*op, at(a)))),
                Node::Binary(op, a, b) => instrs.push((slot, Instr::Binary(*op, at(a), at(b)))),
                Node::Select(c, a, b) => instrs.push((slot, Instr::Select(at(c), at(a), at(b)))),
            }
        }
        let outputs_idx = roots.iter().map(|r| index[&r.key()] as u32).collect();
        Ok(Function {
            n_inputs,
            n_slots: order.len(),
            consts,
            loads,
            instrs,
            outputs: outputs_idx,
            shapes: outputs.iter().map(|e| e.shape()).collect(),
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Total number of output elements.
    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn output_shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    /// Evaluate into a flat buffer holding all outputs back to back,
    /// each column-major.
    pub fn eval_into(&self, input: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        if input.len() != self.n_inputs {
            return Err(ExprError::InputLength { expected: self.n_inputs, got: input.len() });
        }
        if out.len() != self.outputs.len() {
            return Err(ExprError::InputLength { expected: self.outputs.len(), got: out.len() });
        }
        let mut slots = vec![0.0f64; self.n_slots];
        for &(s, v) in &self.consts {
            slots[s as usize] = v;
        }
        for &(s, p) in &self.loads {
            slots[s as usize] = input[p as usize];
        }
        for &(dst, ins) in &self.instrs {
            slots[dst as usize] = match ins {
                Instr::Unary(op, a) => op.apply(slots[a as usize]),
                Instr::Binary(op, a, b) => op.apply(slots[a as usize], slots[b as usize]),
                Instr::Select(c, a, b) => select_apply(slots[c as usize], slots[a as usize], slots[b as usize]),
            };
        }
        for (o, &s) in out.iter_mut().zip(&self.outputs) {
            *o = slots[s as usize];
        }
        Ok(())
    }

    /// Evaluate and split into one matrix per output expression.
    pub fn eval(&self, input: &[f64]) -> Result<Vec<DMatrix<f64>>, ExprError> {
        let mut flat = vec![0.0; self.outputs.len()];
        self.eval_into(input, &mut flat)?;
        let mut out = Vec::with_capacity(self.shapes.len());
        let mut at = 0;
        for &(r, c) in &self.shapes {
            out.push(DMatrix::from_column_slice(r, c, &flat[at..at + r * c]));
            at += r * c;
        }
        Ok(out)
    }

    /// Evaluate the function at many input points.
    pub fn eval_batch(&self, inputs: &[Vec<f64>], mode: crate::par::ExecMode) -> Result<Vec<Vec<f64>>, ExprError> {
        crate::par::map_mode(mode, inputs, |x| {
            let mut out = vec![0.0; self.outputs.len()];
            self.eval_into(x, &mut out).map(|_| out)
        })
        .into_iter()
        .collect()
    }
}
