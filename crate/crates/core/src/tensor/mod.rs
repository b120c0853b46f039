//! Dense row-major `f64` tensors with define-by-run reverse-mode differentiation.
//!
//! A [`Tensor`] is a cheap reference-counted handle. Every operation records its
//! inputs on the output node, so the graph is rebuilt on each forward pass and
//! dropped with the last handle that refers to it. Calling [`Tensor::backward`]
//! on a scalar walks the graph in reverse creation order and accumulates
//! gradients into every tensor that requires them.
//!
//! There is no broadcasting. The only shape-changing conveniences are explicit
//! ops such as [`Tensor::add_row`] and [`Tensor::scale`].

mod backward;
mod ops;

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

fn next_id() -> usize {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Reference-counted handle to a node in the differentiation graph.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

pub(crate) struct Node {
    // Creation order. Inputs always have smaller ids than their outputs.
    id: usize,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    op: Op,
}

pub(crate) enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Hadamard(Tensor, Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    AddRow(Tensor, Tensor),
    Scale(Tensor, f64),
    Relu(Tensor),
    Tanh(Tensor),
    Exp(Tensor),
    Softplus(Tensor),
    Clamp(Tensor, f64, f64),
    Sum(Tensor),
    Reshape(Tensor),
    Transpose(Tensor),
    Softmax(Tensor),
    CrossEntropy {
        logits: Tensor,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    GatherRows {
        table: Tensor,
        ids: Vec<usize>,
    },
    SliceRows {
        input: Tensor,
        start: usize,
    },
    ConcatRows(Vec<Tensor>),
}

impl Op {
    fn inputs(&self) -> Vec<&Tensor> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::Hadamard(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::AddRow(a, b) => vec![a, b],
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Softplus(a)
            | Op::Clamp(a, _, _)
            | Op::Sum(a)
            | Op::Reshape(a)
            | Op::Transpose(a)
            | Op::Softmax(a) => vec![a],
            Op::CrossEntropy { logits, .. } => vec![logits],
            Op::GatherRows { table, .. } => vec![table],
            Op::SliceRows { input, .. } => vec![input],
            Op::ConcatRows(parts) => parts.iter().collect(),
        }
    }
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::Dimension(format!(
            "shape {shape:?} has a zero-sized dimension"
        )));
    }
    let numel: usize = shape.iter().product();
    if numel != len {
        return Err(Error::Dimension(format!(
            "shape {shape:?} holds {numel} values but {len} were supplied"
        )));
    }
    Ok(())
}

impl Tensor {
    fn from_op(shape: Vec<usize>, data: Vec<f64>, op: Op) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let requires_grad = op.inputs().iter().any(|t| t.requires_grad());
        Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            op,
        }))
    }

    fn leaf(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Result<Tensor> {
        check_len(&shape, data.len())?;
        let grad = requires_grad.then(|| vec![0.0; data.len()]);
        Ok(Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(grad),
            requires_grad,
            op: Op::Leaf,
        })))
    }

    /// Constant tensor that never receives a gradient.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        Tensor::leaf(shape.to_vec(), data, false)
    }

    /// Leaf tensor that accumulates gradients during `backward`.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        Tensor::leaf(shape.to_vec(), data, true)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, vec![0.0; n]).expect("zero-sized dimension in zeros()")
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, vec![1.0; n]).expect("zero-sized dimension in ones()")
    }

    /// Rank-0 constant.
    pub fn scalar(value: f64) -> Tensor {
        Tensor::leaf(Vec::new(), vec![value], false).unwrap()
    }

    /// Rank-1 constant.
    pub fn vector(data: Vec<f64>) -> Result<Tensor> {
        let n = data.len();
        Tensor::new(&[n], data)
    }

    /// Rank-2 constant built from equal-length rows.
    pub fn matrix(rows: &[Vec<f64>]) -> Result<Tensor> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows in matrix literal".into()));
        }
        Tensor::new(&[m, n], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.borrow().len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.op, Op::Leaf)
    }

    pub fn values(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let data = self.0.data.borrow();
        assert_eq!(
            data.len(),
            1,
            "item() on tensor of shape {:?}",
            self.0.shape
        );
        data[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        if let Some(g) = self.0.grad.borrow_mut().as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Overwrite the values of a leaf in place (used by optimizers and checkpoints).
    pub fn set_values(&self, values: &[f64]) -> Result<()> {
        let mut data = self.0.data.borrow_mut();
        if values.len() != data.len() {
            return Err(Error::Dimension(format!(
                "cannot assign {} values to tensor of shape {:?}",
                values.len(),
                self.0.shape
            )));
        }
        data.copy_from_slice(values);
        Ok(())
    }

    /// Mutate a leaf's values alongside its accumulated gradient.
    pub fn update<F: FnOnce(&mut [f64], &[f64])>(&self, f: F) -> Result<()> {
        let grad = self.0.grad.borrow();
        let grad = grad.as_ref().ok_or(Error::UninitializedGradient)?;
        f(&mut self.0.data.borrow_mut(), grad);
        Ok(())
    }

    /// Copy of the values with no graph history.
    pub fn detach(&self) -> Tensor {
        Tensor::leaf(self.0.shape.clone(), self.to_vec(), false).unwrap()
    }

    pub fn same_node(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("values", &*self.0.data.borrow())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

#[cfg(test)]
mod tests;
