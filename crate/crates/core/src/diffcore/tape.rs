use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::scalar::Scalar;

use super::{DiffError, Tensor};

/// Guard added under the square root of every Euclidean norm.
pub const NORM_GUARD: f64 = 1e-12;

pub(crate) type NodeId = usize;

#[derive(Clone, Debug)]
enum Op<S> {
    Input,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, S),
    Shift(NodeId, S),
    MatVec(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Sqrt(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Dot(NodeId, NodeId),
    Norm(NodeId),
    Broadcast(NodeId, Vec<usize>),
    Reshape(NodeId, Vec<usize>),
    Gather(NodeId, Arc<[usize]>),
    Concat(Vec<NodeId>),
}

impl<S> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::MatVec(..) => "matvec",
            Op::MatMul(..) => "matmul",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Sqrt(..) => "sqrt",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Dot(..) => "dot",
            Op::Norm(..) => "norm",
            Op::Broadcast(..) => "broadcast",
            Op::Reshape(..) => "reshape",
            Op::Gather(..) => "gather",
            Op::Concat(..) => "concat",
        }
    }

    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input => Vec::new(),
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::MatVec(a, b)
            | Op::MatMul(a, b)
            | Op::Dot(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Shift(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Sqrt(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Norm(a)
            | Op::Broadcast(a, _)
            | Op::Reshape(a, _)
            | Op::Gather(a, _) => vec![*a],
            Op::Concat(parts) => parts.clone(),
        }
    }
}

struct Node<S> {
    value: Arc<Tensor<S>>,
    op: Op<S>,
    /// Leaf whose gradient is reported by `backward`.
    requires_grad: bool,
    /// Some leaf upstream requires a gradient.
    needs_grad: bool,
}

/// Record of executed primitives for one forward pass.
///
/// A tape is single-threaded and meant to be short-lived: build it, run
/// `backward` once, drop it.
pub struct Tape<S: Scalar = f64> {
    nodes: RefCell<Vec<Node<S>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, S: Scalar = f64> {
    tape: &'t Tape<S>,
    id: NodeId,
}

impl<S: Scalar> std::fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

/// Gradients of a scalar root with respect to every leaf that requires one.
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    grads: HashMap<NodeId, Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn wrt(&self, var: Var<'_, S>) -> Option<&Tensor<S>> {
        self.grads.get(&var.id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn check_finite<S: Scalar>(op: &'static str, t: &Tensor<S>) -> Result<(), DiffError> {
    match t.data().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(DiffError::NonFinite { op, index }),
        None => Ok(()),
    }
}

fn same_shape<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> Result<(), DiffError> {
    if a.shape() != b.shape() {
        return Err(DiffError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn matvec<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>, DiffError> {
    let shape_err = || DiffError::ShapeMismatch {
        op: "matvec",
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    };
    let &[rows, cols] = a.shape() else {
        return Err(shape_err());
    };
    if b.shape() != [cols] {
        return Err(shape_err());
    }
    let (ad, bd) = (a.data(), b.data());
    let out = (0..rows)
        .map(|i| {
            ad[i * cols..(i + 1) * cols]
                .iter()
                .zip(bd)
                .fold(S::zero(), |acc, (&x, &y)| acc + x * y)
        })
        .collect();
    Ok(Tensor::from_parts(vec![rows], out))
}

/// Plain `(m x k) * (k x n)` product on raw slices.
pub(crate) fn gemm<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut out = vec![S::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

fn transpose<S: Scalar>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>, DiffError> {
    match (a.shape(), b.shape()) {
        (&[m, k], &[k2, n]) if k == k2 => Ok(Tensor::from_parts(vec![m, n], gemm(a.data(), b.data(), m, k, n))),
        _ => Err(DiffError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        }),
    }
}

fn scalar_tensor<S: Scalar>(v: S) -> Tensor<S> {
    Tensor::from_parts(Vec::new(), vec![v])
}

fn norm_value<S: Scalar>(a: &Tensor<S>) -> S {
    let ss = a.data().iter().fold(S::zero(), |acc, &x| acc + x * x);
    (ss + S::lit(NORM_GUARD)).sqrt()
}

/// Forward evaluation of one primitive given its input values.
fn evaluate<S: Scalar>(op: &Op<S>, args: &[&Tensor<S>]) -> Result<Tensor<S>, DiffError> {
    let out = match op {
        Op::Input => unreachable!("inputs are not evaluated"),
        Op::Add(..) => {
            same_shape("add", args[0], args[1])?;
            args[0].zip_map(args[1], |a, b| a + b)
        }
        Op::Sub(..) => {
            same_shape("sub", args[0], args[1])?;
            args[0].zip_map(args[1], |a, b| a - b)
        }
        Op::Mul(..) => {
            same_shape("mul", args[0], args[1])?;
            args[0].zip_map(args[1], |a, b| a * b)
        }
        Op::Div(..) => {
            same_shape("div", args[0], args[1])?;
            args[0].zip_map(args[1], |a, b| a / b)
        }
        Op::Scale(_, s) => args[0].map(|a| a * *s),
        Op::Shift(_, s) => args[0].map(|a| a + *s),
        Op::MatVec(..) => matvec(args[0], args[1])?,
        Op::MatMul(..) => matmul(args[0], args[1])?,
        Op::Sigmoid(_) => args[0].map(Scalar::sigmoid),
        Op::Tanh(_) => args[0].map(|a| a.tanh()),
        Op::Sqrt(_) => args[0].map(|a| a.sqrt()),
        Op::Sum(_) => scalar_tensor(args[0].data().iter().copied().sum()),
        Op::Mean(_) => scalar_tensor(args[0].data().iter().copied().sum::<S>() / S::from_count(args[0].len())),
        Op::Dot(..) => {
            same_shape("dot", args[0], args[1])?;
            scalar_tensor(
                args[0]
                    .data()
                    .iter()
                    .zip(args[1].data())
                    .fold(S::zero(), |acc, (&a, &b)| acc + a * b),
            )
        }
        Op::Norm(_) => scalar_tensor(norm_value(args[0])),
        Op::Broadcast(_, shape) => {
            if !args[0].is_scalar() {
                return Err(DiffError::ShapeMismatch {
                    op: "broadcast",
                    lhs: args[0].shape().to_vec(),
                    rhs: shape.clone(),
                });
            }
            Tensor::new(shape.clone(), vec![args[0].item(); shape.iter().product()])?
        }
        Op::Reshape(_, shape) => {
            if shape.iter().product::<usize>() != args[0].len() {
                return Err(DiffError::ShapeMismatch {
                    op: "reshape",
                    lhs: args[0].shape().to_vec(),
                    rhs: shape.clone(),
                });
            }
            Tensor::new(shape.clone(), args[0].data().to_vec())?
        }
        Op::Gather(_, idx) => {
            let src = args[0].data();
            if let Some(&bad) = idx.iter().find(|&&i| i >= src.len()) {
                return Err(DiffError::IndexOutOfRange {
                    index: bad,
                    len: src.len(),
                });
            }
            Tensor::vector(idx.iter().map(|&i| src[i]).collect())?
        }
        Op::Concat(_) => {
            let data: Vec<S> = args.iter().flat_map(|t| t.data().iter().copied()).collect();
            Tensor::vector(data)?
        }
    };
    check_finite(op.name(), &out)?;
    Ok(out)
}

/// Vector-Jacobian products: gradient of each input given the output gradient.
/// Entries are `None` for inputs that do not need a gradient.
fn vjp<S: Scalar>(
    op: &Op<S>,
    args: &[&Tensor<S>],
    out: &Tensor<S>,
    g: &Tensor<S>,
    wanted: &[bool],
) -> Vec<Option<Tensor<S>>> {
    let want = |i: usize| wanted[i];
    match op {
        Op::Input => Vec::new(),
        Op::Add(..) => vec![want(0).then(|| g.clone()), want(1).then(|| g.clone())],
        Op::Sub(..) => vec![want(0).then(|| g.clone()), want(1).then(|| g.map(|v| -v))],
        Op::Mul(..) => vec![
            want(0).then(|| g.zip_map(args[1], |gv, b| gv * b)),
            want(1).then(|| g.zip_map(args[0], |gv, a| gv * a)),
        ],
        Op::Div(..) => vec![
            want(0).then(|| g.zip_map(args[1], |gv, b| gv / b)),
            want(1).then(|| {
                // -g * a / b^2 == -g * out / b
                let t = g.zip_map(out, |gv, o| -gv * o);
                t.zip_map(args[1], |v, b| v / b)
            }),
        ],
        Op::Scale(_, s) => vec![want(0).then(|| g.map(|v| v * *s))],
        Op::Shift(..) => vec![want(0).then(|| g.clone())],
        Op::MatVec(..) => {
            let (a, b) = (args[0], args[1]);
            let (rows, cols) = (a.shape()[0], a.shape()[1]);
            let ga = want(0).then(|| Tensor::from_parts(vec![rows, cols], gemm(g.data(), b.data(), rows, 1, cols)));
            let gb = want(1).then(|| {
                let mut acc = vec![S::zero(); cols];
                for (i, &gi) in g.data().iter().enumerate() {
                    for (o, &av) in acc.iter_mut().zip(&a.data()[i * cols..(i + 1) * cols]) {
                        *o = *o + av * gi;
                    }
                }
                Tensor::from_parts(vec![cols], acc)
            });
            vec![ga, gb]
        }
        Op::MatMul(..) => {
            let (a, b) = (args[0], args[1]);
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let ga = want(0).then(|| {
                let bt = transpose(b.data(), k, n);
                Tensor::from_parts(vec![m, k], gemm(g.data(), &bt, m, n, k))
            });
            let gb = want(1).then(|| {
                let at = transpose(a.data(), m, k);
                Tensor::from_parts(vec![k, n], gemm(&at, g.data(), k, m, n))
            });
            vec![ga, gb]
        }
        Op::Sigmoid(_) => vec![want(0).then(|| g.zip_map(out, |gv, y| gv * y * (S::one() - y)))],
        Op::Tanh(_) => vec![want(0).then(|| g.zip_map(out, |gv, y| gv * (S::one() - y * y)))],
        Op::Sqrt(_) => vec![want(0).then(|| g.zip_map(out, |gv, y| gv * S::lit(0.5) / y))],
        Op::Sum(_) => vec![want(0).then(|| Tensor::full(args[0].shape(), g.item()))],
        Op::Mean(_) => vec![want(0).then(|| Tensor::full(args[0].shape(), g.item() / S::from_count(args[0].len())))],
        Op::Dot(..) => vec![
            want(0).then(|| args[1].map(|b| b * g.item())),
            want(1).then(|| args[0].map(|a| a * g.item())),
        ],
        Op::Norm(_) => {
            let scale = g.item() / out.item();
            vec![want(0).then(|| args[0].map(|a| a * scale))]
        }
        Op::Broadcast(..) => {
            vec![want(0).then(|| Tensor::from_parts(args[0].shape().to_vec(), vec![g.data().iter().copied().sum()]))]
        }
        Op::Reshape(..) => vec![want(0).then(|| Tensor::from_parts(args[0].shape().to_vec(), g.data().to_vec()))],
        Op::Gather(_, idx) => vec![want(0).then(|| {
            let mut acc = vec![S::zero(); args[0].len()];
            for (&i, &gv) in idx.iter().zip(g.data()) {
                acc[i] = acc[i] + gv;
            }
            Tensor::from_parts(args[0].shape().to_vec(), acc)
        })],
        Op::Concat(_) => {
            let mut offset = 0;
            args.iter()
                .enumerate()
                .map(|(i, t)| {
                    let n = t.len();
                    let part =
                        want(i).then(|| Tensor::from_parts(t.shape().to_vec(), g.data()[offset..offset + n].to_vec()));
                    offset += n;
                    part
                })
                .collect()
        }
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push_input(&self, value: Arc<Tensor<S>>, requires_grad: bool) -> Result<Var<'_, S>, DiffError> {
        check_finite("input", &value)?;
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Input,
            requires_grad,
            needs_grad: requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    /// Records a leaf whose gradient `backward` will report.
    pub fn leaf(&self, value: Tensor<S>) -> Result<Var<'_, S>, DiffError> {
        self.push_input(Arc::new(value), true)
    }

    pub fn constant(&self, value: Tensor<S>) -> Result<Var<'_, S>, DiffError> {
        self.push_input(Arc::new(value), false)
    }

    /// Records a constant without copying its storage (frozen weights).
    pub fn constant_shared(&self, value: Arc<Tensor<S>>) -> Result<Var<'_, S>, DiffError> {
        self.push_input(value, false)
    }

    pub fn scalar(&self, value: S) -> Result<Var<'_, S>, DiffError> {
        self.constant(Tensor::scalar(value)?)
    }

    fn record(&self, op: Op<S>) -> Result<Var<'_, S>, DiffError> {
        let inputs = op.inputs();
        let (value, needs_grad) = {
            let nodes = self.nodes.borrow();
            let args: Vec<&Tensor<S>> = inputs.iter().map(|&i| nodes[i].value.as_ref()).collect();
            let value = evaluate(&op, &args)?;
            (value, inputs.iter().any(|&i| nodes[i].needs_grad))
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad: false,
            needs_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn owns(&self, var: &Var<'_, S>) -> Result<NodeId, DiffError> {
        if std::ptr::eq(self, var.tape) {
            Ok(var.id)
        } else {
            Err(DiffError::ForeignVar)
        }
    }

    /// Flat concatenation of any number of tensors into a vector.
    pub fn concat(&self, parts: &[Var<'_, S>]) -> Result<Var<'_, S>, DiffError> {
        if parts.is_empty() {
            return Err(DiffError::EmptyConcat);
        }
        let ids = parts.iter().map(|p| self.owns(p)).collect::<Result<_, _>>()?;
        self.record(Op::Concat(ids))
    }

    /// Reverse pass from a one-element root.
    ///
    /// Every leaf created with [`Tape::leaf`] receives an entry; leaves the
    /// root does not depend on receive zeros.
    pub fn backward(&self, root: Var<'_, S>) -> Result<Gradients<S>, DiffError> {
        let root_id = self.owns(&root)?;
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root_id];
        if !root_node.value.is_scalar() {
            return Err(DiffError::NonScalarRoot {
                shape: root_node.value.shape().to_vec(),
            });
        }
        let mut adjoints: Vec<Option<Tensor<S>>> = vec![None; root_id + 1];
        adjoints[root_id] = Some(Tensor::full(root_node.value.shape(), S::one()));

        for id in (0..=root_id).rev() {
            let node = &nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Input) {
                continue;
            }
            let Some(g) = adjoints[id].take() else {
                continue;
            };
            let inputs = node.op.inputs();
            let args: Vec<&Tensor<S>> = inputs.iter().map(|&i| nodes[i].value.as_ref()).collect();
            let wanted: Vec<bool> = inputs.iter().map(|&i| nodes[i].needs_grad).collect();
            let parts = vjp(&node.op, &args, &node.value, &g, &wanted);
            for (&input, part) in inputs.iter().zip(parts) {
                let Some(part) = part else { continue };
                check_finite(node.op.name(), &part)?;
                match &mut adjoints[input] {
                    Some(acc) => acc.add_assign(&part),
                    slot @ None => *slot = Some(part),
                }
            }
        }

        let grads = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.requires_grad)
            .map(|(id, n)| {
                let g = adjoints
                    .get_mut(id)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(n.value.shape()));
                (id, g)
            })
            .collect();
        Ok(Gradients { grads })
    }

    /// Re-evaluates every recorded primitive from its stored inputs and checks
    /// that each output is reproduced bit for bit.
    pub fn replay_check(&self) -> Result<(), DiffError> {
        let nodes = self.nodes.borrow();
        for (id, node) in nodes.iter().enumerate() {
            if matches!(node.op, Op::Input) {
                continue;
            }
            let args: Vec<&Tensor<S>> = node.op.inputs().iter().map(|&i| nodes[i].value.as_ref()).collect();
            let again = evaluate(&node.op, &args)?;
            if !again.bit_eq(&node.value) {
                return Err(DiffError::ReplayMismatch { node: id });
            }
        }
        Ok(())
    }
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn value(&self) -> Arc<Tensor<S>> {
        Arc::clone(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// Value of a one-element node.
    pub fn item(&self) -> S {
        self.tape.nodes.borrow()[self.id].value.item()
    }

    pub fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    fn binary(&self, other: &Var<'t, S>, f: fn(NodeId, NodeId) -> Op<S>) -> Result<Var<'t, S>, DiffError> {
        let b = self.tape.owns(other)?;
        self.tape.record(f(self.id, b))
    }

    pub fn add(&self, other: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(other, Op::Add)
    }

    pub fn sub(&self, other: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(other, Op::Sub)
    }

    pub fn mul(&self, other: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(other, Op::Mul)
    }

    pub fn div(&self, other: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(other, Op::Div)
    }

    pub fn square(&self) -> Result<Var<'t, S>, DiffError> {
        self.mul(self)
    }

    pub fn scale(&self, s: S) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Scale(self.id, s))
    }

    /// Adds a constant to every element.
    pub fn shift(&self, s: S) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Shift(self.id, s))
    }

    /// `self` is a `rows x cols` matrix, `v` a vector of length `cols`.
    pub fn matvec(&self, v: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(v, Op::MatVec)
    }

    pub fn matmul(&self, other: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(other, Op::MatMul)
    }

    pub fn sigmoid(&self) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Sigmoid(self.id))
    }

    pub fn tanh(&self) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Tanh(self.id))
    }

    pub fn sqrt(&self) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Sqrt(self.id))
    }

    pub fn sum(&self) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Sum(self.id))
    }

    pub fn mean(&self) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Mean(self.id))
    }

    pub fn dot(&self, other: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        self.binary(other, Op::Dot)
    }

    /// Guarded Euclidean norm `sqrt(v.v + 1e-12)`.
    pub fn norm(&self) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Norm(self.id))
    }

    /// Repeats a one-element node over `shape`.
    pub fn broadcast(&self, shape: &[usize]) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Broadcast(self.id, shape.to_vec()))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Reshape(self.id, shape.to_vec()))
    }

    /// Selects flat elements by index into a new vector.
    pub fn gather(&self, indices: impl Into<Arc<[usize]>>) -> Result<Var<'t, S>, DiffError> {
        self.tape.record(Op::Gather(self.id, indices.into()))
    }

    /// Multiplies every element by a one-element node.
    pub fn mul_scalar(&self, s: &Var<'t, S>) -> Result<Var<'t, S>, DiffError> {
        let b = s.broadcast(&self.shape())?;
        self.mul(&b)
    }

    /// `v / ||v||` with the guarded norm.
    pub fn normalize(&self) -> Result<Var<'t, S>, DiffError> {
        let n = self.norm()?.broadcast(&self.shape())?;
        self.div(&n)
    }
}
