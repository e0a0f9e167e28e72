//! Dense 2-D tensors with reverse-mode automatic differentiation.
//!
//! Every tensor is a row-major `f64` matrix. Ops build a tape: each result
//! holds handles to its parents plus a closure that pushes the result's
//! gradient back into them. `backward` on a 1x1 loss topologically sorts the
//! tape and runs the closures in reverse order. Gradients accumulate, so a
//! parameter used several times (or across several per-sample losses) ends up
//! with the sum of all contributions; call `zero_grad` between optimizer steps.

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use rand::Rng;

use crate::error::{NnError, Result};

/// SeLU scale constant.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_493_419_334_985_294_6;
/// SeLU negative-branch constant.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_284_817_042_991_671_7;

/// Probabilities at or below this are treated as exact zeros by the entropy op.
const ENTROPY_PROB_FLOOR: f64 = 1e-300;

type BackwardFn = Box<dyn Fn(&[f64], &[f64])>;

struct Inner {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    grad: Vec<f64>,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

/// Handle to a node of the autodiff tape. Cloning is cheap and aliases the node.
#[derive(Clone)]
pub struct Tensor(Rc<RefCell<Inner>>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.0.borrow();
        f.debug_struct("Tensor")
            .field("rows", &inner.rows)
            .field("cols", &inner.cols)
            .field("data", &inner.data)
            .finish()
    }
}

/// How the right operand of an elementwise binary op lines up with the left.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Scalar,
    Row,
    Col,
}

fn broadcast_mode(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Result<Broadcast> {
    if lhs == rhs {
        Ok(Broadcast::Same)
    } else if rhs == (1, 1) {
        Ok(Broadcast::Scalar)
    } else if rhs.0 == 1 && rhs.1 == lhs.1 {
        Ok(Broadcast::Row)
    } else if rhs.1 == 1 && rhs.0 == lhs.0 {
        Ok(Broadcast::Col)
    } else {
        Err(NnError::shape(op, lhs, rhs))
    }
}

fn broadcast_index(mode: Broadcast, r: usize, c: usize, cols: usize) -> usize {
    match mode {
        Broadcast::Same => r * cols + c,
        Broadcast::Scalar => 0,
        Broadcast::Row => c,
        Broadcast::Col => r,
    }
}

impl Tensor {
    fn new(rows: usize, cols: usize, data: Vec<f64>, requires_grad: bool) -> Tensor {
        debug_assert_eq!(data.len(), rows * cols);
        let len = data.len();
        Tensor(Rc::new(RefCell::new(Inner {
            rows,
            cols,
            data,
            grad: vec![0.0; len],
            parents: Vec::new(),
            backward: None,
            requires_grad,
        })))
    }

    /// Constant leaf tensor; no gradient is tracked through it.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != rows * cols {
            return Err(NnError::Contract(format!(
                "from_vec: {} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor::new(rows, cols, data, false))
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor::new(rows, cols, vec![0.0; rows * cols], false)
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Tensor {
        Tensor::new(rows, cols, vec![value; rows * cols], false)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::new(1, 1, vec![value], false)
    }

    /// Trainable leaf tensor with explicit initial values.
    pub fn parameter(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != rows * cols {
            return Err(NnError::Contract(format!(
                "parameter: {} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor::new(rows, cols, data, true))
    }

    /// Trainable leaf initialized uniformly in `[-bound, bound]`.
    pub fn parameter_uniform<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Tensor {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Tensor::new(rows, cols, data, true)
    }

    fn make_child<B>(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        build_backward: B,
    ) -> Tensor
    where
        B: FnOnce() -> BackwardFn,
    {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let backward = if requires_grad {
            Some(build_backward())
        } else {
            None
        };
        let len = data.len();
        Tensor(Rc::new(RefCell::new(Inner {
            rows,
            cols,
            data,
            grad: vec![0.0; len],
            parents,
            backward,
            requires_grad,
        })))
    }

    pub fn rows(&self) -> usize {
        self.0.borrow().rows
    }

    pub fn cols(&self) -> usize {
        self.0.borrow().cols
    }

    pub fn shape(&self) -> (usize, usize) {
        let inner = self.0.borrow();
        (inner.rows, inner.cols)
    }

    pub fn len(&self) -> usize {
        self.0.borrow().data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    /// Copy of the forward values.
    pub fn value(&self) -> Vec<f64> {
        self.0.borrow().data.clone()
    }

    /// Copy of the accumulated gradient.
    pub fn grad(&self) -> Vec<f64> {
        self.0.borrow().grad.clone()
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        let inner = self.0.borrow();
        assert!(r < inner.rows && c < inner.cols, "tensor index out of range");
        inner.data[r * inner.cols + c]
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        let inner = self.0.borrow();
        assert_eq!(
            (inner.rows, inner.cols),
            (1, 1),
            "item() requires a 1x1 tensor"
        );
        inner.data[0]
    }

    pub fn zero_grad(&self) {
        for g in self.0.borrow_mut().grad.iter_mut() {
            *g = 0.0;
        }
    }

    /// Overwrite the forward values in place (optimizer updates, checkpoint
    /// restore, finite-difference probing).
    pub fn set_value(&self, data: &[f64]) -> Result<()> {
        let mut inner = self.0.borrow_mut();
        if data.len() != inner.data.len() {
            return Err(NnError::Contract(format!(
                "set_value: {} values for a {}x{} tensor",
                data.len(),
                inner.rows,
                inner.cols
            )));
        }
        inner.data.copy_from_slice(data);
        Ok(())
    }

    fn ptr_key(&self) -> usize {
        Rc::as_ptr(&self.0) as usize
    }

    /// Reverse-mode sweep from a 1x1 loss. Gradients accumulate into every
    /// reachable node that requires grad.
    pub fn backward(&self) -> Result<()> {
        if self.shape() != (1, 1) {
            let (r, c) = self.shape();
            return Err(NnError::Contract(format!(
                "backward requires a 1x1 loss tensor, got {r}x{c}"
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        // Iterative post-order DFS over the requires-grad subgraph: parents
        // finish before children, so reversing gives child-before-parent.
        let mut topo: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<usize> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                topo.push(node);
                continue;
            }
            if !visited.insert(node.ptr_key()) {
                continue;
            }
            stack.push((node.clone(), true));
            let inner = node.0.borrow();
            for parent in &inner.parents {
                if parent.requires_grad() && !visited.contains(&parent.ptr_key()) {
                    stack.push((parent.clone(), false));
                }
            }
        }
        self.0.borrow_mut().grad[0] += 1.0;
        for node in topo.iter().rev() {
            let inner = node.0.borrow();
            if let Some(back) = &inner.backward {
                back(&inner.data, &inner.grad);
            }
        }
        Ok(())
    }

    fn add_like(&self, other: &Tensor, op: &'static str, sign: f64) -> Result<Tensor> {
        let (rows, cols) = self.shape();
        let mode = broadcast_mode(op, (rows, cols), other.shape())?;
        let a = self.0.borrow();
        let b = other.0.borrow();
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] =
                    a.data[r * cols + c] + sign * b.data[broadcast_index(mode, r, c, cols)];
            }
        }
        drop(a);
        drop(b);
        let pa = self.clone();
        let pb = other.clone();
        Ok(Tensor::make_child(
            rows,
            cols,
            data,
            vec![self.clone(), other.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    if pa.requires_grad() {
                        let mut a = pa.0.borrow_mut();
                        for i in 0..go.len() {
                            a.grad[i] += go[i];
                        }
                    }
                    if pb.requires_grad() {
                        let mut b = pb.0.borrow_mut();
                        for r in 0..rows {
                            for c in 0..cols {
                                b.grad[broadcast_index(mode, r, c, cols)] +=
                                    sign * go[r * cols + c];
                            }
                        }
                    }
                })
            },
        ))
    }

    /// Elementwise addition. The right operand may be the same shape, 1x1,
    /// a 1xC row (broadcast over rows), or an Rx1 column (broadcast over cols).
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.add_like(other, "add", 1.0)
    }

    /// Elementwise subtraction with the same broadcast rules as `add`.
    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.add_like(other, "sub", -1.0)
    }

    /// Elementwise product with the same broadcast rules as `add`.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        let (rows, cols) = self.shape();
        let mode = broadcast_mode("mul", (rows, cols), other.shape())?;
        let a_vals = self.value();
        let b_vals = other.value();
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] =
                    a_vals[r * cols + c] * b_vals[broadcast_index(mode, r, c, cols)];
            }
        }
        let pa = self.clone();
        let pb = other.clone();
        Ok(Tensor::make_child(
            rows,
            cols,
            data,
            vec![self.clone(), other.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    if pa.requires_grad() {
                        let mut a = pa.0.borrow_mut();
                        for r in 0..rows {
                            for c in 0..cols {
                                a.grad[r * cols + c] +=
                                    go[r * cols + c] * b_vals[broadcast_index(mode, r, c, cols)];
                            }
                        }
                    }
                    if pb.requires_grad() {
                        let mut b = pb.0.borrow_mut();
                        for r in 0..rows {
                            for c in 0..cols {
                                b.grad[broadcast_index(mode, r, c, cols)] +=
                                    go[r * cols + c] * a_vals[r * cols + c];
                            }
                        }
                    }
                })
            },
        ))
    }

    fn extremum(&self, other: &Tensor, op: &'static str, take_max: bool) -> Result<Tensor> {
        let (rows, cols) = self.shape();
        let mode = broadcast_mode(op, (rows, cols), other.shape())?;
        let a_vals = self.value();
        let b_vals = other.value();
        // left_wins[i]: gradient routes to the left operand (ties go left).
        let mut data = vec![0.0; rows * cols];
        let mut left_wins = vec![false; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let a = a_vals[i];
                let b = b_vals[broadcast_index(mode, r, c, cols)];
                let pick_left = if take_max { a >= b } else { a <= b };
                data[i] = if pick_left { a } else { b };
                left_wins[i] = pick_left;
            }
        }
        let pa = self.clone();
        let pb = other.clone();
        Ok(Tensor::make_child(
            rows,
            cols,
            data,
            vec![self.clone(), other.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    if pa.requires_grad() {
                        let mut a = pa.0.borrow_mut();
                        for i in 0..go.len() {
                            if left_wins[i] {
                                a.grad[i] += go[i];
                            }
                        }
                    }
                    if pb.requires_grad() {
                        let mut b = pb.0.borrow_mut();
                        for r in 0..rows {
                            for c in 0..cols {
                                let i = r * cols + c;
                                if !left_wins[i] {
                                    b.grad[broadcast_index(mode, r, c, cols)] += go[i];
                                }
                            }
                        }
                    }
                })
            },
        ))
    }

    /// Elementwise minimum with `add`-style broadcasting; gradient follows the
    /// selected operand (left on ties).
    pub fn minimum(&self, other: &Tensor) -> Result<Tensor> {
        self.extremum(other, "minimum", false)
    }

    /// Elementwise maximum with `add`-style broadcasting; gradient follows the
    /// selected operand (left on ties).
    pub fn maximum(&self, other: &Tensor) -> Result<Tensor> {
        self.extremum(other, "maximum", true)
    }

    /// Matrix product `(R,K) x (K,C) -> (R,C)`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (rows, inner_dim) = self.shape();
        let (b_rows, cols) = other.shape();
        if inner_dim != b_rows {
            return Err(NnError::shape("matmul", (rows, inner_dim), (b_rows, cols)));
        }
        let a_vals = self.value();
        let b_vals = other.value();
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for k in 0..inner_dim {
                let aik = a_vals[i * inner_dim + k];
                if aik == 0.0 {
                    continue;
                }
                let brow = &b_vals[k * cols..(k + 1) * cols];
                let orow = &mut data[i * cols..(i + 1) * cols];
                for j in 0..cols {
                    orow[j] += aik * brow[j];
                }
            }
        }
        let pa = self.clone();
        let pb = other.clone();
        Ok(Tensor::make_child(
            rows,
            cols,
            data,
            vec![self.clone(), other.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    if pa.requires_grad() {
                        let mut a = pa.0.borrow_mut();
                        for i in 0..rows {
                            for k in 0..inner_dim {
                                let mut acc = 0.0;
                                for j in 0..cols {
                                    acc += go[i * cols + j] * b_vals[k * cols + j];
                                }
                                a.grad[i * inner_dim + k] += acc;
                            }
                        }
                    }
                    if pb.requires_grad() {
                        let mut b = pb.0.borrow_mut();
                        for k in 0..inner_dim {
                            for j in 0..cols {
                                let mut acc = 0.0;
                                for i in 0..rows {
                                    acc += a_vals[i * inner_dim + k] * go[i * cols + j];
                                }
                                b.grad[k * cols + j] += acc;
                            }
                        }
                    }
                })
            },
        ))
    }

    /// Concatenate along columns: `[(R,C1), (R,C2), ...] -> (R, sum Ci)`.
    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(NnError::Contract("concat_cols of zero tensors".into()));
        }
        let rows = parts[0].rows();
        for p in parts {
            if p.rows() != rows {
                return Err(NnError::shape("concat_cols", parts[0].shape(), p.shape()));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|p| p.cols()).collect();
        let cols: usize = widths.iter().sum();
        let mut data = vec![0.0; rows * cols];
        let mut offset = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            let vals = p.value();
            for r in 0..rows {
                data[r * cols + offset..r * cols + offset + w]
                    .copy_from_slice(&vals[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let parents: Vec<Tensor> = parts.to_vec();
        let handles = parents.clone();
        Ok(Tensor::make_child(rows, cols, data, parents, move || {
            Box::new(move |_out, go: &[f64]| {
                let mut offset = 0;
                for (p, w) in handles.iter().map(|p| (p, p.cols())) {
                    if p.requires_grad() {
                        let mut inner = p.0.borrow_mut();
                        for r in 0..rows {
                            for c in 0..w {
                                inner.grad[r * w + c] += go[r * cols + offset + c];
                            }
                        }
                    }
                    offset += w;
                }
            })
        }))
    }

    /// Concatenate along rows: `[(R1,C), (R2,C), ...] -> (sum Ri, C)`.
    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(NnError::Contract("concat_rows of zero tensors".into()));
        }
        let cols = parts[0].cols();
        for p in parts {
            if p.cols() != cols {
                return Err(NnError::shape("concat_rows", parts[0].shape(), p.shape()));
            }
        }
        let rows: usize = parts.iter().map(|p| p.rows()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            data.extend_from_slice(&p.value());
        }
        let parents: Vec<Tensor> = parts.to_vec();
        let handles = parents.clone();
        Ok(Tensor::make_child(rows, cols, data, parents, move || {
            Box::new(move |_out, go: &[f64]| {
                let mut offset = 0;
                for p in &handles {
                    let n = p.rows() * cols;
                    if p.requires_grad() {
                        let mut inner = p.0.borrow_mut();
                        for i in 0..n {
                            inner.grad[i] += go[offset + i];
                        }
                    }
                    offset += n;
                }
            })
        }))
    }

    fn unary<F, G>(&self, forward: F, grad_from: G) -> Tensor
    where
        F: Fn(f64) -> f64,
        // grad_from(out_value, upstream_grad, index) -> contribution to input grad
        G: Fn(&[f64], &[f64], usize) -> f64 + 'static,
    {
        let (rows, cols) = self.shape();
        let data: Vec<f64> = self.value().iter().map(|&x| forward(x)).collect();
        let parent = self.clone();
        Tensor::make_child(rows, cols, data, vec![self.clone()], move || {
            Box::new(move |out: &[f64], go: &[f64]| {
                let mut inner = parent.0.borrow_mut();
                for i in 0..go.len() {
                    inner.grad[i] += grad_from(out, go, i);
                }
            })
        })
    }

    /// Scaled exponential linear unit.
    pub fn selu(&self) -> Tensor {
        self.unary(
            |x| {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * (x.exp() - 1.0)
                }
            },
            // For x <= 0: d/dx = lambda*alpha*exp(x) = y + lambda*alpha, and
            // y > 0 exactly when x > 0.
            |out, go, i| {
                if out[i] > 0.0 {
                    SELU_LAMBDA * go[i]
                } else {
                    (out[i] + SELU_LAMBDA * SELU_ALPHA) * go[i]
                }
            },
        )
    }

    pub fn tanh(&self) -> Tensor {
        self.unary(|x| x.tanh(), |out, go, i| (1.0 - out[i] * out[i]) * go[i])
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(
            |x| 1.0 / (1.0 + (-x).exp()),
            |out, go, i| out[i] * (1.0 - out[i]) * go[i],
        )
    }

    /// Numerically stable `ln(1 + exp(x))`. The derivative `sigmoid(x)` is
    /// recovered from the output as `1 - exp(-y)`.
    pub fn softplus(&self) -> Tensor {
        self.unary(
            |x| x.max(0.0) + (-x.abs()).exp().ln_1p(),
            |out, go, i| (1.0 - (-out[i]).exp()) * go[i],
        )
    }

    /// Elementwise natural log; caller must keep inputs strictly positive.
    pub fn ln(&self) -> Tensor {
        let inputs = self.value();
        self.unary(|x| x.ln(), move |_out, go, i| go[i] / inputs[i])
    }

    pub fn exp(&self) -> Tensor {
        self.unary(|x| x.exp(), |out, go, i| out[i] * go[i])
    }

    /// Clamp into `[lo, hi]`; gradient passes only strictly inside the band.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        let inputs = self.value();
        self.unary(
            move |x| x.clamp(lo, hi),
            move |_out, go, i| {
                if inputs[i] > lo && inputs[i] < hi {
                    go[i]
                } else {
                    0.0
                }
            },
        )
    }

    /// Elementwise square root; caller must keep inputs strictly positive.
    pub fn sqrt(&self) -> Tensor {
        self.unary(|x| x.sqrt(), |out, go, i| 0.5 / out[i] * go[i])
    }

    /// Elementwise reciprocal; caller must keep inputs away from zero.
    pub fn recip(&self) -> Tensor {
        self.unary(|x| 1.0 / x, |out, go, i| -out[i] * out[i] * go[i])
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.unary(move |x| factor * x, move |_out, go, i| factor * go[i])
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, offset: f64) -> Tensor {
        self.unary(move |x| x + offset, |_out, go, i| go[i])
    }

    fn reduce_all(&self, divisor: f64) -> Tensor {
        let sum: f64 = self.value().iter().sum();
        let n = self.len();
        let parent = self.clone();
        Tensor::make_child(1, 1, vec![sum / divisor], vec![self.clone()], move || {
            Box::new(move |_out, go: &[f64]| {
                let mut inner = parent.0.borrow_mut();
                let g = go[0] / divisor;
                for i in 0..n {
                    inner.grad[i] += g;
                }
            })
        })
    }

    pub fn sum_all(&self) -> Tensor {
        self.reduce_all(1.0)
    }

    pub fn mean_all(&self) -> Tensor {
        self.reduce_all(self.len() as f64)
    }

    fn reduce_axis0(&self, divisor: f64) -> Tensor {
        let (rows, cols) = self.shape();
        let vals = self.value();
        let mut data = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                data[c] += vals[r * cols + c];
            }
        }
        for v in data.iter_mut() {
            *v /= divisor;
        }
        let parent = self.clone();
        Tensor::make_child(1, cols, data, vec![self.clone()], move || {
            Box::new(move |_out, go: &[f64]| {
                let mut inner = parent.0.borrow_mut();
                for r in 0..rows {
                    for c in 0..cols {
                        inner.grad[r * cols + c] += go[c] / divisor;
                    }
                }
            })
        })
    }

    /// Column sums: `(R,C) -> (1,C)`.
    pub fn sum_axis0(&self) -> Tensor {
        self.reduce_axis0(1.0)
    }

    /// Column means: `(R,C) -> (1,C)`.
    pub fn mean_axis0(&self) -> Tensor {
        self.reduce_axis0(self.rows() as f64)
    }

    /// Select rows by index, repeats allowed: `(R,C) -> (idx.len(), C)`.
    /// Gradients scatter-add back, so repeated rows accumulate.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor> {
        let (rows, cols) = self.shape();
        for &i in idx {
            if i >= rows {
                return Err(NnError::Contract(format!(
                    "gather_rows: index {i} out of range for {rows} rows"
                )));
            }
        }
        let vals = self.value();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(&vals[i * cols..(i + 1) * cols]);
        }
        let parent = self.clone();
        let idx_own: Vec<usize> = idx.to_vec();
        Ok(Tensor::make_child(
            idx.len(),
            cols,
            data,
            vec![self.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    let mut inner = parent.0.borrow_mut();
                    for (k, &i) in idx_own.iter().enumerate() {
                        for c in 0..cols {
                            inner.grad[i * cols + c] += go[k * cols + c];
                        }
                    }
                })
            },
        ))
    }

    /// Extract a single entry as a 1x1 tensor.
    pub fn select(&self, r: usize, c: usize) -> Result<Tensor> {
        let (rows, cols) = self.shape();
        if r >= rows || c >= cols {
            return Err(NnError::Contract(format!(
                "select: ({r},{c}) out of range for {rows}x{cols}"
            )));
        }
        let value = self.at(r, c);
        let parent = self.clone();
        Ok(Tensor::make_child(
            1,
            1,
            vec![value],
            vec![self.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    parent.0.borrow_mut().grad[r * cols + c] += go[0];
                })
            },
        ))
    }

    fn expect_vector(&self, op: &'static str, mask_len: usize) -> Result<usize> {
        let (rows, cols) = self.shape();
        if rows != 1 && cols != 1 {
            return Err(NnError::Contract(format!(
                "{op} needs a vector-shaped tensor, got {rows}x{cols}"
            )));
        }
        let n = rows * cols;
        if n != mask_len {
            return Err(NnError::Contract(format!(
                "{op}: mask length {mask_len} does not match {n} entries"
            )));
        }
        Ok(n)
    }

    /// Softmax over the unmasked entries of a vector-shaped tensor. Masked
    /// entries get probability exactly 0 and receive exactly zero gradient.
    /// Errors if every entry is masked.
    pub fn masked_softmax(&self, mask: &[bool]) -> Result<Tensor> {
        let n = self.expect_vector("masked_softmax", mask.len())?;
        if !mask.iter().any(|&m| m) {
            return Err(NnError::Contract(
                "masked_softmax: all entries are masked".into(),
            ));
        }
        let vals = self.value();
        let data = softmax_slice(&vals, mask, n);
        let (rows, cols) = self.shape();
        let parent = self.clone();
        let mask_own: Vec<bool> = mask.to_vec();
        Ok(Tensor::make_child(
            rows,
            cols,
            data,
            vec![self.clone()],
            move || {
                Box::new(move |out: &[f64], go: &[f64]| {
                    let mut inner = parent.0.borrow_mut();
                    softmax_backward_row(&mut inner.grad, out, go, &mask_own, 0, go.len());
                })
            },
        ))
    }

    /// Row-wise masked softmax on an `(R,C)` tensor with a row-major mask of
    /// the same size. A fully masked row yields all-zero probabilities (and
    /// zero gradient) instead of an error.
    pub fn masked_softmax_rows(&self, mask: &[bool]) -> Result<Tensor> {
        let (rows, cols) = self.shape();
        if mask.len() != rows * cols {
            return Err(NnError::Contract(format!(
                "masked_softmax_rows: mask length {} for a {rows}x{cols} tensor",
                mask.len()
            )));
        }
        let vals = self.value();
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let lo = r * cols;
            let hi = lo + cols;
            if mask[lo..hi].iter().any(|&m| m) {
                let row = softmax_slice(&vals[lo..hi], &mask[lo..hi], cols);
                data[lo..hi].copy_from_slice(&row);
            }
        }
        let parent = self.clone();
        let mask_own: Vec<bool> = mask.to_vec();
        Ok(Tensor::make_child(
            rows,
            cols,
            data,
            vec![self.clone()],
            move || {
                Box::new(move |out: &[f64], go: &[f64]| {
                    let mut inner = parent.0.borrow_mut();
                    for r in 0..rows {
                        let lo = r * cols;
                        if mask_own[lo..lo + cols].iter().any(|&m| m) {
                            softmax_backward_row(&mut inner.grad, out, go, &mask_own, lo, cols);
                        }
                    }
                })
            },
        ))
    }

    /// Log-probability of entry `index` under the masked softmax of a
    /// vector-shaped tensor, computed in log space for stability.
    pub fn masked_log_softmax_select(&self, mask: &[bool], index: usize) -> Result<Tensor> {
        let n = self.expect_vector("masked_log_softmax_select", mask.len())?;
        if index >= n || !mask[index] {
            return Err(NnError::Contract(format!(
                "masked_log_softmax_select: index {index} is out of range or masked"
            )));
        }
        let vals = self.value();
        let max = masked_max(&vals, mask);
        let mut total = 0.0;
        for i in 0..n {
            if mask[i] {
                total += (vals[i] - max).exp();
            }
        }
        let logp = vals[index] - max - total.ln();
        let parent = self.clone();
        let mask_own: Vec<bool> = mask.to_vec();
        Ok(Tensor::make_child(
            1,
            1,
            vec![logp],
            vec![self.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    let mut inner = parent.0.borrow_mut();
                    let g = go[0];
                    for i in 0..mask_own.len() {
                        if mask_own[i] {
                            let p = (vals[i] - max).exp() / total;
                            let indicator = if i == index { 1.0 } else { 0.0 };
                            inner.grad[i] += g * (indicator - p);
                        }
                    }
                })
            },
        ))
    }

    /// Shannon entropy `-sum p ln p` over the unmasked entries of a
    /// vector-shaped probability tensor. Entries at or below 1e-300 contribute
    /// zero (with zero gradient), matching the `0 ln 0 = 0` convention.
    pub fn entropy_of_masked_probs(&self, mask: &[bool]) -> Result<Tensor> {
        let n = self.expect_vector("entropy_of_masked_probs", mask.len())?;
        let vals = self.value();
        let mut entropy = 0.0;
        for i in 0..n {
            if mask[i] && vals[i] > ENTROPY_PROB_FLOOR {
                entropy -= vals[i] * vals[i].ln();
            }
        }
        let parent = self.clone();
        let mask_own: Vec<bool> = mask.to_vec();
        Ok(Tensor::make_child(
            1,
            1,
            vec![entropy],
            vec![self.clone()],
            move || {
                Box::new(move |_out, go: &[f64]| {
                    let mut inner = parent.0.borrow_mut();
                    for i in 0..mask_own.len() {
                        if mask_own[i] && vals[i] > ENTROPY_PROB_FLOOR {
                            inner.grad[i] -= go[0] * (vals[i].ln() + 1.0);
                        }
                    }
                })
            },
        ))
    }
}

fn masked_max(vals: &[f64], mask: &[bool]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (v, &m) in vals.iter().zip(mask) {
        if m && *v > max {
            max = *v;
        }
    }
    max
}

fn softmax_slice(vals: &[f64], mask: &[bool], n: usize) -> Vec<f64> {
    let max = masked_max(vals, mask);
    let mut out = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        if mask[i] {
            out[i] = (vals[i] - max).exp();
            total += out[i];
        }
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

fn softmax_backward_row(
    grad: &mut [f64],
    out: &[f64],
    go: &[f64],
    mask: &[bool],
    offset: usize,
    len: usize,
) {
    let mut dot = 0.0;
    for i in offset..offset + len {
        if mask[i] {
            dot += out[i] * go[i];
        }
    }
    for i in offset..offset + len {
        if mask[i] {
            grad[i] += out[i] * (go[i] - dot);
        }
    }
}

/// Per-graph, per-channel normalization to zero mean and unit variance with a
/// learned affine map: `gamma * (x - mean) / sqrt(var + 1e-5) + beta`, where
/// the statistics are taken over rows (nodes) independently per column.
pub fn graph_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    let mean = x.mean_axis0();
    let centered = x.sub(&mean)?;
    let var = centered.mul(&centered)?.mean_axis0();
    let inv_std = var.add_scalar(1e-5).sqrt().recip();
    let normalized = centered.mul(&inv_std)?;
    normalized.mul(gamma)?.add(beta)
}

/// Ordered, uniquely named collection of trainable tensors. The order fixes
/// the layout used by the optimizer, checkpoints, and flat-vector probing.
#[derive(Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn register(&mut self, name: &str, tensor: &Tensor) {
        assert!(
            tensor.requires_grad(),
            "registered parameter {name} must require grad"
        );
        assert!(
            self.entries.iter().all(|(n, _)| n != name),
            "duplicate parameter name {name}"
        );
        self.entries.push((name.to_string(), tensor.clone()));
    }

    /// Absorb another set, prefixing every name with `prefix/`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamSet) {
        for (name, tensor) in &other.entries {
            self.register(&format!("{prefix}/{name}"), tensor);
        }
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grad(&self) {
        for (_, t) in &self.entries {
            t.zero_grad();
        }
    }

    /// All parameter values flattened in registration order.
    pub fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, t) in &self.entries {
            out.extend_from_slice(&t.value());
        }
        out
    }

    /// All gradients flattened in registration order.
    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, t) in &self.entries {
            out.extend_from_slice(&t.grad());
        }
        out
    }

    /// Overwrite all parameter values from a flat vector in registration order.
    pub fn set_flat_values(&self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(NnError::Contract(format!(
                "set_flat_values: {} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for (_, t) in &self.entries {
            let n = t.len();
            t.set_value(&flat[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }
}

/// Fully connected layer `x -> x W + b` with uniform `1/sqrt(fan_in)` init.
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn new<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Linear {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Linear {
            w: Tensor::parameter_uniform(fan_in, fan_out, bound, rng),
            b: Tensor::parameter_uniform(1, fan_out, bound, rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.w)?.add(&self.b)
    }

    pub fn register(&self, params: &mut ParamSet, name: &str) {
        params.register(&format!("{name}/w"), &self.w);
        params.register(&format!("{name}/b"), &self.b);
    }
}

/// Learned affine for `graph_norm`: gamma starts at 1, beta at 0.
pub struct GraphNormAffine {
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl GraphNormAffine {
    pub fn new(channels: usize) -> GraphNormAffine {
        GraphNormAffine {
            gamma: Tensor::parameter(1, channels, vec![1.0; channels]).unwrap(),
            beta: Tensor::parameter(1, channels, vec![0.0; channels]).unwrap(),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        graph_norm(x, &self.gamma, &self.beta)
    }

    pub fn register(&self, params: &mut ParamSet, name: &str) {
        params.register(&format!("{name}/gamma"), &self.gamma);
        params.register(&format!("{name}/beta"), &self.beta);
    }
}
