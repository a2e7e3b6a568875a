use std::cell::{Cell, Ref, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shape::Shape;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T])>;

pub(crate) struct Inner<T: Scalar> {
    id: u64,
    shape: Shape,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: bool,
    parents: Vec<Tensor<T>>,
    backward_fn: Option<BackwardFn<T>>,
    // set once this node's graph has been consumed by backward()
    consumed: Cell<bool>,
}

/// Dense rank-4 (N,C,H,W) tensor participating in a define-by-run
/// reverse-mode differentiation graph. Cloning is cheap (shared buffer).
///
/// Values are immutable once the tensor is part of a recorded graph;
/// leaves expose `set_data` for optimizer updates between passes.
pub struct Tensor<T: Scalar> {
    pub(crate) inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor { inner: Rc::clone(&self.inner) }
    }
}

impl<T: Scalar> Tensor<T> {
    fn build(
        shape: Shape,
        data: Vec<T>,
        requires_grad: bool,
        parents: Vec<Tensor<T>>,
        backward_fn: Option<BackwardFn<T>>,
    ) -> Tensor<T> {
        debug_assert_eq!(data.len(), shape.numel());
        Tensor {
            inner: Rc::new(Inner {
                id: fresh_id(),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                parents,
                backward_fn,
                consumed: Cell::new(false),
            }),
        }
    }

    /// Leaf tensor that accumulates gradients (a trainable value).
    pub fn leaf(shape: Shape, data: Vec<T>) -> Result<Tensor<T>> {
        if data.len() != shape.numel() {
            return Err(Error::invalid(
                "leaf",
                format!("data length {} does not match shape {}", data.len(), shape),
            ));
        }
        Ok(Tensor::build(shape, data, true, Vec::new(), None))
    }

    /// Leaf tensor excluded from differentiation (inputs, constants, buffers).
    pub fn constant(shape: Shape, data: Vec<T>) -> Result<Tensor<T>> {
        if data.len() != shape.numel() {
            return Err(Error::invalid(
                "constant",
                format!("data length {} does not match shape {}", data.len(), shape),
            ));
        }
        Ok(Tensor::build(shape, data, false, Vec::new(), None))
    }

    pub fn zeros(shape: Shape) -> Tensor<T> {
        Tensor::build(shape, vec![T::zero(); shape.numel()], false, Vec::new(), None)
    }

    pub fn full(shape: Shape, v: T) -> Tensor<T> {
        Tensor::build(shape, vec![v; shape.numel()], false, Vec::new(), None)
    }

    pub fn scalar(v: T) -> Tensor<T> {
        Tensor::full(Shape::SCALAR, v)
    }

    /// Interior graph node produced by an operation.
    ///
    /// `requires_grad` is inherited from the parents; when no parent needs
    /// gradients the node is recorded as a constant and the tape is cut.
    pub(crate) fn from_op(
        shape: Shape,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward_fn: BackwardFn<T>,
    ) -> Tensor<T> {
        let requires_grad = parents.iter().any(|p| p.inner.requires_grad);
        if requires_grad {
            Tensor::build(shape, data, true, parents, Some(backward_fn))
        } else {
            Tensor::build(shape, data, false, Vec::new(), None)
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> Shape {
        self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.numel()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.backward_fn.is_none()
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    pub fn item(&self) -> T {
        self.inner.data.borrow()[0]
    }

    /// Overwrite the values of a leaf tensor (optimizer updates, buffers).
    pub fn set_data(&self, data: &[T]) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.len(), data.len(), "set_data length mismatch");
        d.copy_from_slice(data);
    }

    /// Mutate values in place through a closure; leaf tensors only.
    pub fn with_data_mut(&self, f: impl FnOnce(&mut [T])) {
        f(&mut self.inner.data.borrow_mut());
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (a, b) in buf.iter_mut().zip(g) {
                    *a = *a + *b;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Identity forward, zero backward: detaches the value from the graph.
    pub fn stop_gradient(&self) -> Tensor<T> {
        Tensor::build(self.shape(), self.to_vec(), false, Vec::new(), None)
    }

    /// Run reverse-mode differentiation from a scalar loss. A graph may be
    /// consumed once; a second call on the same graph is rejected.
    pub fn backward(&self) -> Result<()> {
        self.backward_impl(false)
    }

    /// Like `backward`, but permits re-traversal of already-consumed graph
    /// segments, accumulating into existing gradients.
    pub fn backward_accumulate(&self) -> Result<()> {
        self.backward_impl(true)
    }

    fn backward_impl(&self, accumulate: bool) -> Result<()> {
        if !self.shape().is_scalar() {
            return Err(Error::NonScalarLoss(self.shape()));
        }
        if !self.inner.requires_grad {
            // nothing upstream to differentiate
            return Ok(());
        }

        let order = self.toposort();
        if !accumulate {
            for node in &order {
                if node.inner.backward_fn.is_some() && node.inner.consumed.get() {
                    return Err(Error::GraphConsumed);
                }
            }
        }
        // interior grads are scratch space for this traversal; only leaves
        // accumulate across calls
        for node in &order {
            if node.inner.backward_fn.is_some() {
                *node.inner.grad.borrow_mut() = None;
            }
        }

        self.accumulate_grad(&[T::one()]);
        // reverse topological order: every node sees its full gradient
        // before propagating to parents
        for node in order.iter().rev() {
            if let Some(f) = &node.inner.backward_fn {
                let g = node.inner.grad.borrow();
                if let Some(g) = g.as_ref() {
                    f(g);
                }
                node.inner.consumed.set(true);
            }
        }
        Ok(())
    }

    /// Iterative DFS topological sort over requires-grad nodes.
    fn toposort(&self) -> Vec<Tensor<T>> {
        use std::collections::HashSet;
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut done: HashSet<u64> = HashSet::new();
        // stack entries: (node, child_cursor)
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        let mut on_stack: HashSet<u64> = HashSet::new();
        on_stack.insert(self.inner.id);
        while let Some((node, cursor)) = stack.pop() {
            let parents = &node.inner.parents;
            let mut advanced = false;
            let mut next = cursor;
            while next < parents.len() {
                let p = &parents[next];
                next += 1;
                if p.inner.requires_grad && !done.contains(&p.inner.id) && !on_stack.contains(&p.inner.id) {
                    on_stack.insert(p.inner.id);
                    stack.push((node.clone(), next));
                    stack.push((p.clone(), 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                on_stack.remove(&node.inner.id);
                done.insert(node.inner.id);
                order.push(node);
            }
        }
        order
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}
