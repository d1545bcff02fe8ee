use std::cell::RefCell;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use super::param::{ParamId, ParamStore};
use super::tensor::{Real, Tensor};
use super::TensorError;

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Reverse rule: maps the output gradient to one gradient per parent, in parent order.
pub type BackwardFn<T> = Box<dyn Fn(&Tensor<T>) -> Vec<Tensor<T>>>;

struct Node<T> {
    value: Rc<Tensor<T>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    param: Option<ParamId>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    pub(crate) id: usize,
    pub(crate) tape: u64,
}

/// Records operations in execution order so gradients can be propagated in reverse.
///
/// Nodes are appended after their parents, so reverse index order is a valid
/// reverse topological order. An inference tape skips storing reverse rules.
pub struct Tape<T: Real> {
    id: u64,
    nodes: RefCell<Vec<Node<T>>>,
    recording: bool,
    check_finite: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            recording: true,
            check_finite: false,
        }
    }

    /// A tape that evaluates values only; `backward` on it fails with `NoTape`.
    pub fn inference() -> Self {
        Self {
            recording: false,
            ..Self::new()
        }
    }

    /// Enables a per-op scan that rejects NaN/Inf outputs.
    pub fn with_finite_check(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.push(Rc::new(value), Vec::new(), None, None)
    }

    /// Records a parameter leaf; its gradient lands in the store on `backward`.
    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var {
        let value = store.get(id).value.clone();
        self.push(Rc::new(value), Vec::new(), None, Some(id))
    }

    pub fn value(&self, v: Var) -> Rc<Tensor<T>> {
        self.check(v).expect("var belongs to this tape");
        Rc::clone(&self.nodes.borrow()[v.id].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.id].value.shape().to_vec()
    }

    /// Records an operation with a caller-supplied reverse rule.
    ///
    /// The closure receives the output gradient and must return one gradient per
    /// input, each shaped like that input.
    pub fn custom(
        &self,
        inputs: &[Var],
        output: Tensor<T>,
        backward: impl Fn(&Tensor<T>) -> Vec<Tensor<T>> + 'static,
    ) -> Result<Var, TensorError> {
        for &v in inputs {
            self.check(v)?;
        }
        self.record(inputs, output, backward)
    }

    pub(crate) fn check(&self, v: Var) -> Result<(), TensorError> {
        if v.tape != self.id || v.id >= self.nodes.borrow().len() {
            return Err(TensorError::NoTape);
        }
        Ok(())
    }

    pub(crate) fn record(
        &self,
        inputs: &[Var],
        output: Tensor<T>,
        backward: impl Fn(&Tensor<T>) -> Vec<Tensor<T>> + 'static,
    ) -> Result<Var, TensorError> {
        if self.check_finite && !output.all_finite() {
            return Err(TensorError::NonFiniteDetected {
                node: self.nodes.borrow().len(),
            });
        }
        let parents = inputs.iter().map(|v| v.id).collect();
        let rule: Option<BackwardFn<T>> = if self.recording {
            Some(Box::new(backward))
        } else {
            None
        };
        Ok(self.push(Rc::new(output), parents, rule, None))
    }

    fn push(
        &self,
        value: Rc<Tensor<T>>,
        parents: Vec<usize>,
        backward: Option<BackwardFn<T>>,
        param: Option<ParamId>,
    ) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            parents,
            backward,
            param,
        });
        Var {
            id: nodes.len() - 1,
            tape: self.id,
        }
    }

    /// Propagates gradients from a scalar `loss` to every node.
    pub fn gradients(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        self.check(loss)?;
        if !self.recording {
            return Err(TensorError::NoTape);
        }
        let nodes = self.nodes.borrow();
        let loss_shape = nodes[loss.id].value.shape().to_vec();
        if nodes[loss.id].value.len() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "backward",
                left: loss_shape,
                right: vec![],
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::ones(&loss_shape));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(rule) = &node.backward {
                let parent_grads = rule(&g);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (&p, pg) in node.parents.iter().zip(parent_grads) {
                    debug_assert_eq!(pg.shape(), nodes[p].value.shape(), "grad shape for node {p}");
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&pg),
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    /// Accumulates (`+=`) gradients of `loss` into every reachable parameter in `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<(), TensorError> {
        let grads = self.gradients(loss)?;
        let nodes = self.nodes.borrow();
        for (node, g) in nodes.iter().zip(&grads.grads) {
            if let (Some(pid), Some(g)) = (node.param, g) {
                store.get_mut(pid).grad.add_assign(g);
            }
        }
        Ok(())
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients<T> {
    tape: u64,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for `v`, or `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }
}
