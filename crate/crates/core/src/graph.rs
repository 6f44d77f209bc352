//! Reverse-mode tape.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s in creation
//! order, which is already a topological order; [`Graph::backward`] walks it
//! in reverse and accumulates gradients. One graph per forward pass; graphs
//! are single-threaded, independent graphs may run on different threads.

use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{DType, Data, Tensor};

/// Given the output gradient and which parents want gradients, return one
/// gradient per parent (`None` where not requested).
pub(crate) type BackwardFn = Box<dyn Fn(&Data, &[bool]) -> Vec<Option<Data>>>;

struct Node {
    value: Arc<Tensor>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    record: bool,
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()), record: true }
    }

    /// Graph that never records reverse passes (inference).
    pub fn no_grad() -> Self {
        Self { nodes: RefCell::new(Vec::new()), record: false }
    }

    pub fn is_recording(&self) -> bool {
        self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable input.
    pub fn leaf(&self, value: impl Into<Arc<Tensor>>) -> Var<'_> {
        self.insert(value.into(), Vec::new(), None, self.record)
    }

    /// Input that never receives a gradient.
    pub fn constant(&self, value: impl Into<Arc<Tensor>>) -> Var<'_> {
        self.insert(value.into(), Vec::new(), None, false)
    }

    fn insert(
        &self,
        value: Arc<Tensor>,
        parents: Vec<usize>,
        backward: Option<BackwardFn>,
        requires_grad: bool,
    ) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, parents, backward, requires_grad });
        Var { graph: self, id: nodes.len() - 1 }
    }

    /// Record an op result. `make_backward` runs only when some parent needs
    /// a gradient.
    pub(crate) fn op<'g, F>(&'g self, value: Tensor, parents: &[Var<'g>], make_backward: F) -> Var<'g>
    where
        F: FnOnce() -> BackwardFn,
    {
        let requires_grad = self.record && parents.iter().any(|p| p.requires_grad());
        let backward = requires_grad.then(make_backward);
        self.insert(
            Arc::new(value),
            parents.iter().map(|p| p.id).collect(),
            backward,
            requires_grad,
        )
    }

    /// Reverse pass from a real scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.dtype() != DType::Real || root.value.numel() != 1 {
            return Err(Error::invalid("backward needs a real scalar loss"));
        }
        let mut grads: Vec<Option<Data>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Data::Real(vec![1.0]));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(bw) = &node.backward {
                let wants: Vec<bool> = node.parents.iter().map(|&p| nodes[p].requires_grad).collect();
                let parent_grads = bw(&g, &wants);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (&p, pg) in node.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&pg),
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[id] = Some(g);
        }
        // keep only leaves
        for (id, node) in nodes.iter().enumerate() {
            if !node.parents.is_empty() || !node.requires_grad {
                grads[id] = None;
            }
        }
        Ok(Gradients { grads })
    }
}

impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Arc<Tensor> {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn dtype(&self) -> DType {
        self.graph.nodes.borrow()[self.id].value.dtype()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }
}

/// Leaf gradients from one reverse pass.
pub struct Gradients {
    grads: Vec<Option<Data>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Data> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var<'_>) -> Option<Data> {
        self.grads.get_mut(var.id).and_then(|g| g.take())
    }
}
