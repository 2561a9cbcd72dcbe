//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records each op with its output value. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and
//! returns [`Gradients`] for every node that depends on a parameter.
//!
//! ```
//! use eegalign_core::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
//! let loss = g.sum(x).unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
//! ```

mod adam;
mod check;
mod graph;
mod kernels;

pub use adam::{AdamConfig, AdamState};
pub use check::{finite_difference_check, op_cases, GradCheck, OpCase};
pub use graph::{forward, Gradients, Graph, NodeId, OpKind};
