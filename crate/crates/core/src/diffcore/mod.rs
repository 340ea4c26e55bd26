//! Reverse-mode differentiation over small dense tensors.
//!
//! Every loss in the crate is built on a fresh [`Graph`] per evaluation
//! (define-by-run). Parameters live in a [`ParamStore`] outside the graph;
//! [`Graph::param`] copies a value in, and after [`Graph::backward`] the
//! gradients are added back with [`Graph::accumulate_param_grads`].
//! [`adam_step`] consumes and zeroes them.
//!
//! ```
//! use lhz::diffcore::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let w = g.variable(Tensor::vector(vec![1.0, 2.0]));
//! let sq = g.square(w);
//! let loss = g.sum(sq);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(w).data(), &[2.0, 4.0]);
//! ```

mod adam;
mod gradcheck;
mod graph;
mod params;
mod serialize;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{
    analytic_gradients, compare_gradients, grad_check, relative_error, GradCheckReport,
    REL_ERROR_FLOOR,
};
pub use graph::{gaussian_logpdf, log_softmax, sigmoid, BinaryOp, Graph, Node, UnaryOp, Var};
pub use params::{Param, ParamStore};
pub use serialize::{params_to_bytes, read_params, write_params, MAGIC};
pub use tensor::Tensor;
