//! Minimal differentiable numeric substrate.
//!
//! Every kernel comes as a forward function plus a `*_backward` function that
//! maps the gradient of a scalar loss w.r.t. the kernel output to gradients
//! w.r.t. its inputs. Graphs in this crate are fixed (a tree, a forest), so
//! reverse mode is written out by calling the backward kernels in reverse
//! order rather than through a general tape.

mod adam;
mod gradcheck;
pub mod kernels;
mod loss;
mod tensor;

pub use adam::{adam_step, AdamConfig, Param, ParamStore};
pub use gradcheck::{gradient_check, GradCheckReport, ParamCheck};
pub use loss::{bce_loss, BceOutput, PROB_CLIP};
pub use tensor::Tensor;
