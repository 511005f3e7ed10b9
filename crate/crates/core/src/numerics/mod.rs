//! Dense tensors and the reverse-mode tape every model operation is built on.

mod tape;
mod tensor;

pub use tape::{logloss, pool_bounds, sigmoid, BackwardFault, Gradients, Tape, Var, PROB_EPS};
pub use tensor::{BinaryKind, ReduceKind, Tensor, MAX_RANK};
