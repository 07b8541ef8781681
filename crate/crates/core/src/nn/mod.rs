//! Small dense networks with a recorded tape for reverse-mode gradients.

mod adam;
mod checkpoint;
mod graph;
mod layers;
mod tensor;

pub use adam::{adam_update, AdamState};
pub use checkpoint::Checkpoint;
pub use graph::{evaluate, evaluate_with_gradients, Gradients, Graph, Var};
pub use layers::{
    gru_cell_forward, mlp_gaussian_head, Dense, GruParams, GruVars, MlpParams, MlpVars, Parameters,
    LOG_STD_MAX, LOG_STD_MIN,
};
pub use tensor::Tensor;
