//! Numeric core: valid 1D convolutions, reverse-mode sensitivities,
//! receptive-field arithmetic and the Adam optimizer.
//!
//! All introspection math runs in `f64`. Matrices are `channels × frames`.

mod adam;
mod arch;
mod backward;
mod conv;
mod receptive;

pub use adam::{AdamConfig, AdamState};
pub use arch::{Activation, ArchitectureSpec, LayerSpec, LayerWeights, ModelWeights};
pub use backward::{
    backward_onehot, backward_target, grad_wrt_input, input_loss, weight_gradients, InputGradient,
    LossSpec, SensitivityTrace, Sign, Target, TargetMode,
};
pub use conv::{conv1d_forward, forward, forward_from, forward_to, LayerState, LayerTrace};
pub use receptive::{receptive_cone, receptive_field, receptive_fields, ReceptiveField};
