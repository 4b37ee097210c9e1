//! Classifier circuits, their parameter bindings, and the loss.

mod circuit;
mod model;

pub use circuit::{Circuit, GradientMethod, Op, ParameterBinding, SlotRole};
pub use model::{
    build_emnist_model, build_lcei_model, cross_entropy, cross_entropy_dp, variational_param_count,
    LossGradient, ModelFile, Prediction, QnnModel, Task, MODEL_FORMAT,
};
