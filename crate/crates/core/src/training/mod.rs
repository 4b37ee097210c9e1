//! Gradients, the Adam optimizer, and clean / adversarial training loops.

mod adam;
mod gradient;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use gradient::{batch_gradient, psr_gradient};
pub use trainer::{
    evaluate, init_params, run_epochs, train_adversarial, train_clean, EpochRecord, TrainConfig,
    TrainHistory, TrainOutcome, TrainState,
};

#[cfg(test)]
mod tests;
