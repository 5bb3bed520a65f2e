//! Lazy quadruplet loss, optimiser, training loop and gradient verification.

pub mod config;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use config::{Precision, TrainConfig};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use loss::{distance, lazy_quadruplet_loss, Margins, QuadrupletLoss};
pub use optim::{Adam, AdamConfig};
pub use trainer::{
    evaluate_loss, train, validation_tuples, write_loss_curve, AugmentEvent, StepRecord, TrainData, TrainHooks,
    TrainOutcome,
};
