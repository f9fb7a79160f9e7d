//! Desk-scale generator, critic, loss terms and the training loop.

pub mod check;
pub mod loss;
pub mod model;
pub mod train;

pub use check::{grad_check, GradCheckReport};
pub use loss::{
    critic_objective, gradient_penalty, phys_loss, total_generator_loss, GeneratorObjective,
    InterfTarget, LossParts, LossWeights, PhysTarget,
};
pub use model::{generate, Architecture, CriticModel, GeneratorModel};
pub use train::{
    grid_search, initial_generators, split_dataset, train, train_on_split, Ablation,
    ClassGenerators, DataSplit, EpochRecord, TrainConfig, TrainOutcome,
};
