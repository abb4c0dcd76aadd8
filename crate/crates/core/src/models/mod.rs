//! Deep generative oversamplers: VAE, GAN, WGAN, WGAN-GP, MedGAN and ARAE,
//! each in a plain form (one sigmoid output over all columns) and/or a
//! multi-variable form (per-variable input embeddings and output heads).

mod arch;
mod generator;
pub mod layers;
mod spec;
mod train;

pub use arch::{
    condition_matrix, gradient_check, one_hot_labels, standard_normal, Batch, Networks, Objective,
    Step, CONDITION_WIDTH,
};
pub use generator::{TrainedGenerator, MODEL_FORMAT};
pub use spec::{Architecture, ModelSpec, SamplingKind, TrainConfig, Variant, MODEL_NAMES};
pub use train::{train, EpochRecord, TrainStats, TrainingSet};
