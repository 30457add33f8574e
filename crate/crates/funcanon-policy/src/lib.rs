//! Desk-scale diffusion policy over actor-verb-object states: a seeded pose
//! encoder and embedding stubs, a DDPM forward process with a strided DDIM
//! sampler, and a denoiser MLP trained by manual backprop with AdamW.

pub mod chunk;
pub mod config;
pub mod mlp;
pub mod sampler;
pub mod schedule;
pub mod state;
pub mod train;

pub use chunk::ActionChunk;
pub use config::{PolicyConfig, PredictionTarget};
pub use mlp::Mlp;
pub use sampler::ddim_sample;
pub use schedule::{q_sample, DiffusionSchedule};
pub use state::{encode_state, instance_features, PolicyState, PoseEncoder, VerbTable};
pub use train::{
    denoiser_input, evaluate_loss, implied_noise, time_embedding, train, Checkpoint, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("timestep {t} outside schedule of {t_train} steps")]
    BadTimestep { t: usize, t_train: usize },
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("verb {0:?} has no embedding")]
    UnknownVerb(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}; last good checkpoint retained")]
    Diverged {
        epoch: usize,
        last_good: Box<Checkpoint>,
    },
    #[error("bad action chunk: {0}")]
    BadChunk(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Geometry(#[from] funcanon_core::geometry::GeometryError),
}

pub type Result<T> = std::result::Result<T, PolicyError>;
