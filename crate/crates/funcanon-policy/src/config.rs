use serde::{Deserialize, Serialize};

/// What the denoiser's raw output means. Either way the model is scored on
/// its implied noise estimate; the parametrization only changes what the
/// network has to represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionTarget {
    /// The raw output is the noise estimate itself. At small timesteps the
    /// corrupted chunk barely differs from the clean one, so the network
    /// must realize an enormous input gain to recover the noise — slow to
    /// fit.
    Noise,
    /// The raw output is the clean chunk; the noise estimate is whatever
    /// makes the forward corruption consistent. O(1) targets at every
    /// timestep, so small models memorize quickly.
    Clean,
}

/// Every knob of the policy stack. Serialized into checkpoints so loaded
/// weights always come with the dimensions they were trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Width of the encoded relative actor-object pose.
    pub pose_width: usize,
    /// Width of each stub instance-feature vector.
    pub feature_dim: usize,
    /// Width of the verb embedding.
    pub verb_dim: usize,
    /// Waypoint-delta horizon of one action chunk.
    pub horizon: usize,
    /// Denoiser hidden widths (leaky ReLU between layers; empty = linear
    /// model).
    pub hidden: Vec<usize>,
    /// Sinusoidal timestep-embedding width.
    pub time_dim: usize,
    pub t_train: usize,
    pub t_infer: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lr: f64,
    /// Floor of the cosine learning-rate anneal; set equal to `lr` for a
    /// constant rate.
    pub lr_min: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    /// (t, noise) corruptions sampled per example per gradient step; more
    /// draws cut gradient variance on tiny datasets.
    pub draws_per_example: usize,
    pub prediction: PredictionTarget,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            pose_width: 64,
            feature_dim: 32,
            verb_dim: 32,
            horizon: 8,
            hidden: vec![128, 128],
            time_dim: 16,
            t_train: 100,
            t_infer: 10,
            beta_start: 1e-4,
            beta_end: 2e-2,
            lr: 1e-4,
            lr_min: 0.0,
            weight_decay: 0.01,
            batch: 64,
            epochs: 500,
            draws_per_example: 1,
            prediction: PredictionTarget::Clean,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    /// Sized to memorize a tiny dataset in a couple hundred epochs: an
    /// aggressive annealed learning rate and several corruption draws per
    /// gradient step to tame noise when the batch is a single example.
    pub fn overfit_one() -> Self {
        PolicyConfig {
            lr: 3e-3,
            weight_decay: 0.0,
            batch: 1,
            epochs: 200,
            draws_per_example: 16,
            ..PolicyConfig::default()
        }
    }

    /// Flattened action-chunk length: per step, 3 translation + 3 axis-angle
    /// rotation + 1 gripper.
    pub fn chunk_dim(&self) -> usize {
        self.horizon * 7
    }

    pub fn state_dim(&self) -> usize {
        self.pose_width + 2 * self.feature_dim + self.verb_dim
    }

    /// Denoiser input: noisy chunk, state, timestep embedding.
    pub fn input_dim(&self) -> usize {
        self.chunk_dim() + self.state_dim() + self.time_dim
    }

    /// Full layer widths of the denoiser.
    pub fn denoiser_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim());
        dims.extend_from_slice(&self.hidden);
        dims.push(self.chunk_dim());
        dims
    }
}
