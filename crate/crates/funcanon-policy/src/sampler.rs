use crate::chunk::ActionChunk;
use crate::config::PolicyConfig;
use crate::mlp::Mlp;
use crate::schedule::DiffusionSchedule;
use crate::state::PolicyState;
use crate::train::{denoiser_input, implied_noise};
use crate::{PolicyError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic DDIM (no stochastic term) over the schedule's strided
/// inference steps. Same (state, weights, seed) always returns the same
/// chunk; the result is sanitized so it decodes into valid waypoints.
pub fn ddim_sample(
    state: &PolicyState,
    denoiser: &Mlp,
    schedule: &DiffusionSchedule,
    config: &PolicyConfig,
    seed: u64,
) -> Result<ActionChunk> {
    if state.dim() != config.state_dim() {
        return Err(PolicyError::DimMismatch {
            expected: config.state_dim(),
            got: state.dim(),
        });
    }
    if denoiser.input_dim() != config.input_dim() || denoiser.output_dim() != config.chunk_dim() {
        return Err(PolicyError::DimMismatch {
            expected: config.input_dim(),
            got: denoiser.input_dim(),
        });
    }

    let flat_state = state.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..config.chunk_dim())
        .map(|_| rng.sample(StandardNormal))
        .collect();

    let stride = schedule.t_train / schedule.t_infer;
    for t in schedule.inference_steps() {
        let raw = denoiser.forward(&denoiser_input(&x, &flat_state, t, config.time_dim))?;
        let (eps, _) = implied_noise(&raw, &x, t, schedule, config.prediction)?;
        let abar = schedule.alpha_bar(t)?;
        let signal = abar.sqrt();
        let spread = (1.0 - abar).sqrt();
        let abar_prev = if t < stride {
            1.0
        } else {
            schedule.alpha_bar(t - stride)?
        };
        let signal_prev = abar_prev.sqrt();
        let spread_prev = (1.0 - abar_prev).sqrt();
        for i in 0..x.len() {
            let x0_pred = (x[i] - spread * eps[i]) / signal;
            x[i] = signal_prev * x0_pred + spread_prev * eps[i];
        }
    }

    let mut chunk = ActionChunk::new(config.horizon, x)?;
    chunk.sanitize();
    Ok(chunk)
}
