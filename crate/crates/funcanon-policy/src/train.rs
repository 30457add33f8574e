use crate::chunk::ActionChunk;
use crate::config::{PolicyConfig, PredictionTarget};
use crate::mlp::{mse_and_grad, AdamW, Mlp};
use crate::schedule::{q_sample, DiffusionSchedule};
use crate::state::PolicyState;
use crate::{PolicyError, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Sinusoidal position code for a timestep index.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    let pairs = dim / 2;
    for k in 0..pairs {
        let omega = 1.0 / 10_000f64.powf(k as f64 / pairs as f64);
        let angle = t as f64 * omega;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    if dim % 2 == 1 {
        out.push(0.0);
    }
    out
}

/// Denoiser input layout: noisy chunk, then state, then timestep embedding.
pub fn denoiser_input(noisy: &[f64], state: &[f64], t: usize, time_dim: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(noisy.len() + state.len() + time_dim);
    input.extend_from_slice(noisy);
    input.extend_from_slice(state);
    input.extend(time_embedding(t, time_dim));
    input
}

/// Weights plus everything needed to use them: the exact configuration and
/// the per-epoch loss curve they were trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: PolicyConfig,
    pub denoiser: Mlp,
    pub losses: Vec<f64>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        std::fs::write(path.as_ref(), text).map_err(|e| PolicyError::Checkpoint(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        if ckpt.denoiser.dims() != ckpt.config.denoiser_dims().as_slice() {
            return Err(PolicyError::Checkpoint(
                "weights do not match the recorded dimensions".into(),
            ));
        }
        Ok(ckpt)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
}

fn validate_dataset(dataset: &[(PolicyState, ActionChunk)], config: &PolicyConfig) -> Result<()> {
    if dataset.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    for (state, chunk) in dataset {
        if state.dim() != config.state_dim() {
            return Err(PolicyError::DimMismatch {
                expected: config.state_dim(),
                got: state.dim(),
            });
        }
        if chunk.dim() != config.chunk_dim() {
            return Err(PolicyError::DimMismatch {
                expected: config.chunk_dim(),
                got: chunk.dim(),
            });
        }
    }
    Ok(())
}

/// The noise estimate implied by the denoiser's raw output, plus the factor
/// that chains loss gradients back onto that raw output. Under clean-chunk
/// prediction, the estimate is the noise that would corrupt the predicted
/// chunk into the observed one.
pub fn implied_noise(
    raw: &[f64],
    noisy: &[f64],
    t: usize,
    schedule: &DiffusionSchedule,
    prediction: PredictionTarget,
) -> Result<(Vec<f64>, f64)> {
    match prediction {
        PredictionTarget::Noise => Ok((raw.to_vec(), 1.0)),
        PredictionTarget::Clean => {
            let alpha_bar = schedule.alpha_bar(t)?;
            let signal = alpha_bar.sqrt();
            let spread = (1.0 - alpha_bar).sqrt();
            let eps = raw
                .iter()
                .zip(noisy)
                .map(|(x0_hat, x_t)| (x_t - signal * x0_hat) / spread)
                .collect();
            Ok((eps, -signal / spread))
        }
    }
}

/// Timestep for draw `j` of `draws`, stratified so the draws tile the whole
/// schedule evenly. Exactly the uniform distribution on average, but with far
/// less spread between gradient estimates than independent sampling, because
/// the per-step loss varies sharply with t.
fn stratified_t(j: usize, draws: usize, t_train: usize, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let t = ((j as f64 + u) * t_train as f64 / draws as f64) as usize;
    t.min(t_train - 1)
}

/// Noise-prediction MSE, averaged over a fixed number of (t, noise) draws per
/// example. Seeded, so before/after comparisons see the same corruption.
pub fn evaluate_loss(
    denoiser: &Mlp,
    dataset: &[(PolicyState, ActionChunk)],
    schedule: &DiffusionSchedule,
    config: &PolicyConfig,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    validate_dataset(dataset, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut count = 0usize;
    for (state, chunk) in dataset {
        let flat_state = state.to_vec();
        for j in 0..draws {
            let t = stratified_t(j, draws, schedule.t_train, &mut rng);
            let noise: Vec<f64> = (0..chunk.dim())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let noisy = q_sample(&chunk.values, t, &noise, schedule)?;
            let input = denoiser_input(&noisy, &flat_state, t, config.time_dim);
            let raw = denoiser.forward(&input)?;
            let (eps_hat, _) = implied_noise(&raw, &noisy, t, schedule, config.prediction)?;
            let (loss, _) = mse_and_grad(&eps_hat, &noise);
            total += loss;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Cosine anneal from `lr` down to `lr_min` over the full run.
fn annealed_lr(config: &PolicyConfig, epoch: usize) -> f64 {
    if config.epochs <= 1 || config.lr_min >= config.lr {
        return config.lr;
    }
    let progress = epoch as f64 / (config.epochs - 1) as f64;
    config.lr_min + (config.lr - config.lr_min) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Minimize the noise-prediction MSE with AdamW over shuffled mini-batches.
/// Deterministic per seed. A non-finite batch loss aborts with the weights
/// from the last epoch that finished with a finite loss.
pub fn train(dataset: &[(PolicyState, ActionChunk)], config: &PolicyConfig) -> Result<TrainOutcome> {
    validate_dataset(dataset, config)?;
    let schedule = DiffusionSchedule::from_config(config)?;
    let mut denoiser = Mlp::seeded(config.denoiser_dims(), config.seed)?;
    let mut opt = AdamW::new(denoiser.param_count(), config.lr, config.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);

    let states: Vec<Vec<f64>> = dataset.iter().map(|(s, _)| s.to_vec()).collect();
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut last_good = denoiser.clone();
    let mut grads = vec![0.0; denoiser.param_count()];

    for epoch in 0..config.epochs {
        opt.lr = annealed_lr(config, epoch);
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in indices.chunks(config.batch.max(1)) {
            grads.fill(0.0);
            let mut batch_loss = 0.0;
            let draws = config.draws_per_example.max(1);
            for &i in batch {
                let chunk = &dataset[i].1;
                for j in 0..draws {
                    let t = stratified_t(j, draws, schedule.t_train, &mut rng);
                    let noise: Vec<f64> = (0..chunk.dim())
                        .map(|_| rng.sample(StandardNormal))
                        .collect();
                    let noisy = q_sample(&chunk.values, t, &noise, &schedule)?;
                    let input = denoiser_input(&noisy, &states[i], t, config.time_dim);
                    let activations = denoiser.forward_cached(&input)?;
                    let (eps_hat, chain) = implied_noise(
                        activations.last().unwrap(),
                        &noisy,
                        t,
                        &schedule,
                        config.prediction,
                    )?;
                    let (loss, mut dout) = mse_and_grad(&eps_hat, &noise);
                    for d in &mut dout {
                        *d *= chain;
                    }
                    denoiser.backward_into(&activations, &dout, &mut grads);
                    batch_loss += loss;
                }
            }
            let scale = 1.0 / (batch.len() * draws) as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(PolicyError::Diverged {
                    epoch,
                    last_good: Box::new(Checkpoint {
                        config: config.clone(),
                        denoiser: last_good,
                        losses,
                    }),
                });
            }
            for g in &mut grads {
                *g *= scale;
            }
            opt.update(denoiser.params_mut(), &grads);
            epoch_loss += batch_loss;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        losses.push(mean);
        if mean.is_finite() && denoiser.params().iter().all(|p| p.is_finite()) {
            last_good = denoiser.clone();
        }
        if epoch % 100 == 0 {
            log::debug!("epoch {epoch}: loss {mean:.6}");
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.clone(),
            denoiser,
            losses,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{encode_state, PoseEncoder, VerbTable};
    use funcanon_core::geometry::testutil::random_pose;
    use funcanon_core::geometry::{FrameTag, SE3Pose, Trajectory};

    fn verbs() -> VerbTable {
        let list: Vec<String> = ["grasp", "pour"].iter().map(|s| s.to_string()).collect();
        VerbTable::seeded(&list, 32, 0)
    }

    fn one_example(config: &PolicyConfig) -> (PolicyState, ActionChunk) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let encoder = PoseEncoder::seeded(config.pose_width, 0).unwrap();
        let state = encode_state(
            &random_pose(&mut rng),
            &random_pose(&mut rng),
            "kettle-0",
            "cup-0",
            "pour",
            &encoder,
            &verbs(),
            config.feature_dim,
        )
        .unwrap();
        let waypoints: Vec<SE3Pose> = (0..config.horizon + 1)
            .map(|_| random_pose(&mut rng))
            .collect();
        let grippers = vec![0.5; waypoints.len()];
        let trajectory = Trajectory::new(waypoints, grippers, FrameTag::World).unwrap();
        let chunk = ActionChunk::from_trajectory(&trajectory, config.horizon).unwrap();
        (state, chunk)
    }

    #[test]
    fn time_embedding_is_bounded_and_t_sensitive() {
        let a = time_embedding(3, 16);
        let b = time_embedding(4, 16);
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|x| x.abs() <= 1.0));
        assert_ne!(a, b);
        assert_eq!(time_embedding(0, 16), [0.0, 1.0].repeat(8));
    }

    #[test]
    fn empty_and_misshaped_datasets_are_rejected() {
        let config = PolicyConfig::default();
        assert!(matches!(
            train(&[], &config),
            Err(PolicyError::EmptyDataset)
        ));
        let (state, _) = one_example(&config);
        let bad_chunk = ActionChunk::new(2, vec![0.0; 14]).unwrap();
        assert!(matches!(
            train(&[(state, bad_chunk)], &config),
            Err(PolicyError::DimMismatch { .. })
        ));
    }

    #[test]
    fn zero_learning_rate_training_is_a_no_op_on_weights() {
        let config = PolicyConfig {
            lr: 0.0,
            weight_decay: 0.0,
            epochs: 3,
            batch: 1,
            ..PolicyConfig::default()
        };
        let initial = Mlp::seeded(config.denoiser_dims(), config.seed).unwrap();
        let out = train(&[one_example(&config)], &config).unwrap();
        assert!(initial
            .params()
            .iter()
            .zip(out.checkpoint.denoiser.params())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(out.checkpoint.losses.len(), 3);
    }

    #[test]
    fn training_is_bitwise_deterministic_per_seed() {
        let config = PolicyConfig {
            epochs: 5,
            batch: 2,
            lr: 1e-3,
            ..PolicyConfig::default()
        };
        let dataset = vec![one_example(&config), one_example(&config)];
        let a = train(&dataset, &config).unwrap();
        let b = train(&dataset, &config).unwrap();
        assert_eq!(a.checkpoint.losses, b.checkpoint.losses);
        assert!(a
            .checkpoint
            .denoiser
            .params()
            .iter()
            .zip(b.checkpoint.denoiser.params())
            .all(|(x, y)| x.to_bits() == y.to_bits()));

        let other = train(
            &dataset,
            &PolicyConfig {
                seed: 1,
                ..config.clone()
            },
        )
        .unwrap();
        assert_ne!(a.checkpoint.denoiser.params(), other.checkpoint.denoiser.params());
    }

    #[test]
    fn implied_noise_matches_scalar_recomputation() {
        let schedule = DiffusionSchedule::linear(100, 10, 1e-4, 2e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raw: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let noisy: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        for t in [0usize, 7, 50, 99] {
            let (eps, chain) =
                implied_noise(&raw, &noisy, t, &schedule, PredictionTarget::Clean).unwrap();
            let abar = schedule.alpha_bar(t).unwrap();
            for i in 0..6 {
                let want = (noisy[i] - abar.sqrt() * raw[i]) / (1.0 - abar).sqrt();
                assert!((eps[i] - want).abs() < 1e-12);
            }
            assert!((chain - (-abar.sqrt() / (1.0 - abar).sqrt())).abs() < 1e-12);
        }
        let (eps, chain) =
            implied_noise(&raw, &noisy, 42, &schedule, PredictionTarget::Noise).unwrap();
        assert_eq!(eps, raw);
        assert_eq!(chain, 1.0);
    }

    #[test]
    fn clean_chain_rule_matches_finite_differences() {
        let schedule = DiffusionSchedule::linear(100, 10, 1e-4, 2e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::seeded(vec![6, 8, 6], 1).unwrap();
        let x0: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let noise: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        // Small timestep: the regime where the chain factor is largest.
        let t = 3;
        let noisy = q_sample(&x0, t, &noise, &schedule).unwrap();

        let loss_of = |net: &Mlp| {
            let raw = net.forward(&noisy).unwrap();
            let (eps_hat, _) =
                implied_noise(&raw, &noisy, t, &schedule, PredictionTarget::Clean).unwrap();
            mse_and_grad(&eps_hat, &noise).0
        };

        let activations = net.forward_cached(&noisy).unwrap();
        let (eps_hat, chain) = implied_noise(
            activations.last().unwrap(),
            &noisy,
            t,
            &schedule,
            PredictionTarget::Clean,
        )
        .unwrap();
        let (_, mut dout) = mse_and_grad(&eps_hat, &noise);
        for d in &mut dout {
            *d *= chain;
        }
        let mut grads = vec![0.0; net.param_count()];
        net.backward_into(&activations, &dout, &mut grads);

        let h = 1e-5;
        for p in 0..net.param_count() {
            let orig = net.params()[p];
            net.params_mut()[p] = orig + h;
            let plus = loss_of(&net);
            net.params_mut()[p] = orig - h;
            let minus = loss_of(&net);
            net.params_mut()[p] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (grads[p] - numeric).abs() / grads[p].abs().max(numeric.abs()).max(1e-12);
            assert!(
                rel < 1e-6 || (grads[p].abs() < 1e-10 && numeric.abs() < 1e-10),
                "param {p}: analytic {} vs numeric {numeric}",
                grads[p]
            );
        }
    }

    #[test]
    fn overfitting_one_example_collapses_the_loss() {
        let config = PolicyConfig::overfit_one();
        let dataset = vec![one_example(&config)];
        let schedule = DiffusionSchedule::from_config(&config).unwrap();
        let initial_model = Mlp::seeded(config.denoiser_dims(), config.seed).unwrap();
        let before =
            evaluate_loss(&initial_model, &dataset, &schedule, &config, 256, 321).unwrap();
        let started = std::time::Instant::now();
        let out = train(&dataset, &config).unwrap();
        assert!(started.elapsed().as_secs() < 60, "training took too long");
        let after = evaluate_loss(
            &out.checkpoint.denoiser,
            &dataset,
            &schedule,
            &config,
            256,
            321,
        )
        .unwrap();
        assert!(
            after < 0.1 * before,
            "loss only went from {before} to {after}"
        );
    }

    #[test]
    fn absurd_learning_rate_diverges_with_a_finite_checkpoint() {
        let config = PolicyConfig {
            lr: 1e300,
            epochs: 10,
            batch: 1,
            ..PolicyConfig::default()
        };
        let err = train(&[one_example(&config)], &config).unwrap_err();
        match err {
            PolicyError::Diverged { epoch, last_good } => {
                assert!(epoch < 10);
                assert!(last_good.denoiser.params().iter().all(|p| p.is_finite()));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn checkpoints_round_trip_bitwise() {
        let config = PolicyConfig {
            epochs: 2,
            batch: 1,
            ..PolicyConfig::default()
        };
        let out = train(&[one_example(&config)], &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        out.checkpoint.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, out.checkpoint);
        assert!(loaded
            .denoiser
            .params()
            .iter()
            .zip(out.checkpoint.denoiser.params())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
