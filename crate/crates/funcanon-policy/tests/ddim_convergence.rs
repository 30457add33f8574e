//! A denoiser that has memorized one demonstration should reproduce its
//! action chunk from pure noise, and the 10-step sampler should land where
//! the 100-step sampler lands.

use funcanon_core::fixtures::pour_demo;
use funcanon_policy::{
    ddim_sample, encode_state, train, ActionChunk, DiffusionSchedule, PolicyConfig, PolicyState,
    PoseEncoder, VerbTable,
};
use nalgebra::Vector3;

fn l2(a: &ActionChunk, b: &ActionChunk) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn memorization_pair(config: &PolicyConfig) -> (PolicyState, ActionChunk) {
    let demo = pour_demo(
        "demo-pour",
        "kettle-0",
        "cup-0",
        Vector3::new(0.4, 0.0, 0.1),
        Vector3::new(0.0, 0.4, 0.1),
    );
    let encoder = PoseEncoder::seeded(config.pose_width, 0).unwrap();
    let verbs = VerbTable::seeded(&["grasp".into(), "pour".into()], config.verb_dim, 0);
    let state = encode_state(
        &demo.actor_pose,
        &demo.object_pose,
        "kettle-0",
        "cup-0",
        "pour",
        &encoder,
        &verbs,
        config.feature_dim,
    )
    .unwrap();
    let chunk = ActionChunk::from_trajectory(&demo.trajectory, config.horizon).unwrap();
    (state, chunk)
}

#[test]
fn coarse_and_fine_sampling_agree_on_a_memorized_demo() {
    let config = PolicyConfig {
        epochs: 400,
        draws_per_example: 64,
        ..PolicyConfig::overfit_one()
    };
    let (state, chunk) = memorization_pair(&config);
    let out = train(&[(state.clone(), chunk.clone())], &config).unwrap();
    let denoiser = &out.checkpoint.denoiser;

    let coarse = DiffusionSchedule::from_config(&config).unwrap();
    assert_eq!(coarse.inference_steps().len(), 10);
    let fine = DiffusionSchedule::from_config(&PolicyConfig {
        t_infer: 100,
        ..config.clone()
    })
    .unwrap();
    assert_eq!(fine.inference_steps().len(), 100);

    let s10 = ddim_sample(&state, denoiser, &coarse, &config, 9).unwrap();
    let s100 = ddim_sample(&state, denoiser, &fine, &config, 9).unwrap();

    assert!(
        l2(&s10, &s100) < 0.1,
        "10- vs 100-step samples differ by {}",
        l2(&s10, &s100)
    );
    assert!(
        l2(&s10, &chunk) < 0.1,
        "10-step sample misses the memorized chunk by {}",
        l2(&s10, &chunk)
    );
    assert!(
        l2(&s100, &chunk) < 0.1,
        "100-step sample misses the memorized chunk by {}",
        l2(&s100, &chunk)
    );
}
