use crate::{PolicyError, Result};
use funcanon_core::geometry::{FrameTag, SE3Pose, Trajectory};
use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

/// A fixed horizon of waypoint deltas, flattened for the denoiser: per step,
/// 3 translation + 3 axis-angle rotation + 1 gripper target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub horizon: usize,
    pub values: Vec<f64>,
}

pub const STEP_DIM: usize = 7;

impl ActionChunk {
    pub fn new(horizon: usize, values: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(PolicyError::BadChunk("horizon must be positive".into()));
        }
        if values.len() != horizon * STEP_DIM {
            return Err(PolicyError::DimMismatch {
                expected: horizon * STEP_DIM,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::BadChunk("non-finite value".into()));
        }
        Ok(ActionChunk { horizon, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Consecutive waypoint deltas of the trajectory. Shorter trajectories
    /// pad with identity deltas holding the final gripper state.
    pub fn from_trajectory(trajectory: &Trajectory, horizon: usize) -> Result<Self> {
        if trajectory.len() < 2 {
            return Err(PolicyError::BadChunk(
                "need at least two waypoints to form deltas".into(),
            ));
        }
        let steps = trajectory.relative_steps();
        let grippers = trajectory.gripper_states();
        let mut values = Vec::with_capacity(horizon * STEP_DIM);
        for i in 0..horizon {
            if i < steps.len() {
                let step = &steps[i];
                let t = step.translation();
                values.extend_from_slice(&[t.x, t.y, t.z]);
                let aa = Rotation3::from_matrix_unchecked(*step.rotation()).scaled_axis();
                values.extend_from_slice(&[aa.x, aa.y, aa.z]);
                values.push(grippers[i + 1]);
            } else {
                values.extend_from_slice(&[0.0; 6]);
                values.push(*grippers.last().unwrap());
            }
        }
        ActionChunk::new(horizon, values)
    }

    /// Replace out-of-band values in place: axis-angle magnitudes re-wrapped
    /// to at most pi, grippers clamped to [0, 1]. Raw denoiser output goes
    /// through here before decoding.
    pub fn sanitize(&mut self) {
        for step in self.values.chunks_mut(STEP_DIM) {
            let aa = Vector3::new(step[3], step[4], step[5]);
            if aa.norm() > std::f64::consts::PI {
                let wrapped = Rotation3::new(aa).scaled_axis();
                step[3] = wrapped.x;
                step[4] = wrapped.y;
                step[5] = wrapped.z;
            }
            step[6] = step[6].clamp(0.0, 1.0);
        }
    }

    pub fn max_rotation_angle(&self) -> f64 {
        self.values
            .chunks(STEP_DIM)
            .map(|s| Vector3::new(s[3], s[4], s[5]).norm())
            .fold(0.0, f64::max)
    }

    /// Roll the deltas out from a starting pose.
    pub fn to_trajectory(
        &self,
        start: &SE3Pose,
        start_gripper: f64,
        frame_tag: FrameTag,
    ) -> Result<Trajectory> {
        let mut waypoints = Vec::with_capacity(self.horizon + 1);
        let mut grippers = Vec::with_capacity(self.horizon + 1);
        waypoints.push(*start);
        grippers.push(start_gripper);
        let mut pose = *start;
        for step in self.values.chunks(STEP_DIM) {
            let rotation = Rotation3::new(Vector3::new(step[3], step[4], step[5])).into_inner();
            let delta = SE3Pose::new(rotation, Vector3::new(step[0], step[1], step[2]))?;
            pose = pose.compose(&delta);
            waypoints.push(pose);
            grippers.push(step[6].clamp(0.0, 1.0));
        }
        Ok(Trajectory::new(waypoints, grippers, frame_tag)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use funcanon_core::geometry::testutil::random_pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_trajectory(seed: u64, n: usize) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waypoints: Vec<SE3Pose> = (0..n).map(|_| random_pose(&mut rng)).collect();
        let grippers: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        Trajectory::new(waypoints, grippers, FrameTag::World).unwrap()
    }

    #[test]
    fn encode_then_decode_recovers_the_trajectory() {
        for seed in 0..10 {
            let trajectory = random_trajectory(seed, 9);
            let chunk = ActionChunk::from_trajectory(&trajectory, 8).unwrap();
            assert_eq!(chunk.dim(), 56);
            let back = chunk
                .to_trajectory(
                    &trajectory.waypoints()[0],
                    trajectory.gripper_states()[0],
                    FrameTag::World,
                )
                .unwrap();
            assert!(back.max_abs_diff(&trajectory) < 1e-9, "seed {seed}");
            for (a, b) in back.gripper_states().iter().zip(trajectory.gripper_states()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_magnitudes_stay_within_pi() {
        for seed in 0..10 {
            let chunk = ActionChunk::from_trajectory(&random_trajectory(seed, 9), 8).unwrap();
            assert!(chunk.max_rotation_angle() <= std::f64::consts::PI + 1e-12);
        }
    }

    #[test]
    fn sanitize_wraps_angles_and_clamps_grippers() {
        let axis = Vector3::new(0.0, 0.0, 1.0);
        let overshoot = axis * (2.0 * std::f64::consts::PI + 0.3);
        let mut values = vec![0.0; 14];
        values[3] = overshoot.x;
        values[4] = overshoot.y;
        values[5] = overshoot.z;
        values[6] = 1.7;
        values[13] = -0.2;
        let mut chunk = ActionChunk::new(2, values).unwrap();
        chunk.sanitize();
        let aa = Vector3::new(chunk.values[3], chunk.values[4], chunk.values[5]);
        assert!((aa.norm() - 0.3).abs() < 1e-12);
        assert_eq!(chunk.values[6], 1.0);
        assert_eq!(chunk.values[13], 0.0);
        assert!(chunk.max_rotation_angle() <= std::f64::consts::PI);
    }

    #[test]
    fn short_trajectories_pad_with_identity_deltas() {
        let trajectory = random_trajectory(3, 3);
        let chunk = ActionChunk::from_trajectory(&trajectory, 8).unwrap();
        let decoded = chunk
            .to_trajectory(
                &trajectory.waypoints()[0],
                trajectory.gripper_states()[0],
                FrameTag::World,
            )
            .unwrap();
        assert_eq!(decoded.len(), 9);
        let held = decoded.waypoints()[2];
        for w in &decoded.waypoints()[3..] {
            assert!(w.max_abs_diff(&held) < 1e-9, "padding must hold pose");
        }
        let last_gripper = *trajectory.gripper_states().last().unwrap();
        for g in &decoded.gripper_states()[3..] {
            assert!((g - last_gripper).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let trajectory = random_trajectory(4, 1);
        assert!(ActionChunk::from_trajectory(&trajectory, 8).is_err());
        assert!(ActionChunk::new(0, vec![]).is_err());
        assert!(ActionChunk::new(2, vec![0.0; 7]).is_err());
        assert!(ActionChunk::new(1, vec![f64::NAN; 7]).is_err());
    }
}
