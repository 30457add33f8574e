use crate::mlp::Mlp;
use crate::{PolicyError, Result};
use funcanon_core::geometry::SE3Pose;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// The policy's conditioning vector: encoded relative actor-object pose,
/// per-instance feature stubs for both objects, and the verb embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub h_delta: Vec<f64>,
    pub f_a: Vec<f64>,
    pub f_o: Vec<f64>,
    pub v: Vec<f64>,
}

impl PolicyState {
    pub fn dim(&self) -> usize {
        self.h_delta.len() + self.f_a.len() + self.f_o.len() + self.v.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&self.h_delta);
        out.extend_from_slice(&self.f_a);
        out.extend_from_slice(&self.f_o);
        out.extend_from_slice(&self.v);
        out
    }
}

/// Fixed (untrained) three-layer perceptron taking the 12 numbers of a
/// relative pose to a `width`-dimensional code. Seeded construction makes the
/// encoder a pure function of its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEncoder {
    net: Mlp,
}

const POSE_INPUT: usize = 12;

impl PoseEncoder {
    pub fn seeded(width: usize, seed: u64) -> Result<Self> {
        Ok(PoseEncoder {
            net: Mlp::seeded(vec![POSE_INPUT, width, width, width], seed)?,
        })
    }

    pub fn width(&self) -> usize {
        self.net.output_dim()
    }

    pub fn encode(&self, relative: &SE3Pose) -> Vec<f64> {
        self.net
            .forward(&relative.flatten())
            .expect("pose flattens to 12 numbers")
    }
}

fn hash_seed(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Deterministic stand-in for a learned instance encoder: unit-scale Gaussian
/// features seeded by the object id.
pub fn instance_features(object_id: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(hash_seed(object_id));
    let scale = 1.0 / (dim as f64).sqrt();
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// One fixed embedding per verb in the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

impl VerbTable {
    pub fn seeded(verbs: &[String], dim: usize, seed: u64) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let entries = verbs
            .iter()
            .map(|verb| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ hash_seed(verb));
                let e = (0..dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                (verb.clone(), e)
            })
            .collect();
        VerbTable { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, verb: &str) -> Result<&Vec<f64>> {
        self.entries
            .get(verb)
            .ok_or_else(|| PolicyError::UnknownVerb(verb.to_string()))
    }
}

/// Relative pose of the actor in the object's frame, then each piece encoded
/// or looked up. The relative pose makes the state world-frame invariant.
pub fn encode_state(
    actor_pose: &SE3Pose,
    object_pose: &SE3Pose,
    actor_id: &str,
    object_id: &str,
    verb: &str,
    encoder: &PoseEncoder,
    verbs: &VerbTable,
    feature_dim: usize,
) -> Result<PolicyState> {
    let v = verbs.get(verb)?.clone();
    let relative = object_pose.relative_to(actor_pose);
    Ok(PolicyState {
        h_delta: encoder.encode(&relative),
        f_a: instance_features(actor_id, feature_dim),
        f_o: instance_features(object_id, feature_dim),
        v,
    })
}
