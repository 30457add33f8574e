//! Kinematic success judgment. With no physics engine, a sub-task counts as
//! successful when the executed trajectory ends in the same pose relative to
//! the target object's functional frame as the reference demonstration did,
//! within configured translation and rotation tolerances.

use std::collections::BTreeMap;

use funcanon_core::decompose::AVOPrimitive;
use funcanon_core::recognition::Role;
use funcanon_core::transfer::Demonstration;
use funcanon_core::{SE3Pose, Trajectory};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum JudgeError {
    #[error("no functional frame for ({object_id}, {verb}, {role})")]
    FrameMissing {
        object_id: String,
        verb: String,
        role: Role,
    },
    #[error("object {object_id} has no placement")]
    MissingPlacement { object_id: String },
    #[error("no reference demonstration for ({verb}, {role})")]
    NoReference { verb: String, role: Role },
    #[error("executed trajectory is empty")]
    EmptyTrajectory,
    #[error("functional frame for ({object_id}, {verb}, {role}) registered twice")]
    DuplicateFunction {
        object_id: String,
        verb: String,
        role: Role,
    },
}

/// The role under which a verb's object carries its functional part: a
/// grasped object affords the grasp actively (its handle is what acts
/// next); any other verb's object receives the action.
pub fn object_role(verb: &str) -> Role {
    if verb == "grasp" {
        Role::Active
    } else {
        Role::Passive
    }
}

/// Geodesic angle between two rotation matrices.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a.transpose() * b;
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// One object's canonicalized functional part for a (verb, role) pair: the
/// functional center in object-local coordinates plus the Z-heading that
/// aligns it with the category anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedFunction {
    pub object_id: String,
    pub category: String,
    pub verb: String,
    pub role: Role,
    pub v_local: [f64; 3],
    pub z_angle: f64,
    pub anchor_id: String,
    pub residual: f64,
    /// Heading left unconstrained (rotationally symmetric part); the frame
    /// keeps the identity rotation.
    pub symmetric: bool,
}

impl AlignedFunction {
    /// Frame of the functional part in object coordinates: origin at the
    /// functional center, axes turned by the canonical heading correction.
    pub fn local_anchor(&self) -> SE3Pose {
        let rotation = *SE3Pose::rot_z(self.z_angle).rotation();
        SE3Pose::new(rotation, Vector3::from(self.v_local)).expect("rotation about Z is valid")
    }

    /// The same frame in world coordinates, given the object's placement.
    pub fn anchor_pose(&self, placement: &SE3Pose) -> SE3Pose {
        placement.compose(&self.local_anchor())
    }

    /// World position of the functional center under a placement.
    pub fn world_vector(&self, placement: &SE3Pose) -> Vector3<f64> {
        placement.apply_point(&Vector3::from(self.v_local))
    }
}

/// All aligned functional parts of a fixture set, keyed by
/// (object, verb, role).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionTable {
    entries: Vec<AlignedFunction>,
}

impl FunctionTable {
    pub fn insert(&mut self, f: AlignedFunction) -> Result<(), JudgeError> {
        if self.get(&f.object_id, &f.verb, f.role).is_some() {
            return Err(JudgeError::DuplicateFunction {
                object_id: f.object_id,
                verb: f.verb,
                role: f.role,
            });
        }
        self.entries.push(f);
        self.entries.sort_by(|a, b| {
            (&a.object_id, &a.verb, a.role).cmp(&(&b.object_id, &b.verb, b.role))
        });
        Ok(())
    }

    pub fn get(&self, object_id: &str, verb: &str, role: Role) -> Option<&AlignedFunction> {
        self.entries
            .iter()
            .find(|f| f.object_id == object_id && f.verb == verb && f.role == role)
    }

    pub fn entries(&self) -> &[AlignedFunction] {
        &self.entries
    }
}

/// Success criteria frozen from the reference demonstrations: for each
/// (verb, role), the demo's terminal pose expressed in its target object's
/// functional frame at recording time.
#[derive(Debug, Clone)]
pub struct Judge {
    functions: FunctionTable,
    references: BTreeMap<(String, Role), SE3Pose>,
}

fn terminal_pose(trajectory: &Trajectory) -> Result<&SE3Pose, JudgeError> {
    trajectory.waypoints().last().ok_or(JudgeError::EmptyTrajectory)
}

impl Judge {
    pub fn new(
        functions: FunctionTable,
        library: &BTreeMap<String, Demonstration>,
        base_placements: &BTreeMap<String, SE3Pose>,
    ) -> Result<Judge, JudgeError> {
        let mut references = BTreeMap::new();
        for (verb, demo) in library {
            let role = object_role(verb);
            let target = &demo.primitive.object;
            let entry =
                functions
                    .get(target, verb, role)
                    .ok_or_else(|| JudgeError::FrameMissing {
                        object_id: target.clone(),
                        verb: verb.clone(),
                        role,
                    })?;
            let placement =
                base_placements
                    .get(target)
                    .ok_or_else(|| JudgeError::MissingPlacement {
                        object_id: target.clone(),
                    })?;
            let anchor = entry.anchor_pose(placement);
            let rel = anchor.invert().compose(terminal_pose(&demo.trajectory)?);
            references.insert((verb.clone(), role), rel);
        }
        Ok(Judge {
            functions,
            references,
        })
    }

    pub fn functions(&self) -> &FunctionTable {
        &self.functions
    }

    /// Success iff the executed trajectory's final pose, expressed in the
    /// primitive's object functional frame under the scenario placement,
    /// matches the reference terminal pose within the scenario tolerances.
    pub fn judge_subtask(
        &self,
        executed: &Trajectory,
        scenario: &Scenario,
        primitive: &AVOPrimitive,
    ) -> Result<bool, JudgeError> {
        let role = object_role(&primitive.verb);
        let entry = self
            .functions
            .get(&primitive.object, &primitive.verb, role)
            .ok_or_else(|| JudgeError::FrameMissing {
                object_id: primitive.object.clone(),
                verb: primitive.verb.clone(),
                role,
            })?;
        let placement =
            scenario
                .placements
                .get(&primitive.object)
                .ok_or_else(|| JudgeError::MissingPlacement {
                    object_id: primitive.object.clone(),
                })?;
        let reference = self
            .references
            .get(&(primitive.verb.clone(), role))
            .ok_or_else(|| JudgeError::NoReference {
                verb: primitive.verb.clone(),
                role,
            })?;
        let rel = entry
            .anchor_pose(placement)
            .invert()
            .compose(terminal_pose(executed)?);
        let position_error = (rel.translation() - reference.translation()).norm();
        let orientation_error = rotation_angle(rel.rotation(), reference.rotation());
        Ok(position_error <= scenario.position_epsilon
            && orientation_error <= scenario.orientation_epsilon)
    }
}
