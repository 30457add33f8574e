//! Reference demonstrations the harness can synthesize itself: the pour
//! demo comes from the fixture crate; the grasp demo is built here as a
//! descend-and-close approach onto the grasped object.

use std::collections::BTreeMap;

use funcanon_core::decompose::{AVOPrimitive, GRIPPER_ACTOR};
use funcanon_core::geometry::FrameTag;
use funcanon_core::transfer::Demonstration;
use funcanon_core::{SE3Pose, Trajectory};
use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("two demonstrations share the verb {verb:?} ({first} and {second})")]
    DuplicateVerb {
        verb: String,
        first: String,
        second: String,
    },
}

/// Approach from a standoff pose, descend over the object, and close the
/// gripper. Nine waypoints so an eight-step action chunk needs no padding.
pub fn grasp_demo(demo_id: &str, object_id: &str, object_center: Vector3<f64>) -> Demonstration {
    let start = object_center + Vector3::new(0.0, -0.25, 0.30);
    let above = object_center + Vector3::new(0.0, 0.0, 0.20);
    let grip = object_center + Vector3::new(0.0, 0.0, 0.12);
    let segment = |a: Vector3<f64>, b: Vector3<f64>, s: f64| a + (b - a) * s;
    let mut waypoints = Vec::with_capacity(9);
    for s in [0.0, 0.5, 1.0] {
        waypoints.push(SE3Pose::from_translation(segment(start, above, s)).expect("finite"));
    }
    for s in [0.33, 0.67, 1.0] {
        waypoints.push(SE3Pose::from_translation(segment(above, grip, s)).expect("finite"));
    }
    // Hold at the grip point while the fingers close.
    for _ in 0..3 {
        waypoints.push(SE3Pose::from_translation(grip).expect("finite"));
    }
    let mut grippers = vec![0.0; waypoints.len()];
    grippers[7] = 1.0;
    grippers[8] = 1.0;
    let trajectory =
        Trajectory::new(waypoints, grippers, FrameTag::World).expect("fixture demo is well formed");
    Demonstration::new(
        demo_id,
        AVOPrimitive {
            step: 1,
            verb: "grasp".into(),
            actor: GRIPPER_ACTOR.into(),
            object: object_id.into(),
        },
        SE3Pose::from_translation(start).expect("finite"),
        SE3Pose::from_translation(object_center).expect("finite"),
        trajectory,
        object_id,
    )
    .expect("source is the primitive's object")
}

/// Index reference demonstrations by verb; each verb gets exactly one.
pub fn demo_library(
    demos: &[Demonstration],
) -> Result<BTreeMap<String, Demonstration>, DemoError> {
    let mut library: BTreeMap<String, Demonstration> = BTreeMap::new();
    for demo in demos {
        if let Some(existing) = library.get(&demo.primitive.verb) {
            return Err(DemoError::DuplicateVerb {
                verb: demo.primitive.verb.clone(),
                first: existing.demo_id.clone(),
                second: demo.demo_id.clone(),
            });
        }
        library.insert(demo.primitive.verb.clone(), demo.clone());
    }
    Ok(library)
}
