//! Cross-object trajectory transfer: demonstration sub-trajectories move
//! between object instances either by translating every waypoint by the
//! difference of functional centers (offset) or by a full functional-frame
//! change that also re-heads the motion (frame).

use crate::alignment::{align_z_rotation, AlignmentError, FunctionalFrame, FunctionalVector};
use crate::decompose::AVOPrimitive;
use crate::geometry::{FrameTag, GeometryError, LengthUnit, SE3Pose, Trajectory, WaypointRecord};
use crate::recognition::Role;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("demonstration {demo_id}: trajectory must be in the world frame")]
    NotWorldFrame { demo_id: String },
    #[error("demonstration {demo_id}: source object {source_object:?} is neither the primitive's actor {actor:?} nor its object {object:?}")]
    UnknownSourceObject {
        demo_id: String,
        source_object: String,
        actor: String,
        object: String,
    },
    #[error("frame belongs to {frame:?} but the demonstration's source object is {demo:?}")]
    FrameMismatch { frame: String, demo: String },
    #[error("incompatible function: {0}")]
    IncompatibleFunction(String),
    #[error("no functional vector for ({object_id}, {verb}, {role})")]
    MissingVector {
        object_id: String,
        verb: String,
        role: Role,
    },
    #[error("demonstration parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, TransferError>;

/// One recorded action segment: the primitive it realizes, the actor and
/// object poses at segment start, and the world-frame waypoint sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DemoRecord", into = "DemoRecord")]
pub struct Demonstration {
    pub demo_id: String,
    pub primitive: AVOPrimitive,
    pub actor_pose: SE3Pose,
    pub object_pose: SE3Pose,
    pub trajectory: Trajectory,
    pub source_object_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TripleRecord {
    actor: String,
    verb: String,
    object: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DemoRecord {
    demo_id: String,
    primitive: TripleRecord,
    actor_pose: SE3Pose,
    object_pose: SE3Pose,
    waypoints: Vec<WaypointRecord>,
    #[serde(default = "meters")]
    units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_object_id: Option<String>,
}

fn meters() -> String {
    "m".into()
}

fn scale_pose(pose: &SE3Pose, scale: f64) -> SE3Pose {
    SE3Pose::new(*pose.rotation(), pose.translation() * scale)
        .expect("scaling translation keeps the rotation valid")
}

impl TryFrom<DemoRecord> for Demonstration {
    type Error = TransferError;

    fn try_from(r: DemoRecord) -> Result<Self> {
        let unit = LengthUnit::parse(&r.units).map_err(|e| TransferError::Parse(e.to_string()))?;
        let scale = unit.to_meters();
        let mut waypoints = r.waypoints;
        for w in &mut waypoints {
            for t in &mut w.translation {
                *t *= scale;
            }
        }
        let trajectory = Trajectory::from_waypoint_records(&waypoints, FrameTag::World)?;
        let source_object_id = r
            .source_object_id
            .unwrap_or_else(|| r.primitive.actor.clone());
        Demonstration::new(
            r.demo_id,
            AVOPrimitive {
                step: 1,
                verb: r.primitive.verb,
                actor: r.primitive.actor,
                object: r.primitive.object,
            },
            scale_pose(&r.actor_pose, scale),
            scale_pose(&r.object_pose, scale),
            trajectory,
            source_object_id,
        )
    }
}

impl From<Demonstration> for DemoRecord {
    fn from(d: Demonstration) -> Self {
        DemoRecord {
            demo_id: d.demo_id,
            primitive: TripleRecord {
                actor: d.primitive.actor,
                verb: d.primitive.verb,
                object: d.primitive.object,
            },
            actor_pose: d.actor_pose,
            object_pose: d.object_pose,
            waypoints: d.trajectory.waypoint_records(),
            units: meters(),
            source_object_id: Some(d.source_object_id),
        }
    }
}

impl Demonstration {
    pub fn new(
        demo_id: impl Into<String>,
        primitive: AVOPrimitive,
        actor_pose: SE3Pose,
        object_pose: SE3Pose,
        trajectory: Trajectory,
        source_object_id: impl Into<String>,
    ) -> Result<Self> {
        let demo_id = demo_id.into();
        let source_object_id = source_object_id.into();
        if *trajectory.frame_tag() != FrameTag::World {
            return Err(TransferError::NotWorldFrame { demo_id });
        }
        if source_object_id != primitive.actor && source_object_id != primitive.object {
            return Err(TransferError::UnknownSourceObject {
                demo_id,
                source_object: source_object_id,
                actor: primitive.actor.clone(),
                object: primitive.object.clone(),
            });
        }
        Ok(Demonstration {
            demo_id,
            primitive,
            actor_pose,
            object_pose,
            trajectory,
            source_object_id,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| TransferError::Parse(e.to_string()))
    }

    /// Active when the transferred object is the acting one (e.g. the vessel
    /// doing the pouring), passive when it is the one acted upon.
    pub fn role(&self) -> Role {
        if self.source_object_id == self.primitive.actor {
            Role::Active
        } else {
            Role::Passive
        }
    }
}

/// Express the demonstration's waypoints in the source object's functional
/// frame: w -> (object_pose * frame.pose)^-1 * w.
pub fn to_functional_frame(
    demo: &Demonstration,
    frame: &FunctionalFrame,
    object_pose: &SE3Pose,
) -> Result<Trajectory> {
    if frame.object_id != demo.source_object_id {
        return Err(TransferError::FrameMismatch {
            frame: frame.object_id.clone(),
            demo: demo.source_object_id.clone(),
        });
    }
    let world_from_functional = object_pose.compose(&frame.pose);
    Ok(demo.trajectory.mapped(
        &world_from_functional.invert(),
        FrameTag::functional(&demo.source_object_id),
    ))
}

/// Inverse of [`to_functional_frame`]: w -> (object_pose * frame.pose) * w.
pub fn to_world_frame(
    trajectory: &Trajectory,
    frame: &FunctionalFrame,
    object_pose: &SE3Pose,
) -> Trajectory {
    trajectory.mapped(&object_pose.compose(&frame.pose), FrameTag::World)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMethod {
    /// Translate every waypoint by (v_t - v_s); rotations and gripper states
    /// untouched.
    Offset,
    /// Left-compose the rigid map taking the source functional frame to the
    /// target's, including the heading change.
    Frame,
}

impl fmt::Display for TransferMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferMethod::Offset => "offset",
            TransferMethod::Frame => "frame",
        })
    }
}

impl FromStr for TransferMethod {
    type Err = TransferError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offset" => Ok(TransferMethod::Offset),
            "frame" => Ok(TransferMethod::Frame),
            other => Err(TransferError::Parse(format!(
                "method must be \"offset\" or \"frame\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub demo_id: String,
    pub target_object_id: String,
    pub v_s: FunctionalVector,
    pub v_t: FunctionalVector,
    pub transferred: Trajectory,
    pub method: TransferMethod,
}

/// Retarget a demonstration from its source object to the object behind
/// `v_t`. Both vectors must describe the same (verb, role) function, and
/// `v_s` must belong to the demonstration's source object.
pub fn transfer_trajectory(
    demo: &Demonstration,
    v_s: &FunctionalVector,
    v_t: &FunctionalVector,
    method: TransferMethod,
) -> Result<TransferRecord> {
    if v_s.object_id != demo.source_object_id {
        return Err(TransferError::IncompatibleFunction(format!(
            "v_s belongs to {:?}, demonstration source is {:?}",
            v_s.object_id, demo.source_object_id
        )));
    }
    if v_s.verb != v_t.verb || v_s.role != v_t.role {
        return Err(TransferError::IncompatibleFunction(format!(
            "source is ({}, {}), target is ({}, {})",
            v_s.verb, v_s.role, v_t.verb, v_t.role
        )));
    }

    let tag = demo.trajectory.frame_tag().clone();
    let transferred = match method {
        TransferMethod::Offset => {
            let delta = v_t.v - v_s.v;
            let waypoints = demo
                .trajectory
                .waypoints()
                .iter()
                .map(|w| {
                    SE3Pose::new(*w.rotation(), w.translation() + delta)
                        .expect("translating keeps the rotation valid")
                })
                .collect();
            Trajectory::new(waypoints, demo.trajectory.gripper_states().to_vec(), tag)?
        }
        TransferMethod::Frame => {
            let rotation = match align_z_rotation(v_s, v_t) {
                Ok(aligned) => aligned.frame.pose,
                // A Z-aligned functional center leaves the heading free; fall
                // back to a pure translation.
                Err(AlignmentError::DegenerateDirection { .. }) => SE3Pose::identity(),
                Err(e) => {
                    return Err(TransferError::IncompatibleFunction(e.to_string()));
                }
            };
            let map = SE3Pose::new(*rotation.rotation(), v_t.v - rotation.apply_point(&v_s.v))
                .expect("heading rotation is valid");
            demo.trajectory.mapped(&map, tag)
        }
    };
    Ok(TransferRecord {
        demo_id: demo.demo_id.clone(),
        target_object_id: v_t.object_id.clone(),
        v_s: v_s.clone(),
        v_t: v_t.clone(),
        transferred,
        method,
    })
}

/// Functional vectors indexed by (object, verb, role).
#[derive(Debug, Clone, Default)]
pub struct VectorLookup {
    map: BTreeMap<(String, String, Role), FunctionalVector>,
}

impl VectorLookup {
    pub fn insert(&mut self, v: FunctionalVector) {
        self.map
            .insert((v.object_id.clone(), v.verb.clone(), v.role), v);
    }

    pub fn get(&self, object_id: &str, verb: &str, role: Role) -> Option<&FunctionalVector> {
        self.map
            .get(&(object_id.to_string(), verb.to_string(), role))
    }
}

impl FromIterator<FunctionalVector> for VectorLookup {
    fn from_iter<I: IntoIterator<Item = FunctionalVector>>(iter: I) -> Self {
        let mut lookup = VectorLookup::default();
        for v in iter {
            lookup.insert(v);
        }
        lookup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFailure {
    pub demo_id: String,
    pub target_object_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct AugmentOutcome {
    pub records: Vec<TransferRecord>,
    pub failures: Vec<TransferFailure>,
}

/// Transfer every demonstration to every target (source included, as an
/// identity check). Pairs missing a functional vector are reported and the
/// rest still produced; output is ordered by (demo_id, target_object_id).
pub fn augment_category(
    demos: &[Demonstration],
    targets: &[String],
    vectors: &VectorLookup,
    method: TransferMethod,
) -> AugmentOutcome {
    let mut outcome = AugmentOutcome::default();
    for demo in demos {
        let verb = &demo.primitive.verb;
        let role = demo.role();
        for target in targets {
            let pair = (demo, target);
            let (v_s, v_t) = match (
                vectors.get(&demo.source_object_id, verb, role),
                vectors.get(target, verb, role),
            ) {
                (Some(s), Some(t)) => (s, t),
                (missing_s, _) => {
                    let object_id = if missing_s.is_none() {
                        &demo.source_object_id
                    } else {
                        target
                    };
                    outcome.failures.push(TransferFailure {
                        demo_id: pair.0.demo_id.clone(),
                        target_object_id: pair.1.clone(),
                        reason: TransferError::MissingVector {
                            object_id: object_id.clone(),
                            verb: verb.clone(),
                            role,
                        }
                        .to_string(),
                    });
                    continue;
                }
            };
            match transfer_trajectory(demo, v_s, v_t, method) {
                Ok(record) => outcome.records.push(record),
                Err(e) => outcome.failures.push(TransferFailure {
                    demo_id: demo.demo_id.clone(),
                    target_object_id: target.clone(),
                    reason: e.to_string(),
                }),
            }
        }
    }
    outcome
        .records
        .sort_by(|a, b| (&a.demo_id, &a.target_object_id).cmp(&(&b.demo_id, &b.target_object_id)));
    outcome
        .failures
        .sort_by(|a, b| (&a.demo_id, &a.target_object_id).cmp(&(&b.demo_id, &b.target_object_id)));
    outcome
}

/// Write one record per line (JSON lines).
pub fn write_records<W: Write>(records: &[TransferRecord], mut out: W) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<TransferRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| TransferError::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| TransferError::Parse(e.to_string()))?);
    }
    Ok(records)
}
