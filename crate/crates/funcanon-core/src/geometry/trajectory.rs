//! Waypoint trajectories with explicit frame tags.

use super::se3::SE3PoseRecord;
use super::{GeometryError, Result, SE3Pose};
use serde::{Deserialize, Serialize};

/// The coordinate frame a trajectory is expressed in. Operations that mix
/// frames reject their inputs instead of silently combining them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    World,
    Functional { object_id: String },
}

impl FrameTag {
    pub fn functional(object_id: impl Into<String>) -> Self {
        Self::Functional {
            object_id: object_id.into(),
        }
    }
}

impl std::fmt::Display for FrameTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrameTag::World => write!(f, "world"),
            FrameTag::Functional { object_id } => write!(f, "functional({object_id})"),
        }
    }
}

/// Wire form of one waypoint: pose plus gripper open-fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaypointRecord {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub gripper: f64,
}

/// An ordered waypoint sequence with one gripper open-fraction in [0, 1] per
/// waypoint and an explicit frame tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRecord", into = "TrajectoryRecord")]
pub struct Trajectory {
    waypoints: Vec<SE3Pose>,
    gripper_states: Vec<f64>,
    frame_tag: FrameTag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryRecord {
    frame: FrameTag,
    waypoints: Vec<WaypointRecord>,
}

impl From<Trajectory> for TrajectoryRecord {
    fn from(t: Trajectory) -> Self {
        Self {
            frame: t.frame_tag.clone(),
            waypoints: t.waypoint_records(),
        }
    }
}

impl TryFrom<TrajectoryRecord> for Trajectory {
    type Error = GeometryError;

    fn try_from(r: TrajectoryRecord) -> Result<Self> {
        Trajectory::from_waypoint_records(&r.waypoints, r.frame)
    }
}

impl Trajectory {
    pub fn new(
        waypoints: Vec<SE3Pose>,
        gripper_states: Vec<f64>,
        frame_tag: FrameTag,
    ) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(GeometryError::EmptyTrajectory);
        }
        if waypoints.len() != gripper_states.len() {
            return Err(GeometryError::WaypointGripperMismatch {
                waypoints: waypoints.len(),
                grippers: gripper_states.len(),
            });
        }
        for (i, g) in gripper_states.iter().enumerate() {
            if !g.is_finite() || !(0.0..=1.0).contains(g) {
                return Err(GeometryError::GripperOutOfRange {
                    value: *g,
                    index: i,
                });
            }
        }
        Ok(Self {
            waypoints,
            gripper_states,
            frame_tag,
        })
    }

    pub fn waypoints(&self) -> &[SE3Pose] {
        &self.waypoints
    }

    pub fn gripper_states(&self) -> &[f64] {
        &self.gripper_states
    }

    pub fn frame_tag(&self) -> &FrameTag {
        &self.frame_tag
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Same waypoints and gripper states under a different frame tag. Callers
    /// are responsible for having actually changed coordinates.
    pub fn retagged(&self, frame_tag: FrameTag) -> Trajectory {
        Trajectory {
            waypoints: self.waypoints.clone(),
            gripper_states: self.gripper_states.clone(),
            frame_tag,
        }
    }

    /// Left-composes every waypoint with `pose`, keeping gripper states.
    pub fn mapped(&self, pose: &SE3Pose, frame_tag: FrameTag) -> Trajectory {
        Trajectory {
            waypoints: self.waypoints.iter().map(|w| pose.compose(w)).collect(),
            gripper_states: self.gripper_states.clone(),
            frame_tag,
        }
    }

    pub fn waypoint_records(&self) -> Vec<WaypointRecord> {
        self.waypoints
            .iter()
            .zip(&self.gripper_states)
            .map(|(w, g)| {
                let rec: SE3PoseRecord = (*w).into();
                WaypointRecord {
                    rotation: rec.rotation,
                    translation: rec.translation,
                    gripper: *g,
                }
            })
            .collect()
    }

    pub fn from_waypoint_records(records: &[WaypointRecord], frame_tag: FrameTag) -> Result<Self> {
        let mut waypoints = Vec::with_capacity(records.len());
        let mut grippers = Vec::with_capacity(records.len());
        for r in records {
            let pose = SE3Pose::try_from(SE3PoseRecord {
                rotation: r.rotation,
                translation: r.translation,
            })?;
            waypoints.push(pose);
            grippers.push(r.gripper);
        }
        Trajectory::new(waypoints, grippers, frame_tag)
    }

    /// Relative transforms between consecutive waypoints,
    /// `w_i^{-1} * w_{i+1}`; empty for single-waypoint trajectories.
    pub fn relative_steps(&self) -> Vec<SE3Pose> {
        self.waypoints
            .windows(2)
            .map(|w| w[0].relative_to(&w[1]))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectory lengths differ");
        let mut d: f64 = 0.0;
        for (a, b) in self.waypoints.iter().zip(&other.waypoints) {
            d = d.max(a.max_abs_diff(b));
        }
        for (a, b) in self.gripper_states.iter().zip(&other.gripper_states) {
            d = d.max((a - b).abs());
        }
        d
    }
}
