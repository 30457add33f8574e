//! Rigid-body math, point clouds, and trajectories.
//!
//! All types are immutable values in SI units (meters, radians). Rotations
//! are stored as 3x3 matrices and kept orthonormal (det +1) to within 1e-9;
//! composition re-orthonormalizes via polar decomposition when drift exceeds
//! 1e-12.

mod cloud;
mod ply;
mod se3;
/// Seeded pose generators for tests in this workspace.
pub mod testutil;
mod trajectory;

pub use cloud::PointCloud;
pub use se3::SE3Pose;
pub use trajectory::{FrameTag, Trajectory, WaypointRecord};

use thiserror::Error;

/// Orthonormality tolerance enforced on every constructed rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Drift threshold beyond which composed rotations are re-orthonormalized.
pub const REORTHO_DRIFT: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rotation is not orthonormal with det +1: {detail}")]
    InvalidRotation { detail: String },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("feature count {features} does not match point count {points}")]
    FeatureCountMismatch { points: usize, features: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found} at index {index}")]
    FeatureDimMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },
    #[error("trajectory must have at least one waypoint")]
    EmptyTrajectory,
    #[error("waypoint count {waypoints} does not match gripper-state count {grippers}")]
    WaypointGripperMismatch { waypoints: usize, grippers: usize },
    #[error("gripper state {value} outside [0, 1] at waypoint {index}")]
    GripperOutOfRange { value: f64, index: usize },
    #[error("unsupported length unit {0:?} (expected m, cm, or mm)")]
    UnknownUnit(String),
    #[error("PLY parse error: {0}")]
    Ply(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Length units accepted by file headers; everything is converted to meters
/// at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthUnit {
    Meter,
    Centimeter,
    Millimeter,
}

impl LengthUnit {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "m" => Ok(Self::Meter),
            "cm" => Ok(Self::Centimeter),
            "mm" => Ok(Self::Millimeter),
            other => Err(GeometryError::UnknownUnit(other.to_string())),
        }
    }

    pub fn to_meters(self) -> f64 {
        match self {
            Self::Meter => 1.0,
            Self::Centimeter => 1e-2,
            Self::Millimeter => 1e-3,
        }
    }
}
