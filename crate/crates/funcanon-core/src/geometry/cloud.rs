//! Point clouds with optional per-point feature vectors.

use super::{GeometryError, Result, SE3Pose};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// An immutable set of 3D points (meters) with optional per-point feature
/// vectors of a uniform dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointCloudRecord", into = "PointCloudRecord")]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    features: Option<Vec<Vec<f64>>>,
}

/// JSON form: `{"points": [[x,y,z],...], "features": [[..],...]?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointCloudRecord {
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
}

impl From<PointCloud> for PointCloudRecord {
    fn from(c: PointCloud) -> Self {
        Self {
            points: c.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            features: c.features,
        }
    }
}

impl TryFrom<PointCloudRecord> for PointCloud {
    type Error = GeometryError;

    fn try_from(r: PointCloudRecord) -> Result<Self> {
        let points = r
            .points
            .iter()
            .map(|[x, y, z]| Vector3::new(*x, *y, *z))
            .collect();
        PointCloud::new(points, r.features)
    }
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, features: Option<Vec<Vec<f64>>>) -> Result<Self> {
        for p in &points {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(GeometryError::NonFinite {
                    what: "point coordinates".into(),
                });
            }
        }
        if let Some(feats) = &features {
            if feats.len() != points.len() {
                return Err(GeometryError::FeatureCountMismatch {
                    points: points.len(),
                    features: feats.len(),
                });
            }
            let dim = feats.first().map_or(0, Vec::len);
            for (i, f) in feats.iter().enumerate() {
                if f.len() != dim {
                    return Err(GeometryError::FeatureDimMismatch {
                        expected: dim,
                        found: f.len(),
                        index: i,
                    });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(GeometryError::NonFinite {
                        what: format!("feature vector {i}"),
                    });
                }
            }
        }
        Ok(Self { points, features })
    }

    pub fn from_points(points: Vec<Vector3<f64>>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn features(&self) -> Option<&[Vec<f64>]> {
        self.features.as_deref()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.first().map_or(0, Vec::len))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = self.points.first()?;
        let mut lo = *first;
        let mut hi = *first;
        for p in &self.points {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Some((lo, hi))
    }

    /// Returns a copy with every coordinate scaled by `s`.
    pub fn scaled(&self, s: f64) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| p * s).collect(),
            features: self.features.clone(),
        }
    }
}

/// Maps each point `x -> R x + t`; features carried through unchanged.
pub fn apply_pose(pose: &SE3Pose, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| pose.apply_point(p)).collect(),
        features: cloud.features.clone(),
    }
}

impl PointCloud {
    pub fn transformed(&self, pose: &SE3Pose) -> PointCloud {
        apply_pose(pose, self)
    }
}
