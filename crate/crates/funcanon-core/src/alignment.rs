//! Functional direction vectors and cross-object alignment. Each object's
//! accepted regions collapse to one direction vector in its normalized model
//! frame; objects are then aligned to a per-(category, verb, role) anchor by
//! the single rotation about Z that best maps one vector onto the other.

use crate::geometry::{PointCloud, SE3Pose};
use crate::recognition::{FunctionalSet, Role};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// XY projections shorter than this leave the heading unconstrained.
pub const MIN_XY_NORM: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("functional set of {object_id} is empty; no direction to compute")]
    EmptyFunctionalSet { object_id: String },
    #[error("region of {object_id} indexes point {index} outside cloud of {len}")]
    OutOfBounds {
        object_id: String,
        index: usize,
        len: usize,
    },
    #[error(
        "functional vector of {object_id} has XY norm {xy_norm:.3e}; heading is unconstrained"
    )]
    DegenerateDirection { object_id: String, xy_norm: f64 },
    #[error("functional vector of {object_id} is (numerically) zero")]
    ZeroVector { object_id: String },
    #[error("no anchor registered for ({category}, {verb}, {role})")]
    NoAnchor {
        category: String,
        verb: String,
        role: Role,
    },
    #[error("cloud has (near-)zero bounding-box diagonal; cannot normalize")]
    DegenerateModel,
    #[error("cloud is empty")]
    EmptyCloud,
}

pub type Result<T> = std::result::Result<T, AlignmentError>;

/// Mean position of an object's accepted functional regions, in its
/// normalized model frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VectorRecord", into = "VectorRecord")]
pub struct FunctionalVector {
    pub object_id: String,
    pub verb: String,
    pub role: Role,
    pub v: Vector3<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VectorRecord {
    object_id: String,
    verb: String,
    role: Role,
    v: [f64; 3],
}

impl From<VectorRecord> for FunctionalVector {
    fn from(r: VectorRecord) -> Self {
        FunctionalVector {
            object_id: r.object_id,
            verb: r.verb,
            role: r.role,
            v: Vector3::from(r.v),
        }
    }
}

impl From<FunctionalVector> for VectorRecord {
    fn from(fv: FunctionalVector) -> Self {
        VectorRecord {
            object_id: fv.object_id,
            verb: fv.verb,
            role: fv.role,
            v: [fv.v.x, fv.v.y, fv.v.z],
        }
    }
}

/// How the member-point sum is normalized into a direction vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorNormalization {
    /// Mean over the union of member points (each point counted once).
    #[default]
    PointMean,
    /// Flat sum over every region's points divided by the region count.
    PerRegionSum,
}

pub fn functional_vector(fs: &FunctionalSet, cloud: &PointCloud) -> Result<FunctionalVector> {
    functional_vector_with(fs, cloud, VectorNormalization::PointMean)
}

pub fn functional_vector_with(
    fs: &FunctionalSet,
    cloud: &PointCloud,
    normalization: VectorNormalization,
) -> Result<FunctionalVector> {
    if fs.regions.is_empty() {
        return Err(AlignmentError::EmptyFunctionalSet {
            object_id: fs.object_id.clone(),
        });
    }
    let points = cloud.points();
    let fetch = |i: usize| {
        points.get(i).copied().ok_or(AlignmentError::OutOfBounds {
            object_id: fs.object_id.clone(),
            index: i,
            len: points.len(),
        })
    };
    let v = match normalization {
        VectorNormalization::PointMean => {
            let mut unique: Vec<usize> = fs
                .regions
                .iter()
                .flat_map(|r| r.point_indices.iter().copied())
                .collect();
            unique.sort_unstable();
            unique.dedup();
            let mut sum = Vector3::zeros();
            for &i in &unique {
                sum += fetch(i)?;
            }
            sum / unique.len() as f64
        }
        VectorNormalization::PerRegionSum => {
            let mut sum = Vector3::zeros();
            for region in &fs.regions {
                for &i in &region.point_indices {
                    sum += fetch(i)?;
                }
            }
            sum / fs.regions.len() as f64
        }
    };
    Ok(FunctionalVector {
        object_id: fs.object_id.clone(),
        verb: fs.verb.clone(),
        role: fs.role,
        v,
    })
}

/// Heading-only canonical frame: a rotation about Z applied to the normalized
/// model frame. Translation is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalFrame {
    pub object_id: String,
    pub z_angle: f64,
    pub pose: SE3Pose,
}

impl FunctionalFrame {
    pub fn identity(object_id: impl Into<String>) -> Self {
        FunctionalFrame {
            object_id: object_id.into(),
            z_angle: 0.0,
            pose: SE3Pose::identity(),
        }
    }
}

/// Wrap an angle into [-pi, pi).
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZAlignment {
    pub frame: FunctionalFrame,
    /// Euclidean distance between the rotated source vector and the target.
    pub residual: f64,
}

/// The angle about Z minimizing |rot_z(theta) * v_s - v_t|^2, solved in
/// closed form from the XY projections. Errors when either projection is too
/// short to define a heading.
pub fn align_z_rotation(v_s: &FunctionalVector, v_t: &FunctionalVector) -> Result<ZAlignment> {
    let check = |fv: &FunctionalVector| -> Result<()> {
        let xy_norm = fv.v.xy().norm();
        if xy_norm < MIN_XY_NORM {
            return Err(AlignmentError::DegenerateDirection {
                object_id: fv.object_id.clone(),
                xy_norm,
            });
        }
        Ok(())
    };
    check(v_s)?;
    check(v_t)?;

    let dot = v_s.v.x * v_t.v.x + v_s.v.y * v_t.v.y;
    let cross = v_s.v.x * v_t.v.y - v_s.v.y * v_t.v.x;
    let z_angle = wrap_angle(cross.atan2(dot));
    let pose = SE3Pose::rot_z(z_angle);
    let residual = (pose.apply_point(&v_s.v) - v_t.v).norm();
    Ok(ZAlignment {
        frame: FunctionalFrame {
            object_id: v_s.object_id.clone(),
            z_angle,
            pose,
        },
        residual,
    })
}

/// Unrestricted least-squares rotation taking v_s toward v_t (any axis), for
/// comparison against the Z-restricted solve. Returns a rotation-only pose.
pub fn align_full_rotation(v_s: &FunctionalVector, v_t: &FunctionalVector) -> Result<SE3Pose> {
    let check = |fv: &FunctionalVector| -> Result<()> {
        if fv.v.norm() < MIN_XY_NORM {
            return Err(AlignmentError::ZeroVector {
                object_id: fv.object_id.clone(),
            });
        }
        Ok(())
    };
    check(v_s)?;
    check(v_t)?;

    let outer: Matrix3<f64> = v_t.v * v_s.v.transpose();
    let svd = outer.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t_mat = svd.v_t.expect("svd requested v_t");
    let mut rotation = u * v_t_mat;
    if rotation.determinant() < 0.0 {
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -1.0;
        rotation = u * flip * v_t_mat;
    }
    SE3Pose::new(rotation, Vector3::zeros()).map_err(|_| AlignmentError::ZeroVector {
        object_id: v_s.object_id.clone(),
    })
}

/// Record of how a model cloud was brought to its normalized frame: centroid
/// moved to the origin, then uniformly scaled so the bounding-box diagonal
/// has unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelNormalization {
    pub center: [f64; 3],
    pub scale: f64,
}

pub fn normalize_model(cloud: &PointCloud) -> Result<(PointCloud, ModelNormalization)> {
    let centroid = cloud.centroid().ok_or(AlignmentError::EmptyCloud)?;
    let (lo, hi) = cloud.bounds().expect("non-empty cloud has bounds");
    let diagonal = (hi - lo).norm();
    if diagonal < 1e-12 {
        return Err(AlignmentError::DegenerateModel);
    }
    let scale = 1.0 / diagonal;
    let centered = PointCloud::new(
        cloud.points().iter().map(|p| (p - centroid) * scale).collect(),
        cloud.features().map(|f| f.to_vec()),
    )
    .expect("normalization preserves validity");
    Ok((
        centered,
        ModelNormalization {
            center: [centroid.x, centroid.y, centroid.z],
            scale,
        },
    ))
}

/// First registered vector per (category, verb, role) becomes the anchor;
/// `set` overrides explicitly.
#[derive(Debug, Clone, Default)]
pub struct AnchorRegistry {
    anchors: BTreeMap<(String, String, Role), FunctionalVector>,
}

impl AnchorRegistry {
    /// Register a candidate anchor; returns true when it became the anchor
    /// (i.e. the slot was empty).
    pub fn register(&mut self, category: impl Into<String>, v: FunctionalVector) -> bool {
        let key = (category.into(), v.verb.clone(), v.role);
        match self.anchors.entry(key) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(v);
                true
            }
            std::collections::btree_map::Entry::Occupied(_) => false,
        }
    }

    /// Force a specific anchor for the slot, replacing any prior choice.
    pub fn set(&mut self, category: impl Into<String>, v: FunctionalVector) {
        self.anchors.insert((category.into(), v.verb.clone(), v.role), v);
    }

    pub fn anchor(&self, category: &str, verb: &str, role: Role) -> Option<&FunctionalVector> {
        self.anchors
            .get(&(category.to_string(), verb.to_string(), role))
    }
}

/// Everything the alignment stage persists for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalizationManifest {
    pub object_id: String,
    pub category: String,
    pub verb: String,
    pub role: Role,
    pub v: [f64; 3],
    pub z_angle: f64,
    pub anchor_id: String,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Canonicalization {
    pub cloud: PointCloud,
    pub frame: FunctionalFrame,
    pub manifest: CanonicalizationManifest,
}

/// Rotate the object's normalized cloud so its functional vector points the
/// same way (in XY) as the registered anchor's.
pub fn canonicalize(
    category: &str,
    cloud: &PointCloud,
    fs: &FunctionalSet,
    registry: &AnchorRegistry,
) -> Result<Canonicalization> {
    let v_o = functional_vector(fs, cloud)?;
    let anchor = registry
        .anchor(category, &fs.verb, fs.role)
        .ok_or_else(|| AlignmentError::NoAnchor {
            category: category.into(),
            verb: fs.verb.clone(),
            role: fs.role,
        })?;
    let aligned = align_z_rotation(&v_o, anchor)?;
    let rotated = cloud.transformed(&aligned.frame.pose);
    let manifest = CanonicalizationManifest {
        object_id: fs.object_id.clone(),
        category: category.into(),
        verb: fs.verb.clone(),
        role: fs.role,
        v: [v_o.v.x, v_o.v.y, v_o.v.z],
        z_angle: aligned.frame.z_angle,
        anchor_id: anchor.object_id.clone(),
        residual: aligned.residual,
    };
    Ok(Canonicalization {
        cloud: rotated,
        frame: aligned.frame,
        manifest,
    })
}
