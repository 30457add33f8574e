//! SE(3) rigid transforms backed by rotation matrices.

use super::{GeometryError, Result, REORTHO_DRIFT, ROTATION_TOL};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// A rigid transform: rotation (3x3 orthonormal, det +1) plus translation in
/// meters.
///
/// Values are validated at construction; `compose` and `invert` keep the
/// rotation orthonormal to within [`ROTATION_TOL`], re-orthonormalizing via
/// polar decomposition whenever drift exceeds [`REORTHO_DRIFT`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SE3PoseRecord", into = "SE3PoseRecord")]
pub struct SE3Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Wire form: 9 rotation floats row-major plus a 3-float translation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SE3PoseRecord {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<SE3Pose> for SE3PoseRecord {
    fn from(p: SE3Pose) -> Self {
        Self {
            rotation: p.rotation_row_major(),
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl TryFrom<SE3PoseRecord> for SE3Pose {
    type Error = GeometryError;

    fn try_from(r: SE3PoseRecord) -> Result<Self> {
        let rot = Matrix3::from_row_slice(&r.rotation);
        let t = Vector3::new(r.translation[0], r.translation[1], r.translation[2]);
        SE3Pose::new(rot, t)
    }
}

fn orthonormality_drift(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r;
    let mut drift = (r.determinant() - 1.0).abs();
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            drift = drift.max((gram[(i, j)] - target).abs());
        }
    }
    drift
}

/// Nearest rotation in Frobenius norm (polar factor of `r`).
fn polar_orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut rot = u * v_t;
    if rot.determinant() < 0.0 {
        // Flip the singular direction with the smallest singular value.
        let mut u = u;
        for i in 0..3 {
            u[(i, 2)] = -u[(i, 2)];
        }
        rot = u * v_t;
    }
    rot
}

impl SE3Pose {
    /// Validates the rotation (orthonormal, det +1, within 1e-9) and all
    /// components finite.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite {
                what: "rotation".into(),
            });
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite {
                what: "translation".into(),
            });
        }
        let drift = orthonormality_drift(&rotation);
        if drift > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation {
                detail: format!("drift {drift:.3e} exceeds {ROTATION_TOL:.0e}"),
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pure rotation about the world Z axis, zero translation.
    pub fn rot_z(theta: f64) -> Self {
        assert!(theta.is_finite(), "rot_z angle must be finite");
        let (s, c) = theta.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Result<Self> {
        Self::new(Matrix3::identity(), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    /// `self` applied after `other`: `(self * other)(x) = self(other(x))`.
    pub fn compose(&self, other: &SE3Pose) -> SE3Pose {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_drift(&rotation) > REORTHO_DRIFT {
            rotation = polar_orthonormalize(&rotation);
        }
        SE3Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> SE3Pose {
        let mut rotation = self.rotation.transpose();
        if orthonormality_drift(&rotation) > REORTHO_DRIFT {
            rotation = polar_orthonormalize(&rotation);
        }
        SE3Pose {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Relative pose of `other` expressed in `self`'s frame.
    pub fn relative_to(&self, other: &SE3Pose) -> SE3Pose {
        self.invert().compose(other)
    }

    /// Rotation + translation flattened to 12 numbers (rotation row-major
    /// then translation), the policy-state pose encoding input.
    pub fn flatten(&self) -> [f64; 12] {
        let r = self.rotation_row_major();
        [
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
            r[6],
            r[7],
            r[8],
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    /// Max elementwise deviation from another pose over rotation and
    /// translation entries.
    pub fn max_abs_diff(&self, other: &SE3Pose) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.rotation[(i, j)] - other.rotation[(i, j)]).abs());
            }
            d = d.max((self.translation[i] - other.translation[i]).abs());
        }
        d
    }
}
