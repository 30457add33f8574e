//! Shared helpers for in-crate tests: seeded random poses built from an
//! independent trigonometric construction (not via SE3Pose composition).

use super::SE3Pose;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn oracle_rotation(ax: f64, ay: f64, az: f64) -> Matrix3<f64> {
    let rx = Matrix3::new(
        1.0,
        0.0,
        0.0,
        0.0,
        ax.cos(),
        -ax.sin(),
        0.0,
        ax.sin(),
        ax.cos(),
    );
    let ry = Matrix3::new(
        ay.cos(),
        0.0,
        ay.sin(),
        0.0,
        1.0,
        0.0,
        -ay.sin(),
        0.0,
        ay.cos(),
    );
    let rz = Matrix3::new(
        az.cos(),
        -az.sin(),
        0.0,
        az.sin(),
        az.cos(),
        0.0,
        0.0,
        0.0,
        1.0,
    );
    rz * ry * rx
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    oracle_rotation(
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
    )
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> SE3Pose {
    let rot = random_rotation(rng);
    let t = Vector3::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    );
    SE3Pose::new(rot, t).unwrap()
}
