//! Deterministic synthetic fixtures: pouring vessels built from labeled
//! point lobes, a receiving cup, scripted pour demonstrations, ready-made
//! classification rules, and the instance-catalog metadata used by the
//! evaluation harness. Geometry is parametric; nothing is loaded from disk.

use crate::decompose::AVOPrimitive;
use crate::geometry::{FrameTag, PointCloud, SE3Pose, Trajectory};
use crate::recognition::{OracleTable, Role};
use crate::region::FunctionalRegion;
use crate::transfer::Demonstration;
use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A synthetic cloud whose points carry ground-truth part labels. The cloud's
/// per-point features are the raw coordinates, so file-feature clustering
/// groups by position.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub labels: Vec<String>,
}

impl LabeledCloud {
    fn from_lobes(lobes: &[Lobe], points_per_lobe: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(lobes.len() * points_per_lobe);
        let mut labels = Vec::with_capacity(lobes.len() * points_per_lobe);
        for lobe in lobes {
            let mut remaining = points_per_lobe;
            while remaining > 0 {
                let sample: [f64; 3] = UnitBall.sample(&mut rng);
                let offset = Vector3::new(sample[0], sample[1], sample[2]) * lobe.radius;
                if lobe.mirrored {
                    // Push the offset and its XY mirror back to back so the
                    // running coordinate sums cancel exactly and the lobe's
                    // XY mean is 0.0 to the last bit.
                    points.push(lobe.center + offset);
                    points.push(lobe.center + Vector3::new(-offset.x, -offset.y, offset.z));
                    labels.push(lobe.label.to_string());
                    labels.push(lobe.label.to_string());
                    remaining -= 2;
                } else {
                    points.push(lobe.center + offset);
                    labels.push(lobe.label.to_string());
                    remaining -= 1;
                }
            }
        }
        let features = points.iter().map(|p| vec![p.x, p.y, p.z]).collect();
        let cloud = PointCloud::new(points, Some(features)).expect("fixture cloud is well formed");
        LabeledCloud { cloud, labels }
    }
}

struct Lobe {
    label: &'static str,
    center: Vector3<f64>,
    radius: f64,
    mirrored: bool,
}

/// A kettle-like vessel: a body blob, a handle, and a spout whose direction
/// around Z is `spout_azimuth`. The three lobes are far enough apart that
/// position clustering with m=3 recovers them exactly.
pub fn pouring_vessel(spout_azimuth: f64, points_per_lobe: usize, seed: u64) -> LabeledCloud {
    let radial = 0.45;
    let spout_dir = Vector3::new(spout_azimuth.cos(), spout_azimuth.sin(), 0.0);
    let lobes = [
        Lobe {
            label: "body",
            center: Vector3::new(0.0, 0.0, 0.30),
            radius: 0.18,
            mirrored: false,
        },
        Lobe {
            label: "handle",
            center: -spout_dir * radial + Vector3::new(0.0, 0.0, 0.35),
            radius: 0.06,
            mirrored: false,
        },
        Lobe {
            label: "spout",
            center: spout_dir * radial + Vector3::new(0.0, 0.0, 0.50),
            radius: 0.06,
            mirrored: false,
        },
    ];
    LabeledCloud::from_lobes(&lobes, points_per_lobe, seed)
}

/// A receiving cup: rim, wall, and base blobs stacked on the Z axis. Every
/// lobe is mirror-sampled, so each part's XY mean is exactly zero — the
/// functional direction of such an object has no usable heading, which is the
/// degenerate case the alignment stage must survive.
pub fn receiving_cup(points_per_lobe: usize, seed: u64) -> LabeledCloud {
    let lobes = [
        Lobe {
            label: "base",
            center: Vector3::new(0.0, 0.0, 0.04),
            radius: 0.04,
            mirrored: true,
        },
        Lobe {
            label: "wall",
            center: Vector3::new(0.0, 0.0, 0.22),
            radius: 0.05,
            mirrored: true,
        },
        Lobe {
            label: "rim",
            center: Vector3::new(0.0, 0.0, 0.42),
            radius: 0.04,
            mirrored: true,
        },
    ];
    LabeledCloud::from_lobes(&lobes, points_per_lobe, seed)
}

/// Attach to each region the most common ground-truth label among its
/// members (ties break toward the lexicographically smallest label).
pub fn label_regions_by_majority(
    regions: Vec<FunctionalRegion>,
    labels: &[String],
) -> Vec<FunctionalRegion> {
    regions
        .into_iter()
        .map(|region| {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for &i in &region.point_indices {
                *counts.entry(labels[i].as_str()).or_default() += 1;
            }
            let winner = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(label, _)| label.to_string())
                .expect("regions are non-empty");
            region.with_label(winner)
        })
        .collect()
}

/// Classification rules for a vessel category with handle/spout/body parts:
/// the handle is the grasp site, the spout is the pour site, and nothing on
/// the vessel receives a pour.
pub fn vessel_rules(table: &mut OracleTable, category: &str) {
    for (verb, role, label, decision) in [
        ("grasp", Role::Active, "handle", true),
        ("grasp", Role::Active, "spout", false),
        ("grasp", Role::Active, "body", false),
        ("grasp", Role::Passive, "handle", false),
        ("grasp", Role::Passive, "spout", false),
        ("grasp", Role::Passive, "body", false),
        ("pour", Role::Active, "handle", false),
        ("pour", Role::Active, "spout", true),
        ("pour", Role::Active, "body", false),
        ("pour", Role::Passive, "handle", false),
        ("pour", Role::Passive, "spout", false),
        ("pour", Role::Passive, "body", false),
    ] {
        table.insert(category, verb, role, label, decision);
    }
}

/// Rules for a cup category with rim/wall/base parts: grasp the wall, pour
/// into the rim.
pub fn cup_rules(table: &mut OracleTable, category: &str) {
    for (verb, role, label, decision) in [
        ("grasp", Role::Active, "rim", false),
        ("grasp", Role::Active, "wall", true),
        ("grasp", Role::Active, "base", false),
        ("grasp", Role::Passive, "rim", false),
        ("grasp", Role::Passive, "wall", false),
        ("grasp", Role::Passive, "base", false),
        ("pour", Role::Active, "rim", false),
        ("pour", Role::Active, "wall", false),
        ("pour", Role::Active, "base", false),
        ("pour", Role::Passive, "rim", true),
        ("pour", Role::Passive, "wall", false),
        ("pour", Role::Passive, "base", false),
    ] {
        table.insert(category, verb, role, label, decision);
    }
}

/// The same rules as JSON text, for exercising the file-loading path.
pub fn rules_json(vessel_categories: &[&str], cup_categories: &[&str]) -> String {
    let mut entries = Vec::new();
    let mut push = |category: &str, verb: &str, role: &str, label: &str, decision: bool| {
        entries.push(serde_json::json!({
            "category": category,
            "verb": verb,
            "role": role,
            "region_label": label,
            "decision": decision,
        }));
    };
    for category in vessel_categories {
        for (verb, role, label, decision) in [
            ("grasp", "active", "handle", true),
            ("grasp", "active", "spout", false),
            ("grasp", "active", "body", false),
            ("grasp", "passive", "handle", false),
            ("grasp", "passive", "spout", false),
            ("grasp", "passive", "body", false),
            ("pour", "active", "handle", false),
            ("pour", "active", "spout", true),
            ("pour", "active", "body", false),
            ("pour", "passive", "handle", false),
            ("pour", "passive", "spout", false),
            ("pour", "passive", "body", false),
        ] {
            push(category, verb, role, label, decision);
        }
    }
    for category in cup_categories {
        for (verb, role, label, decision) in [
            ("grasp", "active", "rim", false),
            ("grasp", "active", "wall", true),
            ("grasp", "active", "base", false),
            ("grasp", "passive", "rim", false),
            ("grasp", "passive", "wall", false),
            ("grasp", "passive", "base", false),
            ("pour", "active", "rim", false),
            ("pour", "active", "wall", false),
            ("pour", "active", "base", false),
            ("pour", "passive", "rim", true),
            ("pour", "passive", "wall", false),
            ("pour", "passive", "base", false),
        ] {
            push(category, verb, role, label, decision);
        }
    }
    serde_json::to_string_pretty(&entries).expect("rule entries serialize")
}

fn rot_y(angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), angle).into_inner()
}

/// A scripted pour: lift the vessel from its rest pose, carry it until the
/// pour site hovers over the receiver, tip, and hold. Nine waypoints, ending
/// 0.15 m above the receiver's functional center with a 60-degree tilt.
pub fn pour_demo(
    demo_id: &str,
    actor_id: &str,
    object_id: &str,
    actor_center: Vector3<f64>,
    object_center: Vector3<f64>,
) -> Demonstration {
    let hover = object_center + Vector3::new(0.0, 0.0, 0.15);
    let lift = actor_center + Vector3::new(0.0, 0.0, 0.25);
    let mut waypoints = Vec::with_capacity(9);
    let segment = |a: Vector3<f64>, b: Vector3<f64>, s: f64| a + (b - a) * s;
    // Rise from the rest pose.
    for s in [0.0, 0.5, 1.0] {
        let t = segment(actor_center, lift, s);
        waypoints.push(SE3Pose::from_translation(t).expect("finite"));
    }
    // Carry level to the hover point.
    for s in [0.5, 1.0] {
        let t = segment(lift, hover, s);
        waypoints.push(SE3Pose::from_translation(t).expect("finite"));
    }
    // Tip in place and hold.
    let tilt = 60f64.to_radians();
    for s in [0.25, 0.5, 1.0, 1.0] {
        waypoints.push(SE3Pose::new(rot_y(tilt * s), hover).expect("rotation valid"));
    }
    let grippers = vec![1.0; waypoints.len()];
    Demonstration::new(
        demo_id,
        AVOPrimitive {
            step: 1,
            verb: "pour".into(),
            actor: actor_id.into(),
            object: object_id.into(),
        },
        SE3Pose::from_translation(actor_center).expect("finite"),
        SE3Pose::from_translation(object_center).expect("finite"),
        Trajectory::new(waypoints, grippers, FrameTag::World).expect("trajectory valid"),
        actor_id,
    )
    .expect("demo is well formed")
}

/// Per-category instance counts used as evaluation metadata. Geometry is
/// always synthesized; these are bookkeeping numbers only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub category: String,
    pub count: u32,
    pub role: String,
}

pub fn instance_catalog() -> Vec<CatalogEntry> {
    let rows: [(&str, u32, &str); 9] = [
        ("Mug", 27, "Actor/Object"),
        ("Pitcher", 30, "Actor/Object"),
        ("Teacup", 11, "Actor/Object"),
        ("Teapot", 72, "Actor/Object"),
        ("Box", 10, "Object"),
        ("Apple", 20, "Object"),
        ("Can", 20, "Object"),
        ("Cookie", 21, "Object"),
        ("Cabinet", 5, "Object"),
    ];
    rows.iter()
        .map(|&(category, count, role)| CatalogEntry {
            category: category.into(),
            count,
            role: role.into(),
        })
        .collect()
}
