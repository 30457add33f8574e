//! One TOML file drives the whole pipeline: the synthesized desk of fixture
//! objects, the reference demonstrations, and a section per stage. Every
//! CLI flag overrides its corresponding key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use funcanon_core::decompose::GRIPPER_ACTOR;
use funcanon_core::recognition::DEFAULT_VERBS;
use funcanon_core::transfer::TransferMethod;
use funcanon_core::SE3Pose;
use funcanon_policy::PolicyConfig;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{ExecutorKind, Reanchor};
use crate::scenario::{VariationLevel, DEFAULT_ORIENTATION_EPSILON, DEFAULT_POSITION_EPSILON};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Which parametric fixture to synthesize for an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Handle/spout/body pouring vessel.
    Vessel,
    /// Base/wall/rim receiving cup.
    Cup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub category: String,
    pub shape: Shape,
    /// Heading of the spout in degrees; cups ignore it.
    pub spout_azimuth_deg: f64,
    pub points_per_lobe: usize,
    /// World position of the object origin, meters.
    pub place: [f64; 3],
    /// World heading of the object, degrees.
    pub yaw_deg: f64,
}

impl Default for ObjectSpec {
    fn default() -> Self {
        ObjectSpec {
            id: String::new(),
            category: String::new(),
            shape: Shape::Vessel,
            spout_azimuth_deg: 0.0,
            points_per_lobe: 48,
            place: [0.0, 0.0, 0.0],
            yaw_deg: 0.0,
        }
    }
}

impl ObjectSpec {
    pub fn placement(&self) -> SE3Pose {
        let rotation = *SE3Pose::rot_z(self.yaw_deg.to_radians()).rotation();
        SE3Pose::new(rotation, Vector3::from(self.place)).expect("yaw rotation is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSpec {
    pub demo_id: String,
    pub verb: String,
    /// The acting object; grasp demos default to the robot gripper.
    pub actor: Option<String>,
    pub object: String,
}

impl Default for DemoSpec {
    fn default() -> Self {
        DemoSpec {
            demo_id: String::new(),
            verb: "pour".into(),
            actor: None,
            object: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub verb: String,
    pub actor: String,
    pub object: String,
    /// Derived from the reference demo when omitted: same actor is a pose
    /// variation, same category an instance variation, otherwise category.
    pub variation: Option<VariationLevel>,
    pub position_epsilon: Option<f64>,
    pub orientation_epsilon: Option<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            id: String::new(),
            verb: "pour".into(),
            actor: String::new(),
            object: String::new(),
            variation: None,
            position_epsilon: None,
            orientation_epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsConfig {
    /// Number of clustered regions per object.
    pub m: usize,
}

impl Default for RegionsConfig {
    fn default() -> Self {
        RegionsConfig { m: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionConfig {
    pub verbs: Vec<String>,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        RecognitionConfig {
            verbs: DEFAULT_VERBS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub method: TransferMethod,
    /// Objects to retarget demonstrations onto. Omitted: every instance in
    /// the categories the demos' source objects belong to. An explicit
    /// empty list is a stage error.
    pub targets: Option<Vec<String>>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            method: TransferMethod::Offset,
            targets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub position_epsilon: f64,
    pub orientation_epsilon: f64,
    /// Per-episode uniform placement jitter, meters.
    pub jitter: f64,
    pub executor: ExecutorKind,
    /// How executed trajectories are re-anchored onto the scenario: pure
    /// functional-center offset, or the full functional-frame map.
    pub reanchor: Reanchor,
    /// Start position of the gripper for policy rollouts of grasp steps.
    pub gripper_home: [f64; 3],
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            trials: 25,
            seeds: vec![0, 1, 2],
            position_epsilon: DEFAULT_POSITION_EPSILON,
            orientation_epsilon: DEFAULT_ORIENTATION_EPSILON,
            jitter: 0.005,
            executor: ExecutorKind::Transfer,
            reanchor: Reanchor::Frame,
            gripper_home: [0.0, 0.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub objects: Vec<ObjectSpec>,
    pub demos: Vec<DemoSpec>,
    /// Explicit scenarios; empty means one generated scenario per
    /// (graspable object, receiving cup) pair.
    pub scenarios: Vec<ScenarioSpec>,
    pub regions: RegionsConfig,
    pub recognition: RecognitionConfig,
    pub transfer: TransferConfig,
    pub train: PolicyConfig,
    pub evaluate: EvaluateConfig,
}

fn object(id: &str, category: &str, shape: Shape, azimuth_deg: f64, place: [f64; 3]) -> ObjectSpec {
    ObjectSpec {
        id: id.into(),
        category: category.into(),
        shape,
        spout_azimuth_deg: azimuth_deg,
        place,
        ..ObjectSpec::default()
    }
}

impl Default for PipelineConfig {
    /// A small desk: two kettles (one turned), a teapot from a second
    /// category, and two cups, with one grasp and one pour reference demo
    /// on the first kettle.
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            objects: vec![
                object("kettle-0", "kettle", Shape::Vessel, 0.0, [0.45, 0.00, 0.0]),
                object("kettle-1", "kettle", Shape::Vessel, 40.0, [0.45, 0.35, 0.0]),
                object("teapot-0", "teapot", Shape::Vessel, -30.0, [0.45, -0.35, 0.0]),
                object("cup-0", "cup", Shape::Cup, 0.0, [0.00, 0.40, 0.0]),
                object("cup-1", "cup", Shape::Cup, 0.0, [0.00, 0.70, 0.0]),
            ],
            demos: vec![
                DemoSpec {
                    demo_id: "grasp-ref".into(),
                    verb: "grasp".into(),
                    actor: None,
                    object: "kettle-0".into(),
                },
                DemoSpec {
                    demo_id: "pour-ref".into(),
                    verb: "pour".into(),
                    actor: Some("kettle-0".into()),
                    object: "cup-0".into(),
                },
            ],
            scenarios: Vec::new(),
            regions: RegionsConfig::default(),
            recognition: RecognitionConfig::default(),
            transfer: TransferConfig::default(),
            train: PolicyConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn placements(&self) -> BTreeMap<String, SE3Pose> {
        self.objects
            .iter()
            .map(|o| (o.id.clone(), o.placement()))
            .collect()
    }

    pub fn gripper_home_pose(&self) -> SE3Pose {
        SE3Pose::from_translation(Vector3::from(self.evaluate.gripper_home))
            .expect("home position is finite")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.objects.is_empty() {
            return Err(invalid("no objects configured"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if o.id.is_empty() || o.category.is_empty() {
                return Err(invalid("object id and category must be non-empty"));
            }
            if o.id == GRIPPER_ACTOR {
                return Err(invalid(format!("{GRIPPER_ACTOR:?} is reserved for the robot")));
            }
            if !ids.insert(&o.id) {
                return Err(invalid(format!("duplicate object id {:?}", o.id)));
            }
            if o.points_per_lobe == 0 {
                return Err(invalid(format!("object {:?} has no points", o.id)));
            }
            if o.place.iter().any(|v| !v.is_finite()) || !o.yaw_deg.is_finite() {
                return Err(invalid(format!("object {:?} placement is not finite", o.id)));
            }
        }
        if !self.recognition.verbs.iter().any(|v| v == "grasp") {
            return Err(invalid("verb vocabulary must include \"grasp\""));
        }
        let known = |id: &str| self.object(id).is_some();
        let mut demo_ids = std::collections::BTreeSet::new();
        let mut demo_verbs = std::collections::BTreeSet::new();
        for d in &self.demos {
            if d.demo_id.is_empty() {
                return Err(invalid("demo_id must be non-empty"));
            }
            if !demo_ids.insert(&d.demo_id) {
                return Err(invalid(format!("duplicate demo id {:?}", d.demo_id)));
            }
            if !demo_verbs.insert(&d.verb) {
                return Err(invalid(format!(
                    "two demos share the verb {:?}; one reference per verb",
                    d.verb
                )));
            }
            if !self.recognition.verbs.iter().any(|v| *v == d.verb) {
                return Err(invalid(format!("demo verb {:?} not in the vocabulary", d.verb)));
            }
            if !known(&d.object) {
                return Err(invalid(format!(
                    "demo {:?} references unknown object {:?}",
                    d.demo_id, d.object
                )));
            }
            match (d.verb.as_str(), &d.actor) {
                ("grasp", None) => {}
                ("grasp", Some(a)) if a == GRIPPER_ACTOR => {}
                ("grasp", Some(a)) => {
                    return Err(invalid(format!(
                        "grasp demo {:?} is performed by the gripper, not {a:?}",
                        d.demo_id
                    )));
                }
                ("pour", Some(a)) if known(a) => {}
                ("pour", Some(a)) => {
                    return Err(invalid(format!(
                        "demo {:?} references unknown actor {a:?}",
                        d.demo_id
                    )));
                }
                ("pour", None) => {
                    return Err(invalid(format!("pour demo {:?} needs an actor", d.demo_id)));
                }
                (verb, _) => {
                    return Err(invalid(format!(
                        "demo verb {verb:?} has no synthesizer (grasp and pour do)"
                    )));
                }
            }
        }
        let mut scenario_ids = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            if s.id.is_empty() {
                return Err(invalid("scenario id must be non-empty"));
            }
            if !scenario_ids.insert(&s.id) {
                return Err(invalid(format!("duplicate scenario id {:?}", s.id)));
            }
            for id in [&s.actor, &s.object] {
                if !known(id) {
                    return Err(invalid(format!(
                        "scenario {:?} references unknown object {id:?}",
                        s.id
                    )));
                }
            }
            if !self.recognition.verbs.iter().any(|v| *v == s.verb) {
                return Err(invalid(format!(
                    "scenario verb {:?} not in the vocabulary",
                    s.verb
                )));
            }
            for eps in [s.position_epsilon, s.orientation_epsilon].into_iter().flatten() {
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(invalid(format!(
                        "scenario {:?} tolerance must be positive, got {eps}",
                        s.id
                    )));
                }
            }
        }
        if let Some(targets) = &self.transfer.targets {
            for t in targets {
                if !known(t) {
                    return Err(invalid(format!("transfer target {t:?} is unknown")));
                }
            }
        }
        if self.regions.m == 0 {
            return Err(invalid("regions.m must be at least 1"));
        }
        let e = &self.evaluate;
        if e.trials == 0 {
            return Err(invalid("evaluate.trials must be at least 1"));
        }
        if e.seeds.is_empty() {
            return Err(invalid("evaluate.seeds must not be empty"));
        }
        for (name, value) in [
            ("evaluate.position_epsilon", e.position_epsilon),
            ("evaluate.orientation_epsilon", e.orientation_epsilon),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if !(e.jitter.is_finite() && e.jitter >= 0.0) {
            return Err(invalid(format!("evaluate.jitter must be >= 0, got {}", e.jitter)));
        }
        if e.gripper_home.iter().any(|v| !v.is_finite()) {
            return Err(invalid("evaluate.gripper_home must be finite"));
        }
        Ok(())
    }
}
