//! Episode execution and the evaluation sweep. Two executors share one
//! judging path: the transfer executor re-anchors the reference
//! demonstration onto the scenario's functional frames, and the policy
//! executor rolls an action chunk sampled from a trained denoiser out of
//! the re-anchored start pose.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::thread;

use funcanon_core::alignment::FunctionalVector;
use funcanon_core::decompose::{AVOPrimitive, GRIPPER_ACTOR};
use funcanon_core::geometry::FrameTag;
use funcanon_core::recognition::{Role, VerbVocabulary};
use funcanon_core::transfer::{transfer_trajectory, Demonstration, TransferMethod};
use funcanon_core::{SE3Pose, Trajectory};
use funcanon_policy::{
    ddim_sample, encode_state, Checkpoint, DiffusionSchedule, PoseEncoder, VerbTable,
};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EvaluateConfig;
use crate::judge::{object_role, AlignedFunction, FunctionTable, Judge, JudgeError};
use crate::mix64;
use crate::report::{
    summarize_seeds, EpisodeOutcome, EvalReport, FailureRecord, Metrics, ScenarioReport,
    SeedMetrics, REPORT_SCHEMA_VERSION,
};
use crate::scenario::{Scenario, ScenarioError};

/// Every state encoder is seeded with these fixed values so training,
/// checkpoints, and inference agree on the embedding tables.
pub const ENCODER_SEED: u64 = 0;
pub const VERB_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorKind {
    /// Re-anchor the reference demonstration kinematically.
    Transfer,
    /// Sample an action chunk from the trained denoiser.
    Policy,
}

impl fmt::Display for ExecutorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecutorKind::Transfer => "transfer",
            ExecutorKind::Policy => "policy",
        })
    }
}

impl FromStr for ExecutorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "transfer" => Ok(ExecutorKind::Transfer),
            "policy" => Ok(ExecutorKind::Policy),
            other => Err(format!("executor must be \"transfer\" or \"policy\", got {other:?}")),
        }
    }
}

/// How a trajectory is carried from the reference frame to the scenario's:
/// a pure functional-center translation, or the full frame map including
/// the heading change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reanchor {
    Offset,
    Frame,
}

impl fmt::Display for Reanchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reanchor::Offset => "offset",
            Reanchor::Frame => "frame",
        })
    }
}

impl FromStr for Reanchor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "offset" => Ok(Reanchor::Offset),
            "frame" => Ok(Reanchor::Frame),
            other => Err(format!("reanchor must be \"offset\" or \"frame\", got {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("no reference demonstration for verb {0:?}")]
    NoDemo(String),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("transfer failed: {0}")]
    Transfer(String),
    #[error("policy failed: {0}")]
    Policy(String),
}

/// A trained denoiser plus the fixed encoders it was trained with.
#[derive(Debug, Clone)]
pub struct PolicyBundle {
    pub checkpoint: Checkpoint,
    pub schedule: DiffusionSchedule,
    pub encoder: PoseEncoder,
    pub verbs: VerbTable,
}

impl PolicyBundle {
    pub fn new(checkpoint: Checkpoint, vocabulary: &VerbVocabulary) -> Result<Self, ExecError> {
        let schedule = DiffusionSchedule::from_config(&checkpoint.config)
            .map_err(|e| ExecError::Policy(e.to_string()))?;
        let encoder = PoseEncoder::seeded(checkpoint.config.pose_width, ENCODER_SEED)
            .map_err(|e| ExecError::Policy(e.to_string()))?;
        let verbs = VerbTable::seeded(vocabulary.verbs(), checkpoint.config.verb_dim, VERB_SEED);
        Ok(PolicyBundle {
            checkpoint,
            schedule,
            encoder,
            verbs,
        })
    }
}

/// Everything an episode needs to turn a primitive into a world-frame
/// trajectory.
pub struct ExecutionContext<'a> {
    pub functions: &'a FunctionTable,
    pub library: &'a BTreeMap<String, Demonstration>,
    pub base_placements: &'a BTreeMap<String, SE3Pose>,
    pub executor: ExecutorKind,
    pub reanchor: Reanchor,
    pub policy: Option<&'a PolicyBundle>,
    pub gripper_home: SE3Pose,
}

struct Anchors<'a> {
    demo: &'a Demonstration,
    role: Role,
    source_id: &'a str,
    source: &'a AlignedFunction,
    source_placement: &'a SE3Pose,
    target: &'a AlignedFunction,
    target_placement: &'a SE3Pose,
}

impl<'a> ExecutionContext<'a> {
    fn anchors(
        &'a self,
        primitive: &AVOPrimitive,
        placements: &'a BTreeMap<String, SE3Pose>,
    ) -> Result<Anchors<'a>, ExecError> {
        let demo = self
            .library
            .get(&primitive.verb)
            .ok_or_else(|| ExecError::NoDemo(primitive.verb.clone()))?;
        let role = object_role(&primitive.verb);
        let source_id = demo.primitive.object.as_str();
        let missing_frame = |object_id: &str| {
            ExecError::Judge(JudgeError::FrameMissing {
                object_id: object_id.into(),
                verb: primitive.verb.clone(),
                role,
            })
        };
        let missing_place = |object_id: &str| {
            ExecError::Judge(JudgeError::MissingPlacement {
                object_id: object_id.into(),
            })
        };
        Ok(Anchors {
            demo,
            role,
            source_id,
            source: self
                .functions
                .get(source_id, &primitive.verb, role)
                .ok_or_else(|| missing_frame(source_id))?,
            source_placement: self
                .base_placements
                .get(source_id)
                .ok_or_else(|| missing_place(source_id))?,
            target: self
                .functions
                .get(&primitive.object, &primitive.verb, role)
                .ok_or_else(|| missing_frame(&primitive.object))?,
            target_placement: placements
                .get(&primitive.object)
                .ok_or_else(|| missing_place(&primitive.object))?,
        })
    }

    /// The rigid map carrying the reference functional frame onto the
    /// scenario's.
    fn frame_map(a: &Anchors) -> SE3Pose {
        let from = a.source.anchor_pose(a.source_placement);
        let to = a.target.anchor_pose(a.target_placement);
        to.compose(&from.invert())
    }

    fn execute_transfer(
        &self,
        primitive: &AVOPrimitive,
        placements: &BTreeMap<String, SE3Pose>,
    ) -> Result<Trajectory, ExecError> {
        let a = self.anchors(primitive, placements)?;
        match self.reanchor {
            Reanchor::Offset => {
                let vector = |f: &AlignedFunction, object_id: &str, placement: &SE3Pose| {
                    FunctionalVector {
                        object_id: object_id.into(),
                        verb: primitive.verb.clone(),
                        role: a.role,
                        v: f.world_vector(placement),
                    }
                };
                let v_s = vector(a.source, a.source_id, a.source_placement);
                let v_t = vector(a.target, &primitive.object, a.target_placement);
                let mut demo = a.demo.clone();
                demo.source_object_id = a.source_id.to_string();
                let record = transfer_trajectory(&demo, &v_s, &v_t, TransferMethod::Offset)
                    .map_err(|e| ExecError::Transfer(e.to_string()))?;
                Ok(record.transferred)
            }
            Reanchor::Frame => {
                let map = Self::frame_map(&a);
                Ok(a.demo.trajectory.mapped(&map, FrameTag::World))
            }
        }
    }

    fn execute_policy(
        &self,
        primitive: &AVOPrimitive,
        placements: &BTreeMap<String, SE3Pose>,
        episode_seed: u64,
    ) -> Result<Trajectory, ExecError> {
        let bundle = self
            .policy
            .ok_or_else(|| ExecError::Policy("no trained checkpoint loaded".into()))?;
        let a = self.anchors(primitive, placements)?;
        let pose_of = |id: &str| -> Result<SE3Pose, ExecError> {
            if id == GRIPPER_ACTOR {
                Ok(self.gripper_home)
            } else {
                placements.get(id).copied().ok_or_else(|| {
                    ExecError::Judge(JudgeError::MissingPlacement {
                        object_id: id.into(),
                    })
                })
            }
        };
        let config = &bundle.checkpoint.config;
        let state = encode_state(
            &pose_of(&primitive.actor)?,
            &pose_of(&primitive.object)?,
            &primitive.actor,
            &primitive.object,
            &primitive.verb,
            &bundle.encoder,
            &bundle.verbs,
            config.feature_dim,
        )
        .map_err(|e| ExecError::Policy(e.to_string()))?;
        let mut chunk = ddim_sample(
            &state,
            &bundle.checkpoint.denoiser,
            &bundle.schedule,
            config,
            episode_seed,
        )
        .map_err(|e| ExecError::Policy(e.to_string()))?;
        chunk.sanitize();
        // The policy supplies the motion; the start pose comes from the
        // reference demonstration carried onto the scenario's frame.
        let map = Self::frame_map(&a);
        let start = map.compose(&a.demo.trajectory.waypoints()[0]);
        let start_gripper = a.demo.trajectory.gripper_states()[0];
        chunk
            .to_trajectory(&start, start_gripper, FrameTag::World)
            .map_err(|e| ExecError::Policy(e.to_string()))
    }

    pub fn execute(
        &self,
        primitive: &AVOPrimitive,
        placements: &BTreeMap<String, SE3Pose>,
        episode_seed: u64,
    ) -> Result<Trajectory, ExecError> {
        match self.executor {
            ExecutorKind::Transfer => self.execute_transfer(primitive, placements),
            ExecutorKind::Policy => self.execute_policy(primitive, placements, episode_seed),
        }
    }
}

fn jittered(
    placements: &BTreeMap<String, SE3Pose>,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, SE3Pose> {
    placements
        .iter()
        .map(|(id, pose)| {
            let delta = Vector3::new(
                rng.random_range(-jitter..=jitter),
                rng.random_range(-jitter..=jitter),
                rng.random_range(-jitter..=jitter),
            );
            let moved = SE3Pose::new(*pose.rotation(), pose.translation() + delta)
                .expect("translating keeps the rotation valid");
            (id.clone(), moved)
        })
        .collect()
}

struct StepResult {
    success: bool,
    failure: Option<String>,
}

fn run_step(
    ctx: &ExecutionContext,
    judge: &Judge,
    scenario: &Scenario,
    primitive: &AVOPrimitive,
    episode_seed: u64,
) -> StepResult {
    let executed = match ctx.execute(primitive, &scenario.placements, episode_seed) {
        Ok(t) => t,
        Err(e) => {
            return StepResult {
                success: false,
                failure: Some(e.to_string()),
            }
        }
    };
    match judge.judge_subtask(&executed, scenario, primitive) {
        Ok(success) => StepResult {
            success,
            failure: None,
        },
        Err(e) => StepResult {
            success: false,
            failure: Some(e.to_string()),
        },
    }
}

fn eval_scenario(
    scenario_index: usize,
    scenario: &Scenario,
    ctx: &ExecutionContext,
    judge: &Judge,
    cfg: &EvaluateConfig,
) -> (ScenarioReport, Vec<FailureRecord>) {
    let (first, second) = scenario.two_steps().expect("scenarios validated before the sweep");
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        let mut outcomes = Vec::with_capacity(cfg.trials);
        for episode in 0..cfg.trials {
            let episode_seed = mix64(mix64(seed, 0xEC0_u64 ^ scenario_index as u64), episode as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
            let mut episode_scenario = scenario.clone();
            episode_scenario.placements =
                jittered(&scenario.placements, cfg.jitter, &mut rng);

            let mut record = |step: u32, reason: &Option<String>| {
                if let Some(reason) = reason {
                    failures.push(FailureRecord {
                        scenario_id: scenario.scenario_id.clone(),
                        seed,
                        episode,
                        step,
                        reason: reason.clone(),
                    });
                }
            };
            let r1 = run_step(ctx, judge, &episode_scenario, first, mix64(episode_seed, 1));
            record(first.step, &r1.failure);
            let sub2 = if r1.success {
                let r2 = run_step(ctx, judge, &episode_scenario, second, mix64(episode_seed, 2));
                record(second.step, &r2.failure);
                Some(r2.success)
            } else {
                None
            };
            outcomes.push(EpisodeOutcome {
                sub1: r1.success,
                sub2,
            });
        }
        per_seed.push(SeedMetrics::new(seed, &Metrics::from_outcomes(&outcomes)));
    }
    let (mean, std) = summarize_seeds(&per_seed);
    (
        ScenarioReport {
            scenario_id: scenario.scenario_id.clone(),
            variation: scenario.variation,
            position_epsilon: scenario.position_epsilon,
            orientation_epsilon: scenario.orientation_epsilon,
            per_seed,
            mean,
            std,
        },
        failures,
    )
}

/// Run every scenario for every seed, `cfg.trials` episodes each, in
/// parallel across scenarios. Execution and judgment errors are recorded as
/// failed episodes; the sweep itself never aborts. Output is sorted by
/// scenario id and fully determined by the seed set.
pub fn evaluate(
    scenarios: &[Scenario],
    ctx: &ExecutionContext,
    judge: &Judge,
    cfg: &EvaluateConfig,
) -> Result<EvalReport, ScenarioError> {
    let mut ordered: Vec<&Scenario> = scenarios.iter().collect();
    ordered.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    for s in &ordered {
        s.validate()?;
        s.two_steps()?;
    }

    let results: Vec<(ScenarioReport, Vec<FailureRecord>)> = thread::scope(|scope| {
        let handles: Vec<_> = ordered
            .iter()
            .enumerate()
            .map(|(i, scenario)| scope.spawn(move || eval_scenario(i, scenario, ctx, judge, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario evaluation does not panic"))
            .collect()
    });

    let mut scenario_reports = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (report, mut fails) in results {
        scenario_reports.push(report);
        failures.append(&mut fails);
    }
    failures.sort_by(|a, b| {
        (&a.scenario_id, a.seed, a.episode, a.step).cmp(&(&b.scenario_id, b.seed, b.episode, b.step))
    });
    let aggregate = EvalReport::aggregate_of(&scenario_reports);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        executor: ctx.executor,
        trials_per_scenario: cfg.trials,
        seeds: cfg.seeds.clone(),
        scenarios: scenario_reports,
        aggregate,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::{demo_library, grasp_demo};
    use crate::scenario::{two_step_plan, VariationLevel};
    use funcanon_core::fixtures::pour_demo;
    use funcanon_policy::{Mlp, PolicyConfig};

    fn entry(
        object_id: &str,
        verb: &str,
        role: Role,
        v_local: Vector3<f64>,
        z_angle: f64,
    ) -> AlignedFunction {
        AlignedFunction {
            object_id: object_id.into(),
            category: "fixture".into(),
            verb: verb.into(),
            role,
            v_local: [v_local.x, v_local.y, v_local.z],
            z_angle,
            anchor_id: "vessel-0".into(),
            residual: 0.0,
            symmetric: false,
        }
    }

    struct World {
        functions: FunctionTable,
        library: BTreeMap<String, Demonstration>,
        placements: BTreeMap<String, SE3Pose>,
        judge: Judge,
    }

    /// Two vessels and two cups; the second vessel's handle/spout heading
    /// is corrected by `dst_z_angle` in its canonical frames.
    fn world(dst_z_angle: f64) -> World {
        let placements: BTreeMap<String, SE3Pose> = [
            ("vessel-0", Vector3::new(0.45, 0.0, 0.0)),
            ("vessel-1", Vector3::new(0.45, 0.35, 0.0)),
            ("src-cup", Vector3::new(0.0, 0.40, 0.0)),
            ("dst-cup", Vector3::new(0.0, 0.70, 0.0)),
        ]
        .into_iter()
        .map(|(id, p)| (id.to_string(), SE3Pose::from_translation(p).unwrap()))
        .collect();

        let handle = Vector3::new(-0.10, 0.0, 0.35);
        let rim = Vector3::new(0.0, 0.0, 0.30);
        let mut functions = FunctionTable::default();
        functions
            .insert(entry("vessel-0", "grasp", Role::Active, handle, 0.0))
            .unwrap();
        functions
            .insert(entry("vessel-1", "grasp", Role::Active, handle, dst_z_angle))
            .unwrap();
        functions
            .insert(entry("src-cup", "pour", Role::Passive, rim, 0.0))
            .unwrap();
        functions
            .insert(entry("dst-cup", "pour", Role::Passive, rim, 0.0))
            .unwrap();

        let demos = vec![
            grasp_demo("g-ref", "vessel-0", *placements["vessel-0"].translation()),
            pour_demo(
                "p-ref",
                "vessel-0",
                "src-cup",
                *placements["vessel-0"].translation(),
                *placements["src-cup"].translation(),
            ),
        ];
        let library = demo_library(&demos).unwrap();
        let judge = Judge::new(functions.clone(), &library, &placements).unwrap();
        World {
            functions,
            library,
            placements,
            judge,
        }
    }

    fn scenario(id: &str, actor: &str, object: &str, placements: &BTreeMap<String, SE3Pose>) -> Scenario {
        Scenario {
            scenario_id: id.into(),
            plan: two_step_plan("pour", actor, object),
            placements: placements.clone(),
            variation: VariationLevel::Instance,
            position_epsilon: 0.02,
            orientation_epsilon: 0.1,
        }
    }

    fn transfer_ctx<'a>(w: &'a World, reanchor: Reanchor) -> ExecutionContext<'a> {
        ExecutionContext {
            functions: &w.functions,
            library: &w.library,
            base_placements: &w.placements,
            executor: ExecutorKind::Transfer,
            reanchor,
            policy: None,
            gripper_home: SE3Pose::from_translation(Vector3::new(0.0, 0.0, 0.5)).unwrap(),
        }
    }

    fn small_cfg() -> EvaluateConfig {
        EvaluateConfig {
            trials: 4,
            seeds: vec![0, 1],
            jitter: 0.004,
            ..EvaluateConfig::default()
        }
    }

    #[test]
    fn frame_reanchoring_succeeds_across_instances_and_placements() {
        let w = world(0.6);
        let ctx = transfer_ctx(&w, Reanchor::Frame);
        let scenarios = vec![
            scenario("a-same", "vessel-0", "src-cup", &w.placements),
            scenario("b-cross", "vessel-1", "dst-cup", &w.placements),
        ];
        let report = evaluate(&scenarios, &ctx, &w.judge, &small_cfg()).unwrap();
        assert_eq!(report.aggregate.sub1_rate, 1.0);
        assert_eq!(report.aggregate.sub2_rate, Some(1.0));
        assert_eq!(report.aggregate.success_rate, 1.0);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn offset_reanchoring_cannot_fix_a_heading_change() {
        let w = world(0.6);
        let ctx = transfer_ctx(&w, Reanchor::Offset);
        let scenarios = vec![
            scenario("a-same", "vessel-0", "src-cup", &w.placements),
            scenario("b-cross", "vessel-1", "dst-cup", &w.placements),
        ];
        let report = evaluate(&scenarios, &ctx, &w.judge, &small_cfg()).unwrap();
        // Same-instance episodes keep their heading and succeed outright.
        let same = &report.scenarios[0];
        assert_eq!(same.scenario_id, "a-same");
        assert_eq!(same.mean.success_rate, 1.0);
        // The turned sibling fails the grasp stage: a translation cannot
        // supply the 0.6 rad heading correction.
        let cross = &report.scenarios[1];
        assert_eq!(cross.mean.sub1_rate, 0.0);
        assert_eq!(cross.mean.sub2_rate, None);
    }

    #[test]
    fn large_jitter_is_absorbed_by_transfer_reanchoring() {
        let w = world(0.0);
        let ctx = transfer_ctx(&w, Reanchor::Offset);
        let scenarios = vec![scenario("jit", "vessel-1", "dst-cup", &w.placements)];
        let cfg = EvaluateConfig {
            jitter: 0.05,
            ..small_cfg()
        };
        let report = evaluate(&scenarios, &ctx, &w.judge, &cfg).unwrap();
        assert_eq!(report.aggregate.success_rate, 1.0);
    }

    #[test]
    fn repeated_sweeps_serialize_identically() {
        let w = world(0.3);
        let ctx = transfer_ctx(&w, Reanchor::Frame);
        let scenarios = vec![
            scenario("b", "vessel-1", "dst-cup", &w.placements),
            scenario("a", "vessel-0", "src-cup", &w.placements),
        ];
        let first = evaluate(&scenarios, &ctx, &w.judge, &small_cfg()).unwrap();
        let second = evaluate(&scenarios, &ctx, &w.judge, &small_cfg()).unwrap();
        assert_eq!(first.to_json(), second.to_json());
        // Scenario order in the report is by id, not input order.
        assert_eq!(first.scenarios[0].scenario_id, "a");

        let reordered: Vec<Scenario> = scenarios.iter().rev().cloned().collect();
        let third = evaluate(&reordered, &ctx, &w.judge, &small_cfg()).unwrap();
        assert_eq!(first.to_json(), third.to_json());
    }

    #[test]
    fn missing_reference_demo_records_failures_without_aborting() {
        let w = world(0.0);
        let empty_library = BTreeMap::new();
        let ctx = ExecutionContext {
            library: &empty_library,
            ..transfer_ctx(&w, Reanchor::Frame)
        };
        let scenarios = vec![scenario("s", "vessel-0", "src-cup", &w.placements)];
        let cfg = small_cfg();
        let report = evaluate(&scenarios, &ctx, &w.judge, &cfg).unwrap();
        assert_eq!(report.aggregate.sub1_rate, 0.0);
        assert_eq!(report.aggregate.sub2_rate, None);
        // One stage-one failure per episode per seed, none judged further.
        assert_eq!(report.failures.len(), cfg.trials * cfg.seeds.len());
        assert!(report.failures[0].reason.contains("grasp"));
    }

    #[test]
    fn zero_denoiser_policy_runs_deterministically_and_misses() {
        let w = world(0.0);
        let config = PolicyConfig {
            pose_width: 8,
            feature_dim: 4,
            verb_dim: 4,
            hidden: vec![],
            time_dim: 4,
            ..PolicyConfig::default()
        };
        let checkpoint = Checkpoint {
            denoiser: Mlp::zeros(config.denoiser_dims()).unwrap(),
            config,
            losses: vec![],
        };
        let bundle = PolicyBundle::new(checkpoint, &VerbVocabulary::default()).unwrap();
        let ctx = ExecutionContext {
            executor: ExecutorKind::Policy,
            policy: Some(&bundle),
            ..transfer_ctx(&w, Reanchor::Frame)
        };
        let scenarios = vec![scenario("s", "vessel-0", "src-cup", &w.placements)];
        let report = evaluate(&scenarios, &ctx, &w.judge, &small_cfg()).unwrap();
        let again = evaluate(&scenarios, &ctx, &w.judge, &small_cfg()).unwrap();
        assert_eq!(report.to_json(), again.to_json());
        // An all-zero chunk holds the start pose, far from the grasp point.
        assert_eq!(report.aggregate.sub1_rate, 0.0);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn executor_and_reanchor_parse_their_names() {
        assert_eq!("transfer".parse::<ExecutorKind>().unwrap(), ExecutorKind::Transfer);
        assert_eq!("policy".parse::<ExecutorKind>().unwrap(), ExecutorKind::Policy);
        assert!("robot".parse::<ExecutorKind>().is_err());
        assert_eq!("offset".parse::<Reanchor>().unwrap(), Reanchor::Offset);
        assert_eq!("frame".parse::<Reanchor>().unwrap(), Reanchor::Frame);
        assert!("teleport".parse::<Reanchor>().is_err());
        assert_eq!(ExecutorKind::Policy.to_string(), "policy");
        assert_eq!(Reanchor::Frame.to_string(), "frame");
    }
}
