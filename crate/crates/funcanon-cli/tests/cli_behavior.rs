//! Process-level checks of the `funcanon` binary: exit codes, flag
//! overrides, stage sequencing, and artifact round trips.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use funcanon_core::fixtures::pour_demo;
use funcanon_core::Trajectory;
use nalgebra::Vector3;
use serde_json::Value;
use tempfile::TempDir;

fn funcanon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcanon"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary launches")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A two-object desk small enough for fast process tests.
const TINY_CONFIG: &str = r#"
seed = 1

[[objects]]
id = "kettle-0"
category = "kettle"
shape = "vessel"
points_per_lobe = 16
place = [0.45, 0.0, 0.0]

[[objects]]
id = "cup-0"
category = "cup"
shape = "cup"
points_per_lobe = 16
place = [0.0, 0.4, 0.0]

[[demos]]
demo_id = "grasp-ref"
verb = "grasp"
object = "kettle-0"

[[demos]]
demo_id = "pour-ref"
verb = "pour"
actor = "kettle-0"
object = "cup-0"

[evaluate]
trials = 2
seeds = [0]

[train]
pose_width = 8
feature_dim = 4
verb_dim = 4
hidden = [16]
time_dim = 4
t_train = 10
t_infer = 5
epochs = 3
batch = 4
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("config.toml"), TINY_CONFIG).unwrap();
        Workspace { dir }
    }

    fn run(&self, extra: &[&str]) -> Output {
        let mut args = vec!["--config", "config.toml", "--out-dir", "out"];
        args.extend_from_slice(extra);
        funcanon(self.dir.path(), &args)
    }

    fn artifact(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join("out").join(name)
    }
}

#[test]
fn decompose_prints_a_two_step_plan() {
    let dir = TempDir::new().unwrap();
    let out = funcanon(
        dir.path(),
        &["decompose", "--task", "pour water", "--objects", "teapot,cup"],
    );
    assert_exit(&out, 0);
    let plan: Value = serde_json::from_slice(&out.stdout).unwrap();
    let steps = plan["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    assert_eq!(steps[0]["action"], "grasp");
    assert_eq!(steps[0]["actor"], "robot gripper");
    assert_eq!(steps[0]["object"], "teapot");
    assert_eq!(steps[1]["action"], "pour");
    assert_eq!(steps[1]["actor"], "teapot");
    assert_eq!(steps[1]["object"], "cup");
}

#[test]
fn missing_config_file_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = funcanon(dir.path(), &["--config", "/nonexistent/f.toml", "align"]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/f.toml"));
}

#[test]
fn invalid_config_contents_exit_two() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "[evaluate]\ntrials = 0\n").unwrap();
    let out = funcanon(dir.path(), &["--config", "bad.toml", "propose"]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn unknown_flag_values_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = funcanon(dir.path(), &["evaluate", "--executor", "warp"]);
    assert_exit(&out, 2);
}

#[test]
fn stage_run_out_of_order_exits_three() {
    let ws = Workspace::new();
    let out = ws.run(&["recognize"]);
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("proposals.json"));
}

#[test]
fn stages_chain_into_a_report_and_flags_override_the_config() {
    let ws = Workspace::new();
    for stage in ["propose", "recognize", "align", "transfer", "train"] {
        assert_exit(&ws.run(&[stage]), 0);
    }
    for name in [
        "proposals.json",
        "functional_sets.json",
        "alignments.json",
        "transfers.jsonl",
        "checkpoint.json",
    ] {
        assert!(ws.artifact(name).exists(), "missing {name}");
    }

    // The seeds flag must reach the report, overriding `seeds = [0]`.
    let out = ws.run(&["evaluate", "--seeds", "5,6", "--trials", "3"]);
    assert_exit(&out, 0);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(ws.artifact("report.json")).unwrap()).unwrap();
    assert_eq!(report["seeds"], serde_json::json!([5, 6]));
    assert_eq!(report["trials_per_scenario"], 3);
    let table = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(table.contains("aggregate"), "{table}");
}

#[test]
fn explicit_empty_transfer_targets_exit_three() {
    let ws = Workspace::new();
    assert_exit(&ws.run(&["propose"]), 0);
    assert_exit(&ws.run(&["recognize"]), 0);
    assert_exit(&ws.run(&["align"]), 0);
    fs::write(
        ws.dir.path().join("empty.toml"),
        format!("{TINY_CONFIG}\n[transfer]\ntargets = []\n"),
    )
    .unwrap();
    let out = funcanon(
        ws.dir.path(),
        &["--config", "empty.toml", "--out-dir", "out", "transfer"],
    );
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no transfer targets"));
}

#[test]
fn training_on_supplied_demos_feeds_inference() {
    let ws = Workspace::new();
    let demos = vec![pour_demo(
        "external-0",
        "kettle-0",
        "cup-0",
        Vector3::new(0.45, 0.0, 0.0),
        Vector3::new(0.0, 0.4, 0.0),
    )];
    fs::write(
        ws.dir.path().join("demos.json"),
        serde_json::to_string(&demos).unwrap(),
    )
    .unwrap();
    assert_exit(&ws.run(&["train", "--data", "demos.json", "--epochs", "2"]), 0);
    assert!(ws.artifact("checkpoint.json").exists());

    let state = serde_json::json!({
        "actor_pose": {"rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0.45, 0.0, 0.0]},
        "object_pose": {"rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0.0, 0.4, 0.0]},
        "actor": "kettle-0",
        "object": "cup-0",
        "verb": "pour",
    });
    fs::write(ws.dir.path().join("state.json"), state.to_string()).unwrap();
    let out = ws.run(&["infer", "--state", "state.json", "--sample-seed", "3"]);
    assert_exit(&out, 0);
    let trajectory: Trajectory = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(trajectory.waypoints().len(), 9);

    // The same sampling seed reproduces the trajectory bit for bit.
    let again = ws.run(&["infer", "--state", "state.json", "--sample-seed", "3"]);
    assert_exit(&again, 0);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn full_pipeline_command_writes_everything() {
    let ws = Workspace::new();
    let out = ws.run(&["pipeline"]);
    assert_exit(&out, 0);
    for name in [
        "config.json",
        "proposals.json",
        "functional_sets.json",
        "alignments.json",
        "transfers.jsonl",
        "checkpoint.json",
        "report.json",
    ] {
        assert!(ws.artifact(name).exists(), "missing {name}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("kettle-0--cup-0"), "{stdout}");
    assert!(stdout.contains("aggregate"), "{stdout}");
}
