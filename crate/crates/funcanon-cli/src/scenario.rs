//! Evaluation scenarios: a task plan plus world placements for every object
//! it touches, tagged with what kind of variation the scenario exercises.

use std::collections::BTreeMap;
use std::fmt;

use funcanon_core::decompose::{AVOPrimitive, TaskPlan, GRIPPER_ACTOR};
use funcanon_core::SE3Pose;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_POSITION_EPSILON: f64 = 0.02;
pub const DEFAULT_ORIENTATION_EPSILON: f64 = 0.1;

/// What differs from the reference setup: only placements, a sibling
/// instance of the same category, or an instance of another category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationLevel {
    Pose,
    Instance,
    Category,
}

impl fmt::Display for VariationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariationLevel::Pose => "pose",
            VariationLevel::Instance => "instance",
            VariationLevel::Category => "category",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario id is empty")]
    EmptyId,
    #[error("scenario {scenario_id} has an empty plan")]
    EmptyPlan { scenario_id: String },
    #[error("scenario {scenario_id} step {step} leaves {object_id:?} unplaced")]
    Unplaced {
        scenario_id: String,
        step: u32,
        object_id: String,
    },
    #[error("scenario {scenario_id} tolerance {name} must be positive and finite, got {value}")]
    BadTolerance {
        scenario_id: String,
        name: &'static str,
        value: f64,
    },
    #[error("scenario {scenario_id} has {steps} steps; judged tasks are two-stage")]
    NotTwoStage { scenario_id: String, steps: usize },
}

/// One evaluation setup: the plan to execute and where everything sits.
/// The robot gripper needs no placement — its pose is the trajectory under
/// judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub plan: TaskPlan,
    pub placements: BTreeMap<String, SE3Pose>,
    pub variation: VariationLevel,
    pub position_epsilon: f64,
    pub orientation_epsilon: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.scenario_id.is_empty() {
            return Err(ScenarioError::EmptyId);
        }
        if self.plan.steps.is_empty() {
            return Err(ScenarioError::EmptyPlan {
                scenario_id: self.scenario_id.clone(),
            });
        }
        for (name, value) in [
            ("position_epsilon", self.position_epsilon),
            ("orientation_epsilon", self.orientation_epsilon),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ScenarioError::BadTolerance {
                    scenario_id: self.scenario_id.clone(),
                    name,
                    value,
                });
            }
        }
        for step in &self.plan.steps {
            for id in [&step.actor, &step.object] {
                if id != GRIPPER_ACTOR && !self.placements.contains_key(id) {
                    return Err(ScenarioError::Unplaced {
                        scenario_id: self.scenario_id.clone(),
                        step: step.step,
                        object_id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The two judged sub-tasks, in order. Metrics are defined for
    /// two-stage plans (grasp, then the manipulation verb).
    pub fn two_steps(&self) -> Result<(&AVOPrimitive, &AVOPrimitive), ScenarioError> {
        match self.plan.steps.as_slice() {
            [first, second] => Ok((first, second)),
            steps => Err(ScenarioError::NotTwoStage {
                scenario_id: self.scenario_id.clone(),
                steps: steps.len(),
            }),
        }
    }
}

/// The canonical two-step plan: grasp the actor, then apply the verb to the
/// object.
pub fn two_step_plan(verb: &str, actor: &str, object: &str) -> TaskPlan {
    TaskPlan {
        task: format!("{verb} {actor} into {object}"),
        steps: vec![
            AVOPrimitive {
                step: 1,
                verb: "grasp".into(),
                actor: GRIPPER_ACTOR.into(),
                object: actor.into(),
            },
            AVOPrimitive {
                step: 2,
                verb: verb.into(),
                actor: actor.into(),
                object: object.into(),
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn placed(ids: &[&str]) -> BTreeMap<String, SE3Pose> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| {
                let pose = SE3Pose::from_translation(Vector3::new(i as f64, 0.0, 0.0)).unwrap();
                (id.to_string(), pose)
            })
            .collect()
    }

    fn scenario() -> Scenario {
        Scenario {
            scenario_id: "pour-kettle-0-cup-0".into(),
            plan: two_step_plan("pour", "kettle-0", "cup-0"),
            placements: placed(&["kettle-0", "cup-0"]),
            variation: VariationLevel::Pose,
            position_epsilon: DEFAULT_POSITION_EPSILON,
            orientation_epsilon: DEFAULT_ORIENTATION_EPSILON,
        }
    }

    #[test]
    fn complete_scenario_validates() {
        let s = scenario();
        s.validate().unwrap();
        let (first, second) = s.two_steps().unwrap();
        assert_eq!(first.verb, "grasp");
        assert_eq!(first.actor, GRIPPER_ACTOR);
        assert_eq!(first.object, "kettle-0");
        assert_eq!(second.verb, "pour");
        assert_eq!(second.object, "cup-0");
    }

    #[test]
    fn gripper_actor_needs_no_placement_but_objects_do() {
        let mut s = scenario();
        s.placements.remove("cup-0");
        match s.validate().unwrap_err() {
            ScenarioError::Unplaced { object_id, step, .. } => {
                assert_eq!(object_id, "cup-0");
                assert_eq!(step, 2);
            }
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn tolerances_must_be_positive_and_finite() {
        for bad in [0.0, -0.01, f64::NAN, f64::INFINITY] {
            let mut s = scenario();
            s.position_epsilon = bad;
            assert!(matches!(
                s.validate(),
                Err(ScenarioError::BadTolerance { name: "position_epsilon", .. })
            ));
        }
    }

    #[test]
    fn plans_of_other_lengths_are_rejected_for_judging() {
        let mut s = scenario();
        s.plan.steps.truncate(1);
        assert_eq!(
            s.two_steps().unwrap_err(),
            ScenarioError::NotTwoStage {
                scenario_id: s.scenario_id.clone(),
                steps: 1
            }
        );
    }

    #[test]
    fn variation_levels_serialize_lowercase() {
        assert_eq!(
            serde_json::to_string(&VariationLevel::Instance).unwrap(),
            "\"instance\""
        );
        let v: VariationLevel = serde_json::from_str("\"category\"").unwrap();
        assert_eq!(v, VariationLevel::Category);
        assert_eq!(VariationLevel::Pose.to_string(), "pose");
    }
}
