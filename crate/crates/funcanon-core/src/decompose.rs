//! Task decomposition: natural-language instructions become ordered
//! actor-verb-object steps, each manipulation preceded by a grasp of its
//! acting object. A pattern-table backend covers the supported task forms
//! offline; a remote chat backend produces the same JSON schema.

use crate::llm::{cache_key, ChatClient, ChatMessage, LlmError, ResponseCache};
use crate::recognition::VerbVocabulary;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRIPPER_ACTOR: &str = "robot gripper";

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("cannot decompose: {0}")]
    CannotDecompose(String),
    #[error("remote plan failed validation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
}

pub type Result<T> = std::result::Result<T, DecomposeError>;

/// One actor-verb-object step. The JSON field for the verb is `action`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AVOPrimitive {
    pub step: u32,
    #[serde(rename = "action")]
    pub verb: String,
    pub actor: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPlan {
    pub task: String,
    pub steps: Vec<AVOPrimitive>,
}

/// A broken plan invariant, tied to the step where it occurs (0 = the plan
/// as a whole).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanViolation {
    pub step: u32,
    pub rule: String,
    pub detail: String,
}

impl PlanViolation {
    fn new(step: u32, rule: &str, detail: impl Into<String>) -> Self {
        PlanViolation {
            step,
            rule: rule.into(),
            detail: detail.into(),
        }
    }
}

/// Check every plan invariant; an empty result means the plan is valid.
pub fn validate_plan(
    plan: &TaskPlan,
    vocabulary: &VerbVocabulary,
    known_objects: &[String],
) -> Vec<PlanViolation> {
    let mut violations = Vec::new();
    if plan.steps.is_empty() {
        violations.push(PlanViolation::new(0, "non-empty", "plan has no steps"));
    }
    for (i, step) in plan.steps.iter().enumerate() {
        let expected = i as u32 + 1;
        if step.step != expected {
            violations.push(PlanViolation::new(
                step.step,
                "contiguous-steps",
                format!("expected step {expected}, found {}", step.step),
            ));
        }
        if !vocabulary.contains(&step.verb) {
            violations.push(PlanViolation::new(
                step.step,
                "verb-vocabulary",
                format!("verb {:?} is not in the vocabulary", step.verb),
            ));
        }
        if step.actor == step.object {
            violations.push(PlanViolation::new(
                step.step,
                "actor-object-distinct",
                format!("actor and object are both {:?}", step.actor),
            ));
        }
        for (field, value) in [("actor", &step.actor), ("object", &step.object)] {
            if value != GRIPPER_ACTOR && !known_objects.iter().any(|o| o == value) {
                violations.push(PlanViolation::new(
                    step.step,
                    "known-object",
                    format!("{field} {value:?} is not a known object"),
                ));
            }
        }
    }
    violations
}

/// A manipulation clause recognized by the rules backend.
struct Clause {
    verb: String,
    actor: String,
    object: String,
}

/// Match one clause against the supported templates:
/// `put/pour/insert/stuck A in/into B`, `water B with A`, and the bare
/// `pour water` form that draws A and B from the object list.
fn parse_clause(clause: &str, objects: &[String]) -> Result<Clause> {
    let text = clause.trim().trim_end_matches('.').trim();
    if text.is_empty() {
        return Err(DecomposeError::CannotDecompose("empty clause".into()));
    }
    let lower = text.to_lowercase();

    let resolve = |phrase: &str| -> Result<String> {
        let phrase = phrase.trim();
        objects
            .iter()
            .find(|o| o.to_lowercase() == phrase)
            .cloned()
            .ok_or_else(|| {
                DecomposeError::CannotDecompose(format!("unknown object {phrase:?}"))
            })
    };

    if lower == "pour water" {
        if objects.len() < 2 {
            return Err(DecomposeError::CannotDecompose(
                "\"pour water\" needs a source and a target object".into(),
            ));
        }
        return Ok(Clause {
            verb: "pour".into(),
            actor: objects[0].clone(),
            object: objects[1].clone(),
        });
    }

    let (keyword, rest) = lower
        .split_once(' ')
        .ok_or_else(|| DecomposeError::CannotDecompose(format!("no template for {text:?}")))?;
    let verb = match keyword {
        "put" | "place" => "place",
        "pour" => "pour",
        "insert" | "stuck" => "insert",
        "water" => "water",
        other => {
            return Err(DecomposeError::CannotDecompose(format!(
                "unsupported action word {other:?}"
            )))
        }
    };

    if verb == "water" {
        // water B with A
        let (b, a) = rest.split_once(" with ").ok_or_else(|| {
            DecomposeError::CannotDecompose(format!("expected \"water <B> with <A>\" in {text:?}"))
        })?;
        return Ok(Clause {
            verb: verb.into(),
            actor: resolve(a)?,
            object: resolve(b)?,
        });
    }

    // <verb> A in/into B
    let (a, b) = rest
        .split_once(" into ")
        .or_else(|| rest.split_once(" in "))
        .ok_or_else(|| {
            DecomposeError::CannotDecompose(format!(
                "expected \"{keyword} <A> in/into <B>\" in {text:?}"
            ))
        })?;
    Ok(Clause {
        verb: verb.into(),
        actor: resolve(a)?,
        object: resolve(b)?,
    })
}

/// Deterministic pattern-table decomposition. Clauses are split on "then";
/// each clause expands to a grasp of its acting object followed by the
/// manipulation itself.
pub fn decompose_rules(task: &str, objects: &[String]) -> Result<TaskPlan> {
    if task.trim().is_empty() {
        return Err(DecomposeError::CannotDecompose("empty task".into()));
    }
    let normalized = task.replace(", then ", " then ").replace(",then ", " then ");
    let mut steps = Vec::new();
    for clause in normalized.split(" then ") {
        let parsed = parse_clause(clause, objects)?;
        steps.push(AVOPrimitive {
            step: steps.len() as u32 + 1,
            verb: "grasp".into(),
            actor: GRIPPER_ACTOR.into(),
            object: parsed.actor.clone(),
        });
        steps.push(AVOPrimitive {
            step: steps.len() as u32 + 1,
            verb: parsed.verb,
            actor: parsed.actor,
            object: parsed.object,
        });
    }
    Ok(TaskPlan {
        task: task.to_string(),
        steps,
    })
}

/// Chat-model decomposition with cached, schema-validated replies. Replies
/// that fail validation are rejected outright.
#[derive(Debug)]
pub struct RemoteDecomposer {
    client: ChatClient,
    cache: ResponseCache,
}

impl RemoteDecomposer {
    pub fn new(client: ChatClient, cache: ResponseCache) -> Self {
        RemoteDecomposer { client, cache }
    }

    fn prompt(task: &str, objects: &[String]) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(
                "You plan for a 6-DOF robot arm. Decompose the given task into \
                 numbered actor-verb-object steps. Grasp an object (actor \
                 \"robot gripper\") before using it. Reply with JSON only, \
                 shaped as {\"task\": str, \"steps\": [{\"step\": int, \
                 \"action\": str, \"actor\": str, \"object\": str}]}.",
            ),
            ChatMessage::user(format!(
                "Task: {task}\nAvailable objects: {}",
                objects.join(", ")
            )),
        ]
    }

    fn decompose(
        &self,
        task: &str,
        objects: &[String],
        vocabulary: &VerbVocabulary,
    ) -> Result<TaskPlan> {
        let key = cache_key(&("decompose", task, objects));
        let reply = match self.cache.get(&key) {
            Some(cached) => cached,
            None => {
                let reply = self.client.complete(&Self::prompt(task, objects))?;
                self.cache.put(key, reply.clone())?;
                reply
            }
        };
        let plan: TaskPlan = serde_json::from_str(&reply)
            .map_err(|e| DecomposeError::Protocol(format!("reply is not a plan: {e}")))?;
        let violations = validate_plan(&plan, vocabulary, objects);
        if !violations.is_empty() {
            return Err(DecomposeError::Protocol(format!(
                "{} violation(s), first: {} (step {})",
                violations.len(),
                violations[0].detail,
                violations[0].step
            )));
        }
        Ok(plan)
    }
}

pub enum DecomposerBackend {
    Rules,
    Remote(RemoteDecomposer),
}

pub fn decompose(
    task: &str,
    objects: &[String],
    backend: &DecomposerBackend,
    vocabulary: &VerbVocabulary,
) -> Result<TaskPlan> {
    match backend {
        DecomposerBackend::Rules => decompose_rules(task, objects),
        DecomposerBackend::Remote(remote) => remote.decompose(task, objects, vocabulary),
    }
}
