//! Binary functional relevance: given a candidate region, an action verb, and
//! a role hypothesis, decide whether the region serves that function. Backed
//! either by a rule table (offline) or a remote chat model, with decisions
//! cached for deterministic replay.

use crate::geometry::PointCloud;
use crate::llm::{cache_key, ChatClient, ChatMessage, LlmError, ResponseCache};
use crate::region::FunctionalRegion;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_VERBS: [&str; 5] = ["grasp", "pour", "place", "insert", "water"];

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("verb {0:?} not in the configured vocabulary")]
    UnknownVerb(String),
    #[error("role must be \"active\" or \"passive\", got {0:?}")]
    BadRole(String),
    #[error("region {region_id} has no label; the rule table keys on labels")]
    UnlabeledRegion { region_id: usize },
    #[error("no rule for ({category}, {verb}, {role}, {label})")]
    UnknownQuery {
        category: String,
        verb: String,
        role: Role,
        label: String,
    },
    #[error("rule table: {0}")]
    Table(String),
    #[error("region {region_id} indexes point {index} outside cloud of {len}")]
    RegionOutOfBounds {
        region_id: usize,
        index: usize,
        len: usize,
    },
    #[error("classifier answered {0:?}, expected True or False")]
    BadAnswer(String),
    #[error(transparent)]
    Backend(#[from] LlmError),
}

pub type Result<T> = std::result::Result<T, RecognitionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Active,
    Passive,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Active => "active",
            Role::Passive => "passive",
        })
    }
}

impl FromStr for Role {
    type Err = RecognitionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(Role::Active),
            "passive" => Ok(Role::Passive),
            other => Err(RecognitionError::BadRole(other.into())),
        }
    }
}

/// Configured action-verb vocabulary; defaults to the verbs the tasks use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbVocabulary(Vec<String>);

impl Default for VerbVocabulary {
    fn default() -> Self {
        VerbVocabulary(DEFAULT_VERBS.iter().map(|s| s.to_string()).collect())
    }
}

impl VerbVocabulary {
    pub fn new(verbs: impl IntoIterator<Item = impl Into<String>>) -> Self {
        VerbVocabulary(verbs.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, verb: &str) -> bool {
        self.0.iter().any(|v| v == verb)
    }

    pub fn verbs(&self) -> &[String] {
        &self.0
    }

    pub fn check(&self, verb: &str) -> Result<()> {
        if self.contains(verb) {
            Ok(())
        } else {
            Err(RecognitionError::UnknownVerb(verb.into()))
        }
    }
}

/// Plain-data rendering of a region for the classifier: where it sits, how
/// big it is, and how high up the object it lies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub centroid: [f64; 3],
    pub extent: [f64; 3],
    pub height_fraction: f64,
}

impl RegionSummary {
    pub fn describe(region: &FunctionalRegion, cloud: &PointCloud) -> Result<Self> {
        let points = cloud.points();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &region.point_indices {
            let p = points.get(i).ok_or(RecognitionError::RegionOutOfBounds {
                region_id: region.region_id,
                index: i,
                len: points.len(),
            })?;
            for axis in 0..3 {
                lo[axis] = lo[axis].min(p[axis]);
                hi[axis] = hi[axis].max(p[axis]);
            }
        }
        let (cloud_lo, cloud_hi) = cloud.bounds().expect("regions imply a non-empty cloud");
        let z_extent = cloud_hi.z - cloud_lo.z;
        let height_fraction = if z_extent > 0.0 {
            (region.centroid.z - cloud_lo.z) / z_extent
        } else {
            0.0
        };
        Ok(RegionSummary {
            centroid: [region.centroid.x, region.centroid.y, region.centroid.z],
            extent: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
            height_fraction,
        })
    }
}

/// One classification question: is `region` functionally relevant for `verb`
/// when the object plays `role`?
#[derive(Debug, Clone)]
pub struct FunctionQuery<'a> {
    pub region: &'a FunctionalRegion,
    pub verb: String,
    pub role: Role,
    pub category: String,
    pub summary: RegionSummary,
}

impl<'a> FunctionQuery<'a> {
    pub fn new(
        region: &'a FunctionalRegion,
        cloud: &PointCloud,
        verb: impl Into<String>,
        role: Role,
        category: impl Into<String>,
        vocabulary: &VerbVocabulary,
    ) -> Result<Self> {
        let verb = verb.into();
        vocabulary.check(&verb)?;
        Ok(FunctionQuery {
            region,
            verb,
            role,
            category: category.into(),
            summary: RegionSummary::describe(region, cloud)?,
        })
    }

    fn key(&self) -> String {
        cache_key(&(&self.category, &self.verb, self.role, &self.summary))
    }

    fn prompt(&self) -> Vec<ChatMessage> {
        let s = &self.summary;
        vec![
            ChatMessage::system(
                "You judge whether a candidate region of an object serves a given \
                 function. Reply with exactly one word: True or False.",
            ),
            ChatMessage::user(format!(
                "Object category: {}. Region centroid (m): [{:.4}, {:.4}, {:.4}]. \
                 Region extent (m): [{:.4}, {:.4}, {:.4}]. Height fraction: {:.3}. \
                 Hypothesis: action \"{}\", role \"{}\". Is this region functionally \
                 relevant to the hypothesis?",
                self.category,
                s.centroid[0],
                s.centroid[1],
                s.centroid[2],
                s.extent[0],
                s.extent[1],
                s.extent[2],
                s.height_fraction,
                self.verb,
                self.role,
            )),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleEntry {
    category: String,
    verb: String,
    role: Role,
    region_label: String,
    decision: bool,
}

/// Lookup table over (category, verb, role, region label). Total over its
/// entries; anything else is an explicit unknown-query error.
#[derive(Debug, Clone, Default)]
pub struct OracleTable {
    rules: BTreeMap<(String, String, Role, String), bool>,
}

impl OracleTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<RuleEntry> =
            serde_json::from_str(text).map_err(|e| RecognitionError::Table(e.to_string()))?;
        let mut rules = BTreeMap::new();
        for e in entries {
            let key = (e.category, e.verb, e.role, e.region_label);
            if rules.insert(key.clone(), e.decision).is_some() {
                return Err(RecognitionError::Table(format!(
                    "duplicate rule for ({}, {}, {}, {})",
                    key.0, key.1, key.2, key.3
                )));
            }
        }
        Ok(OracleTable { rules })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RecognitionError::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn insert(
        &mut self,
        category: impl Into<String>,
        verb: impl Into<String>,
        role: Role,
        label: impl Into<String>,
        decision: bool,
    ) {
        self.rules
            .insert((category.into(), verb.into(), role, label.into()), decision);
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn lookup(&self, q: &FunctionQuery) -> Result<bool> {
        let label = q.region.label.as_deref().ok_or(
            RecognitionError::UnlabeledRegion {
                region_id: q.region.region_id,
            },
        )?;
        self.rules
            .get(&(
                q.category.clone(),
                q.verb.clone(),
                q.role,
                label.to_string(),
            ))
            .copied()
            .ok_or_else(|| RecognitionError::UnknownQuery {
                category: q.category.clone(),
                verb: q.verb.clone(),
                role: q.role,
                label: label.to_string(),
            })
    }
}

/// Chat-model classifier with a persistent decision cache: a warm cache
/// answers without any network traffic.
#[derive(Debug)]
pub struct RemoteClassifier {
    client: ChatClient,
    cache: ResponseCache,
}

impl RemoteClassifier {
    pub fn new(client: ChatClient, cache: ResponseCache) -> Self {
        RemoteClassifier { client, cache }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    fn classify(&self, q: &FunctionQuery) -> Result<bool> {
        let key = q.key();
        if let Some(cached) = self.cache.get(&key) {
            return parse_answer(&cached);
        }
        let answer = self.client.complete(&q.prompt())?;
        let decision = parse_answer(&answer)?;
        self.cache
            .put(key, if decision { "True" } else { "False" })?;
        Ok(decision)
    }
}

fn parse_answer(answer: &str) -> Result<bool> {
    match answer.trim().trim_end_matches('.').to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(RecognitionError::BadAnswer(answer.into())),
    }
}

pub enum ClassifierBackend {
    Oracle(OracleTable),
    Remote(RemoteClassifier),
}

pub fn classify_region(q: &FunctionQuery, backend: &ClassifierBackend) -> Result<bool> {
    match backend {
        ClassifierBackend::Oracle(table) => table.lookup(q),
        ClassifierBackend::Remote(remote) => remote.classify(q),
    }
}

/// Regions of one object accepted for (verb, role), in proposal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSet {
    pub object_id: String,
    pub verb: String,
    pub role: Role,
    pub regions: Vec<FunctionalRegion>,
}

#[allow(clippy::too_many_arguments)]
pub fn build_functional_set(
    regions: &[FunctionalRegion],
    cloud: &PointCloud,
    object_id: &str,
    verb: &str,
    role: Role,
    category: &str,
    vocabulary: &VerbVocabulary,
    backend: &ClassifierBackend,
) -> Result<FunctionalSet> {
    let mut accepted = Vec::new();
    for region in regions {
        let q = FunctionQuery::new(region, cloud, verb, role, category, vocabulary)?;
        if classify_region(&q, backend)? {
            accepted.push(region.clone());
        }
    }
    if accepted.is_empty() {
        log::warn!("no region of {object_id} accepted for ({verb}, {role})");
    }
    Ok(FunctionalSet {
        object_id: object_id.into(),
        verb: verb.into(),
        role,
        regions: accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn toy_cloud() -> PointCloud {
        PointCloud::new(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(0.2, 0.0, 0.1),
                Vector3::new(0.0, 0.2, 0.4),
                Vector3::new(0.2, 0.2, 0.5),
            ],
            None,
        )
        .unwrap()
    }

    fn labeled_region(region_id: usize, indices: &[usize], cloud: &PointCloud, label: &str) -> FunctionalRegion {
        let mut centroid = Vector3::zeros();
        for &i in indices {
            centroid += cloud.points()[i];
        }
        centroid /= indices.len() as f64;
        FunctionalRegion {
            region_id,
            point_indices: indices.to_vec(),
            centroid,
            feature_centroid: vec![],
            label: Some(label.into()),
        }
    }

    #[test]
    fn single_entry_table_answers_match_and_miss() {
        let table = OracleTable::from_json(
            r#"[{"category":"mug","verb":"grasp","role":"active","region_label":"handle","decision":true}]"#,
        )
        .unwrap();
        let backend = ClassifierBackend::Oracle(table);
        let cloud = toy_cloud();
        let region = labeled_region(0, &[0, 1], &cloud, "handle");
        let vocab = VerbVocabulary::default();

        let hit = FunctionQuery::new(&region, &cloud, "grasp", Role::Active, "mug", &vocab).unwrap();
        assert!(classify_region(&hit, &backend).unwrap());

        let miss = FunctionQuery::new(&region, &cloud, "pour", Role::Active, "mug", &vocab).unwrap();
        assert!(matches!(
            classify_region(&miss, &backend),
            Err(RecognitionError::UnknownQuery { .. })
        ));
    }

    #[test]
    fn duplicate_rules_rejected() {
        let text = r#"[
            {"category":"mug","verb":"grasp","role":"active","region_label":"handle","decision":true},
            {"category":"mug","verb":"grasp","role":"active","region_label":"handle","decision":false}
        ]"#;
        assert!(matches!(
            OracleTable::from_json(text),
            Err(RecognitionError::Table(_))
        ));
    }

    #[test]
    fn unlabeled_region_is_an_error_for_the_table() {
        let mut table = OracleTable::default();
        table.insert("mug", "grasp", Role::Active, "handle", true);
        let backend = ClassifierBackend::Oracle(table);
        let cloud = toy_cloud();
        let mut region = labeled_region(0, &[0], &cloud, "handle");
        region.label = None;
        let q = FunctionQuery::new(
            &region,
            &cloud,
            "grasp",
            Role::Active,
            "mug",
            &VerbVocabulary::default(),
        )
        .unwrap();
        assert!(matches!(
            classify_region(&q, &backend),
            Err(RecognitionError::UnlabeledRegion { region_id: 0 })
        ));
    }

    #[test]
    fn vocabulary_gates_queries() {
        let cloud = toy_cloud();
        let region = labeled_region(0, &[0], &cloud, "handle");
        let err = FunctionQuery::new(
            &region,
            &cloud,
            "levitate",
            Role::Active,
            "mug",
            &VerbVocabulary::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RecognitionError::UnknownVerb(_)));
    }

    #[test]
    fn summary_reports_extent_and_height() {
        let cloud = toy_cloud();
        let region = labeled_region(1, &[2, 3], &cloud, "top");
        let summary = RegionSummary::describe(&region, &cloud).unwrap();
        for (got, want) in summary.extent.iter().zip([0.2, 0.0, 0.1]) {
            assert!((got - want).abs() < 1e-15, "extent {got} != {want}");
        }
        assert!((summary.height_fraction - 0.9).abs() < 1e-12);

        let bad = FunctionalRegion {
            point_indices: vec![9],
            ..region
        };
        assert!(matches!(
            RegionSummary::describe(&bad, &cloud),
            Err(RecognitionError::RegionOutOfBounds { index: 9, len: 4, .. })
        ));
    }

    #[test]
    fn filter_keeps_exactly_the_accepted_regions() {
        let cloud = toy_cloud();
        let bottom = labeled_region(0, &[0, 1], &cloud, "bottom");
        let top = labeled_region(1, &[2, 3], &cloud, "top");
        let mut table = OracleTable::default();
        table.insert("box", "grasp", Role::Active, "bottom", false);
        table.insert("box", "grasp", Role::Active, "top", true);
        let backend = ClassifierBackend::Oracle(table);
        let vocab = VerbVocabulary::default();

        let set = build_functional_set(
            &[bottom.clone(), top.clone()],
            &cloud,
            "box-0",
            "grasp",
            Role::Active,
            "box",
            &vocab,
            &backend,
        )
        .unwrap();
        assert_eq!(set.regions, vec![top.clone()]);

        // Re-check both directions against the backend.
        for region in &[bottom, top] {
            let q = FunctionQuery::new(region, &cloud, "grasp", Role::Active, "box", &vocab).unwrap();
            let accepted = classify_region(&q, &backend).unwrap();
            assert_eq!(accepted, set.regions.contains(region));
        }
    }

    #[test]
    fn all_rejected_is_a_legal_empty_set() {
        let cloud = toy_cloud();
        let region = labeled_region(0, &[0, 1, 2, 3], &cloud, "body");
        let mut table = OracleTable::default();
        table.insert("can", "grasp", Role::Active, "body", false);
        let set = build_functional_set(
            &[region],
            &cloud,
            "can-0",
            "grasp",
            Role::Active,
            "can",
            &VerbVocabulary::default(),
            &ClassifierBackend::Oracle(table),
        )
        .unwrap();
        assert!(set.regions.is_empty());
    }

    #[test]
    fn answers_parse_strictly() {
        assert!(parse_answer("True").unwrap());
        assert!(parse_answer(" true.\n").unwrap());
        assert!(!parse_answer("FALSE").unwrap());
        assert!(matches!(
            parse_answer("probably"),
            Err(RecognitionError::BadAnswer(_))
        ));
        assert!(matches!(
            parse_answer("True, because"),
            Err(RecognitionError::BadAnswer(_))
        ));
    }

    #[test]
    fn role_round_trips_through_serde_and_str() {
        assert_eq!(serde_json::to_string(&Role::Active).unwrap(), "\"active\"");
        assert_eq!(
            serde_json::from_str::<Role>("\"passive\"").unwrap(),
            Role::Passive
        );
        assert_eq!("active".parse::<Role>().unwrap(), Role::Active);
        assert!("neutral".parse::<Role>().is_err());
    }
}
