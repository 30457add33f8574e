//! Success metrics and the serialized evaluation report. Tasks here are
//! two-stage (grasp then manipulate): the second stage is only attempted
//! when the first succeeds, so its rate is conditional by construction.

use serde::{Deserialize, Serialize};

use crate::evaluate::ExecutorKind;
use crate::scenario::VariationLevel;

/// What happened in one episode: did stage one succeed, and — only if it
/// did — did stage two. `sub2 = None` means stage two was never attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub sub1: bool,
    pub sub2: Option<bool>,
}

impl EpisodeOutcome {
    pub fn full_success(&self) -> bool {
        self.sub1 && self.sub2 == Some(true)
    }
}

/// Success counts over a batch of episodes. Rates derive from the counts:
/// the stage-two rate conditions on stage-one successes and is undefined
/// (reported as null) when there are none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub trials: usize,
    pub sub1_successes: usize,
    pub sub2_successes: usize,
}

impl Metrics {
    pub fn from_outcomes(outcomes: &[EpisodeOutcome]) -> Metrics {
        let mut m = Metrics {
            trials: outcomes.len(),
            sub1_successes: 0,
            sub2_successes: 0,
        };
        for o in outcomes {
            debug_assert!(
                o.sub1 || o.sub2.is_none(),
                "stage two must not run after a stage-one failure"
            );
            if o.sub1 {
                m.sub1_successes += 1;
            }
            if o.full_success() {
                m.sub2_successes += 1;
            }
        }
        m
    }

    /// Stage-one successes over all trials.
    pub fn sub1_rate(&self) -> f64 {
        self.sub1_successes as f64 / self.trials as f64
    }

    /// Stage-two successes over stage-one successes; undefined when stage
    /// one never succeeded.
    pub fn sub2_rate(&self) -> Option<f64> {
        if self.sub1_successes == 0 {
            None
        } else {
            Some(self.sub2_successes as f64 / self.sub1_successes as f64)
        }
    }

    /// Full-task successes over all trials. For a two-stage task this is
    /// the product of the stage rates, exactly in counts.
    pub fn success_rate(&self) -> f64 {
        self.sub2_successes as f64 / self.trials as f64
    }
}

/// One seed's counts and rates, ready for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub trials: usize,
    pub sub1_successes: usize,
    pub sub2_successes: usize,
    pub sub1_rate: f64,
    pub sub2_rate: Option<f64>,
    pub success_rate: f64,
}

impl SeedMetrics {
    pub fn new(seed: u64, m: &Metrics) -> SeedMetrics {
        SeedMetrics {
            seed,
            trials: m.trials,
            sub1_successes: m.sub1_successes,
            sub2_successes: m.sub2_successes,
            sub1_rate: m.sub1_rate(),
            sub2_rate: m.sub2_rate(),
            success_rate: m.success_rate(),
        }
    }
}

/// A triple of rates; the conditional stage-two rate is null when it was
/// undefined for every contributing seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub sub1_rate: f64,
    pub sub2_rate: Option<f64>,
    pub success_rate: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Mean and population standard deviation of each rate across seeds.
pub fn summarize_seeds(per_seed: &[SeedMetrics]) -> (RateSummary, RateSummary) {
    let sub1: Vec<f64> = per_seed.iter().map(|s| s.sub1_rate).collect();
    let sr: Vec<f64> = per_seed.iter().map(|s| s.success_rate).collect();
    let sub2: Vec<f64> = per_seed.iter().filter_map(|s| s.sub2_rate).collect();
    let (sub2_mean, sub2_std) = if sub2.is_empty() {
        (None, None)
    } else {
        (Some(mean(&sub2)), Some(population_std(&sub2)))
    };
    (
        RateSummary {
            sub1_rate: mean(&sub1),
            sub2_rate: sub2_mean,
            success_rate: mean(&sr),
        },
        RateSummary {
            sub1_rate: population_std(&sub1),
            sub2_rate: sub2_std,
            success_rate: population_std(&sr),
        },
    )
}

/// One scenario's results across all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario_id: String,
    pub variation: VariationLevel,
    pub position_epsilon: f64,
    pub orientation_epsilon: f64,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: RateSummary,
    pub std: RateSummary,
}

/// An episode whose execution or judgment errored. The episode still counts
/// as a failure; the sweep never aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub scenario_id: String,
    pub seed: u64,
    pub episode: usize,
    pub step: u32,
    pub reason: String,
}

/// The full evaluation artifact. Scenarios are sorted by id and every field
/// is computed deterministically, so two runs with the same config and seed
/// set serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub executor: ExecutorKind,
    pub trials_per_scenario: usize,
    pub seeds: Vec<u64>,
    pub scenarios: Vec<ScenarioReport>,
    pub aggregate: SeedMetrics,
    pub failures: Vec<FailureRecord>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl EvalReport {
    /// Pooled counts over every scenario and seed (the `seed` field of the
    /// aggregate is meaningless and set to 0).
    pub fn aggregate_of(scenarios: &[ScenarioReport]) -> SeedMetrics {
        let mut pooled = Metrics {
            trials: 0,
            sub1_successes: 0,
            sub2_successes: 0,
        };
        for sc in scenarios {
            for s in &sc.per_seed {
                pooled.trials += s.trials;
                pooled.sub1_successes += s.sub1_successes;
                pooled.sub2_successes += s.sub2_successes;
            }
        }
        SeedMetrics::new(0, &pooled)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcomes(trials: usize, sub1: usize, sub2: usize) -> Vec<EpisodeOutcome> {
        assert!(sub2 <= sub1 && sub1 <= trials);
        (0..trials)
            .map(|i| EpisodeOutcome {
                sub1: i < sub1,
                sub2: if i < sub1 { Some(i < sub2) } else { None },
            })
            .collect()
    }

    #[test]
    fn published_row_arithmetic_holds() {
        let m = Metrics::from_outcomes(&outcomes(25, 16, 10));
        assert!((m.sub1_rate() * 100.0 - 64.0).abs() < 1e-9);
        assert!((m.sub2_rate().unwrap() * 100.0 - 62.5).abs() < 1e-9);
        assert!((m.success_rate() * 100.0 - 40.0).abs() < 1e-9);
        let product = m.sub1_rate() * m.sub2_rate().unwrap();
        assert!((product - m.success_rate()).abs() < 1e-12);
    }

    #[test]
    fn conditional_rate_is_null_without_stage_one_successes() {
        let m = Metrics::from_outcomes(&outcomes(5, 0, 0));
        assert_eq!(m.sub2_rate(), None);
        assert_eq!(m.sub1_rate(), 0.0);
        assert_eq!(m.success_rate(), 0.0);
        let s = SeedMetrics::new(3, &m);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"sub2_rate\":null"), "{text}");
    }

    #[test]
    fn rates_stay_in_unit_interval_and_ordered() {
        for trials in 1..6usize {
            for sub1 in 0..=trials {
                for sub2 in 0..=sub1 {
                    let m = Metrics::from_outcomes(&outcomes(trials, sub1, sub2));
                    assert!((0.0..=1.0).contains(&m.sub1_rate()));
                    assert!((0.0..=1.0).contains(&m.success_rate()));
                    assert!(m.success_rate() <= m.sub1_rate() + 1e-15);
                    if let Some(r2) = m.sub2_rate() {
                        assert!((0.0..=1.0).contains(&r2));
                        assert!((m.sub1_rate() * r2 - m.success_rate()).abs() < 1e-12);
                        assert!(
                            (r2 - m.sub2_successes as f64 / m.sub1_successes as f64).abs() == 0.0
                        );
                    } else {
                        assert_eq!(m.sub1_successes, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn all_pass_episodes_give_perfect_rates() {
        let m = Metrics::from_outcomes(&outcomes(25, 25, 25));
        assert_eq!(m.sub1_rate(), 1.0);
        assert_eq!(m.sub2_rate(), Some(1.0));
        assert_eq!(m.success_rate(), 1.0);
    }

    #[test]
    fn seed_summary_means_and_stds_match_hand_computation() {
        let a = SeedMetrics::new(0, &Metrics::from_outcomes(&outcomes(4, 4, 2)));
        let b = SeedMetrics::new(1, &Metrics::from_outcomes(&outcomes(4, 2, 2)));
        let (mean, std) = summarize_seeds(&[a, b]);
        assert!((mean.sub1_rate - 0.75).abs() < 1e-15);
        assert!((mean.success_rate - 0.5).abs() < 1e-15);
        // sub2 rates are 0.5 and 1.0.
        assert!((mean.sub2_rate.unwrap() - 0.75).abs() < 1e-15);
        assert!((std.sub1_rate - 0.25).abs() < 1e-15);
        assert!((std.sub2_rate.unwrap() - 0.25).abs() < 1e-15);
        assert!((std.success_rate - 0.0).abs() < 1e-15);
    }

    #[test]
    fn seed_summary_drops_undefined_conditionals() {
        let a = SeedMetrics::new(0, &Metrics::from_outcomes(&outcomes(3, 0, 0)));
        let b = SeedMetrics::new(1, &Metrics::from_outcomes(&outcomes(3, 3, 3)));
        let (mean, _) = summarize_seeds(&[a.clone(), b]);
        assert_eq!(mean.sub2_rate, Some(1.0));
        let (mean_none, std_none) = summarize_seeds(&[a]);
        assert_eq!(mean_none.sub2_rate, None);
        assert_eq!(std_none.sub2_rate, None);
    }

    #[test]
    fn aggregate_pools_counts_across_scenarios_and_seeds() {
        let sc = |id: &str, per_seed: Vec<SeedMetrics>| {
            let (mean, std) = summarize_seeds(&per_seed);
            ScenarioReport {
                scenario_id: id.into(),
                variation: VariationLevel::Pose,
                position_epsilon: 0.02,
                orientation_epsilon: 0.1,
                per_seed,
                mean,
                std,
            }
        };
        let a = sc(
            "a",
            vec![SeedMetrics::new(0, &Metrics::from_outcomes(&outcomes(5, 4, 3)))],
        );
        let b = sc(
            "b",
            vec![SeedMetrics::new(0, &Metrics::from_outcomes(&outcomes(5, 2, 1)))],
        );
        let agg = EvalReport::aggregate_of(&[a, b]);
        assert_eq!(agg.trials, 10);
        assert_eq!(agg.sub1_successes, 6);
        assert_eq!(agg.sub2_successes, 4);
        assert!((agg.sub1_rate - 0.6).abs() < 1e-15);
        assert!((agg.success_rate - 0.4).abs() < 1e-15);
    }
}
