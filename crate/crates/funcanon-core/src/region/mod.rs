//! Candidate functional regions: per-point features are clustered into M
//! groups, each summarized by its member indices and centroids.

mod kmeans;
mod provider;

pub use kmeans::{kmeans, partition_inertia, KmeansOutcome, MAX_ITERATIONS};
pub use provider::{FeatureProvider, FileProvider, GeometricProvider, WithCoordinates};

use crate::geometry::{GeometryError, PointCloud};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("no feature vectors supplied")]
    EmptyInput,
    #[error("cluster count must be positive")]
    ZeroClusters,
    #[error("cluster count {k} exceeds point count {n}")]
    TooManyClusters { k: usize, n: usize },
    #[error("feature vectors must share one dimension")]
    DimMismatch,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("cloud carries no per-point features")]
    MissingFeatures,
    #[error("region has no member points")]
    EmptyRegion,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, RegionError>;

/// One candidate functional region: the member-point index set of a cluster
/// plus spatial and feature-space centroids. `label` is optional metadata
/// (e.g. assigned from fixture ground truth); clustering itself never sets it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionRecord", into = "RegionRecord")]
pub struct FunctionalRegion {
    pub region_id: usize,
    pub point_indices: Vec<usize>,
    pub centroid: Vector3<f64>,
    pub feature_centroid: Vec<f64>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegionRecord {
    region_id: usize,
    point_indices: Vec<usize>,
    centroid: [f64; 3],
    feature_centroid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl TryFrom<RegionRecord> for FunctionalRegion {
    type Error = RegionError;

    fn try_from(r: RegionRecord) -> Result<Self> {
        if r.point_indices.is_empty() {
            return Err(RegionError::EmptyRegion);
        }
        if !r.centroid.iter().all(|v| v.is_finite())
            || !r.feature_centroid.iter().all(|v| v.is_finite())
        {
            return Err(RegionError::NonFinite);
        }
        Ok(FunctionalRegion {
            region_id: r.region_id,
            point_indices: r.point_indices,
            centroid: Vector3::from(r.centroid),
            feature_centroid: r.feature_centroid,
            label: r.label,
        })
    }
}

impl From<FunctionalRegion> for RegionRecord {
    fn from(r: FunctionalRegion) -> Self {
        RegionRecord {
            region_id: r.region_id,
            point_indices: r.point_indices,
            centroid: [r.centroid.x, r.centroid.y, r.centroid.z],
            feature_centroid: r.feature_centroid,
            label: r.label,
        }
    }
}

impl FunctionalRegion {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Serialized form of one proposal run over a single object cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProposal {
    pub object_id: String,
    pub m: usize,
    pub regions: Vec<FunctionalRegion>,
}

/// Cluster the provider's per-point features into `m` regions. Regions come
/// back ordered by `region_id`, and every point index lands in exactly one of
/// them.
pub fn propose_regions(
    cloud: &PointCloud,
    provider: &dyn FeatureProvider,
    m: usize,
    seed: u64,
) -> Result<Vec<FunctionalRegion>> {
    if cloud.is_empty() {
        return Err(RegionError::EmptyInput);
    }
    let features = provider.features(cloud)?;
    let outcome = kmeans(&features, m, seed)?;

    let mut regions = Vec::with_capacity(m);
    for region_id in 0..m {
        let point_indices: Vec<usize> = (0..cloud.len())
            .filter(|&i| outcome.assignment[i] == region_id)
            .collect();
        let mut centroid = Vector3::zeros();
        for &i in &point_indices {
            centroid += cloud.points()[i];
        }
        centroid /= point_indices.len() as f64;
        regions.push(FunctionalRegion {
            region_id,
            point_indices,
            centroid,
            feature_centroid: outcome.centroids[region_id].clone(),
            label: None,
        });
    }
    Ok(regions)
}
