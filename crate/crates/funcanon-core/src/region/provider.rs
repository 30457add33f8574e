//! Per-point feature extraction. Clustering is feature-agnostic, so features
//! may come from geometry computed here or from files produced by an external
//! encoder.

use super::{RegionError, Result};
use crate::geometry::PointCloud;
use nalgebra::{Matrix3, Vector3};

pub trait FeatureProvider {
    /// One D-vector per point, in point order; D is constant per call.
    fn features(&self, cloud: &PointCloud) -> Result<Vec<Vec<f64>>>;
}

/// Point coordinates normalized to the unit bounding box, concatenated with a
/// surface normal estimated by a plane fit over the nearest neighbors and
/// oriented away from the cloud centroid.
#[derive(Debug, Clone)]
pub struct GeometricProvider {
    pub neighbors: usize,
}

impl Default for GeometricProvider {
    fn default() -> Self {
        GeometricProvider { neighbors: 8 }
    }
}

impl GeometricProvider {
    fn normal_at(&self, cloud: &PointCloud, index: usize, centroid: &Vector3<f64>) -> Vector3<f64> {
        let points = cloud.points();
        let p = points[index];
        let mut by_distance: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != index)
            .map(|(i, q)| ((q - p).norm_squared(), i))
            .collect();
        by_distance.sort_by(|a, b| a.partial_cmp(b).unwrap());
        by_distance.truncate(self.neighbors);

        let mut neighborhood = vec![p];
        neighborhood.extend(by_distance.iter().map(|&(_, i)| points[i]));
        let count = neighborhood.len() as f64;
        let mean: Vector3<f64> = neighborhood.iter().sum::<Vector3<f64>>() / count;
        let mut cov = Matrix3::zeros();
        for q in &neighborhood {
            let d = q - mean;
            cov += d * d.transpose();
        }
        cov /= count;

        let eigen = cov.symmetric_eigen();
        let mut smallest = 0;
        for i in 1..3 {
            if eigen.eigenvalues[i] < eigen.eigenvalues[smallest] {
                smallest = i;
            }
        }
        let mut normal: Vector3<f64> = eigen.eigenvectors.column(smallest).into();
        if normal.norm_squared() < 1e-18 {
            return Vector3::z();
        }
        normal.normalize_mut();
        if normal.dot(&(p - centroid)) < 0.0 {
            normal = -normal;
        }
        normal
    }
}

impl FeatureProvider for GeometricProvider {
    fn features(&self, cloud: &PointCloud) -> Result<Vec<Vec<f64>>> {
        if cloud.is_empty() {
            return Err(RegionError::EmptyInput);
        }
        let (lo, hi) = cloud.bounds().expect("non-empty cloud has bounds");
        let extent = hi - lo;
        let centroid = cloud.centroid().expect("non-empty cloud has a centroid");

        let mut out = Vec::with_capacity(cloud.len());
        for (i, p) in cloud.points().iter().enumerate() {
            let scaled = Vector3::new(
                normalized_axis(p.x, lo.x, extent.x),
                normalized_axis(p.y, lo.y, extent.y),
                normalized_axis(p.z, lo.z, extent.z),
            );
            let normal = self.normal_at(cloud, i, &centroid);
            out.push(vec![
                scaled.x, scaled.y, scaled.z, normal.x, normal.y, normal.z,
            ]);
        }
        Ok(out)
    }
}

fn normalized_axis(v: f64, lo: f64, extent: f64) -> f64 {
    if extent > 0.0 {
        (v - lo) / extent
    } else {
        0.0
    }
}

/// Features that were ingested alongside the points (e.g. from a PLY with
/// extra scalar properties).
#[derive(Debug, Clone, Default)]
pub struct FileProvider;

impl FeatureProvider for FileProvider {
    fn features(&self, cloud: &PointCloud) -> Result<Vec<Vec<f64>>> {
        match cloud.features() {
            Some(f) if !f.is_empty() && f[0].is_empty() => Err(RegionError::MissingFeatures),
            Some(f) => Ok(f.to_vec()),
            None => Err(RegionError::MissingFeatures),
        }
    }
}

/// Wraps another provider and appends the raw point coordinates (meters) to
/// each feature vector, for experiments that cluster on features plus
/// positions.
#[derive(Debug, Clone)]
pub struct WithCoordinates<P>(pub P);

impl<P: FeatureProvider> FeatureProvider for WithCoordinates<P> {
    fn features(&self, cloud: &PointCloud) -> Result<Vec<Vec<f64>>> {
        let mut features = self.0.features(cloud)?;
        for (f, p) in features.iter_mut().zip(cloud.points()) {
            f.extend_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(features)
    }
}
