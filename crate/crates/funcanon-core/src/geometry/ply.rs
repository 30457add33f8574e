//! Minimal ASCII PLY ingestion: `x y z` vertex coordinates plus any number
//! of trailing scalar properties, which become per-point features in
//! declaration order.

use super::{GeometryError, PointCloud, Result};
use nalgebra::Vector3;
use std::path::Path;

fn err(msg: impl Into<String>) -> GeometryError {
    GeometryError::Ply(msg.into())
}

impl PointCloud {
    pub fn from_ply_str(text: &str) -> Result<PointCloud> {
        let mut lines = text.lines().map(str::trim);
        if lines.next() != Some("ply") {
            return Err(err("missing 'ply' magic line"));
        }

        let mut vertex_count: Option<usize> = None;
        let mut properties: Vec<String> = Vec::new();
        let mut in_vertex_element = false;
        let mut saw_format = false;
        for line in lines.by_ref() {
            if line.is_empty() || line.starts_with("comment") {
                continue;
            }
            if line == "end_header" {
                break;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("format") => {
                    if parts.next() != Some("ascii") {
                        return Err(err("only ascii format is supported"));
                    }
                    saw_format = true;
                }
                Some("element") => {
                    let name = parts.next().ok_or_else(|| err("element without name"))?;
                    if name == "vertex" {
                        let n: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err("bad vertex count"))?;
                        vertex_count = Some(n);
                        in_vertex_element = true;
                    } else {
                        in_vertex_element = false;
                    }
                }
                Some("property") => {
                    if in_vertex_element {
                        let _ty = parts.next().ok_or_else(|| err("property without type"))?;
                        let name = parts.next().ok_or_else(|| err("property without name"))?;
                        properties.push(name.to_string());
                    }
                }
                _ => return Err(err(format!("unexpected header line: {line}"))),
            }
        }
        if !saw_format {
            return Err(err("missing format line"));
        }
        let vertex_count = vertex_count.ok_or_else(|| err("missing vertex element"))?;
        if properties.len() < 3 || properties[0] != "x" || properties[1] != "y" || properties[2] != "z"
        {
            return Err(err("vertex properties must start with x y z"));
        }
        let feature_dim = properties.len() - 3;

        let mut points = Vec::with_capacity(vertex_count);
        let mut features: Vec<Vec<f64>> = Vec::with_capacity(vertex_count);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            if points.len() == vertex_count {
                return Err(err("more data rows than declared vertices"));
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != properties.len() {
                return Err(err(format!(
                    "row has {} values, header declares {}",
                    values.len(),
                    properties.len()
                )));
            }
            points.push(Vector3::new(values[0], values[1], values[2]));
            if feature_dim > 0 {
                features.push(values[3..].to_vec());
            }
        }
        if points.len() != vertex_count {
            return Err(err(format!(
                "expected {vertex_count} vertices, found {}",
                points.len()
            )));
        }
        PointCloud::new(points, (feature_dim > 0).then_some(features))
    }

    pub fn from_ply_path(path: impl AsRef<Path>) -> Result<PointCloud> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| err(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_ply_str(&text)
    }

    pub fn to_ply_string(&self) -> String {
        let feature_dim = self.feature_dim().unwrap_or(0);
        let mut out = String::from("ply\nformat ascii 1.0\n");
        out.push_str(&format!("element vertex {}\n", self.len()));
        out.push_str("property double x\nproperty double y\nproperty double z\n");
        for i in 0..feature_dim {
            out.push_str(&format!("property double f{i}\n"));
        }
        out.push_str("end_header\n");
        for (i, p) in self.points().iter().enumerate() {
            out.push_str(&format!("{} {} {}", p.x, p.y, p.z));
            if let Some(feats) = self.features() {
                for v in &feats[i] {
                    out.push_str(&format!(" {v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}
