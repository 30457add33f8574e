//! Functional object canonicalization for manipulation data.
//!
//! The library decomposes manipulation tasks into actor-verb-object
//! primitives, proposes candidate functional regions on object point clouds,
//! classifies them against an action/role hypothesis, aligns objects into a
//! shared functional frame via a Z-heading rotation, and transfers
//! demonstration trajectories across object instances and categories.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`geometry`]: SE(3) poses, point clouds, trajectories, file formats.
//! - [`region`]: feature providers and k-means region proposal.
//! - [`recognition`]: binary functional classification (oracle table or
//!   remote chat endpoint) and functional-set assembly.
//! - [`alignment`]: functional direction vectors, Z-axis alignment, and
//!   per-category canonical frames.
//! - [`transfer`]: demonstration ingestion and cross-object trajectory
//!   transfer / dataset augmentation.
//! - [`decompose`]: task-to-primitive decomposition (rule table or remote).
//! - [`llm`]: shared chat-completion client with caching and retry.
//! - [`fixtures`]: parametric test objects, demo synthesis, and the
//!   instance catalog.

pub mod alignment;
pub mod decompose;
pub mod fixtures;
pub mod geometry;
pub mod llm;
pub mod recognition;
pub mod region;
pub mod transfer;

pub use geometry::{FrameTag, PointCloud, SE3Pose, Trajectory};
