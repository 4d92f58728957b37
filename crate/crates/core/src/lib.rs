//! Collaborative multi-robot SLAM from WiFi fingerprint similarity.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common types to `f64`, with `F32` variants where useful.
// `!(x > 0)` checks are deliberate so NaN is rejected too; the 3x3 kernels
// read better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod constraint_builder;
pub mod distance_model;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod pipeline;
pub mod pose_graph;
pub mod radio_fingerprint;
pub mod scalar;
pub mod similarity;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Pose = pose_graph::Pose2<f64>;
pub type PoseF32 = pose_graph::Pose2<f32>;
pub type Fingerprint = radio_fingerprint::Fingerprint<f64>;
pub type RawScan = radio_fingerprint::RawScan<f64>;
pub type SimilarityParams = similarity::SimilarityParams<f64>;
pub type DistanceModel = distance_model::SimilarityDistanceModel<f64>;
pub type DistanceModelF32 = distance_model::SimilarityDistanceModel<f32>;
pub type PoseGraph = pose_graph::PoseGraphProblem<f64>;
pub type PoseGraphF32 = pose_graph::PoseGraphProblem<f32>;
pub type PipelineConfig = config::PipelineConfig<f64>;
pub type PipelineConfigF32 = config::PipelineConfig<f32>;
