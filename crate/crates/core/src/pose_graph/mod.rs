//! SE(2) pose-graph back end: poses, constraint errors and Jacobians, and a
//! sparse Levenberg–Marquardt solver.

pub mod edges;
pub mod mat3;
pub mod pose;
pub mod problem;
pub mod solver;
pub mod sparse;

pub use edges::{
    distance_error, edge_jacobians, prior_error, relative_pose_error, Constraint, ConstraintKind, EdgeJacobians, NodeId,
};
pub use pose::Pose2;
pub use problem::{total_chi2, PoseGraphProblem};
pub use solver::{optimize, LmOptions, OptimizeReport, Optimized, Termination};
