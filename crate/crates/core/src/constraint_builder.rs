//! Constraint harvesting: odometry edges, intra-robot fingerprint loop
//! closures and inter-robot fingerprint constraints, assembled into one
//! anchored pose-graph problem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance_model::{cumulative_path, SimilarityDistanceModel};
use crate::error::{Error, Result};
use crate::pose_graph::{mat3, Constraint, NodeId, Pose2, PoseGraphProblem};
use crate::radio_fingerprint::Fingerprint;
use crate::scalar::Real;
use crate::similarity::{similarity, SimilarityParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct LoopClosureConfig<T> {
    /// Intra-robot acceptance threshold on predicted distance, meters.
    pub nu_s: T,
    /// Inter-robot acceptance threshold on predicted distance, meters.
    pub nu_p: T,
    /// Minimum odometry travel between intra-robot candidates, meters.
    pub min_path_separation_m: T,
    /// Lower bound on the predicted variance when forming edge weights, m².
    pub variance_floor: T,
}

impl<T: Real> Default for LoopClosureConfig<T> {
    fn default() -> Self {
        Self {
            nu_s: T::lit(10.0),
            nu_p: T::lit(10.0),
            min_path_separation_m: T::lit(100.0),
            variance_floor: T::lit(0.25),
        }
    }
}

impl<T: Real> LoopClosureConfig<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nu_s", self.nu_s),
            ("nu_p", self.nu_p),
            ("min_path_separation_m", self.min_path_separation_m),
        ] {
            if !(v >= T::zero()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.variance_floor > T::zero()) {
            return Err(Error::Config("variance_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Odometry edge uncertainty: `σ_xy = a·trans + b`, `σ_θ = max(c·rot + d·trans, min_sigma_theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct OdometryInfoModel<T> {
    pub a: T,
    /// meters
    pub b: T,
    pub c: T,
    /// rad/m
    pub d: T,
    /// radians
    pub min_sigma_theta: T,
}

impl<T: Real> Default for OdometryInfoModel<T> {
    fn default() -> Self {
        Self {
            a: T::lit(0.05),
            b: T::lit(0.01),
            c: T::lit(0.05),
            d: T::lit(0.002),
            min_sigma_theta: T::lit(1e-3),
        }
    }
}

impl<T: Real> OdometryInfoModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= T::zero() && self.c >= T::zero() && self.d >= T::zero()) {
            return Err(Error::Config("odometry info coefficients must be >= 0".into()));
        }
        if !(self.b > T::zero() && self.min_sigma_theta > T::zero()) {
            return Err(Error::Config(
                "odometry info offsets b and min_sigma_theta must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Information matrix of one odometry step.
    pub fn information(&self, step: &Pose2<T>) -> mat3::Mat3<T> {
        let trans = step.translation_norm();
        let sigma_xy = self.a * trans + self.b;
        let sigma_th = (self.c * step.theta.abs() + self.d * trans).max(self.min_sigma_theta);
        mat3::diag([
            T::one() / (sigma_xy * sigma_xy),
            T::one() / (sigma_xy * sigma_xy),
            T::one() / (sigma_th * sigma_th),
        ])
    }
}

/// Fingerprints and node-aligned odometry poses of one robot.
#[derive(Clone, Debug)]
pub struct RobotData<T> {
    pub robot: u32,
    pub fingerprints: Vec<Fingerprint<T>>,
    /// Odometry pose at each fingerprint, in the robot's odometry frame.
    pub odometry: Vec<Pose2<T>>,
}

impl<T: Real> RobotData<T> {
    pub fn new(robot: u32, fingerprints: Vec<Fingerprint<T>>, odometry: Vec<Pose2<T>>) -> Result<Self> {
        if fingerprints.len() != odometry.len() {
            return Err(Error::Data(format!(
                "robot {robot}: {} fingerprints but {} odometry poses",
                fingerprints.len(),
                odometry.len()
            )));
        }
        Ok(Self {
            robot,
            fingerprints,
            odometry,
        })
    }

    pub fn len(&self) -> usize {
        self.odometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.odometry.is_empty()
    }
}

/// Pooled model plus optional per-robot models for intra-robot queries.
#[derive(Clone, Debug)]
pub struct ModelSet<T> {
    pub pooled: SimilarityDistanceModel<T>,
    /// Indexed like the robot list; empty when models are pooled.
    pub per_robot: Vec<SimilarityDistanceModel<T>>,
}

impl<T: Real> ModelSet<T> {
    pub fn pooled(model: SimilarityDistanceModel<T>) -> Self {
        Self {
            pooled: model,
            per_robot: Vec::new(),
        }
    }

    pub fn intra(&self, robot_index: usize) -> &SimilarityDistanceModel<T> {
        self.per_robot.get(robot_index).unwrap_or(&self.pooled)
    }

    pub fn inter(&self) -> &SimilarityDistanceModel<T> {
        &self.pooled
    }
}

/// A fingerprint pair whose predicted distance passed a threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureCandidate<T> {
    pub i: NodeId,
    pub j: NodeId,
    pub d_hat: T,
    pub var: T,
}

impl<T: Real> ClosureCandidate<T> {
    pub fn to_constraint(&self, variance_floor: T) -> Constraint<T> {
        Constraint::Distance {
            i: self.i,
            j: self.j,
            d: self.d_hat,
            w: T::one() / self.var.max(variance_floor),
        }
    }
}

/// One relative-pose edge per consecutive odometry pair.
pub fn odometry_constraints<T: Real>(
    robot: u32,
    poses: &[Pose2<T>],
    noise: &OdometryInfoModel<T>,
) -> Vec<Constraint<T>> {
    poses
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let z = w[0].between(&w[1]);
            Constraint::RelativePose {
                i: NodeId::new(robot, k),
                j: NodeId::new(robot, k + 1),
                z,
                info: noise.information(&z),
            }
        })
        .collect()
}

/// Intra-robot pairs `(i, j)`, `j < i`, more than `min_sep` meters of travel
/// apart whose predicted distance is below `threshold`, in `(i, j)` order.
pub fn intra_robot_candidates<T: Real>(
    robot: &RobotData<T>,
    model: &SimilarityDistanceModel<T>,
    params: &SimilarityParams<T>,
    min_sep: T,
    threshold: T,
) -> Result<Vec<ClosureCandidate<T>>> {
    if model.bins.is_empty() {
        return Err(Error::EmptyModel);
    }
    let path = cumulative_path(&robot.odometry);
    let fps = &robot.fingerprints;
    let rows: Vec<Vec<ClosureCandidate<T>>> = (0..fps.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in 0..i {
                if !(path[i] - path[j] > min_sep) {
                    // path is non-decreasing, later j are even closer
                    break;
                }
                let s = similarity(&fps[i], &fps[j], params).s;
                let (d_hat, var) = model.predict(s).expect("model checked non-empty");
                if d_hat < threshold {
                    row.push(ClosureCandidate {
                        i: NodeId::new(robot.robot, i),
                        j: NodeId::new(robot.robot, j),
                        d_hat,
                        var,
                    });
                }
            }
            row
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Cross-robot pairs whose predicted distance is below `threshold`, in `(i, j)` order.
pub fn inter_robot_candidates<T: Real>(
    k: &RobotData<T>,
    l: &RobotData<T>,
    model: &SimilarityDistanceModel<T>,
    params: &SimilarityParams<T>,
    threshold: T,
) -> Result<Vec<ClosureCandidate<T>>> {
    if k.robot == l.robot {
        return Err(Error::Data(format!(
            "inter-robot closures need two robots, got {} twice",
            k.robot
        )));
    }
    if model.bins.is_empty() {
        return Err(Error::EmptyModel);
    }
    let rows: Vec<Vec<ClosureCandidate<T>>> = k
        .fingerprints
        .par_iter()
        .enumerate()
        .map(|(i, fi)| {
            l.fingerprints
                .iter()
                .enumerate()
                .filter_map(|(j, fj)| {
                    let s = similarity(fi, fj, params).s;
                    let (d_hat, var) = model.predict(s).expect("model checked non-empty");
                    (d_hat < threshold).then(|| ClosureCandidate {
                        i: NodeId::new(k.robot, i),
                        j: NodeId::new(l.robot, j),
                        d_hat,
                        var,
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Intra-robot fingerprint loop closures gated by `cfg.nu_s` and the travel separation rule.
pub fn intra_robot_closures<T: Real>(
    robot: &RobotData<T>,
    model: &SimilarityDistanceModel<T>,
    params: &SimilarityParams<T>,
    cfg: &LoopClosureConfig<T>,
) -> Result<Vec<Constraint<T>>> {
    Ok(
        intra_robot_candidates(robot, model, params, cfg.min_path_separation_m, cfg.nu_s)?
            .iter()
            .map(|c| c.to_constraint(cfg.variance_floor))
            .collect(),
    )
}

/// Inter-robot fingerprint constraints gated by `cfg.nu_p`.
pub fn inter_robot_closures<T: Real>(
    k: &RobotData<T>,
    l: &RobotData<T>,
    model: &SimilarityDistanceModel<T>,
    params: &SimilarityParams<T>,
    cfg: &LoopClosureConfig<T>,
) -> Result<Vec<Constraint<T>>> {
    Ok(inter_robot_candidates(k, l, model, params, cfg.nu_p)?
        .iter()
        .map(|c| c.to_constraint(cfg.variance_floor))
        .collect())
}

/// Problem-level settings independent of the thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct AnchorConfig<T> {
    /// Diagonal information of each robot's start-pose prior.
    pub information: [T; 3],
}

impl<T: Real> Default for AnchorConfig<T> {
    fn default() -> Self {
        Self {
            information: [T::lit(1e6); 3],
        }
    }
}

/// Initial estimate of one robot: its odometry re-expressed from `anchor`.
pub fn anchored_odometry<T: Real>(odometry: &[Pose2<T>], anchor: &Pose2<T>) -> Vec<Pose2<T>> {
    match odometry.first() {
        None => Vec::new(),
        Some(first) if first == anchor => odometry.to_vec(),
        Some(first) => odometry.iter().map(|p| anchor.compose(&first.between(p))).collect(),
    }
}

/// Assembles nodes, initial values and constraints from pre-computed closure sets.
pub fn assemble_problem<T: Real>(
    robots: &[RobotData<T>],
    anchors: &[Pose2<T>],
    odo_info: &OdometryInfoModel<T>,
    anchor_cfg: &AnchorConfig<T>,
    closures: impl IntoIterator<Item = Constraint<T>>,
) -> Result<PoseGraphProblem<T>> {
    if anchors.len() != robots.len() {
        return Err(Error::Data(format!(
            "{} robots but {} anchor poses",
            robots.len(),
            anchors.len()
        )));
    }
    let mut nodes = Vec::new();
    let mut constraints = Vec::new();
    for (robot, anchor) in robots.iter().zip(anchors) {
        if robot.is_empty() {
            return Err(Error::Data(format!("robot {} has no poses", robot.robot)));
        }
        let initial = anchored_odometry(&robot.odometry, anchor);
        nodes.extend(
            initial
                .iter()
                .enumerate()
                .map(|(t, p)| (NodeId::new(robot.robot, t), *p)),
        );
        constraints.push(Constraint::PosePrior {
            i: NodeId::new(robot.robot, 0),
            z: *anchor,
            info: mat3::diag(anchor_cfg.information),
        });
        constraints.extend(odometry_constraints(robot.robot, &robot.odometry, odo_info));
    }
    constraints.extend(closures);
    PoseGraphProblem::new(nodes, constraints, &[])
}

/// Full constraint harvesting for all robots: odometry, intra-robot closures,
/// inter-robot closures once per unordered robot pair, and one start-pose
/// prior per robot.
pub fn build_problem<T: Real>(
    robots: &[RobotData<T>],
    models: &ModelSet<T>,
    params: &SimilarityParams<T>,
    cfg: &LoopClosureConfig<T>,
    odo_info: &OdometryInfoModel<T>,
    anchors: &[Pose2<T>],
    anchor_cfg: &AnchorConfig<T>,
) -> Result<PoseGraphProblem<T>> {
    cfg.validate()?;
    let mut closures = Vec::new();
    for (k, robot) in robots.iter().enumerate() {
        closures.extend(intra_robot_closures(robot, models.intra(k), params, cfg)?);
    }
    for k in 0..robots.len() {
        for l in k + 1..robots.len() {
            closures.extend(inter_robot_closures(
                &robots[k],
                &robots[l],
                models.inter(),
                params,
                cfg,
            )?);
        }
    }
    assemble_problem(robots, anchors, odo_info, anchor_cfg, closures)
}
