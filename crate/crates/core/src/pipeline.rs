//! End-to-end flow: scans and odometry → node-aligned robot data → trained
//! similarity/distance models → optimised collaborative pose graph.

use serde::{Deserialize, Serialize};

use crate::constraint_builder::{
    build_problem, AnchorConfig, LoopClosureConfig, ModelSet, OdometryInfoModel, RobotData,
};
use crate::distance_model::{collect_training_pairs, fit_binned_model, TrainingSample};
use crate::error::{Error, Result};
use crate::pose_graph::{optimize, LmOptions, NodeId, Optimized, Pose2, PoseGraphProblem};
use crate::radio_fingerprint::{group_scans_with, ApObservation, RawScan};
use crate::scalar::Real;
use crate::similarity::SimilarityParams;
use crate::simulator::{compose_increments, interpolate_pose, Dataset};

/// Raw per-robot inputs as they come from files or the simulator.
#[derive(Clone, Debug)]
pub struct RobotInput<T> {
    pub robot: u32,
    pub scans: Vec<RawScan<T>>,
    pub odom_times: Vec<f64>,
    /// Per-step increments; element 0 is ignored.
    pub increments: Vec<Pose2<f64>>,
    pub ground_truth: Option<(Vec<f64>, Vec<Pose2<f64>>)>,
}

pub fn cast_scan<T: Real>(scan: &RawScan<f64>) -> RawScan<T> {
    RawScan {
        robot: scan.robot,
        device: scan.device,
        timestamp: scan.timestamp,
        observations: scan
            .observations
            .iter()
            .map(|o| ApObservation {
                ap_id: o.ap_id.clone(),
                rss: T::lit(o.rss),
            })
            .collect(),
    }
}

/// Pipeline inputs for every robot of a simulated dataset.
pub fn inputs_from_dataset<T: Real>(dataset: &Dataset) -> Vec<RobotInput<T>> {
    dataset
        .robots
        .iter()
        .map(|r| RobotInput {
            robot: r.robot,
            scans: r.scans.iter().map(cast_scan).collect(),
            odom_times: r.times.clone(),
            increments: r.increments.clone(),
            ground_truth: Some((r.times.clone(), r.ground_truth.clone())),
        })
        .collect()
}

/// Node-aligned data for all robots.
#[derive(Clone, Debug)]
pub struct PreparedDataset<T> {
    pub robots: Vec<RobotData<T>>,
    /// Known start pose of every robot, in the shared frame.
    pub anchors: Vec<Pose2<T>>,
    /// Ground truth per node, when available.
    pub ground_truth: Option<Vec<Vec<Pose2<T>>>>,
}

impl<T: Real> PreparedDataset<T> {
    pub fn node_count(&self) -> usize {
        self.robots.iter().map(RobotData::len).sum()
    }

    /// Keeps only the listed robots, in the given order.
    pub fn select(&self, robots: &[u32]) -> Result<Self> {
        let mut out = Self {
            robots: Vec::new(),
            anchors: Vec::new(),
            ground_truth: self.ground_truth.as_ref().map(|_| Vec::new()),
        };
        for id in robots {
            let k = self
                .robots
                .iter()
                .position(|r| r.robot == *id)
                .ok_or_else(|| Error::Data(format!("robot {id} not in dataset")))?;
            out.robots.push(self.robots[k].clone());
            out.anchors.push(self.anchors[k]);
            if let (Some(dst), Some(src)) = (out.ground_truth.as_mut(), self.ground_truth.as_ref()) {
                dst.push(src[k].clone());
            }
        }
        Ok(out)
    }

    /// Ground truth as `(node, pose)` pairs in problem node order.
    pub fn ground_truth_nodes(&self) -> Option<Vec<(NodeId, Pose2<T>)>> {
        let gt = self.ground_truth.as_ref()?;
        Some(
            self.robots
                .iter()
                .zip(gt)
                .flat_map(|(r, poses)| {
                    poses
                        .iter()
                        .enumerate()
                        .map(move |(t, p)| (NodeId::new(r.robot, t), *p))
                })
                .collect(),
        )
    }
}

fn sample_at(times: &[f64], poses: &[Pose2<f64>], t: f64, what: &str, robot: u32) -> Result<Pose2<f64>> {
    interpolate_pose(times, poses, t)
        .ok_or_else(|| Error::Data(format!("robot {robot}: no {what} sample covers t = {t}")))
}

/// Windows every robot's scans into fingerprints and attaches the odometry
/// (and ground truth) pose at each window center. Anchors are the ground-truth
/// poses of the first node, or the origin when no ground truth is given.
pub fn prepare_dataset<T: Real>(inputs: &[RobotInput<T>], window_s: f64, min_aps: usize) -> Result<PreparedDataset<T>> {
    if inputs.is_empty() {
        return Err(Error::Data("no robots in dataset".into()));
    }
    let have_gt = inputs.iter().all(|r| r.ground_truth.is_some());
    let mut robots = Vec::with_capacity(inputs.len());
    let mut anchors = Vec::with_capacity(inputs.len());
    let mut gts = Vec::with_capacity(inputs.len());
    for input in inputs {
        if input.odom_times.len() != input.increments.len() || input.increments.is_empty() {
            return Err(Error::Data(format!(
                "robot {}: odometry is empty or misaligned",
                input.robot
            )));
        }
        let t_first = input.odom_times[0];
        let t_last = input.odom_times[input.odom_times.len() - 1];
        // a trailing partial window can be centered after the last odometry sample
        let mut fps = group_scans_with(&input.scans, window_s, min_aps)?;
        fps.retain(|fp| fp.timestamp >= t_first && fp.timestamp <= t_last);
        for (k, fp) in fps.iter_mut().enumerate() {
            fp.index = k;
        }
        if fps.is_empty() {
            return Err(Error::Data(format!("robot {} has no fingerprints", input.robot)));
        }
        let odom = compose_increments(Pose2::identity(), &input.increments);
        let mut node_odom = Vec::with_capacity(fps.len());
        for fp in &fps {
            node_odom.push(sample_at(&input.odom_times, &odom, fp.timestamp, "odometry", input.robot)?.cast());
        }
        let mut anchor = Pose2::identity();
        if let (true, Some((times, gt))) = (have_gt, &input.ground_truth) {
            if times.len() != gt.len() {
                return Err(Error::Data(format!("robot {}: ground truth misaligned", input.robot)));
            }
            let mut node_gt = Vec::with_capacity(fps.len());
            for fp in &fps {
                node_gt.push(sample_at(times, gt, fp.timestamp, "ground-truth", input.robot)?.cast::<T>());
            }
            anchor = node_gt[0];
            gts.push(node_gt);
        }
        anchors.push(anchor);
        robots.push(RobotData::new(input.robot, fps, node_odom)?);
    }
    let mut ids: Vec<u32> = robots.iter().map(|r| r.robot).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != robots.len() {
        return Err(Error::Data("duplicate robot ids".into()));
    }
    Ok(PreparedDataset {
        robots,
        anchors,
        ground_truth: have_gt.then_some(gts),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct ModelConfig<T> {
    /// Bin width on the similarity axis.
    pub r: T,
    /// Odometry path limit for training pairs, meters.
    pub max_path_m: T,
    /// Fit one model per robot for intra-robot queries instead of pooling.
    pub per_robot: bool,
}

impl<T: Real> Default for ModelConfig<T> {
    fn default() -> Self {
        Self {
            r: T::lit(0.05),
            max_path_m: T::lit(100.0),
            per_robot: false,
        }
    }
}

impl<T: Real> ModelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > T::zero() && self.r <= T::one()) {
            return Err(Error::Config(format!("bin width r must be in (0, 1], got {}", self.r)));
        }
        if !(self.max_path_m > T::zero()) {
            return Err(Error::Config(format!(
                "max_path_m must be > 0, got {}; no training pairs can be harvested",
                self.max_path_m
            )));
        }
        Ok(())
    }
}

/// Training samples per robot, in robot order.
pub fn training_samples<T: Real>(
    data: &PreparedDataset<T>,
    params: &SimilarityParams<T>,
    cfg: &ModelConfig<T>,
) -> Result<Vec<Vec<TrainingSample<T>>>> {
    data.robots
        .iter()
        .map(|r| collect_training_pairs(&r.fingerprints, &r.odometry, params, cfg.max_path_m))
        .collect()
}

/// Fits the pooled model (and per-robot models when configured).
pub fn train_models<T: Real>(
    data: &PreparedDataset<T>,
    params: &SimilarityParams<T>,
    cfg: &ModelConfig<T>,
) -> Result<ModelSet<T>> {
    cfg.validate()?;
    params.validate()?;
    let per_robot = training_samples(data, params, cfg)?;
    let pooled: Vec<TrainingSample<T>> = per_robot.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::ModelFit(format!(
            "no training pairs within max_path_m = {} m of travel",
            cfg.max_path_m
        )));
    }
    let model = fit_binned_model(&pooled, cfg.r, cfg.max_path_m)?;
    let mut set = ModelSet::pooled(model);
    if cfg.per_robot {
        set.per_robot = per_robot
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(set.pooled.clone())
                } else {
                    fit_binned_model(s, cfg.r, cfg.max_path_m)
                }
            })
            .collect::<Result<_>>()?;
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct SlamConfig<T> {
    pub closures: LoopClosureConfig<T>,
    pub odometry_info: OdometryInfoModel<T>,
    pub anchor: AnchorConfig<T>,
    pub lm: LmOptions<T>,
}

impl<T: Real> Default for SlamConfig<T> {
    fn default() -> Self {
        Self {
            closures: LoopClosureConfig::default(),
            odometry_info: OdometryInfoModel::default(),
            anchor: AnchorConfig::default(),
            lm: LmOptions::default(),
        }
    }
}

impl<T: Real> SlamConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.closures.validate()?;
        self.odometry_info.validate()?;
        self.lm.validate()?;
        if !self.anchor.information.iter().all(|v| *v > T::zero()) {
            return Err(Error::Config("anchor information must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SlamOutcome<T> {
    pub problem: PoseGraphProblem<T>,
    pub optimized: Optimized<T>,
}

impl<T: Real> SlamOutcome<T> {
    pub fn estimate(&self) -> Vec<(NodeId, Pose2<T>)> {
        self.problem
            .nodes()
            .iter()
            .copied()
            .zip(self.optimized.poses.iter().copied())
            .collect()
    }
}

/// Builds the full problem and optimises it.
pub fn run_slam<T: Real>(
    data: &PreparedDataset<T>,
    models: &ModelSet<T>,
    params: &SimilarityParams<T>,
    cfg: &SlamConfig<T>,
) -> Result<SlamOutcome<T>> {
    cfg.validate()?;
    let problem = build_problem(
        &data.robots,
        models,
        params,
        &cfg.closures,
        &cfg.odometry_info,
        &data.anchors,
        &cfg.anchor,
    )?;
    let optimized = optimize(&problem, &cfg.lm)?;
    Ok(SlamOutcome { problem, optimized })
}
