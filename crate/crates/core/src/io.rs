//! File formats: scan and fingerprint JSON-Lines, model and world JSON,
//! pose CSVs, the pose-graph text format, and the dataset directory layout.
//!
//! Floats are written with the shortest decimal that parses back to the same
//! value, so write → read → write is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::distance_model::SimilarityDistanceModel;
use crate::error::{Error, Result};
use crate::pipeline::RobotInput;
use crate::pose_graph::{mat3, Constraint, NodeId, Pose2, PoseGraphProblem};
use crate::radio_fingerprint::{Fingerprint, RawScan};
use crate::scalar::Real;
use crate::simulator::{Dataset, World};

/// Graph files encode a node as `robot * NODE_STRIDE + t`.
pub const NODE_STRIDE: u64 = 1_000_000;

pub const WORLD_FILE: &str = "world.json";
pub const SCANS_FILE: &str = "scans.jsonl";

pub fn gt_file(robot: u32) -> String {
    format!("robot_{robot}_gt.csv")
}

pub fn odom_file(robot: u32) -> String {
    format!("robot_{robot}_odom.csv")
}

pub fn encode_node(id: NodeId) -> Result<u64> {
    if id.t as u64 >= NODE_STRIDE {
        return Err(Error::Data(format!("node index {} exceeds the id stride", id.t)));
    }
    Ok(id.robot as u64 * NODE_STRIDE + id.t as u64)
}

pub fn decode_node(v: u64) -> Result<NodeId> {
    let robot = u32::try_from(v / NODE_STRIDE).map_err(|_| Error::Data(format!("node id {v} out of range")))?;
    Ok(NodeId::new(robot, (v % NODE_STRIDE) as usize))
}

fn write_jsonl<W: Write, S: Serialize>(mut w: W, items: &[S]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn read_jsonl<R: BufRead, D: DeserializeOwned>(r: R) -> Result<Vec<D>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(k + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_scans_jsonl<W: Write, T: Real>(w: W, scans: &[RawScan<T>]) -> Result<()> {
    write_jsonl(w, scans)
}

/// Reads scans, lowercasing AP ids and validating each line.
pub fn read_scans_jsonl<R: BufRead, T: Real>(r: R) -> Result<Vec<RawScan<T>>> {
    let mut scans: Vec<RawScan<T>> = read_jsonl(r)?;
    for (k, scan) in scans.iter_mut().enumerate() {
        scan.normalize().map_err(|e| Error::parse(k + 1, e.to_string()))?;
    }
    Ok(scans)
}

pub fn write_fingerprints_jsonl<W: Write, T: Real>(w: W, fps: &[Fingerprint<T>]) -> Result<()> {
    write_jsonl(w, fps)
}

pub fn read_fingerprints_jsonl<R: BufRead, T: Real>(r: R) -> Result<Vec<Fingerprint<T>>> {
    let fps: Vec<Fingerprint<T>> = read_jsonl(r)?;
    fps.into_iter()
        .enumerate()
        .map(|(k, f)| {
            Fingerprint::new(f.robot, f.index, f.timestamp, f.entries, f.scan_count)
                .map_err(|e| Error::parse(k + 1, e.to_string()))
        })
        .collect()
}

pub fn model_to_json<T: Real>(model: &SimilarityDistanceModel<T>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(model)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json<T: Real>(text: &str) -> Result<SimilarityDistanceModel<T>> {
    let model: SimilarityDistanceModel<T> = serde_json::from_str(text)?;
    model.validate()?;
    Ok(model)
}

pub fn world_to_json(world: &World) -> Result<String> {
    let mut s = serde_json::to_string_pretty(world)?;
    s.push('\n');
    Ok(s)
}

pub fn world_from_json(text: &str) -> Result<World> {
    let world: World = serde_json::from_str(text)?;
    world.validate()?;
    Ok(world)
}

/// CSV with a `t` column followed by the three pose components.
pub fn pose_csv<T: Real>(header: &str, times: &[f64], poses: &[Pose2<T>]) -> String {
    let mut s = String::with_capacity(32 * poses.len());
    s.push_str(header);
    s.push('\n');
    for (t, p) in times.iter().zip(poses) {
        let _ = writeln!(s, "{t},{},{},{}", p.x, p.y, p.theta);
    }
    s
}

/// Parses a CSV written by [`pose_csv`]; the header must match exactly.
pub fn parse_pose_csv<T: Real>(text: &str, header: &str) -> Result<(Vec<f64>, Vec<Pose2<T>>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(Error::parse(1, format!("expected header `{header}`"))),
    }
    let mut times = Vec::new();
    let mut poses = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::parse(k + 1, format!("expected 4 fields, got {}", f.len())));
        }
        let t: f64 = num(f[0], k + 1)?;
        if let Some(prev) = times.last() {
            if t < *prev {
                return Err(Error::parse(k + 1, "timestamps not monotonic"));
            }
        }
        times.push(t);
        poses.push(Pose2::new(num(f[1], k + 1)?, num(f[2], k + 1)?, num(f[3], k + 1)?));
    }
    Ok((times, poses))
}

pub const GT_HEADER: &str = "t,x,y,theta";
pub const ODOM_HEADER: &str = "t,dx,dy,dtheta";
pub const ESTIMATE_HEADER: &str = "robot,node,x,y,theta";

/// Optimised poses, one row per node.
pub fn estimate_csv<T: Real>(est: &[(NodeId, Pose2<T>)]) -> String {
    let mut s = String::from(ESTIMATE_HEADER);
    s.push('\n');
    for (id, p) in est {
        let _ = writeln!(s, "{},{},{},{},{}", id.robot, id.t, p.x, p.y, p.theta);
    }
    s
}

pub fn parse_estimate_csv<T: Real>(text: &str) -> Result<Vec<(NodeId, Pose2<T>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == ESTIMATE_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{ESTIMATE_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::parse(k + 1, format!("expected 5 fields, got {}", f.len())));
        }
        out.push((
            NodeId::new(num(f[0], k + 1)?, num(f[1], k + 1)?),
            Pose2::new(num(f[2], k + 1)?, num(f[3], k + 1)?, num(f[4], k + 1)?),
        ));
    }
    Ok(out)
}

fn num<V: std::str::FromStr>(s: &str, line: usize) -> Result<V> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse `{s}` as a number")))
}

fn push_upper<T: Real>(s: &mut String, m: &mat3::Mat3<T>) {
    let _ = write!(
        s,
        " {} {} {} {} {} {}",
        m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]
    );
}

fn symmetric_from<T: Real>(v: &[T]) -> mat3::Mat3<T> {
    [[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]]
}

/// Pose-graph text: `VERTEX_SE2`, `FIX`, `EDGE_SE2` (upper-triangular
/// information), `EDGE_RANGE i j d w` and `PRIOR_SE2`, with vertices at `poses`.
pub fn write_graph<T: Real>(problem: &PoseGraphProblem<T>, poses: &[Pose2<T>]) -> Result<String> {
    if poses.len() != problem.len() {
        return Err(Error::Data("pose count does not match the graph".into()));
    }
    let mut s = String::new();
    for (id, p) in problem.nodes().iter().zip(poses) {
        let _ = writeln!(s, "VERTEX_SE2 {} {} {} {}", encode_node(*id)?, p.x, p.y, p.theta);
    }
    for id in problem.fixed_nodes() {
        let _ = writeln!(s, "FIX {}", encode_node(id)?);
    }
    for c in problem.constraints() {
        match c {
            Constraint::RelativePose { i, j, z, info } => {
                let _ = write!(
                    s,
                    "EDGE_SE2 {} {} {} {} {}",
                    encode_node(*i)?,
                    encode_node(*j)?,
                    z.x,
                    z.y,
                    z.theta
                );
                push_upper(&mut s, info);
            }
            Constraint::Distance { i, j, d, w } => {
                let _ = write!(s, "EDGE_RANGE {} {} {} {}", encode_node(*i)?, encode_node(*j)?, d, w);
            }
            Constraint::PosePrior { i, z, info } => {
                let _ = write!(s, "PRIOR_SE2 {} {} {} {}", encode_node(*i)?, z.x, z.y, z.theta);
                push_upper(&mut s, info);
            }
        }
        s.push('\n');
    }
    Ok(s)
}

/// Parses [`write_graph`] output. Lines starting with `#` are ignored.
pub fn read_graph<T: Real>(text: &str) -> Result<PoseGraphProblem<T>> {
    let mut nodes = Vec::new();
    let mut fixed = Vec::new();
    let mut constraints = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let want = |n: usize| -> Result<()> {
            if f.len() == n {
                Ok(())
            } else {
                Err(Error::parse(
                    ln,
                    format!("{} expects {} fields, got {}", f[0], n - 1, f.len() - 1),
                ))
            }
        };
        let id = |s: &str| -> Result<NodeId> { decode_node(num(s, ln)?) };
        let vals = |from: usize| -> Result<Vec<T>> { f[from..].iter().map(|v| num(v, ln)).collect() };
        match f[0] {
            "VERTEX_SE2" => {
                want(5)?;
                let v = vals(2)?;
                nodes.push((id(f[1])?, Pose2::new(v[0], v[1], v[2])));
            }
            "FIX" => {
                want(2)?;
                fixed.push(id(f[1])?);
            }
            "EDGE_SE2" => {
                want(12)?;
                let v = vals(3)?;
                constraints.push(Constraint::RelativePose {
                    i: id(f[1])?,
                    j: id(f[2])?,
                    z: Pose2::new(v[0], v[1], v[2]),
                    info: symmetric_from(&v[3..]),
                });
            }
            "EDGE_RANGE" => {
                want(5)?;
                let v = vals(3)?;
                constraints.push(Constraint::Distance {
                    i: id(f[1])?,
                    j: id(f[2])?,
                    d: v[0],
                    w: v[1],
                });
            }
            "PRIOR_SE2" => {
                want(11)?;
                let v = vals(2)?;
                constraints.push(Constraint::PosePrior {
                    i: id(f[1])?,
                    z: Pose2::new(v[0], v[1], v[2]),
                    info: symmetric_from(&v[3..]),
                });
            }
            other => return Err(Error::parse(ln, format!("unknown record `{other}`"))),
        }
    }
    PoseGraphProblem::without_gauge(nodes, constraints, &fixed)
}

/// Writes world, scans, and per-robot ground truth and odometry into `dir`.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(WORLD_FILE), world_to_json(&dataset.world)?)?;
    let mut scans = Vec::new();
    for r in &dataset.robots {
        write_scans_jsonl(&mut scans, &r.scans)?;
        fs::write(
            dir.join(gt_file(r.robot)),
            pose_csv(GT_HEADER, &r.times, &r.ground_truth),
        )?;
        fs::write(
            dir.join(odom_file(r.robot)),
            pose_csv(ODOM_HEADER, &r.times, &r.increments),
        )?;
    }
    fs::write(dir.join(SCANS_FILE), scans)?;
    Ok(())
}

/// Loads a dataset directory. Robots are those with an odometry file; ground
/// truth is attached when present for every robot.
pub fn load_dataset<T: Real>(dir: &Path) -> Result<Vec<RobotInput<T>>> {
    let scans_path = dir.join(SCANS_FILE);
    let file =
        fs::File::open(&scans_path).map_err(|e| Error::Data(format!("cannot open {}: {e}", scans_path.display())))?;
    let scans: Vec<RawScan<T>> = read_scans_jsonl(std::io::BufReader::new(file))?;
    let mut robots: Vec<u32> = scans.iter().map(|s| s.robot).collect();
    robots.sort_unstable();
    robots.dedup();
    let mut inputs = Vec::with_capacity(robots.len());
    for robot in robots {
        let odom_path = dir.join(odom_file(robot));
        let text = fs::read_to_string(&odom_path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", odom_path.display())))?;
        let (odom_times, increments) = parse_pose_csv::<f64>(&text, ODOM_HEADER)?;
        let gt_path = dir.join(gt_file(robot));
        let ground_truth = match fs::read_to_string(&gt_path) {
            Ok(text) => Some(parse_pose_csv::<f64>(&text, GT_HEADER)?),
            Err(_) => None,
        };
        inputs.push(RobotInput {
            robot,
            scans: scans.iter().filter(|s| s.robot == robot).cloned().collect(),
            odom_times,
            increments,
            ground_truth,
        });
    }
    Ok(inputs)
}
