//! Trajectory scoring against ground truth and threshold sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint_builder::{
    assemble_problem, inter_robot_candidates, intra_robot_candidates, ClosureCandidate, ModelSet,
};
use crate::error::{Error, Result};
use crate::pipeline::{PreparedDataset, SlamConfig};
use crate::pose_graph::{optimize, NodeId, Pose2};
use crate::scalar::Real;
use crate::similarity::SimilarityParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotAccuracy {
    pub robot: u32,
    pub mean_err: f64,
    pub rmse: f64,
    pub max_err: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mean_err: f64,
    pub rmse: f64,
    pub max_err: f64,
    pub n_points: usize,
    pub per_robot: Vec<RobotAccuracy>,
}

fn summarize(errors: &[f64]) -> (f64, f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let max = errors.iter().copied().fold(0.0, f64::max);
    // mean <= rmse holds mathematically; keep it exact under rounding
    (mean.min(rmse), rmse, max.max(rmse))
}

/// Per-node Euclidean position error in the shared anchored frame.
pub fn mean_position_error<T: Real>(est: &[(NodeId, Pose2<T>)], gt: &[(NodeId, Pose2<T>)]) -> Result<AccuracyReport> {
    if est.is_empty() {
        return Err(Error::Data("no poses to score".into()));
    }
    let truth: BTreeMap<NodeId, &Pose2<T>> = gt.iter().map(|(id, p)| (*id, p)).collect();
    if truth.len() != gt.len() || truth.len() != est.len() {
        return Err(Error::Data(format!(
            "node sets differ: {} estimated, {} ground truth",
            est.len(),
            gt.len()
        )));
    }
    let mut by_robot: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::with_capacity(est.len());
    for (id, p) in est {
        let g = truth
            .get(id)
            .ok_or_else(|| Error::Data(format!("node {id:?} has no ground truth")))?;
        let e = p.distance(g).as_f64();
        all.push(e);
        by_robot.entry(id.robot).or_default().push(e);
    }
    let (mean_err, rmse, max_err) = summarize(&all);
    let per_robot = by_robot
        .into_iter()
        .map(|(robot, errs)| {
            let (mean_err, rmse, max_err) = summarize(&errs);
            RobotAccuracy {
                robot,
                mean_err,
                rmse,
                max_err,
                n_points: errs.len(),
            }
        })
        .collect();
    Ok(AccuracyReport {
        mean_err,
        rmse,
        max_err,
        n_points: all.len(),
        per_robot,
    })
}

/// Least-squares rotation and translation of `est` onto `gt` (diagnostics only).
pub fn align_rigid<T: Real>(est: &[(NodeId, Pose2<T>)], gt: &[(NodeId, Pose2<T>)]) -> Result<Vec<(NodeId, Pose2<T>)>> {
    let truth: BTreeMap<NodeId, &Pose2<T>> = gt.iter().map(|(id, p)| (*id, p)).collect();
    let pairs: Vec<(&Pose2<T>, &Pose2<T>)> = est
        .iter()
        .map(|(id, p)| {
            truth
                .get(id)
                .map(|g| (p, *g))
                .ok_or_else(|| Error::Data(format!("node {id:?} has no ground truth")))
        })
        .collect::<Result<_>>()?;
    if pairs.is_empty() {
        return Err(Error::Data("no poses to align".into()));
    }
    let n = pairs.len() as f64;
    let (mut ex, mut ey, mut gx, mut gy) = (0.0, 0.0, 0.0, 0.0);
    for (p, g) in &pairs {
        ex += p.x.as_f64();
        ey += p.y.as_f64();
        gx += g.x.as_f64();
        gy += g.y.as_f64();
    }
    let (ex, ey, gx, gy) = (ex / n, ey / n, gx / n, gy / n);
    let (mut sc, mut ss) = (0.0, 0.0);
    for (p, g) in &pairs {
        let (px, py) = (p.x.as_f64() - ex, p.y.as_f64() - ey);
        let (qx, qy) = (g.x.as_f64() - gx, g.y.as_f64() - gy);
        sc += px * qx + py * qy;
        ss += px * qy - py * qx;
    }
    let phi = ss.atan2(sc);
    let (s, c) = phi.sin_cos();
    Ok(est
        .iter()
        .map(|(id, p)| {
            let (px, py) = (p.x.as_f64() - ex, p.y.as_f64() - ey);
            let q = Pose2::new(gx + c * px - s * py, gy + s * px + c * py, p.theta.as_f64() + phi);
            (*id, q.cast())
        })
        .collect())
}

/// `100 (base - new) / base`.
pub fn improvement_percent(base_err: f64, new_err: f64) -> Result<f64> {
    if !(base_err > 0.0) {
        return Err(Error::Data(format!("improvement undefined for base error {base_err}")));
    }
    Ok(100.0 * (base_err - new_err) / base_err)
}

/// One similarity variant taking part in a sweep.
#[derive(Clone, Debug)]
pub struct SweepEntry<T> {
    pub label: String,
    pub params: SimilarityParams<T>,
    pub models: ModelSet<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub measure: String,
    pub nu_s: f64,
    pub nu_p: f64,
    pub mean_err: f64,
    pub rmse: f64,
    pub max_err: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sigma_r: f64,
    pub sigma_tau: f64,
    pub seed: Option<u64>,
    pub measures: Vec<String>,
    pub nu_s: Vec<f64>,
    pub nu_p: Vec<f64>,
    /// Ordered by measure, then `nu_s`, then `nu_p`.
    pub cells: Vec<SweepCell>,
}

/// Candidate closures computed once per similarity variant at the largest
/// thresholds, then filtered per grid cell.
struct CandidateCache<T> {
    intra: Vec<Vec<ClosureCandidate<T>>>,
    inter: Vec<ClosureCandidate<T>>,
}

fn max_of<T: Real>(v: &[T]) -> T {
    v.iter().copied().fold(T::zero(), T::max)
}

fn candidates<T: Real>(
    data: &PreparedDataset<T>,
    entry: &SweepEntry<T>,
    cfg: &SlamConfig<T>,
    nu_s_max: T,
    nu_p_max: T,
) -> Result<CandidateCache<T>> {
    let mut intra = Vec::with_capacity(data.robots.len());
    for (k, robot) in data.robots.iter().enumerate() {
        intra.push(if nu_s_max > T::zero() {
            intra_robot_candidates(
                robot,
                entry.models.intra(k),
                &entry.params,
                cfg.closures.min_path_separation_m,
                nu_s_max,
            )?
        } else {
            Vec::new()
        });
    }
    let mut inter = Vec::new();
    if nu_p_max > T::zero() {
        for k in 0..data.robots.len() {
            for l in k + 1..data.robots.len() {
                inter.extend(inter_robot_candidates(
                    &data.robots[k],
                    &data.robots[l],
                    entry.models.inter(),
                    &entry.params,
                    nu_p_max,
                )?);
            }
        }
    }
    Ok(CandidateCache { intra, inter })
}

/// Scores every `(variant, nu_s, nu_p)` cell on the same dataset and models.
/// Solver failures are recorded in the cell as non-converged with NaN errors.
pub fn run_sweep<T: Real>(
    data: &PreparedDataset<T>,
    entries: &[SweepEntry<T>],
    nu_s: &[T],
    nu_p: &[T],
    cfg: &SlamConfig<T>,
    seed: Option<u64>,
) -> Result<SweepResult> {
    if entries.is_empty() || nu_s.is_empty() || nu_p.is_empty() {
        return Err(Error::Config("sweep grids and measure list must be non-empty".into()));
    }
    if nu_s.iter().chain(nu_p).any(|v| !(*v >= T::zero())) {
        return Err(Error::Config("sweep thresholds must be >= 0".into()));
    }
    cfg.validate()?;
    let gt = data
        .ground_truth_nodes()
        .ok_or_else(|| Error::Data("sweep needs ground truth".into()))?;

    let mut cells = Vec::new();
    for entry in entries {
        let cache = candidates(data, entry, cfg, max_of(nu_s), max_of(nu_p))?;
        let grid: Vec<(T, T)> = nu_s.iter().flat_map(|s| nu_p.iter().map(move |p| (*s, *p))).collect();
        let scored: Vec<SweepCell> = grid
            .par_iter()
            .map(|&(s, p)| {
                let closures = cache
                    .intra
                    .iter()
                    .flatten()
                    .filter(|c| c.d_hat < s)
                    .chain(cache.inter.iter().filter(|c| c.d_hat < p))
                    .map(|c| c.to_constraint(cfg.closures.variance_floor));
                let outcome = assemble_problem(&data.robots, &data.anchors, &cfg.odometry_info, &cfg.anchor, closures)
                    .and_then(|problem| {
                        let opt = optimize(&problem, &cfg.lm)?;
                        let est: Vec<_> = problem.nodes().iter().copied().zip(opt.poses).collect();
                        Ok((mean_position_error(&est, &gt)?, opt.report.converged))
                    });
                let (mean_err, rmse, max_err, converged) = match outcome {
                    Ok((r, conv)) => (r.mean_err, r.rmse, r.max_err, conv),
                    Err(_) => (f64::NAN, f64::NAN, f64::NAN, false),
                };
                SweepCell {
                    measure: entry.label.clone(),
                    nu_s: s.as_f64(),
                    nu_p: p.as_f64(),
                    mean_err,
                    rmse,
                    max_err,
                    converged,
                }
            })
            .collect();
        cells.extend(scored);
    }
    Ok(SweepResult {
        sigma_r: entries[0].params.sigma_r.as_f64(),
        sigma_tau: entries[0].params.sigma_tau.as_f64(),
        seed,
        measures: entries.iter().map(|e| e.label.clone()).collect(),
        nu_s: nu_s.iter().map(|v| v.as_f64()).collect(),
        nu_p: nu_p.iter().map(|v| v.as_f64()).collect(),
        cells,
    })
}

impl SweepResult {
    pub fn cell(&self, measure: &str, nu_s: f64, nu_p: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.measure == measure && c.nu_s == nu_s && c.nu_p == nu_p)
    }

    /// Lowest finite mean error among the cells of `measure` accepted by `keep`.
    pub fn best(&self, measure: &str, keep: impl Fn(&SweepCell) -> bool) -> Option<&SweepCell> {
        self.cells
            .iter()
            .filter(|c| c.measure == measure && c.mean_err.is_finite() && keep(c))
            .min_by(|a, b| a.mean_err.total_cmp(&b.mean_err))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,nu_s,nu_p,mean_err,rmse,max_err,converged\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.measure, c.nu_s, c.nu_p, c.mean_err, c.rmse, c.max_err, c.converged
            );
        }
        out
    }

    /// Text table with `nu_s` rows and `nu_p` columns, one block per measure.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mean position error (m), sigma_r = {}, sigma_tau = {}",
            self.sigma_r, self.sigma_tau
        );
        for m in &self.measures {
            let _ = writeln!(out, "\n[{m}]");
            let _ = write!(out, "{:>8} |", "nu_s\\nu_p");
            for p in &self.nu_p {
                let _ = write!(out, "{p:>9}");
            }
            out.push('\n');
            let _ = writeln!(out, "{}", "-".repeat(10 + 9 * self.nu_p.len()));
            for s in &self.nu_s {
                let _ = write!(out, "{s:>9} |");
                for p in &self.nu_p {
                    match self.cell(m, *s, *p) {
                        Some(c) if c.mean_err.is_finite() => {
                            let flag = if c.converged { ' ' } else { '*' };
                            let _ = write!(out, "{:>8.3}{flag}", c.mean_err);
                        }
                        _ => {
                            let _ = write!(out, "{:>9}", "nan");
                        }
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// SVG heatmap of mean error over the grid for one measure.
    pub fn heatmap_svg(&self, measure: &str) -> String {
        let (cw, ch, left, top) = (60.0, 28.0, 70.0, 50.0);
        let w = left + cw * self.nu_p.len() as f64 + 20.0;
        let h = top + ch * self.nu_s.len() as f64 + 20.0;
        let finite: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.measure == measure && c.mean_err.is_finite())
            .map(|c| c.mean_err)
            .collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{left}" y="18" font-size="13">{measure}: mean error (m)</text>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{left}" y="38">nu_p</text><text x="8" y="{}">nu_s</text>"#,
            top + 14.0
        );
        for (j, p) in self.nu_p.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{p}</text>"#,
                left + cw * j as f64 + 24.0,
                top - 4.0
            );
        }
        for (i, nu_s) in self.nu_s.iter().enumerate() {
            let y = top + ch * i as f64;
            let _ = writeln!(s, r#"<text x="40" y="{}">{nu_s}</text>"#, y + 18.0);
            for (j, nu_p) in self.nu_p.iter().enumerate() {
                let x = left + cw * j as f64;
                let (fill, label) = match self.cell(measure, *nu_s, *nu_p) {
                    Some(c) if c.mean_err.is_finite() => {
                        let f = if hi > lo { (c.mean_err - lo) / (hi - lo) } else { 0.0 };
                        let r = (60.0 + 195.0 * f) as u8;
                        let g = (200.0 - 150.0 * f) as u8;
                        (format!("rgb({r},{g},90)"), format!("{:.2}", c.mean_err))
                    }
                    _ => ("#999".to_string(), "nan".to_string()),
                };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="white"/><text x="{}" y="{}">{label}</text>"#,
                    x + 10.0,
                    y + 18.0
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(pts: &[(f64, f64)]) -> Vec<(NodeId, Pose2<f64>)> {
        pts.iter()
            .enumerate()
            .map(|(t, (x, y))| (NodeId::new(0, t), Pose2::new(*x, *y, 0.0)))
            .collect()
    }

    #[test]
    fn accuracy_examples() {
        let gt = nodes(&[(0.0, 0.0), (1.0, 2.0), (5.0, -1.0)]);
        let r = mean_position_error(&gt, &gt).unwrap();
        assert_eq!((r.mean_err, r.rmse, r.max_err), (0.0, 0.0, 0.0));
        let shifted = nodes(&[(3.0, 0.0), (4.0, 2.0), (8.0, -1.0)]);
        let r = mean_position_error(&shifted, &gt).unwrap();
        assert_eq!((r.mean_err, r.rmse, r.max_err), (3.0, 3.0, 3.0));
        let r = mean_position_error(&nodes(&[(0.0, 0.0), (4.0, 0.0)]), &nodes(&[(0.0, 0.0), (0.0, 0.0)])).unwrap();
        assert_eq!(r.mean_err, 2.0);
        assert!((r.rmse - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.n_points, 2);
        assert!(mean_position_error(&gt[..2], &gt).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_percent(3.261, 2.774).unwrap() - 14.93).abs() < 0.005);
        assert!((improvement_percent(3.364, 2.736).unwrap() - 18.67).abs() < 0.005);
        assert_eq!(improvement_percent(5.0, 5.0).unwrap(), 0.0);
        assert!(improvement_percent(0.0, 1.0).is_err());
    }

    #[test]
    fn alignment_recovers_rigid_motion() {
        let gt = nodes(&[(0.0, 0.0), (4.0, 1.0), (2.0, 5.0), (-1.0, 3.0)]);
        let moved: Vec<_> = gt
            .iter()
            .map(|(id, p)| (*id, Pose2::new(0.3, -2.0, 0.7).compose(p)))
            .collect();
        let aligned = align_rigid(&moved, &gt).unwrap();
        let r = mean_position_error(&aligned, &gt).unwrap();
        assert!(r.max_err < 1e-12);
    }

    #[test]
    fn csv_header_and_table() {
        let res = SweepResult {
            sigma_r: 6.0,
            sigma_tau: 4.0,
            seed: Some(1),
            measures: vec!["proposed".into()],
            nu_s: vec![0.0],
            nu_p: vec![0.0, 5.0],
            cells: vec![
                SweepCell {
                    measure: "proposed".into(),
                    nu_s: 0.0,
                    nu_p: 0.0,
                    mean_err: 2.0,
                    rmse: 2.5,
                    max_err: 4.0,
                    converged: true,
                },
                SweepCell {
                    measure: "proposed".into(),
                    nu_s: 0.0,
                    nu_p: 5.0,
                    mean_err: 1.5,
                    rmse: 2.0,
                    max_err: 3.0,
                    converged: false,
                },
            ],
        };
        let csv = res.to_csv();
        assert!(csv.starts_with("measure,nu_s,nu_p,mean_err,rmse,max_err,converged\n"));
        assert!(csv.contains("proposed,0,5,1.5,2,3,false"));
        let table = res.render_table();
        assert!(table.contains("2.000") && table.contains("1.500*"));
        assert_eq!(res.best("proposed", |c| c.nu_p > 0.0).unwrap().mean_err, 1.5);
        assert!(res.heatmap_svg("proposed").starts_with("<svg"));
    }
}
