use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use radioslam::config::PipelineConfig;
use radioslam::constraint_builder::ModelSet;
use radioslam::evaluation::{mean_position_error, run_sweep, AccuracyReport, SweepEntry};
use radioslam::io;
use radioslam::pipeline::{prepare_dataset, run_slam, train_models, PreparedDataset};
use radioslam::pose_graph::{Constraint, NodeId, Pose2};
use radioslam::radio_fingerprint::group_scans_with;
use radioslam::similarity::Measure;
use radioslam::simulator::simulate_dataset;
use radioslam::Error;
use serde::Serialize;

use crate::plot;
use crate::GlobalOpts;

pub enum CliError {
    Core(Error),
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Config(_)) => 2,
            CliError::Core(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult = Result<(), CliError>;

fn config_err(msg: String) -> CliError {
    CliError::Core(Error::Config(msg))
}

/// Loads the config file (if any) and applies the global flags.
fn base_config(g: &GlobalOpts) -> Result<PipelineConfig<f64>, CliError> {
    let mut cfg = match &g.config {
        None => PipelineConfig::default(),
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            if path.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
            } else {
                serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
            }
        }
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn finish(cfg: PipelineConfig<f64>) -> Result<PipelineConfig<f64>, CliError> {
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_prepared(dir: &Path, cfg: &PipelineConfig<f64>, robots: &[u32]) -> Result<PreparedDataset<f64>, CliError> {
    let inputs = io::load_dataset::<f64>(dir)?;
    let data = prepare_dataset(&inputs, cfg.window.window_s, cfg.window.min_aps)?;
    Ok(if robots.is_empty() { data } else { data.select(robots)? })
}

#[derive(Args, Debug, Clone)]
pub struct SimOverrides {
    #[arg(long)]
    pub n_robots: Option<u32>,
    /// Route length per robot, meters.
    #[arg(long)]
    pub route_length: Option<f64>,
    #[arg(long)]
    pub n_aps: Option<usize>,
    /// Detection floor, dBm.
    #[arg(long, allow_negative_numbers = true)]
    pub detection_floor: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimOverrides,
}

pub fn simulate(g: &GlobalOpts, a: SimulateArgs) -> CliResult {
    let mut cfg = base_config(g)?;
    if let Some(n) = a.sim.n_robots {
        cfg.sim.n_robots = n;
    }
    if let Some(v) = a.sim.route_length {
        cfg.sim.route_length_m = v;
    }
    if let Some(v) = a.sim.n_aps {
        cfg.sim.n_aps = v;
    }
    if let Some(v) = a.sim.detection_floor {
        cfg.sim.propagation.detection_floor = v;
    }
    let cfg = finish(cfg)?;
    let dataset = simulate_dataset(&cfg.sim_config())?;
    io::save_dataset(&a.out, &dataset).map_err(|e| match e {
        Error::Io(e) => Error::Data(format!("cannot write {}: {e}", a.out.display())),
        e => e,
    })?;
    write_json(&a.out.join("config.json"), &cfg)?;
    println!(
        "wrote {} robots, {} scans to {}",
        dataset.robots.len(),
        dataset.robots.iter().map(|r| r.scans.len()).sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Scans JSON-Lines file.
    #[arg(long)]
    pub scans: PathBuf,
    /// Fingerprints JSON-Lines output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub window_s: Option<f64>,
}

pub fn ingest(g: &GlobalOpts, a: IngestArgs) -> CliResult {
    let mut cfg = base_config(g)?;
    if let Some(w) = a.window_s {
        cfg.window.window_s = w;
    }
    let cfg = finish(cfg)?;
    let file = fs::File::open(&a.scans).map_err(|e| Error::Data(format!("cannot open {}: {e}", a.scans.display())))?;
    let scans: Vec<radioslam::radio_fingerprint::RawScan<f64>> = io::read_scans_jsonl(BufReader::new(file))?;
    let mut robots: Vec<u32> = scans.iter().map(|s| s.robot).collect();
    robots.sort_unstable();
    robots.dedup();
    let mut out = Vec::new();
    for robot in robots {
        let mine: Vec<_> = scans.iter().filter(|s| s.robot == robot).cloned().collect();
        let fps = group_scans_with(&mine, cfg.window.window_s, cfg.window.min_aps)?;
        println!("robot {robot}: {} scans -> {} fingerprints", mine.len(), fps.len());
        io::write_fingerprints_jsonl(&mut out, &fps)?;
    }
    fs::write(&a.out, out)?;
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct SimilarityOverrides {
    #[arg(long)]
    pub measure: Option<Measure>,
    #[arg(long)]
    pub sigma_r: Option<f64>,
    #[arg(long)]
    pub sigma_tau: Option<f64>,
}

impl SimilarityOverrides {
    fn apply(&self, cfg: &mut PipelineConfig<f64>) {
        if let Some(m) = self.measure {
            cfg.similarity.measure = m;
        }
        if let Some(v) = self.sigma_r {
            cfg.similarity.sigma_r = v;
        }
        if let Some(v) = self.sigma_tau {
            cfg.similarity.sigma_tau = v;
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON output.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sim: SimilarityOverrides,
    /// Bin width on the similarity axis.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub max_path_m: Option<f64>,
}

pub fn train_model(g: &GlobalOpts, a: TrainArgs) -> CliResult {
    let mut cfg = base_config(g)?;
    a.sim.apply(&mut cfg);
    if let Some(v) = a.r {
        cfg.model.r = v;
    }
    if let Some(v) = a.max_path_m {
        cfg.model.max_path_m = v;
    }
    let cfg = finish(cfg)?;
    let data = load_prepared(&a.data, &cfg, &[])?;
    let models = train_models(&data, &cfg.similarity, &cfg.model)?;
    fs::write(&a.out, io::model_to_json(&models.pooled)?)?;
    println!(
        "W = {} training samples, {} bins -> {}",
        models.pooled.total_count(),
        models.pooled.bins.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SlamArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON written by train-model.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for estimate.csv, graph.g2o and report.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Robots to include (default: all).
    #[arg(long, value_delimiter = ',')]
    pub robots: Vec<u32>,
    #[arg(long)]
    pub nu_s: Option<f64>,
    #[arg(long)]
    pub nu_p: Option<f64>,
    #[command(flatten)]
    pub sim: SimilarityOverrides,
}

#[derive(Serialize)]
struct ConstraintCounts {
    odometry: usize,
    intra_robot: usize,
    inter_robot: usize,
    prior: usize,
}

#[derive(Serialize)]
struct SlamReport<'a> {
    robots: Vec<u32>,
    nodes: usize,
    constraints: ConstraintCounts,
    chi2_initial: f64,
    chi2_final: f64,
    iterations: usize,
    converged: bool,
    termination: radioslam::pose_graph::Termination,
    accuracy: Option<AccuracyReport>,
    config: &'a PipelineConfig<f64>,
}

pub fn slam(g: &GlobalOpts, a: SlamArgs) -> CliResult {
    let mut cfg = base_config(g)?;
    a.sim.apply(&mut cfg);
    if let Some(v) = a.nu_s {
        cfg.slam.closures.nu_s = v;
    }
    if let Some(v) = a.nu_p {
        cfg.slam.closures.nu_p = v;
    }
    let cfg = finish(cfg)?;
    let data = load_prepared(&a.data, &cfg, &a.robots)?;
    let text =
        fs::read_to_string(&a.model).map_err(|e| Error::Data(format!("cannot read {}: {e}", a.model.display())))?;
    let models = ModelSet::pooled(io::model_from_json::<f64>(&text)?);
    let outcome = run_slam(&data, &models, &cfg.similarity, &cfg.slam)?;
    let est = outcome.estimate();

    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("estimate.csv"), io::estimate_csv(&est))?;
    fs::write(
        a.out.join("graph.g2o"),
        io::write_graph(&outcome.problem, &outcome.optimized.poses)?,
    )?;

    let mut counts = ConstraintCounts {
        odometry: 0,
        intra_robot: 0,
        inter_robot: 0,
        prior: 0,
    };
    for c in outcome.problem.constraints() {
        match c {
            Constraint::RelativePose { .. } => counts.odometry += 1,
            Constraint::PosePrior { .. } => counts.prior += 1,
            Constraint::Distance { i, j, .. } if i.robot == j.robot => counts.intra_robot += 1,
            Constraint::Distance { .. } => counts.inter_robot += 1,
        }
    }
    let accuracy = match data.ground_truth_nodes() {
        Some(gt) => Some(mean_position_error(&est, &gt)?),
        None => None,
    };
    let rep = &outcome.optimized.report;
    let report = SlamReport {
        robots: data.robots.iter().map(|r| r.robot).collect(),
        nodes: est.len(),
        constraints: counts,
        chi2_initial: rep.initial_chi2,
        chi2_final: rep.final_chi2,
        iterations: rep.iterations,
        converged: rep.converged,
        termination: rep.termination,
        accuracy,
        config: &cfg,
    };
    write_json(&a.out.join("report.json"), &report)?;
    let c = &report.constraints;
    println!(
        "{} nodes; odometry {}, intra {}, inter {}, prior {}; chi2 {} -> {} in {} iterations",
        report.nodes,
        c.odometry,
        c.intra_robot,
        c.inter_robot,
        c.prior,
        rep.initial_chi2,
        rep.final_chi2,
        rep.iterations
    );
    if let Some(acc) = &report.accuracy {
        println!("mean position error {:.3} m", acc.mean_err);
    }
    if !rep.converged {
        return Err(CliError::NotConverged(format!("{:?}", rep.termination)));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Estimate CSV written by slam.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Report JSON output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    accuracy: AccuracyReport,
    config: &'a PipelineConfig<f64>,
}

fn read_estimate(path: &Path) -> Result<Vec<(NodeId, Pose2<f64>)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(io::parse_estimate_csv(&text)?)
}

fn robots_of(est: &[(NodeId, Pose2<f64>)]) -> Vec<u32> {
    let mut robots: Vec<u32> = est.iter().map(|(id, _)| id.robot).collect();
    robots.sort_unstable();
    robots.dedup();
    robots
}

pub fn evaluate(g: &GlobalOpts, a: EvaluateArgs) -> CliResult {
    let cfg = finish(base_config(g)?)?;
    let est = read_estimate(&a.estimate)?;
    let data = load_prepared(&a.data, &cfg, &robots_of(&est))?;
    let gt = data
        .ground_truth_nodes()
        .ok_or_else(|| Error::Data("dataset has no ground truth".into()))?;
    let accuracy = mean_position_error(&est, &gt)?;
    println!(
        "mean {:.4} m, rmse {:.4} m, max {:.4} m over {} poses",
        accuracy.mean_err, accuracy.rmse, accuracy.max_err, accuracy.n_points
    );
    let report = EvaluateReport { accuracy, config: &cfg };
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?),
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for sweep.csv, sweep.txt, sweep.json and heatmaps.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub robots: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub nu_s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub nu_p: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<Measure>,
    #[arg(long)]
    pub sigma_r: Option<f64>,
    #[arg(long)]
    pub sigma_tau: Option<f64>,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    result: &'a radioslam::evaluation::SweepResult,
    config: &'a PipelineConfig<f64>,
}

pub fn sweep(g: &GlobalOpts, a: SweepArgs) -> CliResult {
    let mut cfg = base_config(g)?;
    if !a.nu_s.is_empty() {
        cfg.sweep.nu_s = a.nu_s.clone();
    }
    if !a.nu_p.is_empty() {
        cfg.sweep.nu_p = a.nu_p.clone();
    }
    if !a.measures.is_empty() {
        cfg.sweep.measures = a.measures.clone();
    }
    if let Some(v) = a.sigma_r {
        cfg.similarity.sigma_r = v;
    }
    if let Some(v) = a.sigma_tau {
        cfg.similarity.sigma_tau = v;
    }
    let cfg = finish(cfg)?;
    let data = load_prepared(&a.data, &cfg, &a.robots)?;
    if data.ground_truth.is_none() {
        return Err(Error::Data("sweep needs ground truth".into()).into());
    }
    let entries = cfg
        .sweep
        .measures
        .iter()
        .map(|m| {
            let params = cfg.similarity.with_measure(*m);
            let models = train_models(&data, &params, &cfg.model)?;
            Ok(SweepEntry {
                label: m.as_str().to_string(),
                params,
                models,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let result = run_sweep(
        &data,
        &entries,
        &cfg.sweep.nu_s,
        &cfg.sweep.nu_p,
        &cfg.slam,
        Some(cfg.seed),
    )?;

    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("sweep.csv"), result.to_csv())?;
    let table = result.render_table();
    fs::write(a.out.join("sweep.txt"), &table)?;
    write_json(
        &a.out.join("sweep.json"),
        &SweepReport {
            result: &result,
            config: &cfg,
        },
    )?;
    for m in &result.measures {
        fs::write(a.out.join(format!("heatmap_{m}.svg")), result.heatmap_svg(m))?;
    }
    print!("{table}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// SVG output.
    #[arg(long)]
    pub out: PathBuf,
    /// Single-robot estimate CSV.
    #[arg(long)]
    pub single: Option<PathBuf>,
    /// Collaborative estimate CSV.
    #[arg(long)]
    pub collab: Option<PathBuf>,
}

pub fn export_plot(g: &GlobalOpts, a: PlotArgs) -> CliResult {
    let cfg = finish(base_config(g)?)?;
    let data = load_prepared(&a.data, &cfg, &[])?;
    let mut layers = Vec::new();
    if let Some(gt) = &data.ground_truth {
        layers.push(plot::Layer::from_robots("ground truth", "#222", gt));
    }
    let odom: Vec<Vec<Pose2<f64>>> = data
        .robots
        .iter()
        .zip(&data.anchors)
        .map(|(r, anchor)| radioslam::constraint_builder::anchored_odometry(&r.odometry, anchor))
        .collect();
    layers.push(plot::Layer::from_robots("odometry", "#999", &odom));
    if let Some(p) = &a.single {
        layers.push(plot::Layer::from_estimate(
            "single-robot",
            "#1f77b4",
            &read_estimate(p)?,
        ));
    }
    if let Some(p) = &a.collab {
        layers.push(plot::Layer::from_estimate(
            "collaborative",
            "#d62728",
            &read_estimate(p)?,
        ));
    }
    fs::write(&a.out, plot::render(&layers))?;
    Ok(())
}
