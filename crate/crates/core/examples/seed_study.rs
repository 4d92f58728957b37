//! Runs the default simulation over several seeds and prints odometry-only,
//! best single-robot and best collaborative errors.
//!
//! cargo run --release -p radioslam --example seed_study -- [seeds] [floor_dbm]

use std::time::Instant;

use radioslam::evaluation::{run_sweep, SweepEntry};
use radioslam::pipeline::{inputs_from_dataset, prepare_dataset, train_models, ModelConfig, SlamConfig};
use radioslam::similarity::{Measure, SimilarityParams};
use radioslam::simulator::{simulate_dataset, SimConfig};

fn main() -> radioslam::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let floor: Option<f64> = args.get(2).and_then(|s| s.parse().ok());
    let grid: Vec<f64> = std::env::var("GRID")
        .unwrap_or_else(|_| "0,3,6,9,12,15".into())
        .split(',')
        .map(|v| v.parse().expect("grid value"))
        .collect();
    for seed in 1..=seeds {
        let start = Instant::now();
        let mut sim = SimConfig {
            seed,
            ..Default::default()
        };
        if let Some(f) = floor {
            sim.propagation.detection_floor = f;
        }
        let ds = simulate_dataset(&sim)?;
        let data = prepare_dataset::<f64>(&inputs_from_dataset(&ds), 5.0, 1)?;
        let mut entries = Vec::new();
        for m in [Measure::Proposed, Measure::Gaussian] {
            let mut params = SimilarityParams::default().with_measure(m);
            if std::env::var("TAU").as_deref() == Ok("count") {
                params.tau_scale = radioslam::similarity::TauScale::Count;
            }
            let models = train_models(&data, &params, &ModelConfig::default())?;
            entries.push(SweepEntry {
                label: m.to_string(),
                params,
                models,
            });
        }
        let res = run_sweep(&data, &entries, &grid, &grid, &SlamConfig::default(), Some(seed))?;
        let odo = res.cell("proposed", 0.0, 0.0).unwrap().mean_err;
        let single = res.best("proposed", |c| c.nu_p == 0.0).unwrap();
        let collab = res.best("proposed", |c| c.nu_p > 0.0).unwrap();
        let gauss = res.best("gaussian", |_| true).unwrap();
        let best = res.best("proposed", |_| true).unwrap();
        println!(
            "seed {seed}: odo {odo:.2} single {:.2} (nu_s {}) {:.0}% collab {:.2} ({},{}) {:.0}% | best P {:.2} G {:.2} | {:.1}s",
            single.mean_err,
            single.nu_s,
            100.0 * single.mean_err / odo,
            collab.mean_err,
            collab.nu_s,
            collab.nu_p,
            100.0 * collab.mean_err / single.mean_err,
            best.mean_err,
            gauss.mean_err,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
