//! Single-robot best-cell comparison of the proposed and Gaussian measures.
//!
//! env: FLOOR (dBm), TAU (ratio|count), GRID (comma list), SEEDS, SHADOW (frozen, dB), APS

use radioslam::evaluation::{run_sweep, SweepEntry};
use radioslam::pipeline::{inputs_from_dataset, prepare_dataset, train_models, ModelConfig, SlamConfig};
use radioslam::similarity::{Measure, SimilarityParams, TauScale};
use radioslam::simulator::{simulate_dataset, SimConfig};

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}

fn main() -> radioslam::Result<()> {
    let floor: f64 = env("FLOOR", -65.0);
    let seeds: u64 = env("SEEDS", 10);
    let shadow: f64 = env("SHADOW", 0.0);
    let n_aps: usize = env("APS", 30);
    let count = std::env::var("TAU").as_deref() == Ok("count");
    let grid: Vec<f64> = std::env::var("GRID")
        .unwrap_or_else(|_| "0,3,4,5,6,7,8,10".into())
        .split(',')
        .map(|v| v.parse().expect("grid value"))
        .collect();
    let mut wins = 0;
    for seed in 1..=seeds {
        let mut sim = SimConfig {
            seed,
            n_aps,
            frozen_shadowing_sigma: shadow,
            ..Default::default()
        };
        sim.propagation.detection_floor = floor;
        let ds = simulate_dataset(&sim)?;
        let data = prepare_dataset::<f64>(&inputs_from_dataset(&ds), 5.0, 1)?;
        let mut entries = Vec::new();
        for m in [Measure::Proposed, Measure::Gaussian] {
            let mut params = SimilarityParams::default().with_measure(m);
            if count {
                params.tau_scale = TauScale::Count;
            }
            let models = train_models(&data, &params, &ModelConfig::default())?;
            entries.push(SweepEntry {
                label: m.to_string(),
                params,
                models,
            });
        }
        let res = run_sweep(&data, &entries, &grid, &[0.0], &SlamConfig::default(), Some(seed))?;
        let p = res.best("proposed", |_| true).unwrap();
        let g = res.best("gaussian", |_| true).unwrap();
        if p.mean_err <= g.mean_err {
            wins += 1;
        }
        let row = |m: &str| {
            grid.iter()
                .map(|s| format!("{:.2}", res.cell(m, *s, 0.0).unwrap().mean_err))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!(
            "seed {seed}: P {:.3} ({}) G {:.3} ({})\n   P: {}\n   G: {}",
            p.mean_err,
            p.nu_s,
            g.mean_err,
            g.nu_s,
            row("proposed"),
            row("gaussian")
        );
    }
    println!("proposed <= gaussian in {wins}/{seeds}");
    Ok(())
}
