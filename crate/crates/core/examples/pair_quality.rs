//! Ranking quality of the proposed and Gaussian similarities on ground-truth
//! distances, for intra-robot pairs more than 100 m of travel apart.
//!
//! env: FLOOR, TAU (ratio|count), SIGTAU, MISS, SHADOW (per-scan dB),
//! FROZEN (dB), APS, SEEDS

use radioslam::distance_model::cumulative_path;
use radioslam::pipeline::{inputs_from_dataset, prepare_dataset};
use radioslam::similarity::{similarity, Measure, SimilarityParams, TauScale};
use radioslam::simulator::{simulate_dataset, SimConfig};

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}

fn main() -> radioslam::Result<()> {
    let mut sim = SimConfig {
        n_aps: env("APS", 30),
        frozen_shadowing_sigma: env("FROZEN", 0.0),
        ..Default::default()
    };
    sim.propagation.detection_floor = env("FLOOR", -75.0);
    sim.propagation.miss_prob = env("MISS", 0.1);
    sim.propagation.shadowing_sigma = env("SHADOW", 4.0);
    let seeds: u64 = env("SEEDS", 3);
    let mut params = SimilarityParams::<f64> {
        sigma_tau: env("SIGTAU", 4.0),
        ..Default::default()
    };
    if std::env::var("TAU").as_deref() == Ok("count") {
        params.tau_scale = TauScale::Count;
    }
    for seed in 1..=seeds {
        sim.seed = seed;
        let ds = simulate_dataset(&sim)?;
        let data = prepare_dataset::<f64>(&inputs_from_dataset(&ds), 5.0, 1)?;
        let r = &data.robots[0];
        let gt = &data.ground_truth.as_ref().unwrap()[0];
        let path = cumulative_path(&r.odometry);
        let mut line = format!("seed {seed} ({} nodes):", r.len());
        for m in [Measure::Proposed, Measure::Gaussian] {
            let p = params.with_measure(m);
            let mut scored = Vec::new();
            for i in 0..r.len() {
                for j in 0..i {
                    if path[i] - path[j] <= 100.0 {
                        continue;
                    }
                    let s = similarity(&r.fingerprints[i], &r.fingerprints[j], &p).s;
                    scored.push((s, gt[i].distance(&gt[j])));
                }
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            line.push_str(&format!(" {m}:"));
            for k in [50, 200, 1000] {
                let top = &scored[..k.min(scored.len())];
                let near = top.iter().filter(|x| x.1 < 3.0).count() as f64 / top.len() as f64;
                let far = top.iter().filter(|x| x.1 > 10.0).count();
                line.push_str(&format!(" @{k} near {near:.2} far {far}"));
            }
        }
        println!("{line}");
    }
    Ok(())
}
