//! Label-shift experiment on synthetic clusters: reshape an inflated test set
//! toward operation and compare class-ratio distances before and after.
//!
//! Usage: cargo run --release --example shift_experiment [seed] [out_dir]

use covshift::evaluate::{run_experiment, ClusterSpec, DataSource, ExperimentConfig, ModelSource};
use covshift::model::TrainConfig;
use covshift::reshape::{Candidates, DEFAULT_NODE_BUDGET};
use covshift::{Activation, InputRange};

fn main() -> covshift::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let out = args.next().unwrap_or_else(|| format!("target/shift_experiment_{seed}"));

    let config = ExperimentConfig {
        clusters: Some(ClusterSpec {
            dim: 4,
            classes: 5,
            spread: 0.6,
            radius: 1.5,
            center_seed: seed,
            range: InputRange::new(-3.0, 3.0)?,
        }),
        model: ModelSource::Train {
            hidden: vec![16, 10],
            activation: Activation::Relu,
            samples: 1500,
            train: TrainConfig { epochs: 20, step: 0.05, seed },
        },
        test: DataSource::Synthetic { class_weights: vec![1.0, 1.0, 3.0, 3.0, 3.0], size: 2000, seed: seed + 1000 },
        operational: DataSource::Synthetic { class_weights: vec![3.0, 3.0, 1.0, 1.0, 1.0], size: 1000, seed: seed + 2000 },
        layer: None,
        neurons: None,
        delta: 1.0,
        eps: 0.01,
        max_relaxations: 6,
        eps_growth: 2.0,
        candidates: Candidates::All,
        min_survivors: 1,
        node_budget: DEFAULT_NODE_BUDGET,
    };
    let outcome = run_experiment(&config, &out)?;
    let s = &outcome.summary;
    println!(
        "status {:?}  eps {:?}  removed {:?} of {}  x = {:.4}  y = {:.4}  solve {:.2}s  nodes {}",
        s.status, s.eps_tried, s.removed, s.test_size, s.x, s.y, s.solve_seconds, outcome.plan.stats.nodes
    );
    println!("bundle written to {out}");
    Ok(())
}
