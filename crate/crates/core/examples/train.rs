//! Train a small classifier on synthetic clusters and save it as a model file.
//!
//! Usage: cargo run --release --example train [out.json]

use covshift::evaluate::{compute_spi, ClusterSpec};
use covshift::model::{train_fixture, Architecture, LayerSpec, TrainConfig};
use covshift::{Activation, InputRange};

fn main() -> covshift::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("cluster_model.json"), Into::into);
    let clusters = ClusterSpec {
        dim: 2,
        classes: 3,
        spread: 0.5,
        radius: 1.5,
        center_seed: 11,
        range: InputRange::new(-3.0, 3.0)?,
    };
    let arch = Architecture {
        input_dim: 2,
        input_range: clusters.range,
        layers: vec![
            LayerSpec::new(8, Activation::Relu),
            LayerSpec::new(3, Activation::Identity),
        ],
    };
    let train = clusters.sample(&[1.0, 1.0, 1.0], 600, 1)?;
    let net = train_fixture(&arch, &train, &TrainConfig { epochs: 25, step: 0.05, seed: 1 })?;
    let held_out = clusters.sample(&[1.0, 1.0, 1.0], 300, 2)?;
    let spi = compute_spi(&net, &held_out)?;
    println!("held-out accuracy {:.3}  per class {:?}", spi.overall_accuracy, spi.per_class_accuracy);
    net.save(&out)?;
    println!("model written to {}", out.display());
    Ok(())
}
