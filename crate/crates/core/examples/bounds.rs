//! Interval bounds and the derived binning on a small three-input ReLU network.
//!
//! Usage: cargo run --example bounds [delta]

use covshift::{bounds_report, Activation, InputRange, Layer, Network};

fn main() -> covshift::Result<()> {
    let delta: f64 = std::env::args().nth(1).map_or(3.0, |s| s.parse().expect("delta must be a number"));
    let net = Network::new(
        3,
        InputRange::new(-1.0, 1.0)?,
        vec![
            Layer::new(vec![vec![1.0, 1.0, 1.0], vec![2.0, -1.0, 1.0]], vec![0.0; 2], Activation::Relu)?,
            Layer::new(vec![vec![2.0, 2.0], vec![1.0, 0.5]], vec![0.0; 2], Activation::Relu)?,
        ],
    )?;
    for layer in 1..=net.depth() {
        let report = bounds_report(&net, layer, delta)?;
        println!("layer {layer}");
        for (i, iv) in report.intervals.iter().enumerate() {
            println!("  neuron {i}: [{}, {}]", iv.lo, iv.hi);
        }
        let s = report.spec;
        println!("  c = {}  delta = {}  N = {}  domain [{}, {}]", s.c, s.delta, s.n, s.c, s.domain_hi());
    }
    Ok(())
}
