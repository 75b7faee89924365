//! Conservative KL threshold implied by an ε-portion tolerance on a test histogram.
//!
//! Usage: cargo run --example kappa [eps]

use covshift::bounds::BinningSpec;
use covshift::{conservative_kappa, ActivationHistogram};

fn main() -> covshift::Result<()> {
    let eps: f64 = std::env::args().nth(1).map_or(0.05, |s| s.parse().expect("eps must be a number"));
    let counts = vec![vec![12, 30, 40, 18], vec![50, 25, 20, 5], vec![0, 60, 40, 0]];
    let h = ActivationHistogram::from_counts(BinningSpec::new(0.0, 1.0, 3)?, 1, vec![0, 1, 2], 100, counts)?;
    let kappa = conservative_kappa(&h, eps)?;
    for (i, k) in kappa.per_neuron.iter().enumerate() {
        println!("neuron {i}: kappa {k:.6}");
    }
    println!("monitor threshold (max over neurons) {:.6}", kappa.max());
    Ok(())
}
