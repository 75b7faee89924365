//! Build test and operational histograms and compare them with both similarity measures.
//!
//! Usage: cargo run --example monitor

use covshift::{
    bounds_report, build_histogram, epsilon_portion_similar, kl_similar, Activation, Dataset, InputRange, Layer, Network,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rng: &mut ChaCha8Rng, n: usize, skew: f64) -> Dataset {
    let points = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            vec![4.0 * u.powf(skew), rng.random_range(0.0..4.0)]
        })
        .collect();
    Dataset::new(points, None).unwrap()
}

fn main() -> covshift::Result<()> {
    let net = Network::new(
        2,
        InputRange::new(0.0, 4.0)?,
        vec![Layer::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0.0; 2], Activation::Relu)?],
    )?;
    let spec = bounds_report(&net, 1, 1.0)?.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let test = sample(&mut rng, 400, 1.0);
    let op = sample(&mut rng, 300, 1.6);

    let h_test = build_histogram(&net, &test, 1, &spec, None)?;
    let h_op = build_histogram(&net, &op, 1, &spec, None)?;
    for (k, (t, o)) in h_test.counts().iter().zip(h_op.counts()).enumerate() {
        println!("neuron {k}: test {t:?}  op {o:?}");
    }

    for eps in [0.05, 0.15] {
        let r = epsilon_portion_similar(&h_op, &h_test, eps)?;
        println!(
            "eps {eps}: satisfied {}  max gap {:.4} (neuron {:?}, bin {:?})",
            r.satisfied, r.max_statistic, r.worst_neuron, r.worst_bin
        );
    }
    let r = kl_similar(&h_op, &h_test, 0.05)?;
    println!("KL per neuron {:?}  satisfied at kappa 0.05: {}", r.per_neuron, r.satisfied);
    Ok(())
}
