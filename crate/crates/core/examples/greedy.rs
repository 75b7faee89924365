//! Single-neuron greedy reshaping next to the exact solver on the same instance.
//!
//! Usage: cargo run --example greedy

use std::time::Instant;

use covshift::reshape::{Candidates, SolveOptions};
use covshift::{bounds_report, build_histogram, encode, solve_exact, solve_greedy, Activation, Dataset, InputRange, Layer, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> covshift::Result<()> {
    let net = Network::new(
        1,
        InputRange::new(0.0, 8.0)?,
        vec![Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu)?],
    )?;
    let spec = bounds_report(&net, 1, 1.0)?.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draw = |rng: &mut ChaCha8Rng, n: usize, power: f64| {
        let pts = (0..n).map(|_| vec![8.0 * rng.random::<f64>().powf(power)]).collect();
        Dataset::new(pts, None).unwrap()
    };
    let test = draw(&mut rng, 600, 1.0);
    let op = draw(&mut rng, 200, 2.0);
    let h_op = build_histogram(&net, &op, 1, &spec, None)?;
    let inst = encode(&h_op, &net, &test, &Candidates::All.resolve(test.len())?, 0.02, 1)?;

    let t = Instant::now();
    let g = solve_greedy(&inst)?;
    println!("greedy: {:?} removed {:?} in {:.1?}", g.status, g.removed_count, t.elapsed());
    let t = Instant::now();
    let e = solve_exact(&inst, &SolveOptions::default())?;
    println!("exact:  {:?} removed {:?} in {:.1?} ({} nodes)", e.status, e.removed_count, t.elapsed(), e.stats.nodes);
    Ok(())
}
