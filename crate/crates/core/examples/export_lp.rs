//! Write a reshaping instance as a CPLEX LP file for an external MILP solver.
//!
//! Usage: cargo run --example export_lp [out.lp]

use covshift::reshape::{write_lp, Candidates};
use covshift::{bounds_report, build_histogram, encode, Activation, Dataset, InputRange, Layer, Network};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = Network::new(
        3,
        InputRange::new(0.0, 6.0)?,
        vec![Layer::new(
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![0.0; 3],
            Activation::Identity,
        )?],
    )?;
    let spec = bounds_report(&net, 1, 1.0)?.spec;
    let test = Dataset::new(vec![vec![1.5, 4.5, 4.5], vec![2.5, 1.5, 2.5], vec![0.5, 3.5, 4.5]], None)?;
    let op = Dataset::new(
        vec![vec![1.5, 4.5, 4.5], vec![2.5, 1.5, 2.5], vec![0.5, 3.5, 1.5], vec![3.5, 2.5, 0.5]],
        None,
    )?;
    let h_op = build_histogram(&net, &op, 1, &spec, None)?;
    let inst = encode(&h_op, &net, &test, &Candidates::All.resolve(test.len())?, 0.1, 1)?;
    match std::env::args().nth(1) {
        Some(path) => {
            covshift::reshape::export_lp(&inst, &path)?;
            println!("wrote {path}");
        }
        None => write_lp(&inst, &mut std::io::stdout().lock())?,
    }
    Ok(())
}
