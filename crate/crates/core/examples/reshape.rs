//! Remove the fewest test points so the test histogram matches operation.
//!
//! Usage: cargo run --example reshape [eps]

use covshift::reshape::{Candidates, SolveOptions};
use covshift::{
    apply_plan, bounds_report, build_histogram, encode, epsilon_portion_similar, solve_exact, Activation, Dataset,
    InputRange, Layer, Network,
};

fn main() -> covshift::Result<()> {
    let eps: f64 = std::env::args().nth(1).map_or(0.1, |s| s.parse().expect("eps must be a number"));
    let net = Network::new(
        2,
        InputRange::new(0.0, 3.0)?,
        vec![Layer::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2], Activation::Identity)?],
    )?;
    let spec = bounds_report(&net, 1, 1.0)?.spec;
    let grid = |cells: &[(f64, f64, usize)]| {
        let points = cells.iter().flat_map(|&(x, y, n)| std::iter::repeat_n(vec![x, y], n)).collect();
        Dataset::new(points, None).unwrap()
    };
    let test = grid(&[(0.5, 0.5, 6), (1.5, 0.5, 2), (1.5, 1.5, 3), (2.5, 2.5, 5)]);
    let op = grid(&[(0.5, 0.5, 2), (1.5, 0.5, 2), (1.5, 1.5, 3), (2.5, 2.5, 3)]);

    let h_op = build_histogram(&net, &op, 1, &spec, None)?;
    let before = epsilon_portion_similar(&h_op, &build_histogram(&net, &test, 1, &spec, None)?, eps)?;
    println!("before: max gap {:.4}, similar {}", before.max_statistic, before.satisfied);

    let candidates = Candidates::All.resolve(test.len())?;
    let inst = encode(&h_op, &net, &test, &candidates, eps, 1)?;
    println!("{} candidates in {} groups", candidates.len(), inst.groups().len());
    let plan = solve_exact(&inst, &SolveOptions::default())?;
    println!("status {:?}  removed {:?} -> {:?}", plan.status, plan.removed_count, plan.removed);
    if plan.has_solution() {
        let reshaped = apply_plan(&test, &plan)?;
        let after = epsilon_portion_similar(&h_op, &build_histogram(&net, &reshaped, 1, &spec, None)?, eps)?;
        println!("after: {} points, max gap {:.4}, similar {}", reshaped.len(), after.max_statistic, after.satisfied);
    } else {
        println!("infeasibility certificate rows: {:?}", plan.certificate);
    }
    Ok(())
}
