//! Shared generators and an exhaustive reference solver for the integration tests.
#![allow(dead_code)]

use covshift::bounds::BinningSpec;
use covshift::histogram::BinSignature;
use covshift::reshape::ReshapeProblem;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

/// Exact `|o/ot − s/n| ≤ eps` by cross-multiplication, written independently of the library.
pub fn ratio_ok(o: u64, ot: u64, s: u64, n: u64, eps: f64) -> bool {
    let lhs = BigRational::new(
        (BigInt::from(o) * BigInt::from(n) - BigInt::from(s) * BigInt::from(ot)).into(),
        BigInt::from(ot) * BigInt::from(n),
    );
    let lhs = if lhs < BigRational::from_integer(0.into()) { -lhs } else { lhs };
    lhs <= BigRational::from_float(eps).unwrap()
}

/// Whether the points of `p.test_signatures` not in `removed` are ε-portion similar.
pub fn survivors_similar(p: &ReshapeProblem, removed: &[bool]) -> bool {
    let bins = p.spec.bins();
    let n = removed.iter().filter(|r| !**r).count() as u64;
    if n < p.min_survivors {
        return false;
    }
    (0..p.neurons.len()).all(|k| {
        let mut counts = vec![0u64; bins];
        for (sig, r) in p.test_signatures.iter().zip(removed) {
            if !r {
                counts[sig.0[k] as usize] += 1;
            }
        }
        (0..bins).all(|j| ratio_ok(p.op_counts[k][j], p.op_total, counts[j], n, p.eps))
    })
}

/// Minimum removal count over all 2^|candidates| subsets, `None` if no subset works.
pub fn brute_force(p: &ReshapeProblem) -> Option<usize> {
    let c = p.candidates.len();
    assert!(c <= 20);
    let mut best: Option<usize> = None;
    let mut removed = vec![false; p.test_signatures.len()];
    for mask in 0u32..(1 << c) {
        let k = mask.count_ones() as usize;
        if best.is_some_and(|b| k >= b) {
            continue;
        }
        removed.iter_mut().for_each(|r| *r = false);
        for (bit, &i) in p.candidates.iter().enumerate() {
            removed[i] = mask & (1 << bit) != 0;
        }
        if survivors_similar(p, &removed) {
            best = Some(k);
        }
    }
    best
}

/// Small random instance: ≤ `max_test` points, ≤ 12 candidates, ≤ `max_neurons` neurons, ≤ 5 bins.
pub fn random_problem(rng: &mut impl Rng, max_test: usize, max_neurons: usize) -> ReshapeProblem {
    let neurons = rng.random_range(1..=max_neurons);
    let bins = rng.random_range(2..=5usize);
    let test = rng.random_range(2..=max_test);
    let op_total = rng.random_range(5..=40u64);
    // Skewed bin preferences so that test and operation often differ.
    let skew = |rng: &mut dyn rand::RngCore| -> Vec<f64> { (0..bins).map(|_| rng.random_range(0.05..1.0f64)).collect() };
    let draw = |rng: &mut dyn rand::RngCore, w: &[f64]| -> u32 {
        let total: f64 = w.iter().sum();
        let mut u = rng.random_range(0.0..total);
        for (j, x) in w.iter().enumerate() {
            if u < *x {
                return j as u32;
            }
            u -= x;
        }
        (w.len() - 1) as u32
    };
    let mut op_counts = Vec::new();
    let mut sigs = vec![Vec::new(); test];
    for _ in 0..neurons {
        let w_op = skew(rng);
        let mut row = vec![0u64; bins];
        for _ in 0..op_total {
            row[draw(rng, &w_op) as usize] += 1;
        }
        op_counts.push(row);
        let w_test = skew(rng);
        for s in sigs.iter_mut() {
            s.push(draw(rng, &w_test));
        }
    }
    let max_can = test.min(12);
    let can = rng.random_range(0..=max_can);
    let mut candidates: Vec<usize> = rand::seq::index::sample(rng, test, can).into_vec();
    candidates.sort_unstable();
    let eps = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3][rng.random_range(0..6)];
    ReshapeProblem {
        spec: BinningSpec::new(0.0, 1.0, bins as u32 - 1).unwrap(),
        layer: 1,
        neurons: (0..neurons).collect(),
        eps,
        op_total,
        op_counts,
        test_signatures: sigs.into_iter().map(BinSignature).collect(),
        candidates,
        min_survivors: 1,
    }
}

/// Reshapes one neuron at a time with the single-neuron solver, each step
/// ignoring the others, and reports whether the final survivors are similar on
/// every neuron.
pub fn sequential_greedy_succeeds(p: &ReshapeProblem) -> bool {
    use covshift::reshape::{solve_greedy, MilpInstance};
    let mut alive: Vec<usize> = (0..p.test_signatures.len()).collect();
    let mut candidates: Vec<usize> = p.candidates.clone();
    for k in 0..p.neurons.len() {
        let sub = ReshapeProblem {
            neurons: vec![p.neurons[k]],
            op_counts: vec![p.op_counts[k].clone()],
            test_signatures: alive.iter().map(|&i| BinSignature(vec![p.test_signatures[i].0[k]])).collect(),
            candidates: candidates
                .iter()
                .map(|c| alive.iter().position(|a| a == c).unwrap())
                .collect(),
            ..p.clone()
        };
        let plan = solve_greedy(&MilpInstance::from_problem(&sub).unwrap()).unwrap();
        if !plan.has_solution() {
            return false;
        }
        let gone: Vec<usize> = plan.removed.iter().map(|&pos| alive[pos]).collect();
        alive.retain(|i| !gone.contains(i));
        candidates.retain(|i| !gone.contains(i));
    }
    let mut removed = vec![true; p.test_signatures.len()];
    for &i in &alive {
        removed[i] = false;
    }
    survivors_similar(p, &removed)
}
