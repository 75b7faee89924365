//! Exact polynomial solver for a single monitored neuron.
//!
//! With one neuron every group is one bin. For a fixed number of survivors `n`
//! each bin independently admits an interval of survivor counts, and a removal
//! count works iff the intervals can be chosen to sum to `n`. Scanning removal
//! counts upward therefore finds the minimum directly.

use crate::error::{Error, Result};
use crate::histogram::portion_within;

use super::{MilpInstance, PlanStatus, ReshapePlan, SolveStats};

/// Smallest and largest feasible survivor count of one bin, if any.
fn bin_range(op: u64, op_total: u64, count: u64, removable: u64, n: u64, eps: f64) -> Option<(u64, u64)> {
    let r = op as f64 / op_total as f64;
    let nf = n as f64;
    let lo = (((r - eps) * nf).floor() - 1.0).max(0.0) as u64;
    let hi = ((r + eps) * nf).ceil() + 1.0;
    let lo = lo.max(count - removable);
    let hi = (hi.max(0.0) as u64).min(count).min(n);
    if lo > hi {
        return None;
    }
    let ok = |s: u64| portion_within(op, op_total, s, n, eps);
    let first = (lo..=hi).find(|&s| ok(s))?;
    let last = (first..=hi).rev().find(|&s| ok(s))?;
    Some((first, last))
}

/// Minimum removal for a one-neuron instance; `WrongMethod` otherwise.
pub fn solve_greedy(inst: &MilpInstance) -> Result<ReshapePlan> {
    if inst.neurons().len() != 1 {
        return Err(Error::WrongMethod("the greedy solver handles exactly one neuron"));
    }
    let bins = inst.spec().bins();
    let t = inst.test_total();
    let counts = &inst.test_counts()[0];
    let op = &inst.op_counts()[0];
    let mut removable = vec![0u64; bins];
    let mut group_of = vec![None; bins];
    for (g, group) in inst.groups().iter().enumerate() {
        let j = group.signature.0[0] as usize;
        removable[j] += group.capacity() as u64;
        group_of[j] = Some(g);
    }
    let mut stats = SolveStats {
        method: "greedy".into(),
        ..SolveStats::default()
    };
    let max_removed = removable.iter().sum::<u64>().min(t.saturating_sub(inst.min_survivors()));

    for s in 0..=max_removed {
        stats.nodes += 1;
        let n = t - s;
        let ranges: Option<Vec<(u64, u64)>> = (0..bins)
            .map(|j| bin_range(op[j], inst.op_total(), counts[j], removable[j], n, inst.eps()))
            .collect();
        let Some(ranges) = ranges else { continue };
        let (sum_lo, sum_hi) = ranges.iter().fold((0, 0), |(a, b), (l, h)| (a + l, b + h));
        if !(sum_lo <= n && n <= sum_hi) {
            continue;
        }
        let mut surv: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        let mut left = n - sum_lo;
        for (v, (_, h)) in surv.iter_mut().zip(&ranges) {
            let add = left.min(h - *v);
            *v += add;
            left -= add;
        }
        let mut removals = vec![0u64; inst.groups().len()];
        for j in 0..bins {
            if let Some(g) = group_of[j] {
                removals[g] = counts[j] - surv[j];
            }
        }
        debug_assert!(inst.is_feasible(&removals));
        return Ok(inst.make_plan(PlanStatus::Optimal, Some(&removals), stats, Vec::new()));
    }
    Ok(inst.make_plan(PlanStatus::Infeasible, None, stats, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reshape::tests::problem;
    use crate::reshape::{solve_exact, SolveOptions};

    #[test]
    fn rejects_multi_neuron_instances() {
        let p = problem(vec![vec![1, 1], vec![1, 1]], vec![vec![0, 0]], vec![0], 0.1);
        let inst = MilpInstance::from_problem(&p).unwrap();
        assert!(matches!(solve_greedy(&inst), Err(Error::WrongMethod(_))));
    }

    #[test]
    fn agrees_with_branch_and_bound() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let bins = rng.random_range(2..=4);
            let t = rng.random_range(3..=25);
            let sigs: Vec<Vec<u32>> = (0..t).map(|_| vec![rng.random_range(0..bins as u32)]).collect();
            let mut op = vec![0u64; bins];
            for _ in 0..rng.random_range(1..=30) {
                op[rng.random_range(0..bins)] += 1;
            }
            let cand: Vec<usize> = (0..t).filter(|_| rng.random_bool(0.7)).collect();
            let eps = [0.02, 0.05, 0.1, 0.2][rng.random_range(0..4)];
            let inst = MilpInstance::from_problem(&problem(vec![op], sigs, cand, eps)).unwrap();
            let g = solve_greedy(&inst).unwrap();
            let b = solve_exact(&inst, &SolveOptions::default()).unwrap();
            assert_eq!(g.status, b.status);
            assert_eq!(g.removed_count, b.removed_count);
            if g.has_solution() {
                assert!(g.verified);
            }
        }
    }
}
