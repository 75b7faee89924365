//! Depth-first branch-and-bound over the grouped encoding.

use crate::error::Result;

use super::lp::{DualSimplex, LpStatus};
use super::{LinearRow, MilpInstance, PlanStatus, ReshapePlan, RowKind, SolveStats};

pub const DEFAULT_NODE_BUDGET: usize = 20_000;

const INT_TOL: f64 = 1e-6;
const LP_ITERATION_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Branch-and-bound nodes explored before giving up with `Timeout`.
    pub node_budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Rows that some point of the box `0 ≤ x ≤ caps` could violate by more than
/// rounding. Rows dropped at a tie are still enforced by the exact check.
fn active_rows(rows: Vec<LinearRow>, caps: &[f64]) -> Vec<LinearRow> {
    rows.into_iter()
        .filter(|row| {
            let worst: f64 = row.coeffs.iter().zip(caps).map(|(c, u)| c.max(0.0) * u).sum();
            worst > row.rhs + 1e-9 * row.rhs.abs().max(1.0)
        })
        .collect()
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Minimum-cardinality removal by branch-and-bound.
///
/// Every integral point is confirmed with the exact similarity check before it
/// becomes the incumbent, so rounding in the relaxation can never produce an
/// unverified plan.
pub fn solve_exact(inst: &MilpInstance, opts: &SolveOptions) -> Result<ReshapePlan> {
    let caps: Vec<f64> = inst.groups().iter().map(|g| g.capacity() as f64).collect();
    let n = caps.len();
    let rows = active_rows(inst.rows(), &caps);
    let mut stats = SolveStats {
        method: "branch_and_bound".into(),
        active_rows: rows.len(),
        ..SolveStats::default()
    };

    if n == 0 {
        stats.nodes = 1;
        stats.root_bound = Some(0.0);
        return Ok(if inst.is_feasible(&[]) {
            inst.make_plan(PlanStatus::Optimal, Some(&[]), stats, Vec::new())
        } else {
            let violated = rows.iter().map(|r| r.kind).collect();
            inst.make_plan(PlanStatus::Infeasible, None, stats, violated)
        });
    }

    let coeffs: Vec<Vec<f64>> = rows.iter().map(|r| r.coeffs.clone()).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let zero = vec![0.0; n];
    let mut lp = DualSimplex::new(&vec![1.0; n], &coeffs, &rhs, &zero, &caps);

    let mut incumbent: Option<(u64, Vec<u64>)> = None;
    let mut stack = vec![Node {
        lower: zero,
        upper: caps.clone(),
    }];
    let mut certificate: Vec<RowKind> = Vec::new();
    let mut target: Option<u64> = None;
    let mut timed_out = false;

    while let Some(node) = stack.pop() {
        if stats.nodes >= opts.node_budget {
            timed_out = true;
            break;
        }
        stats.nodes += 1;
        let root = stats.nodes == 1;
        lp.set_bounds(&node.lower, &node.upper);
        let status = match lp.solve(LP_ITERATION_LIMIT) {
            Ok(s) => s,
            Err(_) => {
                timed_out = true;
                break;
            }
        };
        stats.lp_iterations = lp.iterations;
        match status {
            LpStatus::Infeasible(cert) => {
                if root {
                    certificate = cert.into_iter().map(|i| rows[i].kind).collect();
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let z = lp.objective();
        let bound = (z - INT_TOL).ceil().max(0.0) as u64;
        if root {
            stats.root_bound = Some(z);
            target = Some(bound);
        }
        if incumbent.as_ref().is_some_and(|(best, _)| bound >= *best) {
            continue;
        }

        let x = lp.values().to_vec();
        let fractional = x
            .iter()
            .enumerate()
            .map(|(j, v)| (j, (v - v.round()).abs()))
            .filter(|(_, f)| *f > INT_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));

        if let Some((j, _)) = fractional {
            // Cheap roundings of the relaxation often give an early incumbent.
            for round in [f64::round, f64::ceil, f64::floor] {
                let point: Vec<u64> = x
                    .iter()
                    .zip(&node.lower)
                    .zip(&node.upper)
                    .map(|((v, l), u)| {
                        let r = if (v - v.round()).abs() <= INT_TOL { v.round() } else { round(*v) };
                        r.clamp(*l, *u) as u64
                    })
                    .collect();
                let count: u64 = point.iter().sum();
                if incumbent.as_ref().is_none_or(|(best, _)| count < *best) && inst.is_feasible(&point) {
                    incumbent = Some((count, point));
                }
            }
            if let Some((best, _)) = &incumbent {
                if Some(*best) == target {
                    break;
                }
                if bound >= *best {
                    continue;
                }
            }
            let v = x[j];
            let mut down = Node {
                lower: node.lower.clone(),
                upper: node.upper.clone(),
            };
            down.upper[j] = v.floor();
            let mut up = node;
            up.lower[j] = v.ceil();
            if v - v.floor() < 0.5 {
                stack.push(up);
                stack.push(down);
            } else {
                stack.push(down);
                stack.push(up);
            }
            continue;
        }

        let point: Vec<u64> = x.iter().map(|v| v.round().max(0.0) as u64).collect();
        if inst.is_feasible(&point) {
            let count = point.iter().sum();
            incumbent = Some((count, point));
            if target == Some(count) {
                break;
            }
            continue;
        }
        // The relaxation accepts a point the exact check rejects (a rounding tie).
        // Exclude it by splitting a free variable around its value.
        let Some(j) = (0..n).find(|&j| node.upper[j] > node.lower[j]) else {
            continue;
        };
        let v = point[j] as f64;
        let child = |lo: f64, hi: f64| {
            let mut c = Node {
                lower: node.lower.clone(),
                upper: node.upper.clone(),
            };
            c.lower[j] = lo;
            c.upper[j] = hi;
            c
        };
        if v < node.upper[j] {
            stack.push(child(v + 1.0, node.upper[j]));
        }
        if v > node.lower[j] {
            stack.push(child(node.lower[j], v - 1.0));
        }
        // The copy of this node with x_j pinned keeps exploring the other variables.
        let pinned = child(v, v);
        if (0..n).any(|k| pinned.upper[k] > pinned.lower[k]) {
            stack.push(pinned);
        }
    }

    let point = incumbent.map(|(_, p)| p);
    let status = match (&point, timed_out) {
        (_, true) => PlanStatus::Timeout,
        (Some(_), false) => PlanStatus::Optimal,
        (None, false) => PlanStatus::Infeasible,
    };
    if status != PlanStatus::Infeasible {
        certificate.clear();
    }
    Ok(inst.make_plan(status, point.as_deref(), stats, certificate))
}
