//! Dense bounded-variable dual simplex for `min cᵀx  s.t.  A x ≤ b,  l ≤ x ≤ u`.
//!
//! Every structural variable has finite bounds, so the slack basis is dual
//! feasible once each nonbasic variable sits at the bound matching the sign of
//! its reduced cost. That makes a phase-one pass unnecessary and lets a caller
//! change bounds between solves and re-optimize from the current basis, which
//! is exactly what branch-and-bound needs.

use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpStatus {
    Optimal,
    /// Rows (by index) whose combination proves infeasibility.
    Infeasible(Vec<usize>),
}

pub(crate) struct DualSimplex {
    m: usize,
    n: usize,
    /// Original constraint matrix, row-major `m × n`.
    a: Vec<f64>,
    b: Vec<f64>,
    /// `B⁻¹ [A | I]`, row-major `m × (n + m)`.
    tab: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each basic variable, `usize::MAX` for nonbasic ones.
    row_of: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    since_refactor: usize,
    pub(crate) iterations: usize,
}

impl DualSimplex {
    /// `rows[i]` has `n` coefficients; `lower`/`upper` bound the structural variables.
    pub(crate) fn new(cost: &[f64], rows: &[Vec<f64>], rhs: &[f64], lower: &[f64], upper: &[f64]) -> Self {
        let n = cost.len();
        let m = rows.len();
        let w = n + m;
        let mut a = Vec::with_capacity(m * n);
        let mut tab = vec![0.0; m * w];
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            a.extend_from_slice(row);
            tab[i * w..i * w + n].copy_from_slice(row);
            tab[i * w + n + i] = 1.0;
        }
        let mut full_cost = cost.to_vec();
        full_cost.resize(w, 0.0);
        let mut lo = lower.to_vec();
        lo.resize(w, 0.0);
        let mut up = upper.to_vec();
        up.resize(w, f64::INFINITY);
        let mut row_of = vec![usize::MAX; w];
        for i in 0..m {
            row_of[n + i] = i;
        }
        let mut lp = Self {
            m,
            n,
            a,
            b: rhs.to_vec(),
            tab,
            reduced: full_cost.clone(),
            cost: full_cost,
            basis: (n..w).collect(),
            row_of,
            lower: lo,
            upper: up,
            x: vec![0.0; w],
            since_refactor: 0,
            iterations: 0,
        };
        lp.place_nonbasics();
        lp.recompute_basics();
        lp
    }

    #[inline]
    fn w(&self) -> usize {
        self.n + self.m
    }

    /// Replaces the structural bounds; the basis is kept.
    pub(crate) fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        self.lower[..self.n].copy_from_slice(lower);
        self.upper[..self.n].copy_from_slice(upper);
        self.place_nonbasics();
        self.recompute_basics();
    }

    fn place_nonbasics(&mut self) {
        for j in 0..self.w() {
            if self.row_of[j] != usize::MAX {
                continue;
            }
            let (l, u, d) = (self.lower[j], self.upper[j], self.reduced[j]);
            self.x[j] = if d > 0.0 {
                l
            } else if d < 0.0 && u.is_finite() {
                u
            } else {
                self.x[j].clamp(l, u)
            };
        }
    }

    /// `x_B = B⁻¹ b − Σ_{j nonbasic} (B⁻¹ a_j) x_j`.
    fn recompute_basics(&mut self) {
        let w = self.w();
        let n = self.n;
        for r in 0..self.m {
            let row = &self.tab[r * w..(r + 1) * w];
            let mut v: f64 = row[n..].iter().zip(&self.b).map(|(t, b)| t * b).sum();
            for (j, t) in row.iter().enumerate() {
                if *t != 0.0 && self.row_of[j] == usize::MAX {
                    v -= t * self.x[j];
                }
            }
            self.x[self.basis[r]] = v;
        }
    }

    /// Rebuilds `B⁻¹ [A | I]` and the reduced costs from the original data.
    fn refactor(&mut self) -> Result<()> {
        let (m, n, w) = (self.m, self.n, self.w());
        // Gauss-Jordan on [B | I] with partial pivoting.
        let mut mat = vec![0.0; m * 2 * m];
        for (r, &var) in self.basis.iter().enumerate() {
            for i in 0..m {
                let v = if var < n {
                    self.a[i * n + var]
                } else {
                    f64::from(u8::from(var - n == i))
                };
                mat[i * 2 * m + r] = v;
            }
        }
        for i in 0..m {
            mat[i * 2 * m + m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| mat[p * 2 * m + col].abs().total_cmp(&mat[q * 2 * m + col].abs()))
                .unwrap();
            if mat[piv * 2 * m + col].abs() < 1e-12 {
                return Err(Error::Solver("singular basis during refactorization".into()));
            }
            if piv != col {
                for k in 0..2 * m {
                    mat.swap(piv * 2 * m + k, col * 2 * m + k);
                }
            }
            let p = mat[col * 2 * m + col];
            for k in 0..2 * m {
                mat[col * 2 * m + k] /= p;
            }
            for i in 0..m {
                if i == col {
                    continue;
                }
                let f = mat[i * 2 * m + col];
                if f != 0.0 {
                    for k in 0..2 * m {
                        mat[i * 2 * m + k] -= f * mat[col * 2 * m + k];
                    }
                }
            }
        }
        // Row r of B⁻¹ is mat[r][m..2m] because column r of B holds basis[r].
        for r in 0..m {
            let inv = &mat[r * 2 * m + m..(r + 1) * 2 * m];
            let out = &mut self.tab[r * w..(r + 1) * w];
            for j in 0..n {
                out[j] = (0..m).map(|i| inv[i] * self.a[i * n + j]).sum();
            }
            out[n..].copy_from_slice(inv);
        }
        for j in 0..w {
            let cb: f64 = (0..m).map(|r| self.cost[self.basis[r]] * self.tab[r * w + j]).sum();
            self.reduced[j] = self.cost[j] - cb;
        }
        for &var in &self.basis {
            self.reduced[var] = 0.0;
        }
        self.since_refactor = 0;
        self.place_nonbasics();
        self.recompute_basics();
        Ok(())
    }

    pub(crate) fn solve(&mut self, max_iterations: usize) -> Result<LpStatus> {
        let w = self.w();
        let mut local = 0usize;
        loop {
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let var = self.basis[r];
                let v = self.x[var];
                let (l, u) = (self.lower[var], self.upper[var]);
                let viol = if v < l - PRIMAL_TOL * (1.0 + l.abs()) {
                    l - v
                } else if v > u + PRIMAL_TOL * (1.0 + u.abs()) {
                    v - u
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, best)| viol > best) {
                    leave = Some((r, viol));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(LpStatus::Optimal);
            };
            if local >= max_iterations {
                return Err(Error::Solver(format!("iteration limit {max_iterations} reached")));
            }

            let leaving = self.basis[r];
            let below = self.x[leaving] < self.lower[leaving];
            let target = if below { self.lower[leaving] } else { self.upper[leaving] };
            let row = &self.tab[r * w..(r + 1) * w];

            // Dual ratio test.
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..w {
                if self.row_of[j] != usize::MAX {
                    continue;
                }
                let alpha = row[j];
                if alpha.abs() < PIVOT_TOL || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let at_upper = self.x[j] >= self.upper[j] && self.reduced[j] <= 0.0 && self.upper[j] > self.lower[j];
                let at_lower = !at_upper;
                // Moving x_j in its free direction must push x_leaving toward `target`.
                let eligible = if below {
                    (at_lower && alpha < 0.0) || (at_upper && alpha > 0.0)
                } else {
                    (at_lower && alpha > 0.0) || (at_upper && alpha < 0.0)
                };
                if !eligible {
                    continue;
                }
                let ratio = (self.reduced[j] / alpha).abs();
                let better = match enter {
                    None => true,
                    Some((_, best, best_alpha)) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && alpha.abs() > best_alpha.abs())
                    }
                };
                if better {
                    enter = Some((j, ratio, alpha));
                }
            }
            let Some((j, _, alpha)) = enter else {
                let certificate = (0..self.m).filter(|&i| row[self.n + i].abs() > 1e-9).collect();
                return Ok(LpStatus::Infeasible(certificate));
            };

            // Primal update.
            let step = (self.x[leaving] - target) / alpha;
            for i in 0..self.m {
                let t = self.tab[i * w + j];
                if t != 0.0 {
                    let var = self.basis[i];
                    self.x[var] -= t * step;
                }
            }
            self.x[j] += step;
            self.x[leaving] = target;

            // Dual update.
            let t = self.reduced[j] / alpha;
            if t != 0.0 {
                for k in 0..w {
                    let a = self.tab[r * w + k];
                    if a != 0.0 {
                        self.reduced[k] -= t * a;
                    }
                }
            }
            self.reduced[j] = 0.0;

            // Pivot.
            let inv = 1.0 / alpha;
            for v in &mut self.tab[r * w..(r + 1) * w] {
                *v *= inv;
            }
            let (head, rest) = self.tab.split_at_mut(r * w);
            let (pivot_row, tail) = rest.split_at_mut(w);
            for other in head.chunks_exact_mut(w).chain(tail.chunks_exact_mut(w)) {
                let f = other[j];
                if f != 0.0 {
                    for (o, p) in other.iter_mut().zip(pivot_row.iter()) {
                        *o -= f * p;
                    }
                    other[j] = 0.0;
                }
            }
            self.row_of[leaving] = usize::MAX;
            self.row_of[j] = r;
            self.basis[r] = j;
            self.iterations += 1;
            local += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }

    pub(crate) fn objective(&self) -> f64 {
        self.cost[..self.n].iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force LP oracle: enumerate every choice of `n` tight constraints
    /// among rows and bounds, solve the square system, keep feasible vertices.
    fn vertex_oracle(cost: &[f64], rows: &[Vec<f64>], rhs: &[f64], lo: &[f64], up: &[f64]) -> Option<f64> {
        let n = cost.len();
        let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().cloned().zip(rhs.iter().cloned()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), up[j]));
            planes.push((e.iter().map(|v| -v).collect(), -lo[j]));
        }
        let mut best: Option<f64> = None;
        let k = planes.len();
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            // Solve the n × n system by Gaussian elimination.
            let mut mat: Vec<Vec<f64>> = idx.iter().map(|&i| {
                let mut r = planes[i].0.clone();
                r.push(planes[i].1);
                r
            }).collect();
            let mut ok = true;
            for c in 0..n {
                let p = (c..n).max_by(|&a, &b| mat[a][c].abs().total_cmp(&mat[b][c].abs())).unwrap();
                if mat[p][c].abs() < 1e-10 {
                    ok = false;
                    break;
                }
                mat.swap(p, c);
                for r in 0..n {
                    if r != c {
                        let f = mat[r][c] / mat[c][c];
                        for q in c..=n {
                            mat[r][q] -= f * mat[c][q];
                        }
                    }
                }
            }
            if ok {
                let x: Vec<f64> = (0..n).map(|c| mat[c][n] / mat[c][c]).collect();
                let feasible = planes.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7);
                if feasible {
                    let z: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                    best = Some(best.map_or(z, |b: f64| b.min(z)));
                }
            }
            // Next combination.
            let mut i = n;
            while i > 0 && idx[i - 1] == k - n + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for q in i..n {
                idx[q] = idx[q - 1] + 1;
            }
        }
        best
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut infeasible = 0;
        for _ in 0..300 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=4);
            let cost: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..3.0)).collect();
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.5)).collect();
            let up: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
            let mut lp = DualSimplex::new(&cost, &rows, &rhs, &lo, &up);
            let status = lp.solve(1000).unwrap();
            let oracle = vertex_oracle(&cost, &rows, &rhs, &lo, &up);
            match (status, oracle) {
                (LpStatus::Optimal, Some(z)) => assert!((lp.objective() - z).abs() < 1e-6, "{} vs {z}", lp.objective()),
                (LpStatus::Infeasible(_), None) => infeasible += 1,
                (s, o) => panic!("status {s:?} vs oracle {o:?}"),
            }
        }
        assert!(infeasible > 0);
    }

    #[test]
    fn warm_restart_after_bound_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = 3;
            let m = 3;
            let cost: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..3.0)).collect();
            let lo = vec![0.0; n];
            let up = vec![3.0; n];
            let mut lp = DualSimplex::new(&cost, &rows, &rhs, &lo, &up);
            let _ = lp.solve(1000).unwrap();
            let lo2: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
            let up2: Vec<f64> = lo2.iter().map(|l| l + rng.random_range(0..2) as f64).collect();
            lp.set_bounds(&lo2, &up2);
            let warm = lp.solve(1000).unwrap();
            let mut cold = DualSimplex::new(&cost, &rows, &rhs, &lo2, &up2);
            let cold_status = cold.solve(1000).unwrap();
            assert_eq!(matches!(warm, LpStatus::Optimal), matches!(cold_status, LpStatus::Optimal));
            if matches!(warm, LpStatus::Optimal) {
                assert!((lp.objective() - cold.objective()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn refactor_preserves_the_solution() {
        let cost = [1.0, 2.0, 0.5];
        let rows = vec![vec![-1.0, -1.0, 0.0], vec![0.0, -1.0, -1.0], vec![1.0, 1.0, 1.0]];
        let rhs = [-1.0, -1.5, 4.0];
        let mut lp = DualSimplex::new(&cost, &rows, &rhs, &[0.0; 3], &[2.0; 3]);
        assert_eq!(lp.solve(100).unwrap(), LpStatus::Optimal);
        let before = lp.objective();
        lp.refactor().unwrap();
        assert!((lp.objective() - before).abs() < 1e-12);
        assert!((before - 1.75).abs() < 1e-9, "{before}");
    }
}
