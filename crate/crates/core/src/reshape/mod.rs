//! Minimum-removal reshaping of a test set so that its activation histogram
//! becomes ε-portion similar to the operational one.
//!
//! Candidates that share a bin signature are interchangeable, so the 0–1
//! variable per candidate is aggregated into one bounded integer variable per
//! signature group. Each (neuron, bin) cell contributes two linear rows, obtained
//! by multiplying the ratio condition through by the survivor count `T − S`:
//!
//! ```text
//! hi row:  Σ_g (a_g − r + ε) x_g ≤ ct − (r − ε) T      (survivor ratio ≥ r − ε)
//! lo row:  Σ_g (r + ε − a_g) x_g ≤ (r + ε) T − ct      (survivor ratio ≤ r + ε)
//! ```
//!
//! where `a_g` is 1 if group `g` falls into that bin and `r` is the operational
//! ratio. One more row keeps at least `min_survivors` points.

mod branch;
mod export;
mod greedy;
pub(crate) mod lp;

use std::collections::HashMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BinningSpec;
use crate::error::{Error, Result};
use crate::histogram::{
    bin_signatures, count_signatures, epsilon_portion_similar, portion_within, write_json, ActivationHistogram,
    BinSignature, SimilarityReport,
};
use crate::model::{Dataset, Network};

pub use branch::{solve_exact, SolveOptions, DEFAULT_NODE_BUDGET};
pub use export::{export_lp, write_lp};
pub use greedy::solve_greedy;

/// Candidates sharing one bin signature; removals take members in ascending index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub signature: BinSignature,
    pub members: Vec<usize>,
}

impl Group {
    pub fn capacity(&self) -> usize {
        self.members.len()
    }
}

/// Which test points may be removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidates {
    All,
    Indices(Vec<usize>),
    /// `k` points drawn without replacement with the given seed.
    Random { k: usize, seed: u64 },
}

impl Candidates {
    /// Sorted candidate indices into a test set of `len` points.
    pub fn resolve(&self, len: usize) -> Result<Vec<usize>> {
        let mut out = match self {
            Candidates::All => (0..len).collect(),
            Candidates::Indices(list) => list.clone(),
            Candidates::Random { k, seed } => {
                if *k > len {
                    return Err(Error::Size {
                        requested: *k,
                        available: len,
                    });
                }
                sample(&mut ChaCha8Rng::seed_from_u64(*seed), len, *k).into_vec()
            }
        };
        out.sort_unstable();
        if let Some(&index) = out.iter().find(|&&i| i >= len) {
            return Err(Error::Index { index, len });
        }
        if out.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("candidate list repeats an index".into()));
        }
        Ok(out)
    }

    /// Parses `all`, `random:K:SEED`, or a path to a file of whitespace/comma separated indices.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "all" {
            return Ok(Candidates::All);
        }
        if let Some(rest) = text.strip_prefix("random:") {
            let mut parts = rest.split(':');
            let (k, seed) = match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(s), None) => (k.parse(), s.parse()),
                _ => return Err(Error::InvalidArgument(format!("expected random:K:SEED, got `{text}`"))),
            };
            return match (k, seed) {
                (Ok(k), Ok(seed)) => Ok(Candidates::Random { k, seed }),
                _ => Err(Error::InvalidArgument(format!("bad numbers in `{text}`"))),
            };
        }
        let body = std::fs::read_to_string(text).map_err(|e| Error::io(text, e))?;
        body.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().map_err(|e| Error::parse(text, format!("`{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Candidates::Indices)
    }
}

/// Raw reshaping problem over precomputed bin signatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReshapeProblem {
    pub spec: BinningSpec,
    pub layer: usize,
    pub neurons: Vec<usize>,
    pub eps: f64,
    pub op_total: u64,
    /// `op_counts[k][j]`: operational count of bin `j` for `neurons[k]`.
    pub op_counts: Vec<Vec<u64>>,
    /// One signature per test point.
    pub test_signatures: Vec<BinSignature>,
    /// Sorted indices into `test_signatures`.
    pub candidates: Vec<usize>,
    #[serde(default = "one")]
    pub min_survivors: u64,
}

fn one() -> u64 {
    1
}

impl ReshapeProblem {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// Identifies one linear row of the encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "row")]
pub enum RowKind {
    /// Survivor ratio stays at or above `r − ε`.
    Hi { neuron: usize, bin: u32 },
    /// Survivor ratio stays at or below `r + ε`.
    Lo { neuron: usize, bin: u32 },
    Survivors,
}

impl RowKind {
    pub fn name(&self) -> String {
        match self {
            RowKind::Hi { neuron, bin } => format!("hi_n{neuron}_b{bin}"),
            RowKind::Lo { neuron, bin } => format!("lo_n{neuron}_b{bin}"),
            RowKind::Survivors => "survivors".into(),
        }
    }
}

/// One row `Σ_g coeffs[g] x_g ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub kind: RowKind,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// Grouped integer encoding of the minimum-removal problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    spec: BinningSpec,
    layer: usize,
    neurons: Vec<usize>,
    eps: f64,
    op_total: u64,
    op_counts: Vec<Vec<u64>>,
    test_total: u64,
    test_counts: Vec<Vec<u64>>,
    groups: Vec<Group>,
    min_survivors: u64,
}

impl MilpInstance {
    pub fn from_problem(p: &ReshapeProblem) -> Result<Self> {
        let width = p.neurons.len();
        let bins = p.spec.bins();
        if !(p.eps.is_finite() && p.eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("ε must be finite and non-negative, got {}", p.eps)));
        }
        if p.test_signatures.is_empty() {
            return Err(Error::EmptyDataset("test set is empty"));
        }
        if p.op_total == 0 {
            return Err(Error::EmptyDataset("operational histogram has no points"));
        }
        if p.min_survivors == 0 {
            return Err(Error::InvalidArgument("min_survivors must be at least 1".into()));
        }
        if p.op_counts.len() != width || p.op_counts.iter().any(|r| r.len() != bins) {
            return Err(Error::InvalidArgument("operational counts do not match neurons × bins".into()));
        }
        if p.op_counts.iter().any(|r| r.iter().sum::<u64>() != p.op_total) {
            return Err(Error::InvalidArgument("operational counts do not sum to op_total".into()));
        }
        for sig in &p.test_signatures {
            if sig.0.len() != width || sig.0.iter().any(|&j| j as usize >= bins) {
                return Err(Error::InvalidArgument(format!("malformed signature {:?}", sig.0)));
            }
        }
        let len = p.test_signatures.len();
        let candidates = Candidates::Indices(p.candidates.clone()).resolve(len)?;

        let test_counts = count_signatures(&p.test_signatures, width, bins);
        let mut groups: Vec<Group> = Vec::new();
        let mut by_sig: HashMap<&BinSignature, usize> = HashMap::new();
        for &i in &candidates {
            let sig = &p.test_signatures[i];
            let g = *by_sig.entry(sig).or_insert_with(|| {
                groups.push(Group {
                    signature: sig.clone(),
                    members: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].members.push(i);
        }
        Ok(Self {
            spec: p.spec,
            layer: p.layer,
            neurons: p.neurons.clone(),
            eps: p.eps,
            op_total: p.op_total,
            op_counts: p.op_counts.clone(),
            test_total: len as u64,
            test_counts,
            groups,
            min_survivors: p.min_survivors,
        })
    }

    pub fn spec(&self) -> &BinningSpec {
        &self.spec
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn neurons(&self) -> &[usize] {
        &self.neurons
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn test_total(&self) -> u64 {
        self.test_total
    }

    pub fn test_counts(&self) -> &[Vec<u64>] {
        &self.test_counts
    }

    pub fn op_total(&self) -> u64 {
        self.op_total
    }

    pub fn op_counts(&self) -> &[Vec<u64>] {
        &self.op_counts
    }

    pub fn min_survivors(&self) -> u64 {
        self.min_survivors
    }

    /// `|D_can|`.
    pub fn candidate_count(&self) -> usize {
        self.groups.iter().map(Group::capacity).sum()
    }

    /// Operational ratio `r` of bin `j` for neuron position `k`.
    pub fn op_ratio(&self, k: usize, j: usize) -> f64 {
        self.op_counts[k][j] as f64 / self.op_total as f64
    }

    /// Same instance with a different ε.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    /// Instance over the neuron positions `keep` only, with groups re-aggregated.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&k) = keep.iter().find(|&&k| k >= self.neurons.len()) {
            return Err(Error::NeuronRange {
                neuron: k,
                width: self.neurons.len(),
            });
        }
        let mut groups: Vec<Group> = Vec::new();
        let mut by_sig: HashMap<BinSignature, usize> = HashMap::new();
        for g in &self.groups {
            let sig = BinSignature(keep.iter().map(|&k| g.signature.0[k]).collect());
            let idx = *by_sig.entry(sig.clone()).or_insert_with(|| {
                groups.push(Group {
                    signature: sig,
                    members: Vec::new(),
                });
                groups.len() - 1
            });
            groups[idx].members.extend(&g.members);
        }
        for g in &mut groups {
            g.members.sort_unstable();
        }
        groups.sort_by_key(|g| g.members[0]);
        Ok(Self {
            neurons: keep.iter().map(|&k| self.neurons[k]).collect(),
            op_counts: keep.iter().map(|&k| self.op_counts[k].clone()).collect(),
            test_counts: keep.iter().map(|&k| self.test_counts[k].clone()).collect(),
            groups,
            ..self.clone()
        })
    }

    /// All rows of the linearized encoding, in (neuron, bin, hi/lo) order, then the survivor row.
    pub fn rows(&self) -> Vec<LinearRow> {
        let t = self.test_total as f64;
        let eps = self.eps;
        let mut rows = Vec::with_capacity(2 * self.neurons.len() * self.spec.bins() + 1);
        for (k, &neuron) in self.neurons.iter().enumerate() {
            for j in 0..self.spec.bins() {
                let r = self.op_ratio(k, j);
                let ct = self.test_counts[k][j] as f64;
                let member = |g: &Group| f64::from(u8::from(g.signature.0[k] as usize == j));
                let bin = j as u32;
                rows.push(LinearRow {
                    kind: RowKind::Hi { neuron, bin },
                    coeffs: self.groups.iter().map(|g| member(g) - r + eps).collect(),
                    rhs: ct - (r - eps) * t,
                });
                rows.push(LinearRow {
                    kind: RowKind::Lo { neuron, bin },
                    coeffs: self.groups.iter().map(|g| r + eps - member(g)).collect(),
                    rhs: (r + eps) * t - ct,
                });
            }
        }
        rows.push(LinearRow {
            kind: RowKind::Survivors,
            coeffs: vec![1.0; self.groups.len()],
            rhs: (self.test_total - self.min_survivors.min(self.test_total)) as f64,
        });
        rows
    }

    /// Survivor counts per (neuron position, bin) after removing `removals[g]` from each group.
    pub fn survivor_counts(&self, removals: &[u64]) -> Vec<Vec<u64>> {
        let mut counts = self.test_counts.clone();
        for (g, &x) in self.groups.iter().zip(removals) {
            for (row, &j) in counts.iter_mut().zip(&g.signature.0) {
                row[j as usize] -= x;
            }
        }
        counts
    }

    /// Exact ε-portion check of the survivor multiset; the ground truth for every solver.
    pub fn is_feasible(&self, removals: &[u64]) -> bool {
        debug_assert_eq!(removals.len(), self.groups.len());
        if removals.iter().zip(&self.groups).any(|(x, g)| *x as usize > g.capacity()) {
            return false;
        }
        let removed: u64 = removals.iter().sum();
        if removed > self.test_total || self.test_total - removed < self.min_survivors {
            return false;
        }
        let n = self.test_total - removed;
        let counts = self.survivor_counts(removals);
        counts.iter().zip(&self.op_counts).all(|(surv, op)| {
            surv.iter()
                .zip(op)
                .all(|(s, o)| portion_within(*o, self.op_total, *s, n, self.eps))
        })
    }

    /// Point indices removed by per-group removal counts.
    pub fn removed_points(&self, removals: &[u64]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .groups
            .iter()
            .zip(removals)
            .flat_map(|(g, &x)| g.members[..x as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    fn op_histogram(&self) -> ActivationHistogram {
        ActivationHistogram::from_counts(self.spec, self.layer, self.neurons.clone(), self.op_total, self.op_counts.clone())
            .expect("validated on construction")
    }

    /// Similarity of the survivors (after `removals`) to operation.
    pub fn survivor_report(&self, removals: &[u64]) -> Result<SimilarityReport> {
        let n = self.test_total - removals.iter().sum::<u64>();
        let surv = ActivationHistogram::from_counts(
            self.spec,
            self.layer,
            self.neurons.clone(),
            n,
            self.survivor_counts(removals),
        )?;
        epsilon_portion_similar(&self.op_histogram(), &surv, self.eps)
    }

    /// Builds the plan for a solver outcome and attaches the post-hoc similarity report.
    pub(crate) fn make_plan(
        &self,
        status: PlanStatus,
        removals: Option<&[u64]>,
        stats: SolveStats,
        certificate: Vec<RowKind>,
    ) -> ReshapePlan {
        let (removed, removed_count, similarity) = match removals {
            Some(x) => {
                let removed = self.removed_points(x);
                let count = removed.len();
                (removed, Some(count), self.survivor_report(x).ok())
            }
            None => (Vec::new(), None, None),
        };
        let verified = similarity.as_ref().is_some_and(|r| r.satisfied);
        ReshapePlan {
            status,
            eps: self.eps,
            test_total: self.test_total as usize,
            candidate_count: self.candidate_count(),
            removed_count,
            removed,
            verified,
            similarity,
            certificate,
            stats,
        }
    }
}

/// Builds the instance from a network, the test set and the operational histogram.
///
/// The binning spec, layer and neuron subset are taken from `h_op`.
pub fn encode(
    h_op: &ActivationHistogram,
    net: &Network,
    d_test: &Dataset,
    candidates: &[usize],
    eps: f64,
    min_survivors: u64,
) -> Result<MilpInstance> {
    if d_test.is_empty() {
        return Err(Error::EmptyDataset("test set is empty"));
    }
    let test_signatures = bin_signatures(net, d_test, h_op.layer(), h_op.spec(), Some(h_op.neurons()))?;
    let candidates = Candidates::Indices(candidates.to_vec()).resolve(d_test.len())?;
    MilpInstance::from_problem(&ReshapeProblem {
        spec: *h_op.spec(),
        layer: h_op.layer(),
        neurons: h_op.neurons().to_vec(),
        eps,
        op_total: h_op.total(),
        op_counts: h_op.counts().to_vec(),
        test_signatures,
        candidates,
        min_survivors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Optimal value of the root relaxation.
    pub root_bound: Option<f64>,
    /// Rows kept after dropping those no assignment can violate.
    pub active_rows: usize,
}

/// Outcome of a reshaping solve.
///
/// `removed` lists indices into the test set in ascending order. For
/// `Timeout`, `removed_count` is `None` unless an incumbent was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReshapePlan {
    pub status: PlanStatus,
    pub eps: f64,
    pub test_total: usize,
    pub candidate_count: usize,
    pub removed_count: Option<usize>,
    pub removed: Vec<usize>,
    pub verified: bool,
    pub similarity: Option<SimilarityReport>,
    /// Rows combined into the root relaxation's infeasibility proof.
    pub certificate: Vec<RowKind>,
    pub stats: SolveStats,
}

impl ReshapePlan {
    pub fn has_solution(&self) -> bool {
        self.removed_count.is_some()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

/// The test set without the plan's removed points; order and labels of survivors are kept.
pub fn apply_plan(d_test: &Dataset, plan: &ReshapePlan) -> Result<Dataset> {
    let n = d_test.len();
    let mut drop = vec![false; n];
    for &i in &plan.removed {
        if i >= n {
            return Err(Error::Index { index: i, len: n });
        }
        drop[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !drop[i]).collect();
    d_test.select(&keep)
}
