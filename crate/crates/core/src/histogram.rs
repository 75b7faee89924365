//! Binned activation histograms and the two similarity measures between them.
//!
//! Bin 0 is the closed interval `[c, c+Δ]`; bin `j ≥ 1` is `(c+jΔ, c+(j+1)Δ]`.
//! A histogram covers a chosen subset of the neurons of one layer. Neuron ids in
//! reports are indices into the layer, not positions inside the subset.

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BinningSpec;
use crate::error::{Error, Result};
use crate::model::{Dataset, Network};

/// Relative tolerance for activations just outside the binning domain.
pub const DOMAIN_SLACK: f64 = 1e-9;

impl BinningSpec {
    /// Bin index of `x`; fails outside `[c, c + (N+1)Δ]`.
    ///
    /// Values within [`DOMAIN_SLACK`] (relative) of either end are clamped in, since a
    /// forward pass and interval propagation can round the same sum differently.
    pub fn bin(&self, x: f64) -> Result<u32> {
        let hi = self.domain_hi();
        let slack = DOMAIN_SLACK * self.c.abs().max(hi.abs()).max(1.0);
        if !(x >= self.c - slack && x <= hi + slack) {
            return Err(Error::BinningDomain { value: x, lo: self.c, hi });
        }
        let x = x.clamp(self.c, hi);
        if x <= self.c + self.delta || self.n == 0 {
            return Ok(0);
        }
        let edge = |j: u32| self.c + (j as f64 + 1.0) * self.delta;
        let guess = ((x - self.c) / self.delta).ceil() - 1.0;
        let mut j = guess.clamp(1.0, self.n as f64) as u32;
        // Snap against the same edge expressions used for the domain check.
        while j > 1 && x <= edge(j - 1) {
            j -= 1;
        }
        while j < self.n && x > edge(j) {
            j += 1;
        }
        Ok(j)
    }
}

/// Free-function form of [`BinningSpec::bin`].
pub fn bin_value(spec: &BinningSpec, x: f64) -> Result<u32> {
    spec.bin(x)
}

/// Bin indices of one point across the monitored neurons.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinSignature(pub Vec<u32>);

impl BinSignature {
    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Resolves an optional neuron subset against a layer of `width` neurons.
pub fn resolve_neurons(neurons: Option<&[usize]>, width: usize) -> Result<Vec<usize>> {
    match neurons {
        None => Ok((0..width).collect()),
        Some(list) => {
            if list.is_empty() {
                return Err(Error::EmptyInput("neuron subset is empty"));
            }
            let mut seen = vec![false; width];
            for &i in list {
                if i >= width {
                    return Err(Error::NeuronRange { neuron: i, width });
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidArgument(format!("neuron {i} listed twice")));
                }
            }
            Ok(list.to_vec())
        }
    }
}

/// Per-(neuron, bin) counts of one dataset's activations at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationHistogram {
    spec: BinningSpec,
    layer: usize,
    neurons: Vec<usize>,
    total: u64,
    counts: Vec<Vec<u64>>,
}

impl ActivationHistogram {
    /// Builds a histogram from explicit counts; each row must sum to `total`.
    pub fn from_counts(
        spec: BinningSpec,
        layer: usize,
        neurons: Vec<usize>,
        total: u64,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if counts.len() != neurons.len() {
            return Err(Error::InvalidArgument(format!(
                "{} count rows for {} neurons",
                counts.len(),
                neurons.len()
            )));
        }
        for (row, i) in counts.iter().zip(&neurons) {
            if row.len() != spec.bins() {
                return Err(Error::InvalidArgument(format!(
                    "neuron {i}: {} bins, expected {}",
                    row.len(),
                    spec.bins()
                )));
            }
            let sum: u64 = row.iter().sum();
            if sum != total {
                return Err(Error::InvalidArgument(format!(
                    "neuron {i}: counts sum to {sum}, expected total {total}"
                )));
            }
        }
        Ok(Self {
            spec,
            layer,
            neurons,
            total,
            counts,
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

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `counts()[k][j]` is the count of bin `j` for neuron `neurons()[k]`.
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn ratio(&self, k: usize, j: usize) -> f64 {
        self.counts[k][j] as f64 / self.total as f64
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            total: self.total * factor,
            counts: self
                .counts
                .iter()
                .map(|r| r.iter().map(|c| c * factor).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::IncompatibleHistograms(format!(
                "binning specs differ: {:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        if self.layer != other.layer {
            return Err(Error::IncompatibleHistograms(format!(
                "layers differ: {} vs {}",
                self.layer, other.layer
            )));
        }
        if self.neurons != other.neurons {
            return Err(Error::IncompatibleHistograms("neuron subsets differ".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: ActivationHistogram = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        // Re-run validation on the deserialized fields.
        ActivationHistogram::from_counts(raw.spec, raw.layer, raw.neurons, raw.total, raw.counts)
            .map_err(|e| Error::parse(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// One signature per point, in dataset order.
pub fn bin_signatures(
    net: &Network,
    data: &Dataset,
    layer: usize,
    spec: &BinningSpec,
    neurons: Option<&[usize]>,
) -> Result<Vec<BinSignature>> {
    let neurons = resolve_neurons(neurons, net.width(layer)?)?;
    data.points()
        .par_iter()
        .enumerate()
        .map(|(point, p)| {
            let out = net.layer_output(p, layer)?;
            neurons
                .iter()
                .map(|&i| {
                    spec.bin(out[i]).map_err(|_| Error::ActivationOutOfDomain {
                        point,
                        neuron: i,
                        value: out[i],
                        lo: spec.c,
                        hi: spec.domain_hi(),
                    })
                })
                .collect::<Result<Vec<u32>>>()
                .map(BinSignature)
        })
        .collect()
}

/// Counts of bin signatures, one row per neuron of the subset.
pub fn count_signatures<'a>(
    signatures: impl IntoIterator<Item = &'a BinSignature>,
    width: usize,
    bins: usize,
) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; bins]; width];
    for sig in signatures {
        for (row, &j) in counts.iter_mut().zip(sig.as_slice()) {
            row[j as usize] += 1;
        }
    }
    counts
}

pub fn build_histogram(
    net: &Network,
    data: &Dataset,
    layer: usize,
    spec: &BinningSpec,
    neurons: Option<&[usize]>,
) -> Result<ActivationHistogram> {
    let neurons = resolve_neurons(neurons, net.width(layer)?)?;
    let sigs = bin_signatures(net, data, layer, spec, Some(&neurons))?;
    let counts = count_signatures(&sigs, neurons.len(), spec.bins());
    ActivationHistogram::from_counts(*spec, layer, neurons, data.len() as u64, counts)
}

/// `op_count/op_total − test_count/test_total`.
#[inline]
pub fn portion_gap(op_count: u64, op_total: u64, test_count: u64, test_total: u64) -> f64 {
    op_count as f64 / op_total as f64 - test_count as f64 / test_total as f64
}

/// Decides `|op_count/op_total − test_count/test_total| ≤ eps` exactly.
///
/// Far from the threshold the double-precision gap decides; near it the
/// comparison is redone in rational arithmetic against the exact value of `eps`.
pub fn portion_within(op_count: u64, op_total: u64, test_count: u64, test_total: u64, eps: f64) -> bool {
    debug_assert!(op_total > 0 && test_total > 0);
    let gap = portion_gap(op_count, op_total, test_count, test_total).abs();
    if (gap - eps).abs() > 1e-12 {
        return gap <= eps;
    }
    let diff = BigInt::from(op_count) * BigInt::from(test_total) - BigInt::from(test_count) * BigInt::from(op_total);
    let denom = BigInt::from(op_total) * BigInt::from(test_total);
    let lhs = BigRational::new(diff.magnitude().clone().into(), denom);
    match BigRational::from_float(eps) {
        Some(e) => lhs <= e,
        None => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    KlDivergence,
    EpsilonPortion,
}

/// A (neuron, bin) cell; `neuron` is the index inside the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinRef {
    pub neuron: usize,
    pub bin: u32,
}

/// Verdict of a similarity check.
///
/// `per_neuron` holds the divergence (KL) or the largest absolute ratio gap
/// (ε-portion) of each monitored neuron. `worst_neuron`, and for ε-portion
/// `worst_bin`, locate the cell attaining `max_statistic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub kind: SimilarityKind,
    pub threshold: f64,
    pub satisfied: bool,
    pub neurons: Vec<usize>,
    pub per_neuron: Vec<f64>,
    pub max_statistic: f64,
    pub worst_neuron: Option<usize>,
    pub worst_bin: Option<u32>,
    pub undefined_bins: Vec<BinRef>,
}

impl SimilarityReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

fn check_pair(h_op: &ActivationHistogram, h_test: &ActivationHistogram, threshold: f64, what: &str) -> Result<()> {
    h_op.check_compatible(h_test)?;
    if h_op.total == 0 {
        return Err(Error::EmptyDataset("operational histogram has no points"));
    }
    if h_test.total == 0 {
        return Err(Error::EmptyDataset("test histogram has no points"));
    }
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{what} must be finite and non-negative, got {threshold}"
        )));
    }
    Ok(())
}

/// ε-portion similarity: every per-bin ratio gap lies in `[−ε, ε]`.
pub fn epsilon_portion_similar(
    h_op: &ActivationHistogram,
    h_test: &ActivationHistogram,
    eps: f64,
) -> Result<SimilarityReport> {
    check_pair(h_op, h_test, eps, "ε")?;
    let mut satisfied = true;
    let mut per_neuron = Vec::with_capacity(h_op.neurons.len());
    let mut worst: Option<(f64, BinRef)> = None;
    for (k, &neuron) in h_op.neurons.iter().enumerate() {
        let mut neuron_max = 0.0f64;
        for j in 0..h_op.spec.bins() {
            let (a, b) = (h_op.counts[k][j], h_test.counts[k][j]);
            let gap = portion_gap(a, h_op.total, b, h_test.total).abs();
            satisfied &= portion_within(a, h_op.total, b, h_test.total, eps);
            neuron_max = neuron_max.max(gap);
            if worst.is_none_or(|(g, _)| gap > g) {
                worst = Some((gap, BinRef { neuron, bin: j as u32 }));
            }
        }
        per_neuron.push(neuron_max);
    }
    Ok(SimilarityReport {
        kind: SimilarityKind::EpsilonPortion,
        threshold: eps,
        satisfied,
        neurons: h_op.neurons.clone(),
        per_neuron,
        max_statistic: worst.map_or(0.0, |(g, _)| g),
        worst_neuron: worst.map(|(_, r)| r.neuron),
        worst_bin: worst.map(|(_, r)| r.bin),
        undefined_bins: Vec::new(),
    })
}

/// κ-KL similarity with test ratios `p` against operational ratios `q`.
///
/// Bins empty in both sets are skipped; a bin where the test set has mass but
/// operation does not makes that neuron's divergence infinite and is listed in
/// `undefined_bins`.
pub fn kl_similar(h_op: &ActivationHistogram, h_test: &ActivationHistogram, kappa: f64) -> Result<SimilarityReport> {
    check_pair(h_op, h_test, kappa, "κ")?;
    let mut per_neuron = Vec::with_capacity(h_op.neurons.len());
    let mut undefined_bins = Vec::new();
    for (k, &neuron) in h_op.neurons.iter().enumerate() {
        let mut d = 0.0;
        for j in 0..h_op.spec.bins() {
            let p = h_test.ratio(k, j);
            if p == 0.0 {
                continue;
            }
            let q = h_op.ratio(k, j);
            if q == 0.0 {
                undefined_bins.push(BinRef { neuron, bin: j as u32 });
                d = f64::INFINITY;
            } else {
                d += p * (p / q).ln();
            }
        }
        per_neuron.push(d);
    }
    let (worst_k, max_statistic) = per_neuron
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |(bk, bv), (k, v)| {
            if bk.is_none() || *v > bv {
                (Some(k), *v)
            } else {
                (bk, bv)
            }
        });
    let satisfied = undefined_bins.is_empty() && per_neuron.iter().all(|d| *d <= kappa);
    Ok(SimilarityReport {
        kind: SimilarityKind::KlDivergence,
        threshold: kappa,
        satisfied,
        neurons: h_op.neurons.clone(),
        per_neuron,
        max_statistic,
        worst_neuron: worst_k.map(|k| h_op.neurons[k]),
        worst_bin: None,
        undefined_bins,
    })
}

/// Per-neuron κ that any operational histogram ε-portion similar to `h_test`
/// (with mass wherever the test set has mass) is guaranteed to satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativeKappa {
    pub eps: f64,
    pub neurons: Vec<usize>,
    /// `f64::INFINITY` where some contributing bin has ratio `≤ ε`.
    pub per_neuron: Vec<f64>,
}

impl ConservativeKappa {
    pub fn all_finite(&self) -> bool {
        self.per_neuron.iter().all(|k| k.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.per_neuron.iter().cloned().fold(0.0, f64::max)
    }
}

/// `κ_i = Σ_{p_j > 0} p_j ln(p_j / (p_j − ε))`, taking every operational ratio at
/// its lowest admissible value.
pub fn conservative_kappa(h_test: &ActivationHistogram, eps: f64) -> Result<ConservativeKappa> {
    if h_test.total == 0 {
        return Err(Error::EmptyDataset("test histogram has no points"));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be finite and non-negative, got {eps}")));
    }
    let per_neuron = (0..h_test.neurons.len())
        .map(|k| {
            let mut kappa = 0.0;
            for j in 0..h_test.spec.bins() {
                let p = h_test.ratio(k, j);
                if p == 0.0 {
                    continue;
                }
                if p - eps <= 0.0 {
                    return f64::INFINITY;
                }
                kappa += p * (p / (p - eps)).ln();
            }
            kappa
        })
        .collect();
    Ok(ConservativeKappa {
        eps,
        neurons: h_test.neurons.clone(),
        per_neuron,
    })
}
