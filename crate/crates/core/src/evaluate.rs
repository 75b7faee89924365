//! Accuracy indicators, label-shift simulation and the end-to-end reshaping experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample_weighted;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bounds::bounds_report;
use crate::error::{Error, Result};
use crate::histogram::{build_histogram, write_json, ActivationHistogram};
use crate::model::{train_fixture, Activation, Architecture, Dataset, InputRange, LayerSpec, Network, TrainConfig};
use crate::reshape::{apply_plan, encode, solve_exact, Candidates, PlanStatus, ReshapePlan, SolveOptions, DEFAULT_NODE_BUDGET};

/// Accuracy-based indicators of one labeled dataset.
///
/// The class universe is `0..output_width` of the network, so every class has
/// a ratio. `per_class_accuracy` only lists classes that occur.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiReport {
    pub dataset_size: usize,
    pub overall_accuracy: f64,
    pub per_class_accuracy: BTreeMap<u32, f64>,
    pub class_ratios: BTreeMap<u32, f64>,
}

impl SpiReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

pub fn compute_spi(net: &Network, data: &Dataset) -> Result<SpiReport> {
    let labels = data.require_labels()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("no points to evaluate"));
    }
    data.check_against(net)?;
    let classes = net.output_dim();
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} is outside the {classes} classes of the output layer"
        )));
    }
    let mut seen = vec![0usize; classes];
    let mut hit = vec![0usize; classes];
    for (p, &y) in data.points().iter().zip(labels) {
        seen[y as usize] += 1;
        if net.predict(p)? == y as usize {
            hit[y as usize] += 1;
        }
    }
    let n = data.len() as f64;
    Ok(SpiReport {
        dataset_size: data.len(),
        overall_accuracy: hit.iter().sum::<usize>() as f64 / n,
        per_class_accuracy: (0..classes)
            .filter(|&c| seen[c] > 0)
            .map(|c| (c as u32, hit[c] as f64 / seen[c] as f64))
            .collect(),
        class_ratios: (0..classes).map(|c| (c as u32, seen[c] as f64 / n)).collect(),
    })
}

/// Σ over classes of the absolute difference in class ratios.
pub fn ratio_distance(a: &SpiReport, b: &SpiReport) -> Result<f64> {
    if !a.class_ratios.keys().eq(b.class_ratios.keys()) {
        return Err(Error::Comparability("reports cover different classes".into()));
    }
    Ok(a.class_ratios
        .values()
        .zip(b.class_ratios.values())
        .map(|(p, q)| (p - q).abs())
        .sum())
}

/// Weighted resampling that shifts the class mix. Classes not listed get weight 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub class_weights: BTreeMap<u32, f64>,
    pub sample_size: usize,
    pub seed: u64,
}

/// Draws `sample_size` points without replacement, each with probability
/// proportional to its class weight. Survivors keep their original order.
pub fn simulate_shift(data: &Dataset, spec: &ShiftSpec) -> Result<Dataset> {
    let labels = data.require_labels()?;
    if spec.class_weights.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("class weights must be finite and non-negative".into()));
    }
    if !spec.class_weights.values().any(|w| *w > 0.0) {
        return Err(Error::InvalidArgument("at least one class weight must be positive".into()));
    }
    for class in spec.class_weights.keys() {
        if !labels.contains(class) {
            return Err(Error::InvalidArgument(format!("class {class} does not occur in the data")));
        }
    }
    let weight = |i: usize| spec.class_weights.get(&labels[i]).copied().unwrap_or(0.0);
    let available = (0..data.len()).filter(|&i| weight(i) > 0.0).count();
    if spec.sample_size > available {
        return Err(Error::Size {
            requested: spec.sample_size,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = sample_weighted(&mut rng, data.len(), weight, spec.sample_size)
        .map_err(|e| Error::InvalidArgument(format!("weighted sampling failed: {e}")))?
        .into_vec();
    picked.sort_unstable();
    data.select(&picked)
}

/// Isotropic Gaussian clusters, one per class, clamped to the input range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub dim: usize,
    pub classes: usize,
    /// Standard deviation of each cluster.
    pub spread: f64,
    /// Centres are drawn uniformly from `[-radius, radius]^dim`.
    pub radius: f64,
    pub center_seed: u64,
    pub range: InputRange,
}

impl ClusterSpec {
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.center_seed);
        (0..self.classes)
            .map(|_| (0..self.dim).map(|_| rng.random_range(-self.radius..=self.radius)).collect())
            .collect()
    }

    /// `n` labeled points with class counts proportional to `class_weights`
    /// (largest-remainder rounding), in shuffled order.
    pub fn sample(&self, class_weights: &[f64], n: usize, seed: u64) -> Result<Dataset> {
        if class_weights.len() != self.classes {
            return Err(Error::InvalidArgument(format!(
                "{} class weights for {} classes",
                class_weights.len(),
                self.classes
            )));
        }
        let total: f64 = class_weights.iter().sum();
        if class_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || total <= 0.0 {
            return Err(Error::InvalidArgument("class weights must be non-negative with a positive sum".into()));
        }
        let noise = Normal::new(0.0, self.spread)
            .map_err(|e| Error::InvalidArgument(format!("cluster spread: {e}")))?;
        let exact: Vec<f64> = class_weights.iter().map(|w| w / total * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|v| v.floor() as usize).collect();
        let mut order: Vec<usize> = (0..self.classes).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = n - counts.iter().sum::<usize>();
        for &c in order.iter().take(short) {
            counts[c] += 1;
        }

        let centers = self.centers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<(Vec<f64>, u32)> = Vec::with_capacity(n);
        for (c, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let p = centers[c]
                    .iter()
                    .map(|m| (m + noise.sample(&mut rng)).clamp(self.range.lo, self.range.hi))
                    .collect();
                rows.push((p, c as u32));
            }
        }
        rows.shuffle(&mut rng);
        let (points, labels) = rows.into_iter().unzip();
        Dataset::labeled(points, labels)
    }
}

/// Where the experiment's network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    File { path: PathBuf },
    /// Trained on a balanced sample from the configured clusters.
    Train {
        hidden: Vec<usize>,
        activation: Activation,
        samples: usize,
        train: TrainConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    File { path: PathBuf },
    Synthetic { class_weights: Vec<f64>, size: usize, seed: u64 },
    Shifted { base: Box<DataSource>, shift: ShiftSpec },
}

fn default_delta() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    0.01
}

fn default_growth() -> f64 {
    2.0
}

fn default_candidates() -> Candidates {
    Candidates::All
}

fn default_one() -> u64 {
    1
}

fn default_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Required by synthetic data sources and by trained models.
    #[serde(default)]
    pub clusters: Option<ClusterSpec>,
    pub model: ModelSource,
    pub test: DataSource,
    pub operational: DataSource,
    /// Defaults to the last hidden layer.
    #[serde(default)]
    pub layer: Option<usize>,
    /// Defaults to the first 20 neurons of the layer.
    #[serde(default)]
    pub neurons: Option<Vec<usize>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// When reshaping is infeasible, ε is multiplied by `eps_growth` up to this many times.
    #[serde(default)]
    pub max_relaxations: usize,
    #[serde(default = "default_growth")]
    pub eps_growth: f64,
    #[serde(default = "default_candidates")]
    pub candidates: Candidates,
    #[serde(default = "default_one")]
    pub min_survivors: u64,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    fn clusters(&self) -> Result<&ClusterSpec> {
        self.clusters
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("synthetic sources need a `clusters` section".into()))
    }

    pub fn build_model(&self) -> Result<Network> {
        match &self.model {
            ModelSource::File { path } => Network::load(path),
            ModelSource::Train {
                hidden,
                activation,
                samples,
                train,
            } => {
                let cl = self.clusters()?;
                let mut layers: Vec<LayerSpec> = hidden.iter().map(|&w| LayerSpec::new(w, *activation)).collect();
                layers.push(LayerSpec::new(cl.classes, Activation::Identity));
                let arch = Architecture {
                    input_dim: cl.dim,
                    input_range: cl.range,
                    layers,
                };
                let data = cl.sample(&vec![1.0; cl.classes], *samples, train.seed)?;
                train_fixture(&arch, &data, train)
            }
        }
    }

    pub fn build_data(&self, source: &DataSource) -> Result<Dataset> {
        match source {
            DataSource::File { path } => Dataset::load_csv(path),
            DataSource::Synthetic {
                class_weights,
                size,
                seed,
            } => self.clusters()?.sample(class_weights, *size, *seed),
            DataSource::Shifted { base, shift } => simulate_shift(&self.build_data(base)?, shift),
        }
    }
}

/// One row of the experiment summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub layer: usize,
    pub neurons: Vec<usize>,
    pub test_size: usize,
    pub op_size: usize,
    pub candidate_count: usize,
    pub status: PlanStatus,
    /// Every ε tried, in order; the last one produced the plan.
    pub eps_tried: Vec<f64>,
    pub removed: Option<usize>,
    /// Class-ratio distance between operation and the reshaped test set.
    pub x: f64,
    /// Class-ratio distance between operation and the original test set.
    pub y: f64,
    pub solve_seconds: f64,
}

/// Files written by [`run_experiment`], all inside the output directory.
pub const BUNDLE_FILES: &[&str] = &[
    "model.json",
    "test.csv",
    "operational.csv",
    "reshaped.csv",
    "hist_test.json",
    "hist_op.json",
    "hist_reshaped.json",
    "plan.json",
    "spi_test.json",
    "spi_reshaped.json",
    "spi_op.json",
    "summary.json",
    "summary.csv",
];

pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub plan: ReshapePlan,
    pub spi_test: SpiReport,
    pub spi_reshaped: SpiReport,
    pub spi_op: SpiReport,
}

/// The last hidden layer, or the only layer of a one-layer network.
pub fn default_layer(net: &Network) -> usize {
    net.depth().saturating_sub(1).max(1)
}

/// Runs the whole pipeline and writes the bundle to `out_dir`.
///
/// Operational labels are only used for the SPI report of the operational data.
pub fn run_experiment(config: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentOutcome> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let net = config.build_model()?;
    let d_test = config.build_data(&config.test)?;
    let d_op = config.build_data(&config.operational)?;
    d_test.check_against(&net)?;
    d_op.check_against(&net)?;

    let layer = config.layer.unwrap_or_else(|| default_layer(&net));
    let width = net.width(layer)?;
    let neurons = config.neurons.clone().unwrap_or_else(|| (0..width.min(20)).collect());
    let spec = bounds_report(&net, layer, config.delta)?.spec;
    let h_test = build_histogram(&net, &d_test, layer, &spec, Some(&neurons))?;
    let h_op = build_histogram(&net, &d_op, layer, &spec, Some(&neurons))?;
    let candidates = config.candidates.resolve(d_test.len())?;

    let started = Instant::now();
    let mut eps = config.eps;
    let mut eps_tried = Vec::new();
    let opts = SolveOptions {
        node_budget: config.node_budget,
    };
    let plan = loop {
        eps_tried.push(eps);
        let inst = encode(&h_op, &net, &d_test, &candidates, eps, config.min_survivors)?;
        let plan = solve_exact(&inst, &opts)?;
        if plan.has_solution() || eps_tried.len() > config.max_relaxations {
            break plan;
        }
        eps *= config.eps_growth;
    };
    let solve_seconds = started.elapsed().as_secs_f64();

    let reshaped = if plan.has_solution() {
        apply_plan(&d_test, &plan)?
    } else {
        d_test.clone()
    };
    let h_reshaped: ActivationHistogram = build_histogram(&net, &reshaped, layer, &spec, Some(&neurons))?;
    let spi_test = compute_spi(&net, &d_test)?;
    let spi_reshaped = compute_spi(&net, &reshaped)?;
    let spi_op = compute_spi(&net, &d_op)?;
    let summary = ExperimentSummary {
        layer,
        neurons,
        test_size: d_test.len(),
        op_size: d_op.len(),
        candidate_count: candidates.len(),
        status: plan.status,
        eps_tried,
        removed: plan.removed_count,
        x: ratio_distance(&spi_op, &spi_reshaped)?,
        y: ratio_distance(&spi_op, &spi_test)?,
        solve_seconds,
    };

    let dim = net.input_dim();
    net.save(out.join("model.json"))?;
    d_test.save_csv(out.join("test.csv"), dim)?;
    d_op.save_csv(out.join("operational.csv"), dim)?;
    reshaped.save_csv(out.join("reshaped.csv"), dim)?;
    h_test.save(out.join("hist_test.json"))?;
    h_op.save(out.join("hist_op.json"))?;
    h_reshaped.save(out.join("hist_reshaped.json"))?;
    plan.save(out.join("plan.json"))?;
    spi_test.save(out.join("spi_test.json"))?;
    spi_reshaped.save(out.join("spi_reshaped.json"))?;
    spi_op.save(out.join("spi_op.json"))?;
    write_json(out.join("summary.json"), &summary)?;
    write_summary_csv(out.join("summary.csv"), &summary)?;

    Ok(ExperimentOutcome {
        summary,
        plan,
        spi_test,
        spi_reshaped,
        spi_op,
    })
}

fn write_summary_csv(path: PathBuf, s: &ExperimentSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e))?;
    let status = serde_json::to_value(s.status).expect("plain enum");
    let row = [
        s.test_size.to_string(),
        s.op_size.to_string(),
        s.candidate_count.to_string(),
        s.removed.map_or_else(String::new, |r| r.to_string()),
        s.x.to_string(),
        s.y.to_string(),
        s.solve_seconds.to_string(),
        status.as_str().unwrap_or_default().to_string(),
        s.eps_tried.last().copied().unwrap_or_default().to_string(),
    ];
    w.write_record(["test_size", "op_size", "candidates", "removed", "x", "y", "solve_seconds", "status", "eps"])
        .and_then(|_| w.write_record(&row))
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| Error::parse(&path, e))
}
