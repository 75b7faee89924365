//! Command-line front end.
//!
//! Exit codes: 0 success (or similar), 1 file-system failure, 2 invalid input,
//! 3 dissimilar histograms or no reshaping plan.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{bounds_report, derive_binning, propagate_intervals, BinningSpec};
use crate::error::{Error, Result};
use crate::evaluate::{default_layer, run_experiment, ExperimentConfig};
use crate::histogram::{build_histogram, epsilon_portion_similar, kl_similar, write_json, ActivationHistogram};
use crate::model::{Dataset, Network};
use crate::reshape::{apply_plan, encode, export_lp, solve_exact, solve_greedy, Candidates, SolveOptions, DEFAULT_NODE_BUDGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "covshift", version, about = "Activation-histogram shift monitoring and test-set reshaping")]
pub struct Cli {
    /// Worker threads for per-point work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sound neuron ranges of a layer and the binning they induce.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        /// 1-based layer index (default: last hidden layer).
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binned activation histogram of a dataset.
    Histogram {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        layer: Option<usize>,
        #[command(flatten)]
        binning: Binning,
        /// Comma separated neuron indices (default: every neuron).
        #[arg(long, value_delimiter = ',')]
        neurons: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an operational and a test histogram.
    Similarity {
        #[arg(long)]
        op: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        threshold: Threshold,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove the fewest test points that make the test set ε-portion similar to operation.
    Reshape(ReshapeArgs),
    /// Run the full shift experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Binning {
    /// Bin width; the binning is derived from the layer's sound ranges.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Reuse the binning of a spec, bounds report or histogram file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Threshold {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct OpSource {
    /// Operational histogram; fixes layer, binning and neurons.
    #[arg(long)]
    pub op_hist: Option<PathBuf>,
    /// Operational dataset; its histogram is built with --layer/--delta/--neurons.
    #[arg(long)]
    pub op_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Greedy,
}

#[derive(Debug, Args)]
pub struct ReshapeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub op: OpSource,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, conflicts_with = "op_hist")]
    pub layer: Option<usize>,
    #[arg(long, conflicts_with = "op_hist")]
    pub delta: Option<f64>,
    #[arg(long, value_delimiter = ',', conflicts_with = "op_hist")]
    pub neurons: Option<Vec<usize>>,
    /// `all`, `random:K:SEED`, or a file of indices.
    #[arg(long, default_value = "all")]
    pub candidates: String,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    pub node_budget: usize,
    #[arg(long, default_value_t = 1)]
    pub min_survivors: u64,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    pub method: Method,
    #[arg(long)]
    pub plan: PathBuf,
    /// Survivor dataset (default: reshaped.csv next to the plan).
    #[arg(long)]
    pub reshaped: Option<PathBuf>,
    #[arg(long)]
    pub export_lp: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return EXIT_INVALID;
        }
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn say(cli: &Cli, line: impl AsRef<str>) {
    if !cli.quiet {
        let _ = writeln!(std::io::stdout().lock(), "{}", line.as_ref());
    }
}

fn layer_or_default(net: &Network, layer: Option<usize>) -> Result<usize> {
    let layer = layer.unwrap_or_else(|| default_layer(net));
    net.check_layer(layer)?;
    Ok(layer)
}

/// Reads a binning from a bare spec or from any JSON object with a `spec` field.
pub fn load_spec(path: &Path) -> Result<BinningSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    let inner = value.get("spec").cloned().unwrap_or(value);
    let raw: BinningSpec = serde_json::from_value(inner).map_err(|e| Error::parse(path, e))?;
    BinningSpec::new(raw.c, raw.delta, raw.n).map_err(|e| Error::parse(path, e))
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Bounds { model, layer, delta, out } => {
            let net = Network::load(model)?;
            let layer = layer_or_default(&net, *layer)?;
            let report = bounds_report(&net, layer, *delta)?;
            if let Some(out) = out {
                write_json(out, &report)?;
            }
            say(cli, serde_json::to_string_pretty(&report).expect("plain data"));
            Ok(EXIT_OK)
        }
        Command::Histogram {
            model,
            data,
            layer,
            binning,
            neurons,
            out,
        } => {
            let net = Network::load(model)?;
            let data = Dataset::load_csv(data)?;
            let layer = layer_or_default(&net, *layer)?;
            let spec = match (&binning.spec, binning.delta) {
                (Some(path), _) => load_spec(path)?,
                (None, Some(delta)) => derive_binning(&propagate_intervals(&net, layer)?, delta)?,
                (None, None) => unreachable!("clap requires one of --delta/--spec"),
            };
            let h = build_histogram(&net, &data, layer, &spec, neurons.as_deref())?;
            h.save(out)?;
            say(
                cli,
                format!(
                    "{} points, layer {layer}, {} neurons, {} bins (c = {}, delta = {}) -> {}",
                    h.total(),
                    h.neurons().len(),
                    spec.bins(),
                    spec.c,
                    spec.delta,
                    out.display()
                ),
            );
            Ok(EXIT_OK)
        }
        Command::Similarity { op, test, threshold, out } => {
            let h_op = ActivationHistogram::load(op)?;
            let h_test = ActivationHistogram::load(test)?;
            let report = match (threshold.eps, threshold.kappa) {
                (Some(eps), _) => epsilon_portion_similar(&h_op, &h_test, eps)?,
                (None, Some(kappa)) => kl_similar(&h_op, &h_test, kappa)?,
                (None, None) => unreachable!("clap requires one of --eps/--kappa"),
            };
            if let Some(out) = out {
                report.save(out)?;
            }
            let location = match (report.worst_neuron, report.worst_bin) {
                (Some(n), Some(b)) => format!(" at neuron {n}, bin {b}"),
                (Some(n), None) => format!(" at neuron {n}"),
                _ => String::new(),
            };
            say(
                cli,
                format!(
                    "{} (max statistic {}{location}, threshold {})",
                    if report.satisfied { "similar" } else { "dissimilar" },
                    report.max_statistic,
                    report.threshold
                ),
            );
            Ok(if report.satisfied { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Reshape(args) => reshape(cli, args),
        Command::Experiment { config, out } => {
            let config = ExperimentConfig::load(config)?;
            let outcome = run_experiment(&config, out)?;
            let s = &outcome.summary;
            say(
                cli,
                format!(
                    "{:?}: removed {} of {} at eps {}; x = {}, y = {} -> {}",
                    s.status,
                    s.removed.map_or("none".to_string(), |r| r.to_string()),
                    s.test_size,
                    s.eps_tried.last().copied().unwrap_or(config.eps),
                    s.x,
                    s.y,
                    out.display()
                ),
            );
            Ok(EXIT_OK)
        }
    }
}

fn reshape(cli: &Cli, args: &ReshapeArgs) -> Result<i32> {
    let net = Network::load(&args.model)?;
    let d_test = Dataset::load_csv(&args.test)?;
    let h_op = match (&args.op.op_hist, &args.op.op_data) {
        (Some(path), _) => ActivationHistogram::load(path)?,
        (None, Some(path)) => {
            let d_op = Dataset::load_csv(path)?;
            let layer = layer_or_default(&net, args.layer)?;
            let width = net.width(layer)?;
            let neurons = args.neurons.clone().unwrap_or_else(|| (0..width.min(20)).collect());
            let spec = derive_binning(&propagate_intervals(&net, layer)?, args.delta.unwrap_or(1.0))?;
            build_histogram(&net, &d_op, layer, &spec, Some(&neurons))?
        }
        (None, None) => unreachable!("clap requires one of --op-hist/--op-data"),
    };
    let candidates = Candidates::parse(&args.candidates)?.resolve(d_test.len())?;
    let inst = encode(&h_op, &net, &d_test, &candidates, args.eps, args.min_survivors)?;
    if let Some(path) = &args.export_lp {
        export_lp(&inst, path)?;
    }
    let plan = match args.method {
        Method::Exact => solve_exact(&inst, &SolveOptions { node_budget: args.node_budget })?,
        Method::Greedy => solve_greedy(&inst)?,
    };
    plan.save(&args.plan)?;
    let reshaped_path = args.reshaped.clone().unwrap_or_else(|| {
        args.plan
            .parent()
            .map_or_else(|| PathBuf::from("reshaped.csv"), |d| d.join("reshaped.csv"))
    });
    if plan.has_solution() {
        apply_plan(&d_test, &plan)?.save_csv(&reshaped_path, net.input_dim())?;
    }
    let verdict = match &plan.similarity {
        Some(r) if r.satisfied => "similar",
        Some(_) => "dissimilar",
        None => "n/a",
    };
    say(
        cli,
        format!(
            "{:?}: removed {} of {} candidates ({} test points), survivors {verdict}",
            plan.status,
            plan.removed_count.map_or("none".to_string(), |r| r.to_string()),
            plan.candidate_count,
            plan.test_total
        ),
    );
    Ok(if plan.has_solution() { EXIT_OK } else { EXIT_NEGATIVE })
}
