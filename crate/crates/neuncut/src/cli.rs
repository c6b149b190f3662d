//! The `neuncut` command-line tool.
//!
//! Exit codes: 0 on success, 1 for bad flags, configuration or input, 2
//! when a computation breaks down numerically.

use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use neuncut_core::baseline::{ncut_baseline, BaselineConfig};
use neuncut_core::data::{self, DataMatrix};
use neuncut_core::gamma_search::{self, SearchConfig};
use neuncut_core::graph::{AffinityOptions, Symmetrize};
use neuncut_core::trainer::{train_with, TrainObserver};
use neuncut_core::{metrics, Error as CoreError, MlpModel, Objective, TrainConfig, TrainLog};

use crate::error::{Error, Result};
use crate::io::{load_any_labels, load_csv, load_labels, save_csv, save_labels, write_atomic};
use crate::model_file::SavedModel;
use crate::{config, report};

#[derive(Debug, Parser)]
#[command(name = "neuncut", version, about = "Neural normalized cut clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-cluster dataset as CSV (with a label column).
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Summarize the heat-kernel graph of one mini-batch as JSON.
    #[command(args_override_self = true)]
    AffinityStats(AffinityStatsArgs),
    /// Train the membership network and write the model JSON.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Assign labels to points with a trained model.
    #[command(args_override_self = true)]
    Infer(InferArgs),
    /// Score predicted labels against ground truth (ACC, NMI, ARI as JSON).
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Classical spectral clustering on the normalized Laplacian.
    #[command(args_override_self = true)]
    BaselineNcut(BaselineArgs),
    /// Pick the penalty weight from the loss plateau without labels.
    #[command(args_override_self = true)]
    GammaSearch(GammaSearchArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// File of key=value lines supplying defaults for this subcommand's flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Shape {
    Rings,
    DoubleC,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SymmetrizeArg {
    /// (A + Aᵀ) / 2
    Average,
    /// max(A, Aᵀ)
    Union,
}

impl From<SymmetrizeArg> for Symmetrize {
    fn from(s: SymmetrizeArg) -> Self {
        match s {
            SymmetrizeArg::Average => Symmetrize::Average,
            SymmetrizeArg::Union => Symmetrize::Union,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectiveArg {
    Ncut,
    Rcut,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Ncut => Objective::Ncut,
            ObjectiveArg::Rcut => Objective::Rcut,
        }
    }
}

/// Comma-separated list of numbers, e.g. `64,64`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<List<T>, String> {
    if s.trim().is_empty() {
        return Ok(List(Vec::new()));
    }
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("{p:?} is not a valid number")))
        .collect::<std::result::Result<_, _>>()
        .map(List)
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "rings")]
    pub shape: Shape,
    /// Number of points (even; split equally between the two clusters).
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Standard deviation of the isotropic Gaussian noise.
    #[arg(long, default_value_t = data::DEFAULT_NOISE)]
    pub noise: f64,
    /// Inner ring radius (rings).
    #[arg(long, default_value_t = data::DEFAULT_RING_RADII.0)]
    pub inner_radius: f64,
    /// Outer ring radius (rings).
    #[arg(long, default_value_t = data::DEFAULT_RING_RADII.1)]
    pub outer_radius: f64,
    /// Arc radius (double-c).
    #[arg(long, default_value_t = data::DEFAULT_C_SCALE)]
    pub scale: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

/// Graph construction flags.
#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Heat-kernel bandwidth.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    /// Keep only the s largest affinities in each row.
    #[arg(long, value_name = "S")]
    pub knn: Option<usize>,
    /// How the kNN graph is made symmetric again.
    #[arg(long, value_enum, default_value = "average")]
    pub symmetrize: SymmetrizeArg,
}

#[derive(Debug, Args)]
pub struct AffinityStatsArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Keep a_ii = 1 instead of zeroing the diagonal.
    #[arg(long)]
    pub self_loops: bool,
    /// Size of the sampled batch (capped at n).
    #[arg(long, default_value_t = 1000)]
    pub batch_size: usize,
    /// Also write the JSON here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Flags shared by `train` and `gamma-search`.
#[derive(Debug, Args)]
pub struct TrainOpts {
    /// Points CSV.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Train on a seeded random subset of this many points.
    #[arg(long, value_name = "N")]
    pub train_size: Option<usize>,
    /// Number of clusters k.
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    /// Initial learning rate (cosine-annealed to zero).
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    /// Decoupled weight decay.
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    /// Mini-batch size m.
    #[arg(long, default_value_t = 1000)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Keep a_ii = 1 instead of zeroing the diagonal.
    #[arg(long)]
    pub self_loops: bool,
    #[arg(long, value_enum, default_value = "ncut")]
    pub objective: ObjectiveArg,
    /// Hidden layer widths, comma-separated (empty for a linear model).
    #[arg(long, default_value = "512,512", value_parser = parse_list::<usize>)]
    pub hidden: List<usize>,
}

impl TrainOpts {
    fn config(&self, gamma: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            clusters: self.clusters,
            gamma,
            lr0: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            sigma: self.graph.sigma,
            knn: self.graph.knn,
            symmetrize: self.graph.symmetrize.into(),
            self_loops: self.self_loops,
            seed,
            objective: self.objective.into(),
            hidden: self.hidden.0.clone(),
            track_metrics: true,
        }
    }

    fn load(&self, seed: u64) -> Result<DataMatrix> {
        let data = load_csv(&self.data)?;
        match self.train_size {
            Some(m) if m < data.len() => Ok(data.split(m, seed)?.0),
            _ => Ok(data),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Weight of the orthogonality penalty.
    #[arg(long, default_value_t = 100.0)]
    pub gamma: f64,
    /// Model JSON output.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Training curve CSV (iter,lap,orth,total,lr[,acc,nmi,ari]).
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Rewrite this model JSON at the end of every epoch.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Points CSV.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Labels file output, one integer per line.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Soft memberships CSV output.
    #[arg(long, value_name = "PATH")]
    pub memberships: Option<PathBuf>,
    /// x,y,predicted_label CSV output (2-D data only).
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted labels (labels file, or CSV with a label column).
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Ground truth (labels file, or CSV with a label column).
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    /// Also write the JSON here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// k-means restarts.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Refuse inputs larger than this (the solver is dense).
    #[arg(long, default_value_t = neuncut_core::baseline::DEFAULT_MAX_POINTS)]
    pub max_points: usize,
    /// Labels file output.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// x,y,predicted_label CSV output (2-D data only).
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GammaSearchArgs {
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Explicit descending grid, comma-separated; overrides the geometric grid.
    #[arg(long, value_parser = parse_list::<f64>)]
    pub grid: Option<List<f64>>,
    #[arg(long, default_value_t = 1e6)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 21)]
    pub grid_points: usize,
    /// Relative slack on the plateau bound.
    #[arg(long, default_value_t = gamma_search::DEFAULT_TAU)]
    pub tau: f64,
    /// Absolute slack on the plateau bound.
    #[arg(long, default_value_t = gamma_search::DEFAULT_ABS_TOL)]
    pub abs_tol: f64,
    /// Epochs per probe (default: a quarter of --epochs).
    #[arg(long)]
    pub probe_epochs: Option<usize>,
    /// Probe table CSV (gamma,optimal_lap,optimal_orth,selected).
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Retrain at the full budget with the selected weight and save the model.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let root = Cli::command();
    let argv = match config::expand_argv(argv, &root) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::AffinityStats(a) => affinity_stats(a),
        Command::Train(a) => train_cmd(a),
        Command::Infer(a) => infer_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::BaselineNcut(a) => baseline_cmd(a),
        Command::GammaSearch(a) => gamma_cmd(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let data = match a.shape {
        Shape::Rings => data::gen_double_rings(a.n, (a.inner_radius, a.outer_radius), a.noise, a.common.seed)?,
        Shape::DoubleC => data::gen_double_c(a.n, a.scale, a.noise, a.common.seed)?,
    };
    save_csv(&data, &a.out)
}

fn affinity_stats(a: AffinityStatsArgs) -> Result<()> {
    let data = load_csv(&a.data)?;
    let m = a.batch_size.min(data.len());
    let mut sampler = data::BatchSampler::new(data.len(), m, a.common.seed)?;
    let (_, batch) = sampler.next_batch(data.points()).expect("non-empty epoch");
    let opts = AffinityOptions {
        sigma: a.graph.sigma,
        knn: a.graph.knn,
        symmetrize: a.graph.symmetrize.into(),
        self_loops: a.self_loops,
    };
    let g = opts.build(&batch)?;
    let deg = g.degrees();
    let n = g.size();
    let min = deg.iter().copied().fold(f64::INFINITY, f64::min);
    let max = deg.iter().copied().fold(0.0, f64::max);
    let mean = g.total_degree() / n as f64;
    let isolated = deg.iter().filter(|&&d| d == 0.0).count();
    let json = serde_json::json!({
        "batch_size": n,
        "nonzeros": g.nonzeros(),
        "density": g.nonzeros() as f64 / (n * n) as f64,
        "degree_min": min,
        "degree_mean": mean,
        "degree_max": max,
        "isolated": isolated,
        "mean_offdiag_affinity": (g.total_degree() - g.affinity().trace()) / (n * (n - 1)) as f64,
    });
    let text = serde_json::to_string_pretty(&json).expect("json") + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    Ok(())
}

struct Checkpointer<'a> {
    path: Option<&'a Path>,
    objective: Objective,
    sigma: f64,
    knn: Option<usize>,
    failure: Option<Error>,
}

impl Checkpointer<'_> {
    fn saved(&self, model: &MlpModel) -> SavedModel {
        SavedModel { model: model.clone(), objective: self.objective, sigma: self.sigma, knn: self.knn }
    }
}

impl TrainObserver for Checkpointer<'_> {
    fn on_epoch(&mut self, epoch: usize, model: &MlpModel, log: &TrainLog) {
        if let Some(m) = log.epochs.last().filter(|m| m.epoch == epoch) {
            eprintln!("epoch {:>4}  acc {:.4}  nmi {:.4}  ari {:.4}", epoch + 1, m.acc, m.nmi, m.ari);
        }
        if let (Some(path), None) = (self.path, &self.failure) {
            if let Err(e) = self.saved(model).save(path) {
                self.failure = Some(e);
            }
        }
    }
}

/// Trains with `cfg`, checkpointing as requested; on divergence the last
/// good parameters go to the checkpoint path or `<out>.last-good.json`.
fn fit(data: &DataMatrix, cfg: &TrainConfig, out: &Path, log_path: Option<&Path>, checkpoint: Option<&Path>) -> Result<()> {
    let mut obs = Checkpointer { path: checkpoint, objective: cfg.objective, sigma: cfg.sigma, knn: cfg.knn, failure: None };
    match train_with(data, cfg, &mut obs) {
        Ok((model, log)) => {
            if let Some(e) = obs.failure {
                return Err(e);
            }
            obs.saved(&model).save(out)?;
            if let Some(p) = log_path {
                write_atomic(p, report::train_log_csv(&log).as_bytes())?;
            }
            if let Some(last) = log.iterations.last() {
                eprintln!("trained {} steps: lap {:.6e}  orth {:.6e}", log.len(), last.lap, last.orth);
            }
            Ok(())
        }
        Err(CoreError::Diverged(d)) => {
            let fallback = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| {
                let mut p = out.as_os_str().to_owned();
                p.push(".last-good.json");
                PathBuf::from(p)
            });
            obs.saved(&d.last_good).save(&fallback)?;
            if let Some(p) = log_path {
                write_atomic(p, report::train_log_csv(&d.log).as_bytes())?;
            }
            eprintln!("last good parameters written to {}", fallback.display());
            Err(CoreError::Diverged(d).into())
        }
        Err(e) => Err(e.into()),
    }
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let data = a.opts.load(a.common.seed)?;
    let cfg = a.opts.config(a.gamma, a.common.seed);
    fit(&data, &cfg, &a.out, a.log.as_deref(), a.checkpoint.as_deref())
}

fn infer_cmd(a: InferArgs) -> Result<()> {
    let saved = SavedModel::load(&a.model)?;
    let data = load_csv(&a.data)?;
    let (labels, y) = neuncut_core::infer(&saved.model, data.points())?;
    save_labels(&labels, &a.out)?;
    if let Some(p) = &a.memberships {
        save_csv(&DataMatrix::unlabeled(y)?, p)?;
    }
    if let Some(p) = &a.plot {
        write_atomic(p, report::scatter_csv(data.points(), &labels)?.as_bytes())?;
    }
    Ok(())
}

/// `{"acc": …, "nmi": …, "ari": …}` with six decimals.
pub fn metrics_json(s: &metrics::Scores) -> String {
    format!("{{\"acc\": {:.6}, \"nmi\": {:.6}, \"ari\": {:.6}}}\n", s.acc, s.nmi, s.ari)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let pred = load_labels(&a.pred).or_else(|_| load_any_labels(&a.pred))?;
    let truth = load_any_labels(&a.truth)?;
    let text = metrics_json(&metrics::score(&pred, &truth)?);
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, text.as_bytes())?;
    }
    Ok(())
}

fn baseline_cmd(a: BaselineArgs) -> Result<()> {
    let data = load_csv(&a.data)?;
    let cfg = BaselineConfig {
        clusters: a.clusters,
        sigma: a.graph.sigma,
        knn: a.graph.knn,
        symmetrize: a.graph.symmetrize.into(),
        seed: a.common.seed,
        restarts: a.restarts,
        max_points: a.max_points,
    };
    let result = ncut_baseline(data.points(), &cfg)?;
    save_labels(&result.labels, &a.out)?;
    if let Some(p) = &a.plot {
        write_atomic(p, report::scatter_csv(data.points(), &result.labels)?.as_bytes())?;
    }
    Ok(())
}

fn gamma_cmd(a: GammaSearchArgs) -> Result<()> {
    let data = a.opts.load(a.common.seed)?;
    let cfg = a.opts.config(1.0, a.common.seed);
    let grid = match &a.grid {
        Some(g) => g.0.clone(),
        None => gamma_search::log_grid(a.grid_max, a.grid_min, a.grid_points),
    };
    let search_cfg = SearchConfig { grid, tau: a.tau, abs_tol: a.abs_tol, probe_epochs: a.probe_epochs };
    let report = gamma_search::search(&data, &cfg, &search_cfg)?;
    if let Some(p) = &a.report {
        write_atomic(p, report::gamma_report_csv(&report).as_bytes())?;
    }
    for p in &report.probes {
        eprintln!("gamma {:>12.4}  optimal lap {:.4e}  optimal orth {:.4e}", p.gamma, p.optimal_lap, p.optimal_orth);
    }
    let Some(gamma) = report.selected_gamma() else {
        return Err(CoreError::SearchFailed(Box::new(report)).into());
    };
    println!("{gamma}");
    if let Some(out) = &a.out {
        let full = TrainConfig { gamma, ..cfg };
        fit(&data, &full, out, None, None)?;
    }
    Ok(())
}
