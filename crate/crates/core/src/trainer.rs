//! Mini-batch training of the membership network and out-of-sample
//! inference.
//!
//! Each iteration draws a batch, builds its heat-kernel graph, runs the
//! network forward, re-estimates the cluster masses `Λ̃` from the current
//! memberships (E-step), then takes one Adam step on the cut loss with `Λ̃`
//! frozen (M-step).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::data::{BatchSampler, DataMatrix};
use crate::error::{Divergence, Error, Result};
use crate::graph::{AffinityOptions, Symmetrize};
use crate::loss::{Cut, LossBreakdown};
use crate::matrix::Matrix;
use crate::metrics;
use crate::model::{argmax_rows, MlpModel, DEFAULT_HIDDEN};
use crate::optim::{adam_step, AdamState, CosineSchedule};

/// Which relaxed cut to minimise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    #[default]
    Ncut,
    Rcut,
}

impl Objective {
    pub fn cut(self) -> Cut {
        match self {
            Objective::Ncut => Cut::Normalized,
            Objective::Rcut => Cut::Ratio,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Ncut => "ncut",
            Objective::Rcut => "rcut",
        }
    }
}

impl core::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ncut" => Ok(Objective::Ncut),
            "rcut" => Ok(Objective::Rcut),
            other => Err(Error::InvalidConfig(format!("unknown objective {other:?} (expected ncut or rcut)"))),
        }
    }
}

/// Hyper-parameters of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Number of clusters `k`.
    pub clusters: usize,
    /// Weight of the orthogonality penalty.
    pub gamma: f64,
    /// Initial learning rate, cosine-annealed to zero.
    pub lr0: f64,
    /// Decoupled weight decay.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Heat-kernel bandwidth.
    pub sigma: f64,
    /// Keep the `s` largest affinities per row.
    pub knn: Option<usize>,
    pub symmetrize: Symmetrize,
    pub self_loops: bool,
    pub seed: u64,
    pub objective: Objective,
    pub hidden: Vec<usize>,
    /// Record ACC/NMI/ARI on the training set after every epoch when labels
    /// are available.
    pub track_metrics: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            gamma: 100.0,
            lr0: 0.005,
            weight_decay: 1e-4,
            batch_size: 1000,
            epochs: 100,
            sigma: 3.0,
            knn: None,
            symmetrize: Symmetrize::Average,
            self_loops: false,
            seed: 0,
            objective: Objective::Ncut,
            hidden: DEFAULT_HIDDEN.to_vec(),
            track_metrics: true,
        }
    }
}

impl TrainConfig {
    /// Settings for low-dimensional point clouds such as the generated
    /// rings and arcs. The wide default network collapses on 2-D input.
    pub fn planar() -> Self {
        Self { gamma: 1.0, hidden: alloc::vec![64, 64], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.clusters < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.clusters));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr0));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay must be nonnegative, got {}", self.weight_decay));
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if let Some(s) = self.knn {
            if s == 0 || s >= self.batch_size {
                return bad(format!("knn s must satisfy 1 <= s < batch size {}, got {s}", self.batch_size));
            }
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden widths must be positive, got {:?}", self.hidden));
        }
        Ok(())
    }

    pub fn affinity(&self) -> AffinityOptions {
        AffinityOptions { sigma: self.sigma, knn: self.knn, symmetrize: self.symmetrize, self_loops: self.self_loops }
    }

    fn sampler_seed(&self) -> u64 {
        self.seed ^ 0x5DEE_CE66_D1CE_5EED
    }
}

/// One optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub epoch: usize,
    pub lap: f64,
    pub orth: f64,
    pub total: f64,
    pub lr: f64,
}

/// Training-set metrics after an epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Index of the last optimizer step of the epoch.
    pub iter: usize,
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

/// Append-only record of a run: one entry per optimizer step, plus
/// per-epoch metrics when labels were supplied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub iterations: Vec<IterRecord>,
    pub epochs: Vec<EpochMetrics>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn min_lap(&self) -> Option<f64> {
        self.iterations.iter().map(|r| r.lap).reduce(f64::min)
    }

    pub fn min_orth(&self) -> Option<f64> {
        self.iterations.iter().map(|r| r.orth).reduce(f64::min)
    }

    pub fn metrics_at(&self, iter: usize) -> Option<&EpochMetrics> {
        self.epochs.iter().find(|m| m.iter == iter)
    }

    /// Mean total loss over the steps of the last epoch.
    pub fn final_epoch_loss(&self) -> Option<f64> {
        let last = self.iterations.last()?.epoch;
        let tail: Vec<f64> = self.iterations.iter().filter(|r| r.epoch == last).map(|r| r.total).collect();
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Hook called at every epoch boundary, e.g. to write checkpoints.
pub trait TrainObserver {
    fn on_epoch(&mut self, epoch: usize, model: &MlpModel, log: &TrainLog);
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: usize, _: &MlpModel, _: &TrainLog) {}
}

/// Trains a fresh model on `data`. Deterministic in `(data, cfg)`.
pub fn train(data: &DataMatrix, cfg: &TrainConfig) -> Result<(MlpModel, TrainLog)> {
    train_with(data, cfg, &mut ())
}

pub fn train_with(
    data: &DataMatrix,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(MlpModel, TrainLog)> {
    cfg.validate()?;
    let n = data.len();
    if n < cfg.batch_size {
        return Err(Error::InvalidConfig(format!(
            "batch size {} exceeds the {n} training points",
            cfg.batch_size
        )));
    }
    let model = MlpModel::with_hidden(data.dim(), &cfg.hidden, cfg.clusters, cfg.seed)?;
    train_from(model, data, cfg, observer)
}

/// Trains `restarts` models with seeds `cfg.seed, cfg.seed + 1, …` and keeps
/// the one with the lowest final-epoch loss. Labels are not consulted.
pub fn train_best_of(data: &DataMatrix, cfg: &TrainConfig, restarts: usize) -> Result<(MlpModel, TrainLog)> {
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let mut best: Option<(f64, MlpModel, TrainLog)> = None;
    for r in 0..restarts as u64 {
        let run = TrainConfig { seed: cfg.seed.wrapping_add(r), ..cfg.clone() };
        let (model, log) = train(data, &run)?;
        let loss = log.final_epoch_loss().unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(b, _, _)| loss < *b) {
            best = Some((loss, model, log));
        }
    }
    let (_, model, log) = best.expect("at least one restart");
    Ok((model, log))
}

/// Continues training from existing parameters with a fresh optimizer.
pub fn train_from(
    mut model: MlpModel,
    data: &DataMatrix,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(MlpModel, TrainLog)> {
    cfg.validate()?;
    if model.input_dim() != data.dim() || model.clusters() != cfg.clusters {
        return Err(Error::InvalidInput(format!(
            "model maps {} -> {}, data has {} features and config asks for {} clusters",
            model.input_dim(),
            model.clusters(),
            data.dim(),
            cfg.clusters
        )));
    }
    let points = data.points();
    let n = points.rows();
    let mut sampler = BatchSampler::new(n, cfg.batch_size, cfg.sampler_seed())?;
    // a trailing single point cannot form a graph and is skipped
    let usable = n / cfg.batch_size + usize::from(n % cfg.batch_size >= 2);
    let schedule = CosineSchedule { lr0: cfg.lr0, total_steps: cfg.epochs * usable };
    let mut adam = AdamState::new(&model.params_mut());
    let affinity = cfg.affinity();
    let cut = cfg.objective.cut();
    let mut log = TrainLog::default();
    let mut last_good = model.clone();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            sampler.new_epoch();
        }
        while let Some((_, batch)) = sampler.next_batch(points) {
            if batch.rows() < 2 {
                continue;
            }
            let lr = schedule.lr(step);
            let outcome = iterate(&mut model, &mut adam, &batch, &affinity, cut, cfg, lr);
            let loss = match outcome {
                Ok(loss) => loss,
                Err(Error::Numerical(reason)) => {
                    return Err(Error::Diverged(Box::new(Divergence { iteration: step, reason, last_good, log })));
                }
                Err(other) => return Err(other),
            };
            log.iterations.push(IterRecord {
                iter: step,
                epoch,
                lap: loss.lap,
                orth: loss.orth,
                total: loss.total,
                lr,
            });
            step += 1;
        }
        if cfg.track_metrics {
            if let Some(truth) = data.labels() {
                let (pred, _) = infer(&model, points)?;
                log.epochs.push(EpochMetrics {
                    epoch,
                    iter: step.saturating_sub(1),
                    acc: metrics::accuracy(&pred, truth)?,
                    nmi: metrics::nmi(&pred, truth)?,
                    ari: metrics::ari(&pred, truth)?,
                });
            }
        }
        last_good.clone_from(&model);
        observer.on_epoch(epoch, &model, &log);
    }
    Ok((model, log))
}

fn iterate(
    model: &mut MlpModel,
    adam: &mut AdamState,
    batch: &Matrix,
    affinity: &AffinityOptions,
    cut: Cut,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<LossBreakdown> {
    let graph = affinity.build(batch)?;
    let tape = model.forward(batch)?;
    let mass = cut.estimate(tape.output(), &graph)?;
    let (loss, d_y) = cut.loss_and_grad(tape.output(), &graph, &mass, cfg.gamma)?;
    let grads = model.backward(&tape, &d_y)?;
    let grad_views = grads.tensors();
    adam_step(&mut model.params_mut(), &grad_views, adam, lr, cfg.weight_decay)?;
    if !model.is_finite() {
        return Err(Error::Numerical("parameters became non-finite".to_string()));
    }
    Ok(loss)
}

const INFER_CHUNK: usize = 4096;

/// Hard labels (row argmax, ties to the lowest index) and memberships for
/// every row of `points`. Pure feed-forward: no graph, no k-means.
pub fn infer(model: &MlpModel, points: &Matrix) -> Result<(Vec<usize>, Matrix)> {
    if points.cols() != model.input_dim() {
        return Err(Error::InvalidInput(format!(
            "data has {} features, model expects {}",
            points.cols(),
            model.input_dim()
        )));
    }
    let n = points.rows();
    let k = model.clusters();
    let mut memberships = Vec::with_capacity(n * k);
    let mut start = 0;
    while start < n {
        let end = (start + INFER_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let y = model.predict(&points.select_rows(&idx))?;
        memberships.extend_from_slice(y.as_slice());
        start = end;
    }
    let y = Matrix::from_vec(n, k, memberships)?;
    Ok((argmax_rows(&y), y))
}
