//! Label-free choice of the penalty weight `γ` from the loss plateau.
//!
//! A very large `γ` drives `L_orth` to the smallest value the data allows
//! (the bound). Walking down a descending grid, the chosen `γ` is the
//! smallest one whose probe still keeps `L_orth` at that bound. Below the
//! threshold the penalty loses and training collapses towards a trivial
//! membership with `L_Lap ≈ 0` and a large `L_orth`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::trainer::{train, TrainConfig};

pub const DEFAULT_TAU: f64 = 0.05;
/// Absolute slack added to the bound. On well-separated data the bound is
/// numerically zero and a purely relative tolerance would reject every
/// grid point but the first.
pub const DEFAULT_ABS_TOL: f64 = 0.01;

/// Minima of the two loss terms over one probe run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaProbe {
    pub gamma: f64,
    pub optimal_lap: f64,
    pub optimal_orth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Descending penalty weights; the first one sets the bound.
    pub grid: Vec<f64>,
    pub tau: f64,
    pub abs_tol: f64,
    /// Epochs per probe; `None` means a quarter of the full budget.
    pub probe_epochs: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { grid: default_grid(), tau: DEFAULT_TAU, abs_tol: DEFAULT_ABS_TOL, probe_epochs: None }
    }
}

impl SearchConfig {
    pub fn threshold(&self, bound: f64) -> f64 {
        bound * (1.0 + self.tau) + self.abs_tol
    }
}

/// Every probe in grid order, the bound, and the index of the selected
/// weight (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    pub probes: Vec<GammaProbe>,
    pub bound: f64,
    pub threshold: f64,
    pub selected: Option<usize>,
}

impl SearchReport {
    pub fn selected_gamma(&self) -> Option<f64> {
        self.selected.map(|i| self.probes[i].gamma)
    }
}

/// Geometric grid from 1e6 down to 1 with ratio `10^0.3 ≈ 2`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e6, 1.0, 21)
}

/// `points` log-spaced values from `hi` down to `lo`, both included.
pub fn log_grid(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return alloc::vec![hi];
    }
    let (a, b) = (libm::log10(hi), libm::log10(lo));
    (0..points)
        .map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Epoch budget for a probe: `probe_epochs`, or a quarter of `cfg.epochs`.
pub fn probe_budget(cfg: &TrainConfig, search: &SearchConfig) -> usize {
    search.probe_epochs.unwrap_or(cfg.epochs / 4).max(1)
}

/// Trains with `gamma` for `epochs` epochs and records the loss minima.
pub fn probe(data: &DataMatrix, cfg: &TrainConfig, gamma: f64, epochs: usize) -> Result<GammaProbe> {
    let cfg = TrainConfig { gamma, epochs, track_metrics: false, ..cfg.clone() };
    let (_, log) = train(data, &cfg)?;
    Ok(GammaProbe {
        gamma,
        optimal_lap: log.min_lap().unwrap_or(f64::NAN),
        optimal_orth: log.min_orth().unwrap_or(f64::NAN),
    })
}

/// Probes every grid point and picks the smallest `γ` whose optimal
/// `L_orth` stays within the threshold of the bound set by the first.
pub fn search(data: &DataMatrix, cfg: &TrainConfig, search: &SearchConfig) -> Result<SearchReport> {
    let grid = &search.grid;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty gamma grid".into()));
    }
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::InvalidConfig(format!("gamma grid must be positive: {grid:?}")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig("gamma grid must be strictly descending".into()));
    }
    if !(search.tau >= 0.0 && search.abs_tol >= 0.0) {
        return Err(Error::InvalidConfig("tolerances must be nonnegative".into()));
    }
    let epochs = probe_budget(cfg, search);
    let probes = grid.iter().map(|&g| probe(data, cfg, g, epochs)).collect::<Result<Vec<_>>>()?;
    Ok(select(probes, search))
}

/// Selection step on completed probes.
pub fn select(probes: Vec<GammaProbe>, search: &SearchConfig) -> SearchReport {
    let bound = probes.first().map_or(f64::NAN, |p| p.optimal_orth);
    let threshold = search.threshold(bound);
    let selected = probes.iter().rposition(|p| p.optimal_orth <= threshold);
    SearchReport { probes, bound, threshold, selected }
}

/// [`search`], turning an empty selection into [`Error::SearchFailed`].
pub fn search_gamma(data: &DataMatrix, cfg: &TrainConfig, search_cfg: &SearchConfig) -> Result<(f64, SearchReport)> {
    let report = search(data, cfg, search_cfg)?;
    match report.selected_gamma() {
        Some(g) => Ok((g, report)),
        None => Err(Error::SearchFailed(Box::new(report))),
    }
}
