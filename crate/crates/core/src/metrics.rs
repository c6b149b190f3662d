//! External clustering metrics: accuracy under the best label matching,
//! normalized mutual information and the adjusted Rand index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Counts `n[p][t]` of points with predicted label `p` and true label `t`,
/// over the labels that actually occur (in ascending order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    pub pred_labels: Vec<usize>,
    pub true_labels: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} ground-truth labels",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::InvalidInput("cannot score an empty labelling".into()));
        }
        let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
            let mut map: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
            for (i, slot) in map.values_mut().enumerate() {
                *slot = i;
            }
            map
        };
        let prow = index(pred);
        let tcol = index(truth);
        let mut counts = vec![vec![0u64; tcol.len()]; prow.len()];
        for (p, t) in pred.iter().zip(truth) {
            counts[prow[p]][tcol[t]] += 1;
        }
        Ok(Self {
            pred_labels: prow.into_keys().collect(),
            true_labels: tcol.into_keys().collect(),
            counts,
            total: pred.len() as u64,
        })
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.true_labels.len()];
        for row in &self.counts {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums
    }

    /// Largest number of points that any one-to-one matching of predicted to
    /// true labels gets right.
    pub fn best_matching(&self) -> (u64, Vec<Option<usize>>) {
        let rows = self.counts.len();
        let cols = self.true_labels.len();
        let size = rows.max(cols);
        let max = self.counts.iter().flatten().copied().max().unwrap_or(0) as i64;
        let mut cost = vec![vec![max; size]; size];
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                cost[i][j] = max - c as i64;
            }
        }
        let assign = hungarian(&cost);
        let mut matched = 0;
        let mapping = (0..rows)
            .map(|i| {
                let j = assign[i];
                (j < cols).then(|| {
                    matched += self.counts[i][j];
                    j
                })
            })
            .collect();
        (matched, mapping)
    }
}

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column assigned to each row. O(n³) shortest augmenting path with
/// potentials.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    // 1-based; p[j] = row matched to column j, 0 = none
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Fraction of points correctly labelled under the best one-to-one matching
/// of predicted to true labels.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let (matched, _) = table.best_matching();
    Ok(matched as f64 / table.total as f64)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log(p)
        })
        .sum()
}

/// `I(P; T) / sqrt(H(P) H(T))` with natural logarithms; 0 when either
/// labelling is constant.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.total as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let hp = entropy(&rows, n);
    let ht = entropy(&cols, n);
    if hp * ht <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * libm::log(c * n / (rows[i] as f64 * cols[j] as f64));
            }
        }
    }
    Ok((mi / libm::sqrt(hp * ht)).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index. When both labellings are trivial in the same way
/// (expected and maximum index coincide) the index is 1.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let index: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: f64 = table.row_sums().into_iter().map(pairs).sum();
    let b: f64 = table.col_sums().into_iter().map(pairs).sum();
    let total = pairs(table.total);
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// All three metrics at once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn score(pred: &[usize], truth: &[usize]) -> Result<Scores> {
    Ok(Scores { acc: accuracy(pred, truth)?, nmi: nmi(pred, truth)?, ari: ari(pred, truth)? })
}
