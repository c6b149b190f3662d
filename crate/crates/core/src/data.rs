//! Data matrices, synthetic generators and mini-batch sampling.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `n × d` points with optional ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    points: Matrix,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    pub fn new(points: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if !points.is_finite() {
            return Err(Error::InvalidData("points contain non-finite values".into()));
        }
        if let Some(l) = &labels {
            if l.len() != points.rows() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.rows()
                )));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn unlabeled(points: Matrix) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Rows picked by index, labels carried along.
    pub fn subset(&self, indices: &[usize]) -> DataMatrix {
        DataMatrix {
            points: self.points.select_rows(indices),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Seeded random split into `(train, rest)` with `train_size` rows in
    /// the first part. Returns the train indices alongside.
    pub fn split(&self, train_size: usize, seed: u64) -> Result<(DataMatrix, DataMatrix, Vec<usize>)> {
        if train_size == 0 || train_size > self.len() {
            return Err(Error::InvalidConfig(format!(
                "train size {train_size} must be in 1..={}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (head, tail) = order.split_at(train_size);
        let mut head = head.to_vec();
        let mut tail = tail.to_vec();
        head.sort_unstable();
        tail.sort_unstable();
        Ok((self.subset(&head), self.subset(&tail), head))
    }
}

/// Default ring radii for [`gen_double_rings`], sized for a heat kernel
/// with `σ = 3`.
pub const DEFAULT_RING_RADII: (f64, f64) = (2.0, 12.0);
/// Default arc radius for [`gen_double_c`].
pub const DEFAULT_C_SCALE: f64 = 6.0;
pub const DEFAULT_NOISE: f64 = 0.3;

/// Offset of the second C's center, in units of `scale`.
const C_OFFSET: (f64, f64) = (1.7, -0.75);

fn check_generator(n: usize, noise: f64) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("n must be even and at least 2, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise must be finite and nonnegative, got {noise}")));
    }
    Ok(())
}

/// Shuffles rows so that any prefix is a random sample of both classes.
fn finish(rows: Vec<[f64; 2]>, labels: Vec<usize>, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(rng);
    let mut data = Vec::with_capacity(rows.len() * 2);
    let mut out_labels = Vec::with_capacity(rows.len());
    for &i in &order {
        data.extend_from_slice(&rows[i]);
        out_labels.push(labels[i]);
    }
    DataMatrix::new(Matrix::from_vec(rows.len(), 2, data)?, Some(out_labels))
}

/// Two concentric circles centred at the origin, `n/2` points each at a
/// uniform angle, plus isotropic Gaussian noise. Label 0 is the inner ring.
/// Rows come out shuffled.
pub fn gen_double_rings(n: usize, radii: (f64, f64), noise: f64, seed: u64) -> Result<DataMatrix> {
    check_generator(n, noise)?;
    let (inner, outer) = radii;
    if !(inner > 0.0 && outer > 0.0 && inner.is_finite() && outer.is_finite()) || inner >= outer {
        return Err(Error::InvalidConfig(format!(
            "radii must be positive with inner < outer, got ({inner}, {outer})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(i >= n / 2);
        let r = if label == 0 { inner } else { outer };
        let t = rng.random::<f64>() * 2.0 * PI;
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        rows.push([r * libm::cos(t) + noise * nx, r * libm::sin(t) + noise * ny]);
        labels.push(label);
    }
    finish(rows, labels, &mut rng)
}

/// Two interlocking C-shaped arcs of radius `scale`. Each spans `3π/2`
/// radians; the first opens towards +x, the second is the first rotated by
/// `π` and centred at `scale · (1.7, −0.75)`, so each arc's tip sits inside
/// the other's opening without the arcs touching.
pub fn gen_double_c(n: usize, scale: f64, noise: f64, seed: u64) -> Result<DataMatrix> {
    check_generator(n, noise)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let (cx, cy) = c_centers(scale)[1];
    for i in 0..n {
        let label = usize::from(i >= n / 2);
        let t = PI / 4.0 + rng.random::<f64>() * 1.5 * PI;
        let (mut x, mut y) = (scale * libm::cos(t), scale * libm::sin(t));
        if label == 1 {
            x = cx - x;
            y = cy - y;
        }
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        rows.push([x + noise * nx, y + noise * ny]);
        labels.push(label);
    }
    finish(rows, labels, &mut rng)
}

/// Arc centers of [`gen_double_c`] for a given scale.
pub fn c_centers(scale: f64) -> [(f64, f64); 2] {
    [(0.0, 0.0), (C_OFFSET.0 * scale, C_OFFSET.1 * scale)]
}

/// Seeded sampler yielding disjoint mini-batches that cover `0..n` once per
/// epoch. The order is reshuffled at the start of every epoch.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    seed: u64,
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || n == 0 {
            return Err(Error::InvalidConfig(format!(
                "batch size ({batch_size}) and n ({n}) must be positive"
            )));
        }
        let mut sampler = Self {
            seed,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            cursor: 0,
        };
        sampler.order.shuffle(&mut sampler.rng);
        Ok(sampler)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// `⌈n / m⌉`.
    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn epoch_order(&self) -> &[usize] {
        &self.order
    }

    /// Next slice of the current epoch's permutation, or `None` once the
    /// epoch is exhausted. The last batch may be short.
    pub fn next_indices(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(batch)
    }

    /// Indices and the gathered `m × d` batch.
    pub fn next_batch(&mut self, points: &Matrix) -> Option<(Vec<usize>, Matrix)> {
        let idx = self.next_indices()?;
        let batch = points.select_rows(&idx);
        Some((idx, batch))
    }

    /// Reshuffles and rewinds for the next epoch.
    pub fn new_epoch(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }
}
