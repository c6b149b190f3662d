//! Adam with decoupled weight decay and a cosine-annealed learning rate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// `η_t = ½ · lr0 · (1 + cos(π t / T))` for `t` in `0..T`, annealing to 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineSchedule {
    pub lr0: f64,
    pub total_steps: usize,
}

impl CosineSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if self.total_steps == 0 {
            return self.lr0;
        }
        let frac = step.min(self.total_steps) as f64 / self.total_steps as f64;
        0.5 * self.lr0 * (1.0 + libm::cos(PI * frac))
    }
}

/// First and second moment accumulators, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new<T: AsRef<[f64]>>(tensors: &[T]) -> Self {
        let first: Vec<Vec<f64>> = tensors.iter().map(|t| vec![0.0; t.as_ref().len()]).collect();
        Self { second: first.clone(), first, step: 0 }
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Weight decay is decoupled: parameters are
/// first shrunk by `1 − lr·weight_decay`, then the Adam delta is applied.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::InvalidInput(alloc::format!(
            "{} parameter tensors, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first[i].len() {
            return Err(Error::InvalidInput(alloc::format!("tensor {i} shape mismatch")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(BETA1, f64::from(t));
    let c2 = 1.0 - libm::pow(BETA2, f64::from(t));
    let shrink = 1.0 - lr * weight_decay;
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.first).zip(&mut state.second) {
        for (((pv, &gv), mv), vv) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mv = BETA1 * *mv + (1.0 - BETA1) * gv;
            *vv = BETA2 * *vv + (1.0 - BETA2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv *= shrink;
            *pv -= lr * m_hat / (libm::sqrt(v_hat) + EPSILON);
        }
    }
    Ok(())
}
