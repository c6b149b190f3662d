//! Membership network `f(x) = softmax(g(x))`: an MLP with ReLU hidden
//! layers, plus exact reverse-mode gradients for any downstream loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_HIDDEN: [usize; 2] = [512, 512];

/// One affine layer. `weights` is `fan_in × fan_out`, so a batch maps as
/// `X · W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    fn apply(&self, input: &Matrix) -> Matrix {
        let mut z = input.matmul(&self.weights);
        for row in 0..z.rows() {
            for (v, b) in z.row_mut(row).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
    seed: u64,
}

/// Gradient of a scalar loss with respect to every parameter, laid out
/// like the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat views in the same order as [`MlpModel::params_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

/// Activations recorded by [`MlpModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    /// `activations[0]` is the input batch; `activations[l]` the ReLU
    /// output feeding layer `l`.
    activations: Vec<Matrix>,
    /// Pre-activations of each layer; the last entry holds the logits.
    pre_activations: Vec<Matrix>,
    output: Matrix,
}

impl ForwardTape {
    /// Row-stochastic membership matrix `Y` (`m × k`).
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn logits(&self) -> &Matrix {
        self.pre_activations.last().expect("at least one layer")
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least input and output dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("layer dims must be positive, got {layer_dims:?}")));
    }
    Ok(())
}

impl MlpModel {
    /// Gaussian weights with variance `2 / fan_in`, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = libm::sqrt(2.0 / fan_in as f64);
                let weights = Matrix::from_fn(fan_in, fan_out, |_, _| {
                    let z: f64 = rng.sample(StandardNormal);
                    std * z
                });
                Dense { weights, bias: vec![0.0; fan_out] }
            })
            .collect();
        Ok(Self { layer_dims: layer_dims.to_vec(), layers, seed })
    }

    /// `[d, hidden.., k]` convenience constructor.
    pub fn with_hidden(input_dim: usize, hidden: &[usize], clusters: usize, seed: u64) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(clusters);
        Self::init(&dims, seed)
    }

    /// Rebuilds a model from stored parameters, checking shapes.
    pub fn from_layers(layers: Vec<Dense>, seed: u64) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::InvalidConfig("model has no layers".into()))?;
        let mut dims = vec![first.fan_in()];
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in() != *dims.last().unwrap() {
                return Err(Error::InvalidInput(format!(
                    "layer {i} expects {} inputs but the previous layer produces {}",
                    l.fan_in(),
                    dims.last().unwrap()
                )));
            }
            if l.bias.len() != l.fan_out() {
                return Err(Error::InvalidInput(format!(
                    "layer {i} has {} biases for {} outputs",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
            if !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidData(format!("layer {i} has non-finite parameters")));
            }
            dims.push(l.fan_out());
        }
        check_dims(&dims)?;
        Ok(Self { layer_dims: dims, layers, seed })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn clusters(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Mutable flat views: weights then bias, layer by layer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { weights: Matrix::zeros(l.fan_in(), l.fan_out()), bias: vec![0.0; l.fan_out()] })
                .collect(),
        }
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTape> {
        if batch.cols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(batch.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(activations.last().unwrap());
            if !z.is_finite() {
                return Err(Error::Numerical(format!("non-finite activation in layer {i}")));
            }
            if i + 1 < self.layers.len() {
                activations.push(z.map(|v| if v > 0.0 { v } else { 0.0 }));
            }
            pre_activations.push(z);
        }
        let output = softmax_rows(pre_activations.last().unwrap());
        Ok(ForwardTape { activations, pre_activations, output })
    }

    /// Memberships only, without keeping the tape.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.into_output())
    }

    /// Reverse-mode gradient of a scalar loss given `∂loss/∂Y`.
    pub fn backward(&self, tape: &ForwardTape, d_output: &Matrix) -> Result<Gradients> {
        let y = tape.output();
        if d_output.shape() != y.shape() {
            return Err(Error::InvalidInput(format!(
                "output gradient is {:?}, memberships are {:?}",
                d_output.shape(),
                y.shape()
            )));
        }
        if tape.pre_activations.len() != self.layers.len()
            || tape.pre_activations.iter().zip(&self.layers).any(|(z, l)| z.cols() != l.fan_out())
        {
            return Err(Error::InvalidInput("tape does not belong to this model".into()));
        }
        // softmax Jacobian: dz_j = y_j (dy_j − Σ_l dy_l y_l)
        let mut dz = Matrix::zeros(y.rows(), y.cols());
        for i in 0..y.rows() {
            let yr = y.row(i);
            let gr = d_output.row(i);
            let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
            for (o, (yv, gv)) in dz.row_mut(i).iter_mut().zip(yr.iter().zip(gr)) {
                *o = yv * (gv - inner);
            }
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = &tape.activations[l];
            let weights = input.t_matmul(&dz);
            let mut bias = vec![0.0; dz.cols()];
            for row in dz.row_iter() {
                for (b, v) in bias.iter_mut().zip(row) {
                    *b += v;
                }
            }
            if l > 0 {
                let mut dh = dz.matmul(&self.layers[l].weights.transpose());
                let z_prev = &tape.pre_activations[l - 1];
                for (g, &z) in dh.as_mut_slice().iter_mut().zip(z_prev.as_slice()) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
                dz = dh;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Row-wise argmax, ties to the lowest index.
pub fn argmax_rows(y: &Matrix) -> Vec<usize> {
    y.row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch() -> Matrix {
        Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25], [-0.3, 0.8]]).unwrap()
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a = MlpModel::init(&[2, 8, 3], 11).unwrap();
        assert_eq!(a, MlpModel::init(&[2, 8, 3], 11).unwrap());
        assert_ne!(a, MlpModel::init(&[2, 8, 3], 12).unwrap());
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        assert_eq!(a.parameter_count(), 2 * 8 + 8 + 8 * 3 + 3);
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(matches!(MlpModel::init(&[], 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(MlpModel::init(&[3], 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(MlpModel::init(&[3, 0, 2], 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_parameters_give_uniform_memberships() {
        let mut m = MlpModel::init(&[2, 4, 3], 0).unwrap();
        for p in m.params_mut() {
            p.fill(0.0);
        }
        let y = m.predict(&batch()).unwrap();
        for v in y.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_ignores_row_shifts() {
        let z = Matrix::from_rows(&[[1.0, 2.0, -0.5], [700.0, 699.0, 0.0]]).unwrap();
        let mut shifted = z.clone();
        for v in shifted.row_mut(0) {
            *v += 42.0;
        }
        let (a, b) = (softmax_rows(&z), softmax_rows(&shifted));
        for (x, y) in a.row(0).iter().zip(b.row(0)) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(a.is_finite());
    }

    #[test]
    fn rows_sum_to_one() {
        let m = MlpModel::init(&[2, 5, 2], 3).unwrap();
        let y = m.predict(&batch()).unwrap();
        for row in y.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let m = MlpModel::init(&[2, 5, 3], 3).unwrap();
        let tape = m.forward(&batch()).unwrap();
        let g = m.backward(&tape, &Matrix::zeros(3, 3)).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn row_constant_cotangent_is_annihilated() {
        let m = MlpModel::init(&[2, 5, 3], 3).unwrap();
        let tape = m.forward(&batch()).unwrap();
        let d = Matrix::from_fn(3, 3, |i, _| 1.0 + i as f64);
        let g = m.backward(&tape, &d).unwrap();
        assert!(g.max_abs() < 1e-14);
    }

    #[test]
    fn shape_errors() {
        let m = MlpModel::init(&[2, 5, 3], 3).unwrap();
        assert!(matches!(m.forward(&Matrix::zeros(2, 3)), Err(Error::InvalidInput(_))));
        let tape = m.forward(&batch()).unwrap();
        assert!(matches!(m.backward(&tape, &Matrix::zeros(3, 2)), Err(Error::InvalidInput(_))));
        let other = MlpModel::init(&[2, 4, 3], 3).unwrap();
        assert!(matches!(other.backward(&tape, &Matrix::zeros(3, 3)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn overflowing_activation_is_numerical_error() {
        let mut m = MlpModel::init(&[1, 1], 0).unwrap();
        m.params_mut()[0][0] = f64::MAX;
        let x = Matrix::from_rows(&[[10.0]]).unwrap();
        assert!(matches!(m.forward(&x), Err(Error::Numerical(_))));
    }

    #[test]
    fn argmax_ties_go_low() {
        let y = Matrix::from_rows(&[[0.5, 0.5], [0.2, 0.8]]).unwrap();
        assert_eq!(argmax_rows(&y), vec![0, 1]);
    }
}
