//! Dense layers and multilayer perceptrons on column-major batches
//! (features x samples).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Shape and regularization of one perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Inverted-dropout rate applied to each layer's output during training.
    pub dropout_rates: Vec<f64>,
}

impl MlpSpec {
    /// ReLU hidden layers followed by one output layer of width `out`
    /// with activation `last`.
    pub fn stack(input_width: usize, hidden: &[usize], dropout: f64, out: usize, last: Activation) -> Self {
        let mut layer_widths = hidden.to_vec();
        layer_widths.push(out);
        let mut activations = vec![Activation::Relu; hidden.len()];
        activations.push(last);
        let mut dropout_rates = vec![dropout; hidden.len()];
        dropout_rates.push(0.0);
        MlpSpec { input_width, layer_widths, activations, dropout_rates }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layer_widths.len();
        if n == 0 || self.activations.len() != n || self.dropout_rates.len() != n {
            return Err(Error::Config("layer widths, activations and dropout rates must align".into()));
        }
        if self.input_width == 0 || self.layer_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::Config("dropout rates must lie in [0, 1)".into()));
        }
        if self.dropout_rates[n - 1] != 0.0 {
            return Err(Error::Config("the output layer takes no dropout".into()));
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// out x in.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    /// Post-activation outputs before dropout.
    post: Vec<DMatrix<f64>>,
    masks: Vec<Option<DMatrix<f64>>>,
}

impl Mlp {
    /// He-normal weights for ReLU layers, Glorot-normal otherwise; zero biases.
    pub fn new(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let mut fan_in = spec.input_width;
        let mut layers = Vec::with_capacity(spec.layer_widths.len());
        for ((&width, &activation), &dropout) in spec.layer_widths.iter().zip(&spec.activations).zip(&spec.dropout_rates) {
            let sd = match activation {
                Activation::Relu => (2.0 / fan_in as f64).sqrt(),
                _ => (2.0 / (fan_in + width) as f64).sqrt(),
            };
            let normal = Normal::new(0.0, sd).expect("positive sd");
            let weight = DMatrix::from_fn(width, fan_in, |_, _| normal.sample(rng));
            layers.push(Dense { weight, bias: DVector::zeros(width), activation, dropout });
            fan_in = width;
        }
        Ok(Mlp { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").weight.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Inference pass (no dropout).
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            a = affine(layer, &a).map(|z| layer.activation.apply(z));
        }
        Ok(a)
    }

    /// Training pass; dropout masks are drawn from `rng` when given.
    pub fn forward_cached(&self, x: &DMatrix<f64>, rng: Option<&mut ChaCha8Rng>) -> Result<(DMatrix<f64>, MlpCache)> {
        self.check_input(x)?;
        let mut rng = rng;
        let mut cache = MlpCache { inputs: vec![], pre: vec![], post: vec![], masks: vec![] };
        let mut a = x.clone();
        for layer in &self.layers {
            let z = affine(layer, &a);
            let post = z.map(|v| layer.activation.apply(v));
            let mask = match rng.as_deref_mut() {
                Some(r) if layer.dropout > 0.0 => {
                    let keep = 1.0 - layer.dropout;
                    Some(DMatrix::from_fn(post.nrows(), post.ncols(), |_, _| {
                        if r.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    }))
                }
                _ => None,
            };
            let out = match &mask {
                Some(m) => post.component_mul(m),
                None => post.clone(),
            };
            cache.inputs.push(std::mem::replace(&mut a, out));
            cache.pre.push(z);
            cache.post.push(post);
            cache.masks.push(mask);
        }
        Ok((a, cache))
    }

    /// Backpropagates `grad_out`. When `pre_activation` is true the gradient
    /// is taken to be with respect to the last layer's pre-activation.
    /// Returns per-layer gradients and the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_out: DMatrix<f64>,
        pre_activation: bool,
    ) -> (Vec<DenseGrad>, DMatrix<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let last = l + 1 == self.layers.len();
            let dz = if last && pre_activation {
                g
            } else {
                if let Some(m) = &cache.masks[l] {
                    g.component_mul_assign(m);
                }
                let pre = &cache.pre[l];
                let post = &cache.post[l];
                DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
                    g[(i, j)] * layer.activation.derivative(pre[(i, j)], post[(i, j)])
                })
            };
            let weight = &dz * cache.inputs[l].transpose();
            let bias = dz.column_sum();
            g = layer.weight.transpose() * &dz;
            grads.push(DenseGrad { weight, bias });
        }
        grads.reverse();
        (grads, g)
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.input_width() {
            return Err(Error::Shape(format!(
                "network expects {} input features, got {}",
                self.input_width(),
                x.nrows()
            )));
        }
        Ok(())
    }
}

fn affine(layer: &Dense, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = &layer.weight * a;
    for mut col in z.column_iter_mut() {
        col += &layer.bias;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_network_outputs_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&MlpSpec::stack(3, &[4], 0.0, 1, Activation::Sigmoid), &mut rng).unwrap();
        for l in &mut net.layers {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
        let out = net.forward(&DMatrix::from_element(3, 2, 7.0)).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn single_unit_identity() {
        let net = Mlp {
            layers: vec![Dense {
                weight: DMatrix::from_element(1, 1, 1.0),
                bias: DVector::zeros(1),
                activation: Activation::Sigmoid,
                dropout: 0.0,
            }],
        };
        assert_eq!(net.forward(&DMatrix::zeros(1, 1)).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn matches_straight_line_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&MlpSpec::stack(3, &[5], 0.0, 1, Activation::Sigmoid), &mut rng).unwrap();
        let x = [0.3, -1.2, 2.0];
        let (w1, b1) = (&net.layers[0].weight, &net.layers[0].bias);
        let (w2, b2) = (&net.layers[1].weight, &net.layers[1].bias);
        let mut hidden = [0.0; 5];
        for (i, h) in hidden.iter_mut().enumerate() {
            let mut s = b1[i];
            for (j, xj) in x.iter().enumerate() {
                s += w1[(i, j)] * xj;
            }
            *h = if s > 0.0 { s } else { 0.0 };
        }
        let mut s = b2[0];
        for (j, h) in hidden.iter().enumerate() {
            s += w2[(0, j)] * h;
        }
        let expected = 1.0 / (1.0 + (-s).exp());
        let got = net.forward(&DMatrix::from_column_slice(3, 1, &x)).unwrap()[(0, 0)];
        assert!((got - expected).abs() < 1e-10);
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::stack(3, &[4], 1.0, 1, Activation::Sigmoid).validate().is_err());
        let mut s = MlpSpec::stack(3, &[4], 0.2, 1, Activation::Sigmoid);
        s.dropout_rates[1] = 0.1;
        assert!(s.validate().is_err());
        assert!(MlpSpec::stack(0, &[4], 0.2, 1, Activation::Sigmoid).validate().is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.3) + sigmoid(-0.3) - 1.0).abs() < 1e-15);
    }
}
