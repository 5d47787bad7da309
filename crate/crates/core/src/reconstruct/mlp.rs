//! Small fully connected network with hand-written backpropagation.
//!
//! Batches are stored column-wise: an `in × B` matrix holds B samples.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: &mut DMatrix<f64>) {
        match self {
            Activation::Tanh => z.apply(|v| *v = v.tanh()),
            Activation::Relu => z.apply(|v| *v = v.max(0.0)),
        }
    }

    /// Multiplies `delta` by the derivative, given the activated output.
    fn backprop(self, delta: &mut DMatrix<f64>, activated: &DMatrix<f64>) {
        match self {
            Activation::Tanh => delta.zip_apply(activated, |d, a| *d *= 1.0 - a * a),
            Activation::Relu => delta.zip_apply(activated, |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            }),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean squared error over all outputs.
    Mse,
    /// Mean absolute error over all outputs.
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescent { learning_rate: f64 },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam(learning_rate: f64) -> Self {
        Optimizer::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            Optimizer::GradientDescent { learning_rate } | Optimizer::Adam { learning_rate, .. } => {
                learning_rate
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

struct Gradients {
    weights: Vec<DMatrix<f64>>,
    bias: Vec<DVector<f64>>,
}

impl Mlp {
    /// Glorot-uniform (tanh) or He-uniform (ReLU) weights, zero biases.
    pub fn new(sizes: &[usize], activation: Activation, seed: u64) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = match activation {
                    Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                    Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                };
                Dense {
                    weights: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound)),
                    bias: DVector::zeros(fan_out),
                }
            })
            .collect();
        Self { layers, activation }
    }

    /// Zeroes the output layer so the untrained network is the constant
    /// zero function.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().unwrap();
        last.weights.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.forward(&a);
            if i < last {
                self.activation.apply(&mut a);
            }
        }
        a
    }

    /// Loss and parameter gradients for one batch.
    fn gradients(&self, x: &DMatrix<f64>, target: &DMatrix<f64>, loss: Loss) -> (f64, Gradients) {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(acts.last().unwrap());
            if i < last {
                self.activation.apply(&mut z);
            }
            acts.push(z);
        }
        let out = acts.last().unwrap();
        let count = (out.nrows() * out.ncols()) as f64;
        let mut delta = out - target;
        let value = match loss {
            Loss::Mse => {
                let v = delta.norm_squared() / count;
                delta *= 2.0 / count;
                v
            }
            Loss::Mae => {
                let v = delta.iter().map(|d| d.abs()).sum::<f64>() / count;
                delta.apply(|d| *d = if *d > 0.0 { 1.0 } else if *d < 0.0 { -1.0 } else { 0.0 } / count);
                v
            }
        };

        let mut gw = vec![DMatrix::zeros(0, 0); self.layers.len()];
        let mut gb = vec![DVector::zeros(0); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            gw[i] = &delta * acts[i].transpose();
            gb[i] = delta.column_sum();
            if i > 0 {
                let mut back = self.layers[i].weights.tr_mul(&delta);
                self.activation.backprop(&mut back, &acts[i]);
                delta = back;
            }
        }
        (value, Gradients { weights: gw, bias: gb })
    }

    pub fn loss(&self, x: &DMatrix<f64>, target: &DMatrix<f64>, loss: Loss) -> f64 {
        let out = self.forward(x);
        let count = (out.nrows() * out.ncols()) as f64;
        let diff = out - target;
        match loss {
            Loss::Mse => diff.norm_squared() / count,
            Loss::Mae => diff.iter().map(|d| d.abs()).sum::<f64>() / count,
        }
    }
}

/// Optimizer state bound to one network.
pub struct Trainer {
    optimizer: Optimizer,
    loss: Loss,
    step: u64,
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
}

impl Trainer {
    pub fn new(net: &Mlp, optimizer: Optimizer, loss: Loss) -> Self {
        let zeros_w = || {
            net.layers
                .iter()
                .map(|l| DMatrix::zeros(l.outputs(), l.inputs()))
                .collect::<Vec<_>>()
        };
        let zeros_b = || net.layers.iter().map(|l| DVector::zeros(l.outputs())).collect::<Vec<_>>();
        let adam = matches!(optimizer, Optimizer::Adam { .. });
        Self {
            optimizer,
            loss,
            step: 0,
            m_w: if adam { zeros_w() } else { Vec::new() },
            v_w: if adam { zeros_w() } else { Vec::new() },
            m_b: if adam { zeros_b() } else { Vec::new() },
            v_b: if adam { zeros_b() } else { Vec::new() },
        }
    }

    /// One update on a batch; returns the batch loss before the update.
    pub fn step(&mut self, net: &mut Mlp, x: &DMatrix<f64>, target: &DMatrix<f64>, lr_scale: f64) -> f64 {
        let (value, grads) = net.gradients(x, target, self.loss);
        self.step += 1;
        match self.optimizer {
            Optimizer::GradientDescent { learning_rate } => {
                let lr = learning_rate * lr_scale;
                for (layer, (gw, gb)) in net.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
                    layer.weights -= gw * lr;
                    layer.bias -= gb * lr;
                }
            }
            Optimizer::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step as i32;
                let lr = learning_rate * lr_scale * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
                for (i, layer) in net.layers.iter_mut().enumerate() {
                    adam_update(&mut layer.weights, &grads.weights[i], &mut self.m_w[i], &mut self.v_w[i], lr, beta1, beta2, epsilon);
                    adam_update(&mut layer.bias, &grads.bias[i], &mut self.m_b[i], &mut self.v_b[i], lr, beta1, beta2, epsilon);
                }
            }
        }
        value
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update<R: nalgebra::Dim, C: nalgebra::Dim, S>(
    param: &mut nalgebra::Matrix<f64, R, C, S>,
    grad: &nalgebra::Matrix<f64, R, C, S>,
    m: &mut nalgebra::Matrix<f64, R, C, S>,
    v: &mut nalgebra::Matrix<f64, R, C, S>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) where
    S: nalgebra::StorageMut<f64, R, C>,
{
    for (((p, g), m), v) in param.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr * *m / (v.sqrt() + epsilon);
    }
}

/// True when, after `warmup` epochs, the loss never exceeds its value 50
/// epochs earlier.
pub fn non_increasing_over_windows(curve: &[f64], warmup: usize, window: usize) -> bool {
    (warmup + window..curve.len()).all(|e| curve[e] <= curve[e - window])
}
