use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Negative-side slope of the leaky ReLU.
pub const LRELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Sigmoid,
    Linear,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LRELU_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LRELU_SLOPE
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uniform draw on `+-sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> f64 {
    let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.random_range(-lim..lim)
}

/// Fully connected layer acting on row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

/// Gradients of one dense layer.
#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(fan_in: usize, fan_out: usize, activation: Activation) -> Self {
        Self { w: Array2::zeros((fan_out, fan_in)), b: Array1::zeros(fan_out), activation }
    }

    pub fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut R) -> Self {
        let w = Array2::from_shape_simple_fn((fan_out, fan_in), || glorot(rng, fan_in, fan_out));
        Self { w, b: Array1::zeros(fan_out), activation }
    }

    pub fn fan_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.nrows()
    }

    /// Returns `(pre_activation, output)` for a `batch x in` input.
    pub fn forward(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut pre = x.dot(&self.w.t());
        pre += &self.b;
        let act = self.activation;
        let out = pre.mapv(|v| act.apply(v));
        (pre, out)
    }

    pub fn output(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).1
    }

    /// Back-propagates `d_out` (gradient w.r.t. the layer output); returns the
    /// parameter gradients and the gradient w.r.t. the input.
    pub fn backward(
        &self,
        x: ArrayView2<f64>,
        pre: &Array2<f64>,
        out: &Array2<f64>,
        d_out: &Array2<f64>,
    ) -> (DenseGrad, Array2<f64>) {
        let act = self.activation;
        let mut d_pre = d_out.clone();
        ndarray::Zip::from(&mut d_pre).and(pre).and(out).for_each(|d, &p, &o| *d *= act.derivative(p, o));
        let gw = d_pre.t().dot(&x);
        let gb = d_pre.sum_axis(Axis(0));
        let dx = d_pre.dot(&self.w);
        (DenseGrad { w: gw, b: gb }, dx)
    }
}
