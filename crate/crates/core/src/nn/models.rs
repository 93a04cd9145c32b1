//! The three receiver networks and a common training interface.

use super::layers::{glorot, sigmoid, Activation, DenseLayer};
use crate::error::{config_err, Error, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

/// Anything the mini-batch trainer can fit with an MSE loss.
pub trait Trainable: Clone + Send + Sync {
    fn name(&self) -> &'static str;
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    /// Batched forward pass, one sample per row.
    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64>;
    /// Mean squared error over every output entry of the batch, and its
    /// gradient in `params` order.
    fn loss_grad(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Vec<Vec<f64>>);
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
}

pub fn mse(pred: &Array2<f64>, y: ArrayView2<f64>) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter().zip(y.iter()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

fn check_input(what: &str, want: usize, x: ArrayView2<f64>) -> Result<()> {
    if x.ncols() != want {
        return Err(Error::Shape { what: what.into(), expected: vec![want], found: vec![x.ncols()] });
    }
    Ok(())
}

/// One convolution kernel followed by ReLU and max pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    /// `3 x 3`, applied as a cross-correlation with zero padding.
    pub kernel: Array2<f64>,
    pub bias: f64,
    pub pool_window: (usize, usize),
    pub pool_stride: (usize, usize),
}

/// LoS sensor: conv 3x3 (same padding) + ReLU, max pool, dense + sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct SenNet {
    pub conv: ConvSpec,
    pub dense: DenseLayer,
    pub rows: usize,
    pub cols: usize,
}

/// Default pool geometry; a `(3, 6)` window on `La x 2N` gives `floor(La/3) x floor(N/3)`.
pub const SENNET_POOL: (usize, usize) = (3, 6);

fn pooled_len(size: usize, window: usize, stride: usize) -> usize {
    if size < window {
        0
    } else {
        (size - window) / stride + 1
    }
}

struct SenCache {
    /// Flattened pooled activations.
    pooled: Array1<f64>,
    /// `(row, col, pre_relu)` of the arg-max of each pool cell.
    argmax: Vec<(usize, usize, f64)>,
}

impl SenNet {
    /// Zero-initialized sensor for an `la x 2n` input.
    pub fn zeros(la: usize, n: usize) -> Result<Self> {
        let (rows, cols) = (la, 2 * n);
        let (pr, pc) = (
            pooled_len(rows, SENNET_POOL.0, SENNET_POOL.0),
            pooled_len(cols, SENNET_POOL.1, SENNET_POOL.1),
        );
        if pr * pc == 0 {
            return Err(config_err(format!("sensor input {rows}x{cols} is smaller than the pool window")));
        }
        Ok(Self {
            conv: ConvSpec {
                kernel: Array2::zeros((3, 3)),
                bias: 0.0,
                pool_window: SENNET_POOL,
                pool_stride: SENNET_POOL,
            },
            dense: DenseLayer::zeros(pr * pc, 1, Activation::Sigmoid),
            rows,
            cols,
        })
    }

    pub fn init<R: Rng + ?Sized>(la: usize, n: usize, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(la, n)?;
        net.conv.kernel.mapv_inplace(|_| glorot(rng, 9, 9));
        let fan_in = net.dense.fan_in();
        net.dense = DenseLayer::init(fan_in, 1, Activation::Sigmoid, rng);
        Ok(net)
    }

    pub fn pooled_shape(&self) -> (usize, usize) {
        let (wr, wc) = self.conv.pool_window;
        let (sr, sc) = self.conv.pool_stride;
        (pooled_len(self.rows, wr, sr), pooled_len(self.cols, wc, sc))
    }

    fn conv_at(&self, x: &[f64], r: usize, c: usize) -> f64 {
        let mut acc = self.conv.bias;
        for i in 0..3 {
            let rr = r as isize + i as isize - 1;
            if rr < 0 || rr >= self.rows as isize {
                continue;
            }
            let row = &x[rr as usize * self.cols..(rr as usize + 1) * self.cols];
            for j in 0..3 {
                let cc = c as isize + j as isize - 1;
                if cc < 0 || cc >= self.cols as isize {
                    continue;
                }
                acc += self.conv.kernel[[i, j]] * row[cc as usize];
            }
        }
        acc
    }

    /// Full convolution feature map after ReLU (`rows x cols`).
    pub fn feature_map(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let flat: Vec<f64> = x.iter().copied().collect();
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| self.conv_at(&flat, r, c).max(0.0))
    }

    fn pool(&self, x: &[f64]) -> SenCache {
        let (pr, pc) = self.pooled_shape();
        let (wr, wc) = self.conv.pool_window;
        let (sr, sc) = self.conv.pool_stride;
        let mut pooled = Array1::zeros(pr * pc);
        let mut argmax = Vec::with_capacity(pr * pc);
        for a in 0..pr {
            for b in 0..pc {
                let mut best = (a * sr, b * sc, f64::NEG_INFINITY);
                for r in a * sr..a * sr + wr {
                    for c in b * sc..b * sc + wc {
                        let v = self.conv_at(x, r, c);
                        if v > best.2 {
                            best = (r, c, v);
                        }
                    }
                }
                pooled[a * pc + b] = best.2.max(0.0);
                argmax.push(best);
            }
        }
        SenCache { pooled, argmax }
    }

    fn sample<'a>(&self, x: &ArrayView2<'a, f64>, i: usize) -> std::borrow::Cow<'a, [f64]> {
        let row = x.clone().index_axis_move(Axis(0), i);
        match row.to_slice() {
            Some(s) => std::borrow::Cow::Borrowed(s),
            None => std::borrow::Cow::Owned(row.to_vec()),
        }
    }

    /// Sensor output for one `rows x cols` input.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<f64> {
        if x.dim() != (self.rows, self.cols) {
            return Err(Error::Shape {
                what: "sensor input".into(),
                expected: vec![self.rows, self.cols],
                found: vec![x.nrows(), x.ncols()],
            });
        }
        let flat: Vec<f64> = x.iter().copied().collect();
        let p = self.pool(&flat).pooled;
        Ok(sigmoid(self.dense.w.row(0).dot(&p) + self.dense.b[0]))
    }

    /// Batched output; each row is a flattened `rows x cols` input.
    pub fn forward_flat(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_input("sensor input", self.rows * self.cols, x)?;
        Ok(self.predict(x).column(0).to_owned())
    }
}

impl Trainable for SenNet {
    fn name(&self) -> &'static str {
        "sennet"
    }

    fn input_len(&self) -> usize {
        self.rows * self.cols
    }

    fn output_len(&self) -> usize {
        1
    }

    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let w = self.dense.w.row(0);
        let b = self.dense.b[0];
        Array2::from_shape_fn((x.nrows(), 1), |(i, _)| {
            let s = self.sample(&x, i);
            sigmoid(w.dot(&self.pool(&s).pooled) + b)
        })
    }

    fn loss_grad(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Vec<Vec<f64>>) {
        let batch = x.nrows();
        let scale = 2.0 / batch as f64;
        let mut gk = Array2::<f64>::zeros((3, 3));
        let mut gbias = 0.0;
        let mut gw = Array1::<f64>::zeros(self.dense.fan_in());
        let mut gb = 0.0;
        let mut loss = 0.0;
        let w = self.dense.w.row(0);
        for i in 0..batch {
            let s = self.sample(&x, i);
            let cache = self.pool(&s);
            let o = sigmoid(w.dot(&cache.pooled) + self.dense.b[0]);
            let err = o - y[[i, 0]];
            loss += err * err;
            let d_pre = scale * err * o * (1.0 - o);
            gb += d_pre;
            gw.scaled_add(d_pre, &cache.pooled);
            for (k, &(r, c, v)) in cache.argmax.iter().enumerate() {
                if v <= 0.0 {
                    continue;
                }
                let d = d_pre * w[k];
                gbias += d;
                for ki in 0..3 {
                    let rr = r as isize + ki as isize - 1;
                    if rr < 0 || rr >= self.rows as isize {
                        continue;
                    }
                    for kj in 0..3 {
                        let cc = c as isize + kj as isize - 1;
                        if cc < 0 || cc >= self.cols as isize {
                            continue;
                        }
                        gk[[ki, kj]] += d * s[rr as usize * self.cols + cc as usize];
                    }
                }
            }
        }
        (
            loss / batch as f64,
            vec![gk.into_raw_vec_and_offset().0, vec![gbias], gw.to_vec(), vec![gb]],
        )
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.conv.kernel.as_slice().expect("standard layout"),
            std::slice::from_ref(&self.conv.bias),
            self.dense.w.as_slice().expect("standard layout"),
            self.dense.b.as_slice().expect("standard layout"),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.conv.kernel.as_slice_mut().expect("standard layout"),
            std::slice::from_mut(&mut self.conv.bias),
            self.dense.w.as_slice_mut().expect("standard layout"),
            self.dense.b.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// `hard_decision(o) = 1` iff `o > 0.5`.
pub fn hard_decision(o: f64) -> bool {
    o > 0.5
}

/// Two-layer perceptron: hidden layer with a nonlinearity, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub name: &'static str,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

impl Mlp {
    /// Refinement network: `2N -> 4N` (leaky ReLU) `-> 2N`.
    pub fn aidnet_zeros(n: usize) -> Self {
        Self {
            name: "aidnet",
            hidden: DenseLayer::zeros(2 * n, 4 * n, Activation::LeakyRelu),
            output: DenseLayer::zeros(4 * n, 2 * n, Activation::Linear),
        }
    }

    pub fn aidnet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            name: "aidnet",
            hidden: DenseLayer::init(2 * n, 4 * n, Activation::LeakyRelu, rng),
            output: DenseLayer::init(4 * n, 2 * n, Activation::Linear, rng),
        }
    }

    /// Reconstruction network: `2N -> 4 La N` (tanh) `-> 2 La N`.
    pub fn recnet_zeros(n: usize, la: usize) -> Self {
        Self {
            name: "recnet",
            hidden: DenseLayer::zeros(2 * n, 4 * la * n, Activation::Tanh),
            output: DenseLayer::zeros(4 * la * n, 2 * la * n, Activation::Linear),
        }
    }

    pub fn recnet<R: Rng + ?Sized>(n: usize, la: usize, rng: &mut R) -> Self {
        Self {
            name: "recnet",
            hidden: DenseLayer::init(2 * n, 4 * la * n, Activation::Tanh, rng),
            output: DenseLayer::init(4 * la * n, 2 * la * n, Activation::Linear, rng),
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Format(e.to_string()))?;
        check_input(self.name, self.input_len(), v)?;
        Ok(self.predict(v).into_raw_vec_and_offset().0)
    }

    /// Hidden-layer activations for a batch.
    pub fn hidden_activations(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.hidden.output(x)
    }
}

impl Trainable for Mlp {
    fn name(&self) -> &'static str {
        self.name
    }

    fn input_len(&self) -> usize {
        self.hidden.fan_in()
    }

    fn output_len(&self) -> usize {
        self.output.fan_out()
    }

    fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let h = self.hidden.output(x);
        self.output.output(h.view())
    }

    fn loss_grad(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Vec<Vec<f64>>) {
        let (pre1, h) = self.hidden.forward(x);
        let (pre2, out) = self.output.forward(h.view());
        let loss = mse(&out, y);
        let d_out = (&out - &y) * (2.0 / out.len() as f64);
        let (g2, dh) = self.output.backward(h.view(), &pre2, &out, &d_out);
        let (g1, _) = self.hidden.backward(x, &pre1, &h, &dh);
        (
            loss,
            vec![
                g1.w.into_raw_vec_and_offset().0,
                g1.b.to_vec(),
                g2.w.into_raw_vec_and_offset().0,
                g2.b.to_vec(),
            ],
        )
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.hidden.w.as_slice().expect("standard layout"),
            self.hidden.b.as_slice().expect("standard layout"),
            self.output.w.as_slice().expect("standard layout"),
            self.output.b.as_slice().expect("standard layout"),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.hidden.w.as_slice_mut().expect("standard layout"),
            self.hidden.b.as_slice_mut().expect("standard layout"),
            self.output.w.as_slice_mut().expect("standard layout"),
            self.output.b.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Predicts in chunks to bound memory on large sets.
pub fn predict_chunked<M: Trainable>(model: &M, x: ArrayView2<f64>, chunk: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), model.output_len()));
    for (i, part) in x.axis_chunks_iter(Axis(0), chunk.max(1)).enumerate() {
        let p = model.predict(part);
        let start = i * chunk.max(1);
        out.slice_mut(ndarray::s![start..start + p.nrows(), ..]).assign(&p);
    }
    out
}
