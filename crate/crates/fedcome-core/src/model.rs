//! Multilayer perceptron over a flat parameter vector.
//!
//! The network is a plain MLP: affine layers with an elementwise activation
//! on every hidden layer and linear logits at the output, trained with
//! softmax cross-entropy. Clients exchange parameters and gradients as flat
//! vectors, so the layout is part of the contract:
//!
//! ```text
//! layer 0 weights (row-major, fan_out x fan_in), layer 0 biases,
//! layer 1 weights, layer 1 biases, ...
//! ```
//!
//! Loss and gradient are means over the batch in sample-index order, which
//! keeps both bit-deterministic. The softmax subtracts the max logit before
//! exponentiating, the ReLU subgradient at exactly zero is taken as zero,
//! and accuracy breaks argmax ties toward the lowest class index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::rng::stream_from_parts;

/// Elementwise activation used on hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z` (ReLU subgradient at 0 is 0).
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Architecture of the MLP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        num_classes: usize,
        activation: Activation,
    ) -> Result<Self> {
        let spec = MlpSpec { input_dim, hidden_dims, num_classes, activation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("model.input_dim: must be >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("model.num_classes: must be >= 2"));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::config("model.hidden_dims: entries must be >= 1"));
        }
        Ok(())
    }

    /// Layer sizes from input to logits: `[input, hidden..., num_classes]`.
    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.num_classes);
        d
    }

    /// Total number of parameters `d = Σ_l (fan_in·fan_out + fan_out)`.
    pub fn param_count(&self) -> usize {
        let dims = self.dims();
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Flat model parameters. The layout is fixed by [`MlpSpec`]; see the module
/// docs for the ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vector,
}

impl ParamVector {
    pub fn new(values: Vector) -> Self {
        ParamVector { values }
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector { values: Vector::zeros(len) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &Vector {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Vector {
        &mut self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values.as_mut_slice()
    }

    /// Componentwise difference `self - other`, used for pseudo-gradients.
    pub fn sub(&self, other: &ParamVector) -> Result<Vector> {
        if self.len() != other.len() {
            return Err(Error::dimension(format!(
                "param sub: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Vector::new(
            self.as_slice()
                .iter()
                .zip(other.as_slice())
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }
}

/// A set of labelled samples. Feature rows are samples; labels are class
/// indices in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::dimension("batch: no samples"));
        }
        if features.rows() != labels.len() {
            return Err(Error::dimension(format!(
                "batch: {} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Batch { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// New batch holding the rows at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Batch> {
        let cols = self.features.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::index(format!(
                    "batch subset: row {i} of {}",
                    self.len()
                )));
            }
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Batch::new(Matrix::from_rows(indices.len(), cols, data)?, labels)
    }
}

/// Borrowed views of one layer's weights and biases inside the flat vector.
struct LayerView<'a> {
    w: &'a [f64],
    b: &'a [f64],
    fan_in: usize,
    fan_out: usize,
}

fn layer_views<'a>(spec: &MlpSpec, params: &'a [f64]) -> Result<Vec<LayerView<'a>>> {
    if params.len() != spec.param_count() {
        return Err(Error::dimension(format!(
            "params: expected {} values, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    let dims = spec.dims();
    let mut views = Vec::with_capacity(dims.len() - 1);
    let mut offset = 0;
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let wlen = fan_in * fan_out;
        views.push(LayerView {
            w: &params[offset..offset + wlen],
            b: &params[offset + wlen..offset + wlen + fan_out],
            fan_in,
            fan_out,
        });
        offset += wlen + fan_out;
    }
    Ok(views)
}

/// Glorot-uniform initialization: weights drawn from
/// `U(-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`, biases zero.
/// Deterministic in `seed`.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = stream_from_parts(seed, 0x696e_6974, 0, 0);
    let dims = spec.dims();
    let mut values = Vec::with_capacity(spec.param_count());
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.gen_range(-bound..=bound));
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    Ok(ParamVector::new(Vector::new(values)))
}

/// Scratch buffers for one forward/backward pass, reused across samples.
struct Workspace {
    /// Pre-activations per layer.
    zs: Vec<Vec<f64>>,
    /// Post-activations per layer (activation applied on hidden layers,
    /// identity on the output layer).
    acts: Vec<Vec<f64>>,
    /// Backpropagated deltas per layer.
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(spec: &MlpSpec) -> Self {
        let dims = spec.dims();
        let layer_sizes: Vec<usize> = dims[1..].to_vec();
        Workspace {
            zs: layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            acts: layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            deltas: layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Runs the network on one sample, filling `ws.zs` / `ws.acts`.
fn forward(spec: &MlpSpec, views: &[LayerView<'_>], x: &[f64], ws: &mut Workspace) {
    let num_layers = views.len();
    for (l, view) in views.iter().enumerate() {
        // split so the previous layer's activations stay readable while
        // this layer's are written
        let (done, rest) = ws.acts.split_at_mut(l);
        let input: &[f64] = if l == 0 { x } else { &done[l - 1] };
        let out_acts = &mut rest[0];
        debug_assert_eq!(input.len(), view.fan_in);
        for o in 0..view.fan_out {
            let row = &view.w[o * view.fan_in..(o + 1) * view.fan_in];
            let mut z = view.b[o];
            for (wi, xi) in row.iter().zip(input) {
                z += wi * xi;
            }
            ws.zs[l][o] = z;
            out_acts[o] = if l + 1 == num_layers {
                z // output layer stays linear; softmax lives in the loss
            } else {
                spec.activation.apply(z)
            };
        }
    }
}

/// `log Σ_c exp(z_c)` with max subtraction.
fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - m).exp()).sum();
    m + sum.ln()
}

fn check_batch(spec: &MlpSpec, batch: &Batch) -> Result<()> {
    if batch.features.cols() != spec.input_dim {
        return Err(Error::dimension(format!(
            "batch features have {} columns, model expects {}",
            batch.features.cols(),
            spec.input_dim
        )));
    }
    if let Some(&bad) = batch.labels.iter().find(|&&y| y >= spec.num_classes) {
        return Err(Error::index(format!(
            "label {bad} >= num_classes {}",
            spec.num_classes
        )));
    }
    Ok(())
}

/// Mean softmax cross-entropy over the batch.
pub fn loss(spec: &MlpSpec, params: &ParamVector, batch: &Batch) -> Result<f64> {
    check_batch(spec, batch)?;
    let views = layer_views(spec, params.as_slice())?;
    let mut ws = Workspace::new(spec);
    let mut total = 0.0;
    for (i, &y) in batch.labels.iter().enumerate() {
        forward(spec, &views, batch.features.row(i), &mut ws);
        let logits = ws.acts.last().unwrap();
        total += log_sum_exp(logits) - logits[y];
    }
    let value = total / batch.len() as f64;
    assert!(value.is_finite(), "non-finite loss: {value}");
    Ok(value)
}

/// Mean cross-entropy gradient over the batch, flattened in parameter order.
/// Pure data gradient; weight decay is applied by the caller when wanted.
pub fn grad(spec: &MlpSpec, params: &ParamVector, batch: &Batch) -> Result<ParamVector> {
    check_batch(spec, batch)?;
    let views = layer_views(spec, params.as_slice())?;
    let mut ws = Workspace::new(spec);
    let mut g = vec![0.0; params.len()];
    let num_layers = views.len();

    for (i, &y) in batch.labels.iter().enumerate() {
        let x = batch.features.row(i);
        forward(spec, &views, x, &mut ws);

        // output delta: softmax(z) - onehot(y)
        {
            let logits = &ws.acts[num_layers - 1];
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (c, &z) in logits.iter().enumerate() {
                let e = (z - m).exp();
                ws.deltas[num_layers - 1][c] = e;
                sum += e;
            }
            for d in ws.deltas[num_layers - 1].iter_mut() {
                *d /= sum;
            }
            ws.deltas[num_layers - 1][y] -= 1.0;
        }

        // hidden deltas: (W_{l+1}ᵀ delta_{l+1}) ∘ act'(z_l)
        for l in (0..num_layers - 1).rev() {
            let next = &views[l + 1];
            for j in 0..views[l].fan_out {
                let mut acc = 0.0;
                for o in 0..next.fan_out {
                    acc += next.w[o * next.fan_in + j] * ws.deltas[l + 1][o];
                }
                ws.deltas[l][j] = acc * spec.activation.derivative(ws.zs[l][j]);
            }
        }

        // accumulate dW = delta ⊗ input, db = delta
        let mut offset = 0;
        for (l, view) in views.iter().enumerate() {
            let input: &[f64] = if l == 0 { x } else { &ws.acts[l - 1] };
            for o in 0..view.fan_out {
                let d = ws.deltas[l][o];
                let grow = &mut g[offset + o * view.fan_in..offset + (o + 1) * view.fan_in];
                for (gk, xk) in grow.iter_mut().zip(input) {
                    *gk += d * xk;
                }
            }
            let boff = offset + view.fan_in * view.fan_out;
            for o in 0..view.fan_out {
                g[boff + o] += ws.deltas[l][o];
            }
            offset += view.fan_in * view.fan_out + view.fan_out;
        }
    }

    let inv_n = 1.0 / batch.len() as f64;
    for v in g.iter_mut() {
        *v *= inv_n;
    }
    let out = Vector::new(g);
    out.assert_finite("model gradient");
    Ok(ParamVector::new(out))
}

/// Fraction of samples whose argmax logit equals the label. Ties go to the
/// lowest class index.
pub fn accuracy(spec: &MlpSpec, params: &ParamVector, batch: &Batch) -> Result<f64> {
    check_batch(spec, batch)?;
    let views = layer_views(spec, params.as_slice())?;
    let mut ws = Workspace::new(spec);
    let mut correct = 0usize;
    for (i, &y) in batch.labels.iter().enumerate() {
        forward(spec, &views, batch.features.row(i), &mut ws);
        let logits = ws.acts.last().unwrap();
        let mut best = 0usize;
        for (c, &z) in logits.iter().enumerate().skip(1) {
            if z > logits[best] {
                best = c;
            }
        }
        if best == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / batch.len() as f64)
}
