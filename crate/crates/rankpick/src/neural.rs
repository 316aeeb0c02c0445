//! Feedforward networks with dense and variational Gaussian layers, MSE and
//! pairwise ranking objectives, Adam, and early stopping.
//!
//! Gradients are computed by hand-rolled backprop over a fixed layer
//! repertoire (linear maps with ReLU between them, linear output). For
//! variational layers the reparameterization w = mu + softplus(rho) * zeta
//! makes the sampled loss differentiable in (mu, rho) for a fixed noise draw,
//! which is also what lets finite differences validate the analytic path.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, DataError};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("expected input width {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("too few rows to train on: {0}")]
    TooFewRows(usize),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("bad checkpoint blob: {0}")]
    BadBlob(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Dense,
    Variational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
    Ranking,
}

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-8;

/// Spread of variational weights right after init.
const SIGMA_INIT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub layer_kind: LayerKind,
}

impl NetworkSpec {
    pub fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        layer_kind: LayerKind,
    ) -> Result<Self, NeuralError> {
        if input_dim == 0 {
            return Err(NeuralError::BadConfig("input_dim must be positive".into()));
        }
        if hidden.iter().any(|&w| w == 0) {
            return Err(NeuralError::BadConfig("hidden widths must be positive".into()));
        }
        Ok(Self { input_dim, hidden, activation: Activation::Relu, layer_kind })
    }

    /// Two rectified hidden layers of 100 units, scalar output.
    pub fn standard(input_dim: usize, layer_kind: LayerKind) -> Result<Self, NeuralError> {
        Self::new(input_dim, vec![100, 100], layer_kind)
    }

    pub fn output_dim(&self) -> usize {
        1
    }

    /// (out, in) shape of each linear layer, output layer last.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &w in &self.hidden {
            dims.push((w, prev));
            prev = w;
        }
        dims.push((1, prev));
        dims
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    w_mu: DMatrix<f64>,
    b_mu: DVector<f64>,
    w_rho: Option<DMatrix<f64>>,
    b_rho: Option<DVector<f64>>,
}

impl Layer {
    fn param_count(&self) -> usize {
        let base = self.w_mu.len() + self.b_mu.len();
        match &self.w_rho {
            Some(w) => base + w.len() + self.b_rho.as_ref().unwrap().len(),
            None => base,
        }
    }
}

/// One standard-normal draw per variational parameter; empty for dense nets.
#[derive(Clone, Debug)]
pub struct Noise {
    layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
}

impl Network {
    /// Uniform fan-in init for the means; variational spreads start at
    /// softplus(rho) = 0.05.
    pub fn init(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Self {
        let rho0 = softplus_inv(SIGMA_INIT);
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(out, inp)| {
                let bound = 1.0 / (inp as f64).sqrt();
                let w_vals: Vec<f64> =
                    (0..out * inp).map(|_| rng.gen_range(-bound..bound)).collect();
                let b_vals: Vec<f64> = (0..out).map(|_| rng.gen_range(-bound..bound)).collect();
                let (w_rho, b_rho) = match spec.layer_kind {
                    LayerKind::Dense => (None, None),
                    LayerKind::Variational => (
                        Some(DMatrix::from_element(out, inp, rho0)),
                        Some(DVector::from_element(out, rho0)),
                    ),
                };
                Layer {
                    w_mu: DMatrix::from_vec(out, inp, w_vals),
                    b_mu: DVector::from_vec(b_vals),
                    w_rho,
                    b_rho,
                }
            })
            .collect();
        Self { spec, layers }
    }

    fn zeroed(spec: NetworkSpec) -> Self {
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(out, inp)| {
                let (w_rho, b_rho) = match spec.layer_kind {
                    LayerKind::Dense => (None, None),
                    LayerKind::Variational => {
                        (Some(DMatrix::zeros(out, inp)), Some(DVector::zeros(out)))
                    }
                };
                Layer {
                    w_mu: DMatrix::zeros(out, inp),
                    b_mu: DVector::zeros(out),
                    w_rho,
                    b_rho,
                }
            })
            .collect();
        Self { spec, layers }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Per layer: w_mu (column-major), b_mu, then w_rho and b_rho if present.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.w_mu.as_slice());
            out.extend_from_slice(layer.b_mu.as_slice());
            if let Some(w_rho) = &layer.w_rho {
                out.extend_from_slice(w_rho.as_slice());
                out.extend_from_slice(layer.b_rho.as_ref().unwrap().as_slice());
            }
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.param_count() {
            return Err(NeuralError::LengthMismatch {
                left: flat.len(),
                right: self.param_count(),
            });
        }
        let mut k = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[k..k + dst.len()]);
            k += dst.len();
        };
        for layer in &mut self.layers {
            take(layer.w_mu.as_mut_slice());
            take(layer.b_mu.as_mut_slice());
            if let Some(w_rho) = &mut layer.w_rho {
                take(w_rho.as_mut_slice());
                take(layer.b_rho.as_mut().unwrap().as_mut_slice());
            }
        }
        Ok(())
    }

    pub fn draw_noise(&self, rng: &mut ChaCha8Rng) -> Noise {
        match self.spec.layer_kind {
            LayerKind::Dense => Noise { layers: Vec::new() },
            LayerKind::Variational => Noise {
                layers: self
                    .layers
                    .iter()
                    .map(|l| {
                        let (out, inp) = l.w_mu.shape();
                        let w_vals: Vec<f64> =
                            (0..out * inp).map(|_| rng.sample(StandardNormal)).collect();
                        let b_vals: Vec<f64> =
                            (0..out).map(|_| rng.sample(StandardNormal)).collect();
                        (DMatrix::from_vec(out, inp, w_vals), DVector::from_vec(b_vals))
                    })
                    .collect(),
            },
        }
    }

    /// Weights actually applied: mu for dense layers or posterior-mean
    /// passes, mu + softplus(rho) * zeta under a noise draw.
    fn effective(&self, noise: Option<&Noise>) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        match noise {
            None => self.layers.iter().map(|l| (l.w_mu.clone(), l.b_mu.clone())).collect(),
            Some(noise) => {
                assert_eq!(noise.layers.len(), self.layers.len(), "noise from another spec");
                self.layers
                    .iter()
                    .zip(&noise.layers)
                    .map(|(l, (zw, zb))| {
                        let w = &l.w_mu
                            + l.w_rho.as_ref().unwrap().map(softplus).component_mul(zw);
                        let b = &l.b_mu
                            + l.b_rho.as_ref().unwrap().map(softplus).component_mul(zb);
                        (w, b)
                    })
                    .collect()
            }
        }
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<(), NeuralError> {
        if x.nrows() != self.spec.input_dim {
            return Err(NeuralError::ShapeMismatch {
                expected: self.spec.input_dim,
                got: x.nrows(),
            });
        }
        Ok(())
    }

    /// Batched pass over column-vector inputs; returns one output per column.
    fn forward_batch(&self, x: &DMatrix<f64>, noise: Option<&Noise>) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let eff = self.effective(self.sampling_noise(noise));
        let cache = forward_cached(&eff, x);
        Ok(cache.output().iter().copied().collect())
    }

    /// Dense networks never consume noise even if the caller drew some.
    fn sampling_noise<'a>(&self, noise: Option<&'a Noise>) -> Option<&'a Noise> {
        match self.spec.layer_kind {
            LayerKind::Dense => None,
            LayerKind::Variational => noise,
        }
    }

    /// KL(q(w) || N(0, 1)) summed over all variational parameters, with its
    /// gradient in flat layout. Identically zero for dense networks.
    pub fn kl_objective(&self) -> (f64, Vec<f64>) {
        let mut total = 0.0;
        let mut grad = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            match (&layer.w_rho, &layer.b_rho) {
                (Some(w_rho), Some(b_rho)) => {
                    for (&mu, &rho) in layer
                        .w_mu
                        .iter()
                        .chain(layer.b_mu.iter())
                        .zip(w_rho.iter().chain(b_rho.iter()))
                    {
                        total += kl_gaussian(mu, softplus(rho)).expect("softplus > 0");
                    }
                    grad.extend(layer.w_mu.iter().chain(layer.b_mu.iter()).copied());
                    for &rho in w_rho.iter().chain(b_rho.iter()) {
                        let sigma = softplus(rho);
                        grad.push((sigma - 1.0 / sigma) * sigmoid(rho));
                    }
                }
                _ => {
                    grad.extend(std::iter::repeat(0.0).take(layer.param_count()));
                }
            }
        }
        (total, grad)
    }

    /// Total KL of the weight posterior against the unit-normal prior.
    pub fn kl(&self) -> f64 {
        self.kl_objective().0
    }

    /// Mean squared error over a batch plus its flat-parameter gradient.
    /// `noise` fixes the variational draw; None is a posterior-mean pass.
    pub fn mse_objective(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        noise: Option<&Noise>,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        self.check_input(x)?;
        if x.ncols() != y.len() {
            return Err(NeuralError::LengthMismatch { left: x.ncols(), right: y.len() });
        }
        if y.is_empty() {
            return Err(NeuralError::EmptyInput);
        }
        let noise = self.sampling_noise(noise);
        let eff = self.effective(noise);
        let cache = forward_cached(&eff, x);
        let out = cache.output();
        let n = y.len() as f64;
        let mut loss = 0.0;
        let mut dout = DMatrix::zeros(1, y.len());
        for (b, &target) in y.iter().enumerate() {
            let r = out[b] - target;
            loss += r * r / n;
            dout[(0, b)] = 2.0 * r / n;
        }
        let wgrads = backward(&eff, &cache, dout);
        Ok((loss, self.assemble_flat_grads(&[wgrads], noise)))
    }

    /// Mean pairwise ranking loss over a batch of pairs plus its gradient.
    /// Column b of `x_first`/`x_second` holds the pair's two inputs and
    /// `signs[b]` = sign(y1 - y2) for the pair's ground truth.
    pub fn ranking_objective(
        &self,
        x_first: &DMatrix<f64>,
        x_second: &DMatrix<f64>,
        signs: &[f64],
        margin: f64,
        noise: Option<&Noise>,
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        self.check_input(x_first)?;
        self.check_input(x_second)?;
        if x_first.ncols() != x_second.ncols() {
            return Err(NeuralError::LengthMismatch {
                left: x_first.ncols(),
                right: x_second.ncols(),
            });
        }
        if x_first.ncols() != signs.len() {
            return Err(NeuralError::LengthMismatch { left: x_first.ncols(), right: signs.len() });
        }
        if signs.is_empty() {
            return Err(NeuralError::EmptyInput);
        }
        let noise = self.sampling_noise(noise);
        let eff = self.effective(noise);
        let cache1 = forward_cached(&eff, x_first);
        let cache2 = forward_cached(&eff, x_second);
        let (out1, out2) = (cache1.output(), cache2.output());
        let n = signs.len() as f64;
        let mut loss = 0.0;
        let mut dout1 = DMatrix::zeros(1, signs.len());
        let mut dout2 = DMatrix::zeros(1, signs.len());
        for (b, &s) in signs.iter().enumerate() {
            let arg = -s * (out1[b] - out2[b]) + margin;
            if arg > 0.0 {
                loss += arg / n;
                dout1[(0, b)] = -s / n;
                dout2[(0, b)] = s / n;
            }
        }
        let g1 = backward(&eff, &cache1, dout1);
        let g2 = backward(&eff, &cache2, dout2);
        Ok((loss, self.assemble_flat_grads(&[g1, g2], noise)))
    }

    /// Folds per-pass effective-weight gradients into flat (mu, rho) space:
    /// d/dmu = dw, d/drho = dw * zeta * sigmoid(rho).
    fn assemble_flat_grads(
        &self,
        passes: &[Vec<(DMatrix<f64>, DVector<f64>)>],
        noise: Option<&Noise>,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (l, layer) in self.layers.iter().enumerate() {
            let dw_sum = |i: usize, j: usize| passes.iter().map(|p| p[l].0[(i, j)]).sum::<f64>();
            let db_sum = |i: usize| passes.iter().map(|p| p[l].1[i]).sum::<f64>();
            let (out_dim, in_dim) = layer.w_mu.shape();
            for j in 0..in_dim {
                for i in 0..out_dim {
                    out.push(dw_sum(i, j));
                }
            }
            for i in 0..out_dim {
                out.push(db_sum(i));
            }
            if let (Some(w_rho), Some(b_rho)) = (&layer.w_rho, &layer.b_rho) {
                match noise {
                    Some(nz) => {
                        let (zw, zb) = &nz.layers[l];
                        for j in 0..in_dim {
                            for i in 0..out_dim {
                                out.push(dw_sum(i, j) * zw[(i, j)] * sigmoid(w_rho[(i, j)]));
                            }
                        }
                        for i in 0..out_dim {
                            out.push(db_sum(i) * zb[i] * sigmoid(b_rho[i]));
                        }
                    }
                    None => out.extend(std::iter::repeat(0.0).take(w_rho.len() + b_rho.len())),
                }
            }
        }
        out
    }

    /// Versioned little-endian checkpoint: spec echo plus flat parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let flat = self.to_flat();
        let mut out = Vec::with_capacity(32 + 8 * (self.spec.hidden.len() + flat.len()));
        out.extend_from_slice(b"RNET");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.push(match self.spec.layer_kind {
            LayerKind::Dense => 0,
            LayerKind::Variational => 1,
        });
        out.push(0); // activation: relu
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(self.spec.input_dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.spec.hidden.len() as u32).to_le_bytes());
        for &h in &self.spec.hidden {
            out.extend_from_slice(&(h as u64).to_le_bytes());
        }
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuralError> {
        let bad = |msg: &str| NeuralError::BadBlob(msg.into());
        let mut k = 0usize;
        let mut take = |len: usize| -> Result<&[u8], NeuralError> {
            let end = k.checked_add(len).filter(|&e| e <= bytes.len());
            let end = end.ok_or_else(|| bad("truncated"))?;
            let s = &bytes[k..end];
            k = end;
            Ok(s)
        };
        if take(4)? != b"RNET" {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != 1 {
            return Err(bad("unsupported version"));
        }
        let layer_kind = match take(1)?[0] {
            0 => LayerKind::Dense,
            1 => LayerKind::Variational,
            _ => return Err(bad("unknown layer kind")),
        };
        if take(1)?[0] != 0 {
            return Err(bad("unknown activation"));
        }
        take(2)?;
        let input_dim = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let hidden_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut hidden = Vec::with_capacity(hidden_len);
        for _ in 0..hidden_len {
            hidden.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
        }
        let n_params = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let spec = NetworkSpec::new(input_dim, hidden, layer_kind)
            .map_err(|e| NeuralError::BadBlob(e.to_string()))?;
        let mut net = Network::zeroed(spec);
        if n_params != net.param_count() {
            return Err(bad("parameter count does not match spec"));
        }
        let mut flat = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            flat.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        if k != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        net.set_flat(&flat)?;
        Ok(net)
    }
}

struct ForwardCache {
    /// acts[0] is the input; acts[l + 1] the post-activation of layer l.
    acts: Vec<DMatrix<f64>>,
    /// Pre-activations, needed for the ReLU mask.
    pre: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    fn output(&self) -> &DMatrix<f64> {
        self.acts.last().unwrap()
    }
}

fn forward_cached(eff: &[(DMatrix<f64>, DVector<f64>)], x: &DMatrix<f64>) -> ForwardCache {
    let n_layers = eff.len();
    let mut acts = Vec::with_capacity(n_layers + 1);
    let mut pre = Vec::with_capacity(n_layers);
    acts.push(x.clone());
    for (l, (w, b)) in eff.iter().enumerate() {
        let mut z = w * acts.last().unwrap();
        for j in 0..z.ncols() {
            for i in 0..z.nrows() {
                z[(i, j)] += b[i];
            }
        }
        let a = if l + 1 == n_layers { z.clone() } else { z.map(|v| v.max(0.0)) };
        pre.push(z);
        acts.push(a);
    }
    ForwardCache { acts, pre }
}

/// Backprop from d(loss)/d(output) to per-layer effective-weight gradients.
fn backward(
    eff: &[(DMatrix<f64>, DVector<f64>)],
    cache: &ForwardCache,
    dout: DMatrix<f64>,
) -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let n_layers = eff.len();
    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(n_layers);
    let mut delta = dout;
    for l in (0..n_layers).rev() {
        let dw = &delta * cache.acts[l].transpose();
        let db = delta.column_sum();
        if l > 0 {
            let mut prev = eff[l].0.transpose() * &delta;
            prev.zip_apply(&cache.pre[l - 1], |d, z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = prev;
        }
        grads.push((dw, db));
    }
    grads.reverse();
    grads
}

/// Pairwise margin ranking loss: max(0, -sign(y1 - y2) (yhat1 - yhat2) + m),
/// with sign(0) = 0.
pub fn ranking_loss(y1: f64, y2: f64, yhat1: f64, yhat2: f64, margin: f64) -> f64 {
    let s = target_sign(y1, y2);
    (-s * (yhat1 - yhat2) + margin).max(0.0)
}

fn target_sign(y1: f64, y2: f64) -> f64 {
    if y1 > y2 {
        1.0
    } else if y1 < y2 {
        -1.0
    } else {
        0.0
    }
}

pub fn mse_loss(y: &[f64], yhat: &[f64]) -> Result<f64, NeuralError> {
    if y.len() != yhat.len() {
        return Err(NeuralError::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    let n = y.len() as f64;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// KL(N(mu, sigma^2) || N(0, 1)) = (mu^2 + sigma^2 - 1 - 2 ln sigma) / 2.
pub fn kl_gaussian(mu: f64, sigma: f64) -> Result<f64, NeuralError> {
    if !(sigma > 0.0) {
        return Err(NeuralError::NonPositiveSigma(sigma));
    }
    Ok(0.5 * (mu * mu + sigma * sigma - 1.0) - sigma.ln())
}

/// One network pass over a single input; `sample_weights` draws fresh
/// variational weights, otherwise the posterior mean is used.
pub fn forward(
    network: &Network,
    input: &[f64],
    sample_weights: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64, NeuralError> {
    let x = DMatrix::from_column_slice(input.len(), 1, input);
    let noise = if sample_weights { Some(network.draw_noise(rng)) } else { None };
    Ok(network.forward_batch(&x, noise.as_ref())?[0])
}

#[derive(Clone, Debug, Serialize)]
pub struct PredDist {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Posterior predictions for a query batch. Dense networks are deterministic
/// (std 0, `mc_samples` ignored); variational networks report mean and
/// population std over `mc_samples` reparameterized passes.
pub fn predict(
    network: &Network,
    features: &[Vec<f64>],
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PredDist, NeuralError> {
    if mc_samples == 0 {
        return Err(NeuralError::BadConfig("mc_samples must be positive".into()));
    }
    let x = feature_matrix(network.spec.input_dim, features)?;
    match network.spec.layer_kind {
        LayerKind::Dense => {
            let mean = network.forward_batch(&x, None)?;
            let std = vec![0.0; mean.len()];
            Ok(PredDist { mean, std })
        }
        LayerKind::Variational => {
            let n = features.len();
            let mut sum = vec![0.0; n];
            let mut sumsq = vec![0.0; n];
            for _ in 0..mc_samples {
                let noise = network.draw_noise(rng);
                let out = network.forward_batch(&x, Some(&noise))?;
                for (b, v) in out.into_iter().enumerate() {
                    sum[b] += v;
                    sumsq[b] += v * v;
                }
            }
            let m = mc_samples as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
            let std = sumsq
                .iter()
                .zip(&mean)
                .map(|(sq, mu)| (sq / m - mu * mu).max(0.0).sqrt())
                .collect();
            Ok(PredDist { mean, std })
        }
    }
}

fn feature_matrix(input_dim: usize, features: &[Vec<f64>]) -> Result<DMatrix<f64>, NeuralError> {
    for row in features {
        if row.len() != input_dim {
            return Err(NeuralError::ShapeMismatch { expected: input_dim, got: row.len() });
        }
    }
    let mut x = DMatrix::zeros(input_dim, features.len());
    for (j, row) in features.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Standard bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<(), NeuralError> {
    if params.len() != grads.len() {
        return Err(NeuralError::LengthMismatch { left: params.len(), right: grads.len() });
    }
    if params.len() != state.m.len() {
        return Err(NeuralError::LengthMismatch { left: params.len(), right: state.m.len() });
    }
    let (b1, b2) = betas;
    state.t += 1;
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub margin: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    /// None applies the usual Bayes-by-backprop scaling, 1 / minibatches per
    /// epoch.
    pub kl_weight: Option<f64>,
    pub mc_samples_train: usize,
    pub mc_samples_predict: usize,
    pub minibatch: usize,
    /// Redraw the training pair sample every epoch instead of freezing one.
    pub resample_pairs_each_epoch: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(loss: Loss) -> Self {
        Self {
            loss,
            margin: 0.0,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            kl_weight: None,
            mc_samples_train: 16,
            mc_samples_predict: 50,
            minibatch: 32,
            resample_pairs_each_epoch: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |msg: &str| Err(NeuralError::BadConfig(msg.into()));
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return bad("margin must be finite and nonnegative");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be finite and positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        if let Some(w) = self.kl_weight {
            if !w.is_finite() || w < 0.0 {
                return bad("kl_weight must be finite and nonnegative");
            }
        }
        if self.mc_samples_train == 0 || self.mc_samples_predict == 0 {
            return bad("mc sample counts must be positive");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    /// Mean minibatch objective per epoch.
    pub train_curve: Vec<f64>,
    /// Validation loss per epoch; entry 0 is the untrained baseline.
    pub val_curve: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch whose parameters were returned; 0 means the untrained network.
    pub best_epoch: usize,
    pub best_val: f64,
    pub stop: StopReason,
}

/// Fits a copy of `network`, holding out a validation split for early
/// stopping, and returns the parameters from the best validation epoch.
pub fn train(
    network: &Network,
    features: &[Vec<f64>],
    targets: &[f64],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Network, TrainReport), NeuralError> {
    config.validate()?;
    let n = features.len();
    if n != targets.len() {
        return Err(NeuralError::LengthMismatch { left: n, right: targets.len() });
    }
    if n < 2 {
        return Err(NeuralError::TooFewRows(n));
    }
    let x_all = feature_matrix(network.spec.input_dim, features)?;

    // Ranking validation needs at least one pair on each side of the split.
    let min_side = match config.loss {
        Loss::Mse => 1,
        Loss::Ranking => 2,
    };
    if n < 2 * min_side {
        return Err(NeuralError::TooFewRows(n));
    }
    let n_val = ((n as f64) * config.validation_fraction).round() as usize;
    let n_val = n_val.clamp(min_side, n - min_side);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut val_idx = order[..n_val].to_vec();
    let mut train_idx = order[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();

    let variational = network.spec.layer_kind == LayerKind::Variational;
    let mc = if variational { config.mc_samples_train } else { 1 };

    // Pair samples; training pairs may be frozen for the whole run.
    let frozen_pairs = match config.loss {
        Loss::Ranking if !config.resample_pairs_each_epoch => {
            Some(data::sample_pairs(&train_idx, 2, rng.gen())?.pairs)
        }
        _ => None,
    };
    let val_pairs = match config.loss {
        Loss::Ranking => Some(data::sample_pairs(&val_idx, 2, rng.gen())?.pairs),
        Loss::Mse => None,
    };

    let columns = |idx: &[usize]| {
        DMatrix::from_fn(x_all.nrows(), idx.len(), |i, j| x_all[(i, idx[j])])
    };
    let val_loss = |net: &Network| -> Result<f64, NeuralError> {
        match config.loss {
            Loss::Mse => {
                let out = net.forward_batch(&columns(&val_idx), None)?;
                let y: Vec<f64> = val_idx.iter().map(|&i| targets[i]).collect();
                mse_loss(&y, &out)
            }
            Loss::Ranking => {
                let pairs = val_pairs.as_ref().unwrap();
                let first: Vec<usize> = pairs.iter().map(|p| p.0).collect();
                let second: Vec<usize> = pairs.iter().map(|p| p.1).collect();
                let out1 = net.forward_batch(&columns(&first), None)?;
                let out2 = net.forward_batch(&columns(&second), None)?;
                let total: f64 = pairs
                    .iter()
                    .enumerate()
                    .map(|(b, &(i, j))| {
                        ranking_loss(targets[i], targets[j], out1[b], out2[b], config.margin)
                    })
                    .sum();
                Ok(total / pairs.len() as f64)
            }
        }
    };

    let mut net = network.clone();
    let baseline = val_loss(&net)?;
    if !baseline.is_finite() {
        return Err(NeuralError::NonFiniteLoss { epoch: 0 });
    }
    let mut best_val = baseline;
    let mut best_params = net.to_flat();
    let mut best_epoch = 0usize;
    let mut val_curve = vec![baseline];
    let mut train_curve = Vec::new();
    let mut state = AdamState::new(net.param_count());
    let mut since_best = 0usize;
    let mut stop = StopReason::MaxEpochs;
    let mut epochs_run = 0usize;

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        let mut epoch_loss = 0.0;
        let mut n_batches_done = 0usize;
        match config.loss {
            Loss::Mse => {
                let mut idx = train_idx.clone();
                idx.shuffle(rng);
                let n_batches = idx.len().div_ceil(config.minibatch);
                let kl_w = config.kl_weight.unwrap_or(1.0 / n_batches as f64);
                for chunk in idx.chunks(config.minibatch) {
                    let xb = columns(chunk);
                    let yb: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                    let mut acc_loss = 0.0;
                    let mut acc_grad = vec![0.0; net.param_count()];
                    for _ in 0..mc {
                        let noise =
                            if variational { Some(net.draw_noise(rng)) } else { None };
                        let (l, g) = net.mse_objective(&xb, &yb, noise.as_ref())?;
                        acc_loss += l;
                        for (a, gi) in acc_grad.iter_mut().zip(&g) {
                            *a += gi;
                        }
                    }
                    let loss = step(
                        &mut net,
                        &mut state,
                        acc_loss,
                        acc_grad,
                        mc,
                        variational.then_some(kl_w),
                        config.learning_rate,
                        epoch,
                    )?;
                    epoch_loss += loss;
                    n_batches_done += 1;
                }
            }
            Loss::Ranking => {
                let mut pairs = match &frozen_pairs {
                    Some(p) => p.clone(),
                    None => data::sample_pairs(&train_idx, 2, rng.gen())?.pairs,
                };
                pairs.shuffle(rng);
                let n_batches = pairs.len().div_ceil(config.minibatch);
                let kl_w = config.kl_weight.unwrap_or(1.0 / n_batches as f64);
                for chunk in pairs.chunks(config.minibatch) {
                    let first: Vec<usize> = chunk.iter().map(|p| p.0).collect();
                    let second: Vec<usize> = chunk.iter().map(|p| p.1).collect();
                    let x1 = columns(&first);
                    let x2 = columns(&second);
                    let signs: Vec<f64> = chunk
                        .iter()
                        .map(|&(i, j)| target_sign(targets[i], targets[j]))
                        .collect();
                    let mut acc_loss = 0.0;
                    let mut acc_grad = vec![0.0; net.param_count()];
                    for _ in 0..mc {
                        let noise =
                            if variational { Some(net.draw_noise(rng)) } else { None };
                        let (l, g) =
                            net.ranking_objective(&x1, &x2, &signs, config.margin, noise.as_ref())?;
                        acc_loss += l;
                        for (a, gi) in acc_grad.iter_mut().zip(&g) {
                            *a += gi;
                        }
                    }
                    let loss = step(
                        &mut net,
                        &mut state,
                        acc_loss,
                        acc_grad,
                        mc,
                        variational.then_some(kl_w),
                        config.learning_rate,
                        epoch,
                    )?;
                    epoch_loss += loss;
                    n_batches_done += 1;
                }
            }
        }
        train_curve.push(epoch_loss / n_batches_done as f64);
        let vl = val_loss(&net)?;
        if !vl.is_finite() {
            return Err(NeuralError::NonFiniteLoss { epoch });
        }
        val_curve.push(vl);
        if vl < best_val {
            best_val = vl;
            best_params = net.to_flat();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stop = StopReason::Patience;
                break;
            }
        }
    }

    net.set_flat(&best_params)?;
    let report = TrainReport { train_curve, val_curve, epochs_run, best_epoch, best_val, stop };
    Ok((net, report))
}

/// Finalizes one minibatch: averages over MC draws, adds the weighted KL
/// term for variational nets, checks finiteness, and applies Adam.
#[allow(clippy::too_many_arguments)]
fn step(
    net: &mut Network,
    state: &mut AdamState,
    acc_loss: f64,
    mut grad: Vec<f64>,
    mc: usize,
    kl_weight: Option<f64>,
    lr: f64,
    epoch: usize,
) -> Result<f64, NeuralError> {
    let scale = 1.0 / mc as f64;
    let mut loss = acc_loss * scale;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    if let Some(kl_w) = kl_weight {
        let (kl, kl_grad) = net.kl_objective();
        loss += kl_w * kl;
        for (g, kg) in grad.iter_mut().zip(&kl_grad) {
            *g += kl_w * kg;
        }
    }
    if !loss.is_finite() {
        return Err(NeuralError::NonFiniteLoss { epoch });
    }
    let mut params = net.to_flat();
    adam_step(&mut params, &grad, state, lr, ADAM_BETAS, ADAM_EPS)?;
    net.set_flat(&params)?;
    Ok(loss)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    y.exp_m1().ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
