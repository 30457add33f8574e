use crate::{PolicyError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Negative-side gain of the hidden-layer activation. Keeps every unit
/// trainable: a clamped-to-zero unit stops passing gradient and never
/// recovers, which starves small networks trained for few steps. The fairly
/// steep slope keeps units useful even when a near-constant input pins their
/// preactivation sign.
pub const LEAKY_SLOPE: f64 = 0.1;

/// A fully connected network with leaky-ReLU hidden layers and a linear head,
/// all parameters in one flat buffer (per layer: row-major weights, then
/// biases). Forward and backward passes are written out by hand; there is no
/// autodiff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

fn layer_sizes(dims: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    dims.windows(2).map(|w| (w[0], w[1]))
}

fn param_count_for(dims: &[usize]) -> usize {
    layer_sizes(dims).map(|(i, o)| i * o + o).sum()
}

impl Mlp {
    pub fn seeded(dims: Vec<usize>, seed: u64) -> Result<Self> {
        Self::validate_dims(&dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count_for(&dims));
        for (in_dim, out_dim) in layer_sizes(&dims) {
            let scale = (2.0 / in_dim as f64).sqrt();
            for _ in 0..in_dim * out_dim {
                params.push(scale * rng.sample::<f64, _>(StandardNormal));
            }
            params.extend(std::iter::repeat_n(0.0, out_dim));
        }
        Ok(Mlp { dims, params })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        Self::validate_dims(&dims)?;
        let params = vec![0.0; param_count_for(&dims)];
        Ok(Mlp { dims, params })
    }

    pub fn from_parts(dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        Self::validate_dims(&dims)?;
        if params.len() != param_count_for(&dims) {
            return Err(PolicyError::DimMismatch {
                expected: param_count_for(&dims),
                got: params.len(),
            });
        }
        Ok(Mlp { dims, params })
    }

    fn validate_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(PolicyError::BadSchedule(format!(
                "mlp needs at least input and output widths, all positive; got {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.pop().unwrap())
    }

    /// Activations per layer: index 0 is the input, the last is the output.
    /// Hidden entries are post-activation, which is exactly what backward
    /// needs: leaky ReLU preserves sign, so the stored value picks the branch.
    pub fn forward_cached(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return Err(PolicyError::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let layers = self.dims.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(x.to_vec());
        let mut offset = 0;
        for (layer, (in_dim, out_dim)) in layer_sizes(&self.dims).enumerate() {
            let w = &self.params[offset..offset + in_dim * out_dim];
            let b = &self.params[offset + in_dim * out_dim..offset + in_dim * out_dim + out_dim];
            offset += in_dim * out_dim + out_dim;
            let input = activations.last().unwrap();
            let mut out = Vec::with_capacity(out_dim);
            for j in 0..out_dim {
                let row = &w[j * in_dim..(j + 1) * in_dim];
                let mut acc = b[j];
                for (wi, xi) in row.iter().zip(input) {
                    acc += wi * xi;
                }
                if layer + 1 < layers && acc < 0.0 {
                    acc *= LEAKY_SLOPE;
                }
                out.push(acc);
            }
            activations.push(out);
        }
        Ok(activations)
    }

    /// Accumulate dLoss/dParam into `grads` given the cached activations and
    /// dLoss/dOutput. Layout matches `params`.
    pub fn backward_into(&self, activations: &[Vec<f64>], dout: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        let layers = self.dims.len() - 1;
        // Per-layer parameter offsets, front to back.
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for (in_dim, out_dim) in layer_sizes(&self.dims) {
            offsets.push(offset);
            offset += in_dim * out_dim + out_dim;
        }

        let mut delta = dout.to_vec();
        for layer in (0..layers).rev() {
            let in_dim = self.dims[layer];
            let out_dim = self.dims[layer + 1];
            let base = offsets[layer];
            let input = &activations[layer];
            // A negative stored activation means the forward pass took the
            // leaky branch, so the local slope is LEAKY_SLOPE instead of 1.
            if layer + 1 < layers {
                for (d, a) in delta.iter_mut().zip(&activations[layer + 1]) {
                    if *a < 0.0 {
                        *d *= LEAKY_SLOPE;
                    }
                }
            }
            for j in 0..out_dim {
                let dj = delta[j];
                if dj != 0.0 {
                    let row = &mut grads[base + j * in_dim..base + (j + 1) * in_dim];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += dj * xi;
                    }
                }
                grads[base + in_dim * out_dim + j] += dj;
            }
            if layer > 0 {
                let w = &self.params[base..base + in_dim * out_dim];
                let mut next = vec![0.0; in_dim];
                for j in 0..out_dim {
                    let dj = delta[j];
                    if dj != 0.0 {
                        let row = &w[j * in_dim..(j + 1) * in_dim];
                        for (n, wi) in next.iter_mut().zip(row) {
                            *n += dj * wi;
                        }
                    }
                }
                delta = next;
            }
        }
    }
}

/// Mean squared error over the output and its gradient, 2(y - target)/n.
pub fn mse_and_grad(output: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = output.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(output.len());
    for (y, t) in output.iter().zip(target) {
        let d = y - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    (loss / n, grad)
}

/// Adam with decoupled weight decay. Deterministic; state lives here so the
/// training loop stays a plain fold.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(param_count: usize, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
    }
}

/// Compare analytic gradients against central finite differences on
/// `samples` randomly chosen parameters; returns the worst relative error.
/// Parameters where both sides are below 1e-8 count as agreeing.
pub fn grad_check(
    mlp: &Mlp,
    input: &[f64],
    target: &[f64],
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let activations = mlp.forward_cached(input)?;
    let (_, dout) = mse_and_grad(activations.last().unwrap(), target);
    let mut analytic = vec![0.0; mlp.param_count()];
    mlp.backward_into(&activations, &dout, &mut analytic);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut probe = mlp.clone();
    for _ in 0..samples {
        let i = rng.random_range(0..mlp.param_count());
        let original = probe.params()[i];
        probe.params_mut()[i] = original + h;
        let (loss_plus, _) = mse_and_grad(&probe.forward(input)?, target);
        probe.params_mut()[i] = original - h;
        let (loss_minus, _) = mse_and_grad(&probe.forward(input)?, target);
        probe.params_mut()[i] = original;
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        let a = analytic[i];
        if a.abs() < 1e-8 && numeric.abs() < 1e-8 {
            continue;
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
