//! Fully connected network with SiLU hidden layers and hand-written backprop.

use crate::error::{Error, Result};
use crate::math::{SeededRng, Tensor};

/// Hidden width used by the experiments.
pub const DEFAULT_HIDDEN: usize = 256;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// MLP `widths[0] → … → widths[L]`; SiLU on hidden layers, identity output.
///
/// Parameters live in one flat vector. Layer `l` stores its weight as a
/// `widths[l]×widths[l+1]` row-major block followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Output of [`MlpNet::forward_backward`].
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub output: Tensor,
    pub param_grads: Vec<f64>,
    pub input_grads: Tensor,
}

impl MlpNet {
    /// All-zero parameters.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid MLP widths {widths:?}")));
        }
        let count = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self { widths: widths.to_vec(), params: vec![0.0; count] })
    }

    /// Fan-in scaled uniform weights on hidden layers, zero output layer, zero biases.
    pub fn init(widths: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        let layers = net.num_layers();
        for l in 0..layers.saturating_sub(1) {
            let fan_in = widths[l] as f64;
            let bound = 2f64.sqrt() * (3.0 / fan_in).sqrt();
            let (w_off, w_len, _, _) = net.layer_offsets(l);
            for v in &mut net.params[w_off..w_off + w_len] {
                *v = bound * (2.0 * rng.uniform() - 1.0);
            }
        }
        Ok(net)
    }

    /// `[input, hidden, hidden, output]` with the default hidden width.
    pub fn score_net(input: usize, output: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::init(&[input, hidden, hidden, output], rng)
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "MLP expects {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("MLP parameters".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(weight offset, weight len, bias offset, bias len)` of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut off = 0;
        for w in self.widths.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        (off, fan_in * fan_out, off + fan_in * fan_out, fan_out)
    }

    fn weight(&self, l: usize) -> Tensor {
        let (off, len, _, _) = self.layer_offsets(l);
        Tensor::from_raw(self.widths[l], self.widths[l + 1], self.params[off..off + len].to_vec())
    }

    fn bias(&self, l: usize) -> &[f64] {
        let (_, _, off, len) = self.layer_offsets(l);
        &self.params[off..off + len]
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "MLP input dim {} but batch has {} columns",
                self.input_dim(),
                input.cols()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer for a batch.
    fn pre_activations(&self, input: &Tensor) -> Vec<Tensor> {
        let mut pre = Vec::with_capacity(self.num_layers());
        let mut act = input.clone();
        for l in 0..self.num_layers() {
            let mut z = act.matmul(&self.weight(l)).expect("layer widths chain");
            let b = self.bias(l);
            for r in 0..z.rows() {
                z.row_mut(r).iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
            }
            if l + 1 < self.num_layers() {
                act = z.map(silu);
            }
            pre.push(z);
        }
        pre
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        Ok(self.pre_activations(input).pop().expect("at least one layer"))
    }

    /// Output, `∇_θ` and `∇_input` of `(1/B) Σᵢ ⟨net(inputᵢ), upstreamᵢ⟩`.
    pub fn forward_backward(&self, input: &Tensor, upstream: &Tensor) -> Result<MlpGradients> {
        self.check_input(input)?;
        if upstream.shape() != (input.rows(), self.output_dim()) {
            return Err(Error::ShapeMismatch(format!(
                "upstream {:?} vs expected {:?}",
                upstream.shape(),
                (input.rows(), self.output_dim())
            )));
        }
        let pre = self.pre_activations(input);
        let layers = self.num_layers();
        let mut grads = vec![0.0; self.params.len()];
        let mut g = upstream.scale(1.0 / input.rows().max(1) as f64);
        for l in (0..layers).rev() {
            let act_in = if l == 0 { input.clone() } else { pre[l - 1].map(silu) };
            let dw = act_in.t_matmul(&g)?;
            let (w_off, w_len, b_off, b_len) = self.layer_offsets(l);
            grads[w_off..w_off + w_len].copy_from_slice(dw.data());
            let db = &mut grads[b_off..b_off + b_len];
            for r in 0..g.rows() {
                db.iter_mut().zip(g.row(r)).for_each(|(d, v)| *d += v);
            }
            let mut g_in = g.matmul_t(&self.weight(l))?;
            if l > 0 {
                g_in = g_in.hadamard(&pre[l - 1].map(silu_grad))?;
            }
            g = g_in;
        }
        let output = pre.into_iter().last().expect("at least one layer");
        Ok(MlpGradients { output, param_grads: grads, input_grads: g })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(net: &MlpNet, input: &Tensor, upstream: &Tensor) -> f64 {
        let out = net.forward(input).unwrap();
        out.dot(upstream).unwrap() / input.rows() as f64
    }

    #[test]
    fn zero_weights_give_zero_output_and_mean_bias_grad() {
        let net = MlpNet::zeros(&[3, 4, 2]).unwrap();
        let mut rng = SeededRng::new(1);
        let x = rng.gaussian_tensor(5, 3, 1.0);
        let up = rng.gaussian_tensor(5, 2, 1.0);
        let g = net.forward_backward(&x, &up).unwrap();
        assert!(g.output.data().iter().all(|&v| v == 0.0));
        let (_, _, b_off, _) = net.layer_offsets(1);
        let mean = up.column_means();
        for j in 0..2 {
            assert!((g.param_grads[b_off + j] - mean.data()[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_identity_layer_is_identity() {
        let mut params = Tensor::identity(3).into_data();
        params.extend([0.0; 3]);
        let net = MlpNet::from_params(&[3, 3], params).unwrap();
        let x = SeededRng::new(2).gaussian_tensor(4, 3, 1.0);
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn init_zeroes_output_layer() {
        let net = MlpNet::score_net(4, 4, 16, &mut SeededRng::new(3)).unwrap();
        let x = SeededRng::new(4).gaussian_tensor(6, 4, 1.0);
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(net.params().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-6;
        for seed in 0..10u64 {
            let mut rng = SeededRng::new(100 + seed);
            let widths = [3, 1 + (seed as usize % 16), 2 + (seed as usize * 7 % 15), 2];
            let mut net = MlpNet::init(&widths, &mut rng).unwrap();
            // non-zero output layer so every path carries gradient
            for v in net.params_mut() {
                *v += 0.3 * rng.standard_normal();
            }
            let x = rng.gaussian_tensor(5, 3, 1.0);
            let up = rng.gaussian_tensor(5, 2, 1.0);
            let g = net.forward_backward(&x, &up).unwrap();
            let mut num = Vec::with_capacity(net.num_params());
            for j in 0..net.num_params() {
                let mut p = net.clone();
                p.params_mut()[j] += h;
                let fp = objective(&p, &x, &up);
                p.params_mut()[j] -= 2.0 * h;
                let fm = objective(&p, &x, &up);
                num.push((fp - fm) / (2.0 * h));
            }
            let diff: f64 = g.param_grads.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm <= 1e-5, "seed {seed}: rel err {}", diff / norm);

            // input gradient of sample 0, coordinate 1
            let mut xp = x.clone();
            xp.set(0, 1, x.get(0, 1) + h);
            let fp = objective(&net, &xp, &up);
            xp.set(0, 1, x.get(0, 1) - h);
            let fm = objective(&net, &xp, &up);
            let fd = (fp - fm) / (2.0 * h);
            assert!((g.input_grads.get(0, 1) - fd).abs() <= 1e-5 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn shape_errors() {
        let net = MlpNet::zeros(&[3, 4, 2]).unwrap();
        assert!(net.forward(&Tensor::zeros(2, 2)).is_err());
        assert!(net.forward_backward(&Tensor::zeros(2, 3), &Tensor::zeros(2, 3)).is_err());
        assert!(MlpNet::zeros(&[3]).is_err());
        assert!(MlpNet::from_params(&[2, 2], vec![0.0; 3]).is_err());
    }
}
