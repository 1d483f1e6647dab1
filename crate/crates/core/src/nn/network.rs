use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::Activation;
use crate::matrix::{gemm, Matrix};
use crate::{Error, Result};

/// Inputs with at least this fraction of exact zeros (one-hot messages) take
/// the sparse path through the first layer.
const SPARSE_INPUT_ZERO_FRACTION: f64 = 0.75;

/// A dense feed-forward network.
///
/// Parameters live in one flat vector. For every layer `k` with input width
/// `d_k` and output width `d_{k+1}` the vector holds, in order:
///
/// - the weight matrix, row-major with shape `(d_k, d_{k+1})` so that a
///   layer computes `z = a W + b` for a row vector `a`;
/// - the bias vector of length `d_{k+1}`.
///
/// Layers are stored back to back, first layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[k + 1]` the output of layer `k`.
    acts: Vec<Matrix>,
    /// Pre-activations of every layer.
    pre: Vec<Matrix>,
}

impl Trace {
    pub fn input(&self) -> &Matrix {
        &self.acts[0]
    }

    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace holds at least the input")
    }

    pub fn into_output(mut self) -> Matrix {
        self.acts.pop().expect("trace holds at least the input")
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    /// Gradient w.r.t. the network input, when requested.
    pub input: Option<Matrix>,
}

impl MlpNetwork {
    /// Number of parameters of a network with layer widths `dims`.
    pub fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        let n = Self::param_count(dims);
        Self::with_params(dims, activations, vec![0.0; n])
    }

    pub fn with_params(dims: &[usize], activations: &[Activation], params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("a network needs at least one layer"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::config(format!("layer widths must be positive, got {dims:?}")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::config(format!(
                "{} layers need {} activations, got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        if let Some(k) = activations[..activations.len() - 1]
            .iter()
            .position(|a| *a == Activation::Softmax)
        {
            return Err(Error::config(format!(
                "softmax is only allowed on the final layer (found on layer {k})"
            )));
        }
        let expected = Self::param_count(dims);
        if params.len() != expected {
            return Err(Error::config(format!(
                "network {dims:?} needs {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            activations: activations.to_vec(),
            params,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, activations)?;
        for k in 0..net.layers() {
            let (fan_in, fan_out) = (net.dims[k], net.dims[k + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let (w, _) = net.layer_range(k);
            for p in &mut net.params[w] {
                *p = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight and bias ranges of layer `k` inside the parameter vector.
    pub fn layer_range(&self, k: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start: usize = self.dims[..=k].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
        let w_end = start + fan_in * fan_out;
        (start..w_end, w_end..w_end + fan_out)
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::config(format!(
                "input width {} does not match network input {}",
                input.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward_trace(input)?.into_output())
    }

    pub fn forward_trace(&self, input: &Matrix) -> Result<Trace> {
        self.check_input(input)?;
        let s = input.rows();
        let mut acts = Vec::with_capacity(self.layers() + 1);
        let mut pre = Vec::with_capacity(self.layers());
        acts.push(input.clone());
        for k in 0..self.layers() {
            let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
            let (w, b) = self.layer_range(k);
            let (w, b) = (&self.params[w], &self.params[b]);
            let a = &acts[k];
            let mut z = Matrix::zeros(s, fan_out);
            for i in 0..s {
                z.row_mut(i).copy_from_slice(b);
            }
            if k == 0 && is_sparse(a) {
                for i in 0..s {
                    let zr = z.row_mut(i);
                    for (j, &x) in a.row(i).iter().enumerate() {
                        if x != 0.0 {
                            axpy(x, &w[j * fan_out..(j + 1) * fan_out], zr);
                        }
                    }
                }
            } else {
                gemm(s, fan_in, fan_out, 1.0, a.as_slice(), false, w, false, 1.0, z.as_mut_slice());
            }
            let mut out = z.clone();
            let act = self.activations[k];
            for i in 0..s {
                act.apply_row(out.row_mut(i));
            }
            pre.push(z);
            acts.push(out);
        }
        Ok(Trace { acts, pre })
    }

    /// Gradient w.r.t. the parameters of `sum_i <upstream_i, output_i>`.
    pub fn backward(&self, input: &Matrix, upstream: &Matrix) -> Result<Vec<f64>> {
        let trace = self.forward_trace(input)?;
        Ok(self.backward_trace(&trace, upstream, false)?.params)
    }

    /// Like [`MlpNetwork::backward`] but reuses a recorded forward pass and can
    /// also return the gradient w.r.t. the input.
    pub fn backward_trace(&self, trace: &Trace, upstream: &Matrix, want_input: bool) -> Result<Gradients> {
        let out = trace.output();
        if upstream.shape() != out.shape() {
            return Err(Error::config(format!(
                "upstream gradient shape {:?} does not match output shape {:?}",
                upstream.shape(),
                out.shape()
            )));
        }
        let last = self.layers() - 1;
        let act = self.activations[last];
        let mut delta = upstream.clone();
        for i in 0..delta.rows() {
            act.backprop_row(trace.pre[last].row(i), out.row(i), delta.row_mut(i));
        }
        self.backprop(trace, delta, want_input)
    }

    /// Backward pass from a gradient w.r.t. the final pre-activation.
    pub fn backward_pre_activation(&self, trace: &Trace, delta: Matrix, want_input: bool) -> Result<Gradients> {
        let shape = trace.pre[self.layers() - 1].shape();
        if delta.shape() != shape {
            return Err(Error::config(format!(
                "pre-activation gradient shape {:?} does not match {:?}",
                delta.shape(),
                shape
            )));
        }
        self.backprop(trace, delta, want_input)
    }

    /// Fused softmax + cross-entropy gradient of `scale * sum_i -log p_i[target_i]`.
    ///
    /// Bypasses the softmax Jacobian: the pre-activation gradient is
    /// `scale * (p - onehot)`, which stays accurate when `p` saturates.
    pub fn backward_cross_entropy(&self, trace: &Trace, targets: &[usize], scale: f64, want_input: bool) -> Result<Gradients> {
        if self.activations[self.layers() - 1] != Activation::Softmax {
            return Err(Error::config("cross-entropy backward requires a softmax output"));
        }
        let out = trace.output();
        if targets.len() != out.rows() {
            return Err(Error::config(format!(
                "{} targets for a batch of {}",
                targets.len(),
                out.rows()
            )));
        }
        let mut delta = out.clone();
        for (i, &t) in targets.iter().enumerate() {
            if t >= out.cols() {
                return Err(Error::input(format!("target {t} out of range 0..{}", out.cols())));
            }
            let row = delta.row_mut(i);
            row[t] -= 1.0;
            row.iter_mut().for_each(|v| *v *= scale);
        }
        self.backprop(trace, delta, want_input)
    }

    fn backprop(&self, trace: &Trace, mut delta: Matrix, want_input: bool) -> Result<Gradients> {
        let s = delta.rows();
        let mut grad = vec![0.0; self.params.len()];
        let mut input_grad = None;
        for k in (0..self.layers()).rev() {
            let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
            let (wr, br) = self.layer_range(k);
            let a = &trace.acts[k];
            {
                let gw = &mut grad[wr.clone()];
                if k == 0 && is_sparse(a) {
                    for i in 0..s {
                        let d = delta.row(i);
                        for (j, &x) in a.row(i).iter().enumerate() {
                            if x != 0.0 {
                                axpy(x, d, &mut gw[j * fan_out..(j + 1) * fan_out]);
                            }
                        }
                    }
                } else {
                    gemm(fan_in, s, fan_out, 1.0, a.as_slice(), true, delta.as_slice(), false, 0.0, gw);
                }
            }
            let gb = &mut grad[br];
            for d in delta.iter_rows() {
                for (g, v) in gb.iter_mut().zip(d) {
                    *g += v;
                }
            }
            if k == 0 && !want_input {
                break;
            }
            let mut da = Matrix::zeros(s, fan_in);
            gemm(s, fan_out, fan_in, 1.0, delta.as_slice(), false, &self.params[wr], true, 0.0, da.as_mut_slice());
            if k == 0 {
                input_grad = Some(da);
                break;
            }
            let act = self.activations[k - 1];
            for i in 0..s {
                act.backprop_row(trace.pre[k - 1].row(i), trace.acts[k].row(i), da.row_mut(i));
            }
            delta = da;
        }
        Ok(Gradients {
            params: grad,
            input: input_grad,
        })
    }

    /// Squared Frobenius norm of the parameter Jacobian `d f(x) / d theta`, one
    /// value per input row.
    ///
    /// Uses one backward pass per output coordinate.
    pub fn grad_frobenius_sq(&self, input: &Matrix) -> Result<Vec<f64>> {
        let d = self.output_dim();
        let mut basis = Matrix::zeros(d, d);
        for j in 0..d {
            basis[(j, j)] = 1.0;
        }
        (0..input.rows())
            .map(|i| {
                let row = Matrix::from_vec(1, input.cols(), input.row(i).to_vec())?;
                self.jacobian_frobenius_sq_with(&row, |_| basis.clone())
            })
            .collect()
    }

    /// `sum_j || J^T u_j ||^2` for a single input row, where `J` is the
    /// parameter Jacobian of the output and the `u_j` are the rows returned by
    /// `directions` (given the row's output).
    ///
    /// With the identity as directions this is `||J||_F^2`; passing the rows
    /// of a post-processing Jacobian gives the Frobenius norm of the composed
    /// map.
    pub fn jacobian_frobenius_sq_with(&self, input_row: &Matrix, directions: impl FnOnce(&[f64]) -> Matrix) -> Result<f64> {
        if input_row.rows() != 1 {
            return Err(Error::config("expected a single input row"));
        }
        let trace = self.forward_trace(input_row)?;
        let dirs = directions(trace.output().row(0));
        let mut total = 0.0;
        for u in dirs.iter_rows() {
            let up = Matrix::from_vec(1, u.len(), u.to_vec())?;
            let g = self.backward_trace(&trace, &up, false)?.params;
            total += g.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(total)
    }
}

fn is_sparse(a: &Matrix) -> bool {
    if a.cols() < 8 {
        return false;
    }
    let zeros = a.as_slice().iter().filter(|v| **v == 0.0).count();
    zeros as f64 >= SPARSE_INPUT_ZERO_FRACTION * a.as_slice().len() as f64
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn param_layout_length() {
        assert_eq!(MlpNetwork::param_count(&[3, 5, 2]), 3 * 5 + 5 + 5 * 2 + 2);
        let net = MlpNetwork::zeros(&[3, 5, 2], &[Activation::Elu, Activation::Linear]).unwrap();
        assert_eq!(net.params().len(), 32);
        let (w, b) = net.layer_range(1);
        assert_eq!((w.start, w.end, b.start, b.end), (20, 30, 30, 32));
    }

    #[test]
    fn rejects_bad_architectures() {
        assert!(MlpNetwork::zeros(&[3], &[]).is_err());
        assert!(MlpNetwork::zeros(&[3, 0, 2], &[Activation::Relu, Activation::Linear]).is_err());
        assert!(MlpNetwork::zeros(&[3, 2], &[Activation::Relu, Activation::Linear]).is_err());
        assert!(MlpNetwork::zeros(&[3, 4, 2], &[Activation::Softmax, Activation::Linear]).is_err());
        assert!(MlpNetwork::with_params(&[1, 1], &[Activation::Linear], vec![0.0]).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = MlpNetwork::zeros(&[3, 4, 2], &[Activation::Elu, Activation::Linear]).unwrap();
        let x = Matrix::from_rows(&[[0.3, -1.0, 2.0], [5.0, 1.0, 0.0]]).unwrap();
        assert!(net.forward(&x).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_layer() {
        let net = MlpNetwork::with_params(&[2, 2], &[Activation::Linear], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let y = net.forward(&Matrix::from_rows(&[[0.3, 0.7]]).unwrap()).unwrap();
        assert_eq!(y.row(0), &[0.3, 0.7]);
    }

    #[test]
    fn symmetric_softmax() {
        let net = MlpNetwork::with_params(&[2, 2], &[Activation::Softmax], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let y = net.forward(&Matrix::from_rows(&[[0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(y.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn input_width_mismatch_is_config_error() {
        let net = MlpNetwork::zeros(&[3, 2], &[Activation::Linear]).unwrap();
        let err = net.forward(&Matrix::zeros(1, 2)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn scalar_chain_rule() {
        let net = MlpNetwork::with_params(&[1, 1], &[Activation::Linear], vec![0.5, 0.1]).unwrap();
        let g = net.backward(&Matrix::column(&[2.0]), &Matrix::column(&[1.0])).unwrap();
        assert_eq!(g, vec![2.0, 1.0]);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = SeedTree::new(1).stream("init");
        let net = MlpNetwork::glorot(&[3, 6, 4], &[Activation::Elu, Activation::Softmax], &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.3, -1.0, 2.0]]).unwrap();
        let g = net.backward(&x, &Matrix::zeros(1, 4)).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn upstream_shape_mismatch() {
        let net = MlpNetwork::zeros(&[3, 2], &[Activation::Linear]).unwrap();
        let x = Matrix::zeros(2, 3);
        assert!(net.backward(&x, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let mut rng = SeedTree::new(3).stream("init");
        let net = MlpNetwork::glorot(&[16, 5, 3], &[Activation::Elu, Activation::Linear], &mut rng).unwrap();
        let mut onehot = Matrix::zeros(3, 16);
        onehot[(0, 2)] = 1.0;
        onehot[(1, 15)] = 1.0;
        onehot[(2, 2)] = 1.0;
        assert!(is_sparse(&onehot));
        let sparse = net.forward(&onehot).unwrap();
        // Recompute each row by hand through the dense formula.
        let (w, b) = net.layer_range(0);
        let (w2, b2) = net.layer_range(1);
        let p = net.params();
        for i in 0..3 {
            let hot = onehot.row(i).iter().position(|v| *v == 1.0).unwrap();
            let h: Vec<f64> = (0..5).map(|j| Activation::Elu.value(p[w.start + hot * 5 + j] + p[b.start + j])).collect();
            for o in 0..3 {
                let z: f64 = (0..5).map(|j| h[j] * p[w2.start + j * 3 + o]).sum::<f64>() + p[b2.start + o];
                assert!((z - sparse[(i, o)]).abs() < 1e-12);
            }
        }
        let up = Matrix::from_vec(3, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9]).unwrap();
        let gs = net.backward(&onehot, &up).unwrap();
        // The one-hot batch written as a dense matrix with a tiny nonzero
        // entry pattern forces the dense path.
        let mut dense = onehot.clone();
        for v in dense.as_mut_slice() {
            if *v == 0.0 {
                *v = 1e-300;
            }
        }
        assert!(!is_sparse(&dense));
        let gd = net.backward(&dense, &up).unwrap();
        for (a, b) in gs.iter().zip(&gd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_rows_same_frobenius() {
        let mut rng = SeedTree::new(5).stream("init");
        let net = MlpNetwork::glorot(&[2, 4, 3], &[Activation::Relu, Activation::Linear], &mut rng).unwrap();
        let x = Matrix::from_rows(&[[0.4, -0.3], [0.4, -0.3]]).unwrap();
        let v = net.grad_frobenius_sq(&x).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn affine_frobenius_closed_form() {
        let net = MlpNetwork::zeros(&[3, 2], &[Activation::Linear]).unwrap();
        let x = [0.5, -1.5, 2.0];
        let v = net.grad_frobenius_sq(&Matrix::from_rows(&[x]).unwrap()).unwrap();
        let want = x.iter().map(|a| a * a).sum::<f64>() * 2.0 + 2.0;
        assert!((v[0] - want).abs() < 1e-12);
    }
}
