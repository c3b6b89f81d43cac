//! Tangent kernel matrices and their change along training.

use crate::autodiff::{back_signals, gradient, head_jacobian_row};
use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::network::{forward, NetworkSpec, Weights};
use alloc::vec;
use alloc::vec::Vec;

/// Gram matrix of model-output gradients over a dataset: entry
/// `[(i,a),(j,b)] = ∇_W f_a(W; x_i) · ∇_W f_b(W; x_j)`, size `nC x nC`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub n: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.n * self.c
    }

    #[inline]
    pub fn entry(&self, i: usize, a: usize, j: usize, b: usize) -> f64 {
        self.data[(i * self.c + a) * self.dim() + (j * self.c + b)]
    }

    pub fn trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|r| self.data[r * d + r]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Squared gradient Frobenius norm of sample `i`: `Σ_a ‖∇f_a(x_i)‖²`.
    pub fn grad_sq(&self, i: usize) -> f64 {
        (0..self.c).map(|a| self.entry(i, a, i, a)).sum()
    }

    pub fn sub_scaled(&self, other: &KernelMatrix) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        math::sqrt(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| (x - y) * (x - y))
                .sum(),
        )
    }
}

/// Tangent kernel of the model (output head included) over a set of inputs.
///
/// Architectures without convolutions use the factored path: per-layer
/// parameter gradients are rank-one (`g ⊗ input`), so each layer's Gram
/// block is an inner product of backward signals times an inner product of
/// cached activations, and no flat gradient is ever formed. Convolutional
/// specs fall back to explicit stacked gradients.
pub fn tangent_kernel(spec: &NetworkSpec, w: &Weights, inputs: &[Vec<f64>]) -> Result<KernelMatrix> {
    if inputs.is_empty() {
        return Err(Error::Empty { what: "kernel inputs" });
    }
    if spec.has_conv() {
        tangent_kernel_dense(spec, w, inputs)
    } else {
        tangent_kernel_factored(spec, w, inputs)
    }
}

fn tangent_kernel_dense(spec: &NetworkSpec, w: &Weights, inputs: &[Vec<f64>]) -> Result<KernelMatrix> {
    let n = inputs.len();
    let c = spec.output_dim;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n * c);
    for x in inputs {
        let tr = forward(spec, w, x)?;
        for a in 0..c {
            grads.push(gradient(spec, w, &tr, a)?.flat);
        }
    }
    let d = n * c;
    let mut data = vec![0.0; d * d];
    for r in 0..d {
        for s in r..d {
            let v = linalg::dot(&grads[r], &grads[s]);
            data[r * d + s] = v;
            data[s * d + r] = v;
        }
    }
    Ok(KernelMatrix { n, c, data })
}

fn tangent_kernel_factored(spec: &NetworkSpec, w: &Weights, inputs: &[Vec<f64>]) -> Result<KernelMatrix> {
    let n = inputs.len();
    let c = spec.output_dim;
    let n_layers = spec.layers.len();
    let layout = spec.layout();
    let d = n * c;

    // Forward traces and per-(sample, coordinate) backward signal chains.
    let mut traces = Vec::with_capacity(n);
    for x in inputs {
        traces.push(forward(spec, w, x)?);
    }
    let mut seeds: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut gsig: Vec<Vec<Vec<f64>>> = Vec::with_capacity(d); // [row][layer]
    for (i, tr) in traces.iter().enumerate() {
        for a in 0..c {
            let seed = head_jacobian_row(spec, &tr.body_out, a);
            gsig.push(back_signals(spec, w, tr, &seed));
            seeds.push(seed);
        }
        let _ = i;
    }

    // Per-layer input Grams (scaled) shared by all coordinate pairs.
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    for (l, geom) in layout.layers.iter().enumerate() {
        let scale = spec.forward_scale(geom);
        let bias = if geom.b_len > 0 { 1.0 } else { 0.0 };
        let mut f = vec![0.0; n * n];
        for i in 0..n {
            let xi: &[f64] = if l == 0 { &traces[i].input } else { &traces[i].acts[l - 1] };
            for j in i..n {
                let xj: &[f64] = if l == 0 { &traces[j].input } else { &traces[j].acts[l - 1] };
                let v = scale * scale * linalg::dot(xi, xj) + bias;
                f[i * n + j] = v;
                f[j * n + i] = v;
            }
        }
        factors.push(f);
    }
    let s_out = spec.forward_scale_out(&layout);
    let mut out_gram = vec![0.0; n * n];
    if layout.out_off.is_some() {
        for i in 0..n {
            let ai = &traces[i].acts[n_layers - 1];
            for j in i..n {
                let v = s_out * s_out * linalg::dot(ai, &traces[j].acts[n_layers - 1]);
                out_gram[i * n + j] = v;
                out_gram[j * n + i] = v;
            }
        }
    }

    let mut data = vec![0.0; d * d];
    for r in 0..d {
        let (i, _a) = (r / c, r % c);
        for s in r..d {
            let (j, _b) = (s / c, s % c);
            let mut acc = 0.0;
            for l in 0..n_layers {
                acc += linalg::dot(&gsig[r][l], &gsig[s][l]) * factors[l][i * n + j];
            }
            if layout.out_off.is_some() {
                acc += linalg::dot(&seeds[r], &seeds[s]) * out_gram[i * n + j];
            }
            data[r * d + s] = acc;
            data[s * d + r] = acc;
        }
    }
    Ok(KernelMatrix { n, c, data })
}

/// Max relative Frobenius change of the kernel from the first snapshot:
/// `max_{t>=1} ‖K_t − K_0‖_F / ‖K_0‖_F`.
pub fn delta_k(snapshots: &[KernelMatrix]) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::Empty { what: "kernel snapshot list (need >= 2)" });
    }
    let k0 = &snapshots[0];
    let base = k0.frobenius_norm();
    if base == 0.0 {
        return Err(Error::ZeroNorm { what: "initial kernel" });
    }
    let mut worst = 0.0_f64;
    for k in &snapshots[1..] {
        if k.data.len() != k0.data.len() {
            return Err(Error::DimensionMismatch {
                what: "kernel snapshot",
                expected: k0.data.len(),
                got: k.data.len(),
            });
        }
        worst = worst.max(k.sub_scaled(k0) / base);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::network::{init_weights, zero_weights, LayerKind, LayerSpec, NetworkSpec, OutputHead};
    use crate::quadrature;

    #[test]
    fn factored_path_equals_stacked_gradient_gram() {
        let specs = [
            NetworkSpec::fully_connected(2, &[12, 12], Activation::Tanh, OutputHead::Linear, 1),
            NetworkSpec::experiment_shallow(10, Activation::Tanh, OutputHead::Softmax),
            NetworkSpec::experiment_shallow(10, Activation::Sigmoid, OutputHead::Activated(Activation::Swish)),
            NetworkSpec::shallow(2, 14, Activation::Tanh),
            NetworkSpec {
                layers: vec![
                    LayerSpec { kind: LayerKind::FullyConnected { width: 9, bias: false }, activation: Activation::Tanh },
                    LayerSpec { kind: LayerKind::Residual { width: 9 }, activation: Activation::Tanh },
                ],
                ..NetworkSpec::fully_connected(2, &[9], Activation::Tanh, OutputHead::Linear, 2)
            },
        ];
        for (si, spec) in specs.iter().enumerate() {
            let w = init_weights(spec, si as u64);
            let inputs: Vec<Vec<f64>> = (0..4)
                .map(|i| (0..spec.input_dim).map(|j| 0.3 * (i as f64 - 1.5) + 0.1 * j as f64).collect())
                .collect();
            let fast = tangent_kernel_factored(spec, &w, &inputs).unwrap();
            let dense = tangent_kernel_dense(spec, &w, &inputs).unwrap();
            for (x, y) in fast.data.iter().zip(&dense.data) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "spec {si}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn kernel_at_zero_input_vanishes_for_shallow_net() {
        // Shallow gradients are proportional to x, so K_(0,0) = 0.
        let spec = NetworkSpec::shallow(1, 32, Activation::Tanh);
        let w = init_weights(&spec, 3);
        let k = tangent_kernel(&spec, &w, &[vec![0.0]]).unwrap();
        assert_eq!(k.entry(0, 0, 0, 0), 0.0);
    }

    #[test]
    fn wide_shallow_diagonal_approaches_gaussian_expectation() {
        // K_(x,x) -> x^2 E_w[σ'(w x)^2] as the width grows.
        let x = 1.0;
        let spec = NetworkSpec::shallow(1, 100_000, Activation::Tanh);
        let w = init_weights(&spec, 1);
        let k = tangent_kernel(&spec, &w, &[vec![x]]).unwrap();
        let limit = x * x * quadrature::gauss_normal_expectation(80, |wv| {
            let d = Activation::Tanh.d1(wv * x);
            d * d
        });
        let rel = (k.entry(0, 0, 0, 0) - limit).abs() / limit;
        assert!(rel < 0.05, "kernel {} vs limit {} (rel {rel})", k.entry(0, 0, 0, 0), limit);
    }

    #[test]
    fn kernel_is_symmetric_and_psd() {
        let spec = NetworkSpec::experiment_shallow(12, Activation::Tanh, OutputHead::Softmax);
        let w = init_weights(&spec, 8);
        let inputs: Vec<Vec<f64>> = (0..5).map(|i| vec![2.0 * i as f64 - 4.0]).collect();
        let k = tangent_kernel(&spec, &w, &inputs).unwrap();
        let d = k.dim();
        for r in 0..d {
            for s in 0..d {
                assert_eq!(k.data[r * d + s], k.data[s * d + r]);
            }
        }
        // PSD via nalgebra eigenvalues
        let m = nalgebra::DMatrix::from_row_slice(d, d, &k.data);
        let eig = m.symmetric_eigenvalues();
        let tr = k.trace();
        for e in eig.iter() {
            assert!(*e >= -1e-8 * tr, "eigenvalue {e} below PSD tolerance (trace {tr})");
        }
    }

    #[test]
    fn nonlinear_head_diagonal_is_phi_prime_squared_times_body_diagonal() {
        let body = NetworkSpec::experiment_shallow(20, Activation::Tanh, OutputHead::Linear);
        let headed = NetworkSpec { head: OutputHead::Activated(Activation::Swish), ..body.clone() };
        let w = init_weights(&body, 5);
        let x = vec![1.2];
        let kb = tangent_kernel(&body, &w, &[x.clone()]).unwrap();
        let kh = tangent_kernel(&headed, &w, &[x.clone()]).unwrap();
        let tr = forward(&headed, &w, &x).unwrap();
        for a in 0..3 {
            let phi_p = Activation::Swish.d1(tr.body_out[a]);
            let expected = phi_p * phi_p * kb.entry(0, a, 0, a);
            let got = kh.entry(0, a, 0, a);
            assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1e-12));
        }
    }

    #[test]
    fn delta_k_hand_example_and_edge_cases() {
        let mk = |v: f64| KernelMatrix { n: 1, c: 1, data: vec![v] };
        // identical snapshots -> 0
        assert_eq!(delta_k(&[mk(2.0), mk(2.0), mk(2.0)]).unwrap(), 0.0);
        // K0=1, K1=1.5, K2=1.2 -> sup = 0.5
        let d = delta_k(&[mk(1.0), mk(1.5), mk(1.2)]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        // zero initial kernel is an error
        assert!(delta_k(&[mk(0.0), mk(1.0)]).is_err());
        // fewer than two snapshots is an error
        assert!(delta_k(&[mk(1.0)]).is_err());
    }

    #[test]
    fn model_rescaling_scales_kernel_quadratically() {
        // Scaling every output weight by c scales gradients by c and the
        // kernel by c^2 for the linear-head shallow construction.
        let spec = NetworkSpec::shallow(1, 24, Activation::Tanh);
        let mut w = init_weights(&spec, 12);
        let inputs = vec![vec![0.7], vec![-0.3]];
        let k1 = tangent_kernel(&spec, &w, &inputs).unwrap();
        let cscale = 3.0;
        if let Some(v) = w.fixed_output.as_mut() {
            v.iter_mut().for_each(|s| *s *= cscale);
        }
        let k2 = tangent_kernel(&spec, &w, &inputs).unwrap();
        for (a, b) in k1.data.iter().zip(&k2.data) {
            assert!((cscale * cscale * a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn zero_weights_zero_kernel_matches_zero_norm_error_path() {
        let spec = NetworkSpec::shallow(1, 8, Activation::Tanh);
        let w = zero_weights(&spec);
        // tanh'(0) = 1 so the kernel is NOT zero even at zero weights; this
        // guards the distinction vs the zero-input case.
        let k = tangent_kernel(&spec, &w, &[vec![1.0]]).unwrap();
        assert!(k.entry(0, 0, 0, 0) > 0.0);
    }
}
