//! Per-layer derivative norms and their maxima.
//!
//! Three families of quantities, measured at a point `(W, x)`:
//! the ∞- and 2-norms of the sensitivity vectors `b^(l) = ∂f/∂α^(l)`,
//! the spectral norms of the layer Jacobians with respect to parameters and
//! inputs, and the (2,2,1)-norms of the three second-derivative tensors of
//! each layer. Their maxima (`q_inf`, `q_l`, `q_221`) are the ingredients
//! of the Hessian-norm bound in [`crate::analysis::hessian_bound`].
//!
//! All Jacobian norms use matrix-free power iteration; all tensor norms use
//! alternating ascent. Nothing wider than a layer's activation vector is
//! ever materialized.

use crate::activation::Activation;
use crate::autodiff::{ensure_smooth, gradient_seeded};
use crate::error::{Error, Result};
use crate::estimators::{
    spectral_norm_general, tensor221_norm, LinearOp, Order3Action, Tensor221Params,
};
use crate::linalg;
use crate::network::{
    lin_in_adj_into, lin_in_into, lin_param_adj_accum, lin_param_into, ForwardTrace, LayerGeom,
    NetworkSpec, Weights,
};
use crate::rng::CounterRng;
use alloc::vec;
use alloc::vec::Vec;

/// Estimator settings for [`layer_quantities`].
#[derive(Debug, Clone, Copy)]
pub struct QuantityParams {
    pub spectral_tol: f64,
    pub spectral_iters: usize,
    pub tensor: Tensor221Params,
    pub seed: u64,
}

impl Default for QuantityParams {
    fn default() -> Self {
        QuantityParams {
            spectral_tol: 1e-9,
            spectral_iters: 1000,
            tensor: Tensor221Params::default(),
            seed: 0x51,
        }
    }
}

/// Layer-wise norms and their maxima at one evaluation point.
#[derive(Debug, Clone)]
pub struct QQuantities {
    /// `max_l ‖b^(l)‖_∞`
    pub q_inf: f64,
    /// `max_l ‖∂α^(l)/∂w^(l)‖`
    pub q_l: f64,
    /// Max over the admissible products of parameter-Jacobian norms with
    /// the layer (2,2,1) tensor norms.
    pub q_221: f64,
    pub b_inf: Vec<f64>,
    pub b_two: Vec<f64>,
    pub jac_w: Vec<f64>,
    /// Input Jacobians; entry 0 is 0 (the input is not a dynamic variable).
    pub jac_in: Vec<f64>,
    pub t_ww: Vec<f64>,
    /// Mixed tensors; entry 0 is 0.
    pub t_wa: Vec<f64>,
    /// Input-input tensors; entry 0 is 0.
    pub t_aa: Vec<f64>,
}

struct LayerCtx<'a> {
    spec: &'a NetworkSpec,
    geom: &'a LayerGeom,
    act: Activation,
    pre: &'a [f64],
    input: &'a [f64],
    w: &'a [f64],
}

impl<'a> LayerCtx<'a> {
    fn p_len(&self) -> usize {
        self.geom.w_len + self.geom.b_len
    }
}

/// Jacobian of the layer output with respect to the layer parameters.
struct ParamJacobian<'a>(LayerCtx<'a>);

impl LinearOp for ParamJacobian<'_> {
    fn dim_in(&self) -> usize {
        self.0.p_len()
    }
    fn dim_out(&self) -> usize {
        self.0.geom.out_len
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.0;
        lin_param_into(c.spec, c.geom, &x[..c.geom.w_len], &x[c.geom.w_len..], c.input, out);
        for (o, &z) in out.iter_mut().zip(c.pre) {
            *o *= c.act.d1(z);
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let g: Vec<f64> = y.iter().zip(c.pre).map(|(&yi, &z)| yi * c.act.d1(z)).collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        let (w_part, b_part) = out.split_at_mut(c.geom.w_len);
        lin_param_adj_accum(c.spec, c.geom, &g, c.input, w_part, b_part);
    }
}

/// Jacobian of the layer output with respect to the layer input.
struct InputJacobian<'a>(LayerCtx<'a>);

impl LinearOp for InputJacobian<'_> {
    fn dim_in(&self) -> usize {
        self.0.geom.in_len
    }
    fn dim_out(&self) -> usize {
        self.0.geom.out_len
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.0;
        lin_in_into(c.spec, c.geom, c.w, x, out);
        for (o, &z) in out.iter_mut().zip(c.pre) {
            *o *= c.act.d1(z);
        }
        if c.geom.skip {
            linalg::axpy(1.0, x, out);
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let g: Vec<f64> = y.iter().zip(c.pre).map(|(&yi, &z)| yi * c.act.d1(z)).collect();
        lin_in_adj_into(c.spec, c.geom, c.w, &g, out);
        if c.geom.skip {
            linalg::axpy(1.0, y, out);
        }
    }
}

// The three second-derivative tensors of a layer, exposed through their
// bilinear contractions. Axis 3 (the summed one) is always the layer output
// axis; the preactivation is linear in the parameters, so curvature enters
// only through σ''. The identity skip of residual layers is linear and
// contributes nothing here.

/// `T[p1][p2][i] = ∂²α_i / ∂w_{p1} ∂w_{p2}` — parameter/parameter.
struct TensorWw<'a>(LayerCtx<'a>);

impl Order3Action for TensorWw<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.0.p_len(), self.0.p_len(), self.0.geom.out_len)
    }
    fn contract_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut du = vec![0.0; c.geom.out_len];
        lin_param_into(c.spec, c.geom, &x[..c.geom.w_len], &x[c.geom.w_len..], c.input, &mut du);
        lin_param_into(c.spec, c.geom, &z[..c.geom.w_len], &z[c.geom.w_len..], c.input, out);
        for i in 0..c.geom.out_len {
            out[i] *= c.act.d2(c.pre[i]) * du[i];
        }
    }
    fn adjoint_x_into(&self, s: &[f64], z: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut dz = vec![0.0; c.geom.out_len];
        lin_param_into(c.spec, c.geom, &z[..c.geom.w_len], &z[c.geom.w_len..], c.input, &mut dz);
        for i in 0..c.geom.out_len {
            dz[i] *= c.act.d2(c.pre[i]) * s[i];
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let (w_part, b_part) = out.split_at_mut(c.geom.w_len);
        lin_param_adj_accum(c.spec, c.geom, &dz, c.input, w_part, b_part);
    }
    fn adjoint_z_into(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        // symmetric in its two probe arguments
        self.adjoint_x_into(s, x, out);
    }
}

/// `T[j][p][i] = ∂²α_i / ∂α_j ∂w_p` — input/parameter. Two terms: curvature
/// through σ'' and the direct bilinearity of the preactivation in (W, α).
struct TensorWa<'a>(LayerCtx<'a>);

impl Order3Action for TensorWa<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.0.geom.in_len, self.0.p_len(), self.0.geom.out_len)
    }
    fn contract_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut wu = vec![0.0; c.geom.out_len];
        lin_in_into(c.spec, c.geom, c.w, x, &mut wu);
        let mut dp = vec![0.0; c.geom.out_len];
        lin_param_into(c.spec, c.geom, &z[..c.geom.w_len], &z[c.geom.w_len..], c.input, &mut dp);
        // direct term: the parameter direction's weight block acting on x
        lin_in_into(c.spec, c.geom, &z[..c.geom.w_len], x, out);
        for i in 0..c.geom.out_len {
            out[i] = c.act.d2(c.pre[i]) * wu[i] * dp[i] + c.act.d1(c.pre[i]) * out[i];
        }
    }
    fn adjoint_x_into(&self, s: &[f64], z: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut dp = vec![0.0; c.geom.out_len];
        lin_param_into(c.spec, c.geom, &z[..c.geom.w_len], &z[c.geom.w_len..], c.input, &mut dp);
        for i in 0..c.geom.out_len {
            dp[i] *= c.act.d2(c.pre[i]) * s[i];
        }
        lin_in_adj_into(c.spec, c.geom, c.w, &dp, out);
        let g1: Vec<f64> = s.iter().zip(c.pre).map(|(&si, &z0)| si * c.act.d1(z0)).collect();
        let mut direct = vec![0.0; c.geom.in_len];
        lin_in_adj_into(c.spec, c.geom, &z[..c.geom.w_len], &g1, &mut direct);
        linalg::axpy(1.0, &direct, out);
    }
    fn adjoint_z_into(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut wu = vec![0.0; c.geom.out_len];
        lin_in_into(c.spec, c.geom, c.w, x, &mut wu);
        for i in 0..c.geom.out_len {
            wu[i] *= c.act.d2(c.pre[i]) * s[i];
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        {
            let (w_part, b_part) = out.split_at_mut(c.geom.w_len);
            lin_param_adj_accum(c.spec, c.geom, &wu, c.input, w_part, b_part);
        }
        let g1: Vec<f64> = s.iter().zip(c.pre).map(|(&si, &z0)| si * c.act.d1(z0)).collect();
        let (w_part, _) = out.split_at_mut(c.geom.w_len);
        lin_param_adj_accum(c.spec, c.geom, &g1, x, w_part, &mut []);
    }
}

/// `T[j][k][i] = ∂²α_i / ∂α_j ∂α_k` — input/input.
struct TensorAa<'a>(LayerCtx<'a>);

impl Order3Action for TensorAa<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.0.geom.in_len, self.0.geom.in_len, self.0.geom.out_len)
    }
    fn contract_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut wu = vec![0.0; c.geom.out_len];
        lin_in_into(c.spec, c.geom, c.w, x, &mut wu);
        lin_in_into(c.spec, c.geom, c.w, z, out);
        for i in 0..c.geom.out_len {
            out[i] *= c.act.d2(c.pre[i]) * wu[i];
        }
    }
    fn adjoint_x_into(&self, s: &[f64], z: &[f64], out: &mut [f64]) {
        let c = &self.0;
        let mut wz = vec![0.0; c.geom.out_len];
        lin_in_into(c.spec, c.geom, c.w, z, &mut wz);
        for i in 0..c.geom.out_len {
            wz[i] *= c.act.d2(c.pre[i]) * s[i];
        }
        lin_in_adj_into(c.spec, c.geom, c.w, &wz, out);
    }
    fn adjoint_z_into(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        self.adjoint_x_into(s, x, out);
    }
}

/// Measure all layer quantities at `(W, x)` for the given output
/// coordinate. The sensitivities are those of the linear-head output (the
/// body), which is where these quantities are defined.
pub fn layer_quantities(
    spec: &NetworkSpec,
    w: &Weights,
    trace: &ForwardTrace,
    out_index: usize,
    params: &QuantityParams,
) -> Result<QQuantities> {
    ensure_smooth(spec)?;
    if out_index >= spec.output_dim {
        return Err(Error::DimensionMismatch {
            what: "output index",
            expected: spec.output_dim,
            got: out_index,
        });
    }
    let layout = spec.layout();
    let n_layers = spec.layers.len();
    let mut seed = vec![0.0; spec.output_dim];
    seed[out_index] = 1.0;
    let bundle = gradient_seeded(spec, w, trace, &seed);

    let mut q = QQuantities {
        q_inf: 0.0,
        q_l: 0.0,
        q_221: 0.0,
        b_inf: vec![0.0; n_layers],
        b_two: vec![0.0; n_layers],
        jac_w: vec![0.0; n_layers],
        jac_in: vec![0.0; n_layers],
        t_ww: vec![0.0; n_layers],
        t_wa: vec![0.0; n_layers],
        t_aa: vec![0.0; n_layers],
    };

    for l in 0..n_layers {
        q.b_inf[l] = linalg::norm_inf(&bundle.sensitivities[l]);
        q.b_two[l] = linalg::norm2(&bundle.sensitivities[l]);
        let ctx = || LayerCtx {
            spec,
            geom: &layout.layers[l],
            act: spec.layers[l].activation,
            pre: &trace.preacts[l],
            input: if l == 0 { &trace.input } else { &trace.acts[l - 1] },
            w: &w.data[layout.layers[l].w_off..layout.layers[l].w_off + layout.layers[l].w_len],
        };
        let mut rng = CounterRng::new(params.seed, (l as u64) << 3);
        q.jac_w[l] =
            spectral_norm_general(&ParamJacobian(ctx()), params.spectral_tol, params.spectral_iters, &mut rng)
                .value;
        let trng = CounterRng::new(params.seed, ((l as u64) << 3) | 1);
        q.t_ww[l] = tensor221_norm(&TensorWw(ctx()), params.tensor, &trng);
        if l > 0 {
            let mut rng2 = CounterRng::new(params.seed, ((l as u64) << 3) | 2);
            q.jac_in[l] = spectral_norm_general(
                &InputJacobian(ctx()),
                params.spectral_tol,
                params.spectral_iters,
                &mut rng2,
            )
            .value;
            let trng2 = CounterRng::new(params.seed, ((l as u64) << 3) | 3);
            q.t_wa[l] = tensor221_norm(&TensorWa(ctx()), params.tensor, &trng2);
            let trng3 = CounterRng::new(params.seed, ((l as u64) << 3) | 4);
            q.t_aa[l] = tensor221_norm(&TensorAa(ctx()), params.tensor, &trng3);
        }
    }

    q.q_inf = q.b_inf.iter().fold(0.0, |a: f64, &b| a.max(b));
    q.q_l = q.jac_w.iter().fold(0.0, |a: f64, &b| a.max(b));
    // Running max of earlier parameter-Jacobian norms: the product terms
    // combine tensors of layer l with Jacobians of layers at or before l-1.
    let mut q221 = q.t_ww.iter().fold(0.0, |a: f64, &b| a.max(b));
    let mut jmax = q.jac_w[0];
    for l in 1..n_layers {
        q221 = q221.max(jmax * q.t_wa[l]);
        q221 = q221.max(jmax * jmax * q.t_aa[l]);
        jmax = jmax.max(q.jac_w[l]);
    }
    q.q_221 = q221;
    Ok(q)
}
