//! Exact first- and second-order derivative propagation.
//!
//! Gradients come from one reverse pass driven by a seed vector on the
//! linear-head output; the seed encodes the output coordinate and, for
//! nonlinear heads, the head's Jacobian row. Hessian-vector products come
//! from differentiating the reverse pass along a parameter direction
//! (forward-over-reverse), which is exact to machine precision and costs
//! about two backward passes.

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{
    lin_in_adj_into, lin_in_into, lin_param_adj_accum, lin_param_into, softmax, ForwardTrace,
    NetworkSpec, OutputHead, Weights,
};
use alloc::vec;
use alloc::vec::Vec;

/// Gradient of one model output coordinate with respect to all trainable
/// parameters, plus the per-layer sensitivity vectors `∂out/∂α^(l)`.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    /// Flat gradient in canonical parameter order.
    pub flat: Vec<f64>,
    /// `sensitivities[l]` is the derivative of the seeded output with
    /// respect to the layer-`l` activations (0-based layers).
    pub sensitivities: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn norm2(&self) -> f64 {
        linalg::norm2(&self.flat)
    }
}

/// Row `a` of the output head's Jacobian, as a seed for the reverse pass.
pub fn head_jacobian_row(spec: &NetworkSpec, body_out: &[f64], a: usize) -> Vec<f64> {
    let c = spec.output_dim;
    let mut row = vec![0.0; c];
    match spec.head {
        OutputHead::Linear => row[a] = 1.0,
        OutputHead::Activated(act) => row[a] = act.d1(body_out[a]),
        OutputHead::Softmax => {
            let p = softmax(body_out);
            for (b, r) in row.iter_mut().enumerate() {
                *r = p[a] * (if a == b { 1.0 } else { 0.0 } - p[b]);
            }
        }
    }
    row
}

/// Directional derivative of `head_jacobian_row(·, a)` along a body-output
/// tangent `dbody`. Zero for a linear head.
pub fn head_jacobian_row_tangent(
    spec: &NetworkSpec,
    body_out: &[f64],
    a: usize,
    dbody: &[f64],
) -> Vec<f64> {
    let c = spec.output_dim;
    let mut row = vec![0.0; c];
    match spec.head {
        OutputHead::Linear => {}
        OutputHead::Activated(act) => row[a] = act.d2(body_out[a]) * dbody[a],
        OutputHead::Softmax => {
            // ∂²p_a/∂z_b∂z_c = p_a[(δ_ab−p_b)(δ_ac−p_c) − p_b(δ_bc−p_c)]
            let p = softmax(body_out);
            let pdot: f64 = p.iter().zip(dbody).map(|(pi, di)| pi * di).sum();
            for (b, r) in row.iter_mut().enumerate() {
                let dab = if a == b { 1.0 } else { 0.0 };
                *r = p[a] * ((dab - p[b]) * (dbody[a] - pdot) - p[b] * (dbody[b] - pdot));
            }
        }
    }
    row
}

/// Reverse pass for the scalar `seed · body_out`, treating the seed as a
/// constant. This is the workhorse behind both model gradients and loss
/// gradients.
pub fn gradient_seeded(
    spec: &NetworkSpec,
    w: &Weights,
    trace: &ForwardTrace,
    seed: &[f64],
) -> GradientBundle {
    let layout = spec.layout();
    let n_layers = spec.layers.len();
    let s_out = spec.forward_scale_out(&layout);
    let v = w.output_slice(&layout);
    let mut flat = vec![0.0; layout.total];
    let mut sensitivities = vec![Vec::new(); n_layers];

    // Output layer: gradient block and the last sensitivity vector.
    let act_last = &trace.acts[n_layers - 1];
    if let Some(off) = layout.out_off {
        for (a, &ca) in seed.iter().enumerate() {
            if ca != 0.0 {
                let row = &mut flat[off + a * layout.last_len..off + (a + 1) * layout.last_len];
                linalg::axpy(s_out * ca, act_last, row);
            }
        }
    }
    let mut b = vec![0.0; layout.last_len];
    linalg::matvec_t(v, spec.output_dim, layout.last_len, seed, s_out, &mut b);
    sensitivities[n_layers - 1] = b.clone();

    let mut g = Vec::new();
    for l in (0..n_layers).rev() {
        let geom = &layout.layers[l];
        let act = spec.layers[l].activation;
        g.clear();
        g.extend(trace.preacts[l].iter().zip(&b).map(|(&z, &bi)| act.d1(z) * bi));
        let input: &[f64] = if l == 0 { &trace.input } else { &trace.acts[l - 1] };
        let (w_slice, rest) = {
            let (w_part, b_part) = flat.split_at_mut(geom.b_off);
            (&mut w_part[geom.w_off..], &mut b_part[..geom.b_len])
        };
        lin_param_adj_accum(spec, geom, &g, input, w_slice, rest);
        if l > 0 {
            let mut b_prev = vec![0.0; geom.in_len];
            lin_in_adj_into(spec, geom, &w.data[geom.w_off..geom.w_off + geom.w_len], &g, &mut b_prev);
            if geom.skip {
                linalg::axpy(1.0, &b, &mut b_prev);
            }
            b = b_prev;
            sensitivities[l - 1] = b.clone();
        }
    }
    GradientBundle { flat, sensitivities }
}

/// Exact reverse-mode gradient of the `out_index`-th model output (head
/// included). First derivatives are well-defined almost everywhere, so relu
/// specs are accepted here.
pub fn gradient(
    spec: &NetworkSpec,
    w: &Weights,
    trace: &ForwardTrace,
    out_index: usize,
) -> Result<GradientBundle> {
    if out_index >= spec.output_dim {
        return Err(Error::DimensionMismatch {
            what: "output index",
            expected: spec.output_dim,
            got: out_index,
        });
    }
    let seed = head_jacobian_row(spec, &trace.body_out, out_index);
    Ok(gradient_seeded(spec, w, trace, &seed))
}

/// Per-layer backward signals `g^(l) = σ'(pre^(l)) ⊙ b^(l)` for a given
/// seed, without assembling a flat gradient. These are exactly the left
/// factors of the rank-one per-layer parameter gradients, which is what the
/// structured tangent-kernel path consumes.
pub(crate) fn back_signals(
    spec: &NetworkSpec,
    w: &Weights,
    trace: &ForwardTrace,
    seed: &[f64],
) -> Vec<Vec<f64>> {
    let layout = spec.layout();
    let n_layers = spec.layers.len();
    let s_out = spec.forward_scale_out(&layout);
    let v = w.output_slice(&layout);
    let mut b = vec![0.0; layout.last_len];
    linalg::matvec_t(v, spec.output_dim, layout.last_len, seed, s_out, &mut b);
    let mut gs = vec![Vec::new(); n_layers];
    for l in (0..n_layers).rev() {
        let geom = &layout.layers[l];
        let act = spec.layers[l].activation;
        let g: Vec<f64> = trace.preacts[l].iter().zip(&b).map(|(&z, &bi)| act.d1(z) * bi).collect();
        if l > 0 {
            let mut b_prev = vec![0.0; geom.in_len];
            lin_in_adj_into(spec, geom, &w.data[geom.w_off..geom.w_off + geom.w_len], &g, &mut b_prev);
            if geom.skip {
                linalg::axpy(1.0, &b, &mut b_prev);
            }
            b = b_prev;
        }
        gs[l] = g;
    }
    gs
}

fn require_smooth(spec: &NetworkSpec) -> Result<()> {
    for layer in &spec.layers {
        if !layer.activation.is_smooth() {
            return Err(Error::NonSmooth { activation: layer.activation.name() });
        }
    }
    if let OutputHead::Activated(a) = spec.head {
        if !a.is_smooth() {
            return Err(Error::NonSmooth { activation: a.name() });
        }
    }
    Ok(())
}

/// Hessian-vector product of the scalar `seed · body_out` (seed constant),
/// by forward-over-reverse propagation. Also returns the body-output
/// tangent, which head-aware callers need.
pub fn hvp_seeded(
    spec: &NetworkSpec,
    w: &Weights,
    trace: &ForwardTrace,
    seed: &[f64],
    dir: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let layout = spec.layout();
    let n_layers = spec.layers.len();
    let s_out = spec.forward_scale_out(&layout);
    let v = w.output_slice(&layout);
    debug_assert_eq!(dir.len(), layout.total);

    // Tangent of the forward pass along `dir`.
    let mut dpres: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut dacts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    for (l, geom) in layout.layers.iter().enumerate() {
        let input: &[f64] = if l == 0 { &trace.input } else { &trace.acts[l - 1] };
        let mut dpre = vec![0.0; geom.out_len];
        lin_param_into(
            spec,
            geom,
            &dir[geom.w_off..geom.w_off + geom.w_len],
            &dir[geom.b_off..geom.b_off + geom.b_len],
            input,
            &mut dpre,
        );
        if l > 0 {
            let mut from_input = vec![0.0; geom.out_len];
            lin_in_into(
                spec,
                geom,
                &w.data[geom.w_off..geom.w_off + geom.w_len],
                &dacts[l - 1],
                &mut from_input,
            );
            linalg::axpy(1.0, &from_input, &mut dpre);
        }
        let act = spec.layers[l].activation;
        let mut dact: Vec<f64> = trace.preacts[l]
            .iter()
            .zip(&dpre)
            .map(|(&z, &dz)| act.d1(z) * dz)
            .collect();
        if geom.skip && l > 0 {
            let prev = dacts[l - 1].clone();
            linalg::axpy(1.0, &prev, &mut dact);
        }
        dpres.push(dpre);
        dacts.push(dact);
    }
    let act_last = &trace.acts[n_layers - 1];
    let dact_last = &dacts[n_layers - 1];
    let mut dbody = vec![0.0; spec.output_dim];
    linalg::matvec(v, spec.output_dim, layout.last_len, dact_last, s_out, &mut dbody);
    if let Some(off) = layout.out_off {
        let mut from_dv = vec![0.0; spec.output_dim];
        linalg::matvec(
            &dir[off..off + layout.out_len],
            spec.output_dim,
            layout.last_len,
            act_last,
            s_out,
            &mut from_dv,
        );
        linalg::axpy(1.0, &from_dv, &mut dbody);
    }

    // Reverse pass carrying (b, db).
    let mut out = vec![0.0; layout.total];
    let mut b = vec![0.0; layout.last_len];
    linalg::matvec_t(v, spec.output_dim, layout.last_len, seed, s_out, &mut b);
    let mut db = vec![0.0; layout.last_len];
    if let Some(off) = layout.out_off {
        linalg::matvec_t(
            &dir[off..off + layout.out_len],
            spec.output_dim,
            layout.last_len,
            seed,
            s_out,
            &mut db,
        );
        // Tangent of the output-layer gradient block s_out·seed⊗α^(L).
        for (a, &ca) in seed.iter().enumerate() {
            if ca != 0.0 {
                let row = &mut out[off + a * layout.last_len..off + (a + 1) * layout.last_len];
                linalg::axpy(s_out * ca, dact_last, row);
            }
        }
    }

    for l in (0..n_layers).rev() {
        let geom = &layout.layers[l];
        let act = spec.layers[l].activation;
        let pre = &trace.preacts[l];
        let g: Vec<f64> = pre.iter().zip(&b).map(|(&z, &bi)| act.d1(z) * bi).collect();
        let dg: Vec<f64> = (0..geom.out_len)
            .map(|i| act.d2(pre[i]) * dpres[l][i] * b[i] + act.d1(pre[i]) * db[i])
            .collect();
        let input: &[f64] = if l == 0 { &trace.input } else { &trace.acts[l - 1] };
        {
            let (w_part, b_part) = out.split_at_mut(geom.b_off);
            let w_slice = &mut w_part[geom.w_off..];
            let b_slice = &mut b_part[..geom.b_len];
            // d[g ⊗ input] = dg ⊗ input + g ⊗ dinput; the bias block's
            // tangent is dg alone, so the second call skips it.
            lin_param_adj_accum(spec, geom, &dg, input, w_slice, b_slice);
            if l > 0 {
                lin_param_adj_accum(spec, geom, &g, &dacts[l - 1], w_slice, &mut []);
            }
        }
        if l > 0 {
            let w_slice = &w.data[geom.w_off..geom.w_off + geom.w_len];
            let mut b_prev = vec![0.0; geom.in_len];
            lin_in_adj_into(spec, geom, w_slice, &g, &mut b_prev);
            let mut db_prev = vec![0.0; geom.in_len];
            lin_in_adj_into(spec, geom, &dir[geom.w_off..geom.w_off + geom.w_len], &g, &mut db_prev);
            let mut tmp = vec![0.0; geom.in_len];
            lin_in_adj_into(spec, geom, w_slice, &dg, &mut tmp);
            linalg::axpy(1.0, &tmp, &mut db_prev);
            if geom.skip {
                linalg::axpy(1.0, &b, &mut b_prev);
                linalg::axpy(1.0, &db, &mut db_prev);
            }
            b = b_prev;
            db = db_prev;
        }
    }
    (out, dbody)
}

/// Hessian-vector product `H·dir` of the `out_index`-th model output (head
/// included). Requires twice-differentiable activations; relu specs are
/// rejected.
pub fn hvp(
    spec: &NetworkSpec,
    w: &Weights,
    trace: &ForwardTrace,
    out_index: usize,
    dir: &[f64],
) -> Result<Vec<f64>> {
    require_smooth(spec)?;
    if out_index >= spec.output_dim {
        return Err(Error::DimensionMismatch {
            what: "output index",
            expected: spec.output_dim,
            got: out_index,
        });
    }
    let layout = spec.layout();
    if dir.len() != layout.total {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: layout.total,
            got: dir.len(),
        });
    }
    let seed = head_jacobian_row(spec, &trace.body_out, out_index);
    let (mut hv, dbody) = hvp_seeded(spec, w, trace, &seed, dir);
    // Head curvature: d(seed)·∇body adds rank-one terms per body gradient.
    let dseed = head_jacobian_row_tangent(spec, &trace.body_out, out_index, &dbody);
    match spec.head {
        OutputHead::Linear => {}
        OutputHead::Activated(_) => {
            if dseed[out_index] != 0.0 {
                let mut e = vec![0.0; spec.output_dim];
                e[out_index] = 1.0;
                let grad = gradient_seeded(spec, w, trace, &e);
                linalg::axpy(dseed[out_index], &grad.flat, &mut hv);
            }
        }
        OutputHead::Softmax => {
            for (b_idx, &coef) in dseed.iter().enumerate() {
                if coef != 0.0 {
                    let mut e = vec![0.0; spec.output_dim];
                    e[b_idx] = 1.0;
                    let grad = gradient_seeded(spec, w, trace, &e);
                    linalg::axpy(coef, &grad.flat, &mut hv);
                }
            }
        }
    }
    Ok(hv)
}

/// `σ''` sanity guard shared by the second-order entry points in other
/// modules.
pub(crate) fn ensure_smooth(spec: &NetworkSpec) -> Result<()> {
    require_smooth(spec)
}
