//! Headline spectral measurements: the Hessian norm of a model output, the
//! layer-quantity upper bound on it, the residual-times-curvature criterion,
//! ball-wise kernel-change checks, and the bottleneck block statistic.

use crate::autodiff::{
    ensure_smooth, gradient, gradient_seeded, head_jacobian_row, head_jacobian_row_tangent,
    hvp_seeded,
};
use crate::error::{Error, Result};
use crate::estimators::{spectral_norm_symmetric, LinearOp, SpectralReport};
use crate::kernel::tangent_kernel;
use crate::linalg;
use crate::math;
use crate::activation::Activation;
use crate::network::{forward, ForwardTrace, LayerKind, NetworkSpec, OutputHead, Weights};
use crate::quantities::QQuantities;
use crate::rng::CounterRng;
use alloc::vec;
use alloc::vec::Vec;

/// Matrix-free Hessian of one model output coordinate (head included),
/// ready for power iteration. Body gradients needed by nonlinear heads are
/// computed once at construction.
pub struct HessianOp<'a> {
    spec: &'a NetworkSpec,
    w: &'a Weights,
    trace: &'a ForwardTrace,
    out_index: usize,
    seed: Vec<f64>,
    body_grads: Vec<Vec<f64>>,
}

impl<'a> HessianOp<'a> {
    pub fn new(
        spec: &'a NetworkSpec,
        w: &'a Weights,
        trace: &'a ForwardTrace,
        out_index: usize,
    ) -> Result<Self> {
        ensure_smooth(spec)?;
        if out_index >= spec.output_dim {
            return Err(Error::DimensionMismatch {
                what: "output index",
                expected: spec.output_dim,
                got: out_index,
            });
        }
        let seed = head_jacobian_row(spec, &trace.body_out, out_index);
        let body_grads = match spec.head {
            OutputHead::Linear => Vec::new(),
            _ => (0..spec.output_dim)
                .map(|b| {
                    let mut e = vec![0.0; spec.output_dim];
                    e[b] = 1.0;
                    gradient_seeded(spec, w, trace, &e).flat
                })
                .collect(),
        };
        Ok(HessianOp { spec, w, trace, out_index, seed, body_grads })
    }
}

impl LinearOp for HessianOp<'_> {
    fn dim_in(&self) -> usize {
        self.w.data.len()
    }
    fn dim_out(&self) -> usize {
        self.w.data.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (hv, dbody) = hvp_seeded(self.spec, self.w, self.trace, &self.seed, x);
        out.copy_from_slice(&hv);
        if !self.body_grads.is_empty() {
            let dseed =
                head_jacobian_row_tangent(self.spec, &self.trace.body_out, self.out_index, &dbody);
            for (b, &coef) in dseed.iter().enumerate() {
                if coef != 0.0 {
                    linalg::axpy(coef, &self.body_grads[b], out);
                }
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        // symmetric
        self.apply_into(y, out);
    }
}

/// Spectral norm of the Hessian of output coordinate `out_index` at input
/// `x`, by power iteration over exact Hessian-vector products.
pub fn hessian_spectral_norm(
    spec: &NetworkSpec,
    w: &Weights,
    x: &[f64],
    out_index: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralReport> {
    let trace = forward(spec, w, x)?;
    let op = HessianOp::new(spec, w, &trace, out_index)?;
    let mut rng = CounterRng::new(seed, 0x4e5);
    Ok(spectral_norm_symmetric(&op, tol, max_iter, &mut rng))
}

/// Closed-form layer-quantity bound on the Hessian spectral norm:
/// `C1 · q_221 · q_inf + C2 · q_l / sqrt(m)` with
/// `C1 = L (L² Lφ^{2L} + L Lφ^L + 1)` and `C2 = L Lφ^L`.
///
/// `lipschitz_phi` is the measured max layer Jacobian norm standing in for
/// the layer Lipschitz constant; it is clamped below at 1 so the powers
/// stay upper bounds for products of fewer factors.
pub fn hessian_bound(q: &QQuantities, depth: usize, lipschitz_phi: f64, m: usize) -> f64 {
    let lp = lipschitz_phi.max(1.0);
    let l = depth as f64;
    let c1 = l * (l * l * math::powi(lp, 2 * depth as i32) + l * math::powi(lp, depth as i32) + 1.0);
    let c2 = l * math::powi(lp, depth as i32);
    c1 * q.q_221 * q.q_inf + c2 * q.q_l / math::sqrt(m as f64)
}

/// Residual-times-curvature report: `kappa = A · B` with
/// `A = ‖f(W) − y/alpha‖` stacked over the dataset and
/// `B = max_i ‖H(x_i)‖ / min_i ‖∇f(x_i)‖²`.
#[derive(Debug, Clone)]
pub struct KappaReport {
    pub kappa: f64,
    pub residual: f64,
    pub curvature_ratio: f64,
    pub max_hessian: f64,
    pub min_grad_sq: f64,
}

/// Evaluate the near-constancy criterion at `W` over a labelled dataset.
/// `alpha` rescales the model: the criterion for `alpha·f` equals the
/// criterion for `f` with labels `y/alpha`, which is how it is computed.
pub fn kappa(
    spec: &NetworkSpec,
    w: &Weights,
    inputs: &[Vec<f64>],
    labels: &[Vec<f64>],
    alpha: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<KappaReport> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Empty { what: "kappa dataset" });
    }
    let mut residual_sq = 0.0;
    let mut max_h = 0.0_f64;
    let mut min_grad_sq = f64::INFINITY;
    for (i, x) in inputs.iter().enumerate() {
        let trace = forward(spec, w, x)?;
        let mut grad_sq = 0.0;
        for a in 0..spec.output_dim {
            let g = gradient(spec, w, &trace, a)?;
            grad_sq += g.norm2() * g.norm2();
            let point_seed = seed ^ (((i as u64) << 8) | a as u64);
            let rep = hessian_spectral_norm(spec, w, x, a, tol, max_iter, point_seed)?;
            max_h = max_h.max(rep.value);
            let r = trace.output[a] - labels[i][a] / alpha;
            residual_sq += r * r;
        }
        min_grad_sq = min_grad_sq.min(grad_sq);
    }
    if min_grad_sq <= 0.0 {
        return Err(Error::ZeroNorm { what: "model gradient" });
    }
    let residual = math::sqrt(residual_sq);
    let ratio = max_h / min_grad_sq;
    Ok(KappaReport {
        kappa: residual * ratio,
        residual,
        curvature_ratio: ratio,
        max_hessian: max_h,
        min_grad_sq,
    })
}

/// Probe report for the kernel-change-vs-Hessian contract inside a ball.
#[derive(Debug, Clone)]
pub struct BallCheckReport {
    /// `max |K(W) − K(W0)|` over probes and input pairs.
    pub max_kernel_change: f64,
    /// `ε`: max probed Hessian norm (including the center).
    pub max_hessian: f64,
    /// max probed gradient norm.
    pub max_grad_norm: f64,
    /// `2 · max_grad_norm · ε · R`.
    pub bound: f64,
    pub radius: f64,
    pub probes: usize,
    pub holds: bool,
}

/// Sample parameter points on rays of radii `{R/4, R/2, 3R/4, R}` around
/// `W0` and verify that the kernel moves by at most
/// `2 · sup‖∇f‖ · sup‖H‖ · R` over all probed points and input pairs.
pub fn kernel_change_vs_hessian_check(
    spec: &NetworkSpec,
    w0: &Weights,
    inputs: &[Vec<f64>],
    radius: f64,
    probes: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<BallCheckReport> {
    ensure_smooth(spec)?;
    if inputs.is_empty() {
        return Err(Error::Empty { what: "ball-check inputs" });
    }
    let k0 = tangent_kernel(spec, w0, inputs)?;
    let mut max_h = 0.0_f64;
    let mut max_g = 0.0_f64;
    let mut max_change = 0.0_f64;

    let mut absorb = |w: &Weights| -> Result<()> {
        let k = tangent_kernel(spec, w, inputs)?;
        for (a, b) in k.data.iter().zip(&k0.data) {
            max_change = max_change.max(math::abs(a - b));
        }
        for (i, x) in inputs.iter().enumerate() {
            let mut g_sq = 0.0;
            for a in 0..spec.output_dim {
                g_sq += k.entry(i, a, i, a);
                let probe_seed = seed ^ 0xba11 ^ (((i as u64) << 4) | a as u64);
                let rep = hessian_spectral_norm(spec, w, x, a, tol, max_iter, probe_seed)?;
                max_h = max_h.max(rep.value);
            }
            max_g = max_g.max(math::sqrt(g_sq));
        }
        Ok(())
    };

    absorb(w0)?;
    let mut rng = CounterRng::new(seed, 0xbcc);
    let radii = [0.25, 0.5, 0.75, 1.0];
    for p in 0..probes {
        let dir = rng.child(p as u64).unit_vector(w0.data.len());
        let r = radius * radii[p % radii.len()];
        let mut wp = w0.clone();
        linalg::axpy(r, &dir, &mut wp.data);
        absorb(&wp)?;
    }
    let bound = 2.0 * max_g * max_h * radius;
    Ok(BallCheckReport {
        max_kernel_change: max_change,
        max_hessian: max_h,
        max_grad_norm: max_g,
        bound,
        radius,
        probes,
        holds: max_change <= bound + 1e-12,
    })
}

/// The dominant Hessian block of the quadratic bottleneck network: for the
/// wide/narrow(1)/wide stack with quadratic outer activations the
/// bottleneck-weight block is the rank-one matrix
/// `s_out · Σ_j v_j (w³_j)² · (scale² α¹) ⊗ (scale² α¹)` whose spectral
/// norm is `|Σ_j v_j (w³_j)²| · ‖α¹‖² / m^{3/2}`. It lower-bounds the full
/// Hessian norm, since a symmetric matrix dominates its diagonal blocks.
pub fn bottleneck_block_stat(spec: &NetworkSpec, w: &Weights, x: f64) -> Result<f64> {
    let expected = "wide/narrow(1)/wide quadratic bottleneck, scalar linear output";
    let wrong = || Error::WrongArchitecture { expected };
    if spec.layers.len() != 3 || spec.input_dim != 1 || spec.output_dim != 1 {
        return Err(wrong());
    }
    if !matches!(spec.head, OutputHead::Linear) {
        return Err(wrong());
    }
    let widths: Vec<usize> = spec
        .layers
        .iter()
        .map(|l| match l.kind {
            LayerKind::FullyConnected { width, bias: false } => width,
            _ => 0,
        })
        .collect();
    let m = widths[0];
    if m == 0 || widths[1] != 1 || widths[2] != m {
        return Err(wrong());
    }
    let acts: Vec<Activation> = spec.layers.iter().map(|l| l.activation).collect();
    if acts[0] != Activation::Quadratic || acts[1] != Activation::Identity || acts[2] != Activation::Quadratic {
        return Err(wrong());
    }
    let trace = forward(spec, w, &[x])?;
    let layout = spec.layout();
    let alpha1 = &trace.acts[0];
    let g3 = &layout.layers[2];
    let w3 = &w.data[g3.w_off..g3.w_off + g3.w_len];
    let v = w.output_slice(&layout);
    let sum: f64 = v.iter().zip(w3).map(|(&vj, &w3j)| vj * w3j * w3j).sum();
    let alpha_sq = linalg::dot(alpha1, alpha1);
    Ok(math::abs(sum) * alpha_sq / math::sqrt(math::powi(m as f64, 3)))
}

/// Factors of the nonlinear-head Hessian decomposition at one input:
/// `‖H̃‖ ≥ |φ''(f)| ‖∇f‖² − |φ'(f)| ‖H‖`.
#[derive(Debug, Clone)]
pub struct HeadDecomposition {
    pub h_tilde: f64,
    pub h_body: f64,
    pub grad_sq: f64,
    pub phi_d1: f64,
    pub phi_d2: f64,
    pub lower: f64,
    pub holds: bool,
}

/// Measure every factor of the head decomposition independently. The spec
/// must have a scalar activated head.
pub fn nonlinear_head_decomposition(
    spec: &NetworkSpec,
    w: &Weights,
    x: &[f64],
    out_index: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<HeadDecomposition> {
    let act = match spec.head {
        OutputHead::Activated(a) => a,
        _ => return Err(Error::WrongArchitecture { expected: "activated output head" }),
    };
    let body_spec = NetworkSpec { head: OutputHead::Linear, ..spec.clone() };
    let trace = forward(&body_spec, w, x)?;
    let g = gradient(&body_spec, w, &trace, out_index)?;
    let grad_sq = g.norm2() * g.norm2();
    let h_body = hessian_spectral_norm(&body_spec, w, x, out_index, tol, max_iter, seed)?.value;
    let h_tilde = hessian_spectral_norm(spec, w, x, out_index, tol, max_iter, seed ^ 0x7e)?.value;
    let f_val = trace.body_out[out_index];
    let phi_d1 = act.d1(f_val);
    let phi_d2 = act.d2(f_val);
    let lower = math::abs(phi_d2) * grad_sq - math::abs(phi_d1) * h_body;
    Ok(HeadDecomposition {
        h_tilde,
        h_body,
        grad_sq,
        phi_d1,
        phi_d2,
        lower,
        // Allow for power-iteration tolerance on both estimates.
        holds: h_tilde >= lower - tol * (h_tilde.abs() + lower.abs()) - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_weights, NetworkSpec, OutputHead};
    use crate::quantities::{layer_quantities, QuantityParams};

    #[test]
    fn shallow_hessian_norm_is_the_max_diagonal_entry() {
        let m = 48;
        let x = 1.1;
        let spec = NetworkSpec::shallow(1, m, Activation::Tanh);
        let w = init_weights(&spec, 77);
        let signs = w.fixed_output.clone().unwrap();
        let expected = (0..m)
            .map(|i| (signs[i] * Activation::Tanh.d2(w.data[i] * x) * x * x).abs() / (m as f64).sqrt())
            .fold(0.0_f64, f64::max);
        let rep = hessian_spectral_norm(&spec, &w, &[x], 0, 1e-11, 5000, 3).unwrap();
        assert!(rep.converged, "power iteration should converge");
        assert!(
            (rep.value - expected).abs() <= 1e-7 * expected,
            "{} vs {}",
            rep.value,
            expected
        );
    }

    #[test]
    fn linear_model_hessian_norm_is_zero() {
        let spec = NetworkSpec::shallow(1, 16, Activation::Identity);
        let w = init_weights(&spec, 2);
        let rep = hessian_spectral_norm(&spec, &w, &[0.9], 0, 1e-10, 100, 1).unwrap();
        assert_eq!(rep.value, 0.0);
    }

    #[test]
    fn hessian_norm_matches_dense_eigendecomposition() {
        // Assemble H column by column from Hessian-vector products and
        // compare the power-iteration estimate against nalgebra.
        let specs = [
            NetworkSpec::fully_connected(2, &[8, 8], Activation::Tanh, OutputHead::Linear, 1),
            NetworkSpec::experiment_shallow(12, Activation::Tanh, OutputHead::Activated(Activation::Swish)),
            NetworkSpec::bottleneck_quadratic(8),
        ];
        for (si, spec) in specs.iter().enumerate() {
            let w = init_weights(spec, 60 + si as u64);
            let x: Vec<f64> = (0..spec.input_dim).map(|i| 0.6 - 0.2 * i as f64).collect();
            let trace = forward(spec, &w, &x).unwrap();
            let p = w.data.len();
            assert!(p <= 200, "dense oracle only for small nets");
            let op = HessianOp::new(spec, &w, &trace, 0).unwrap();
            let mut dense = nalgebra::DMatrix::zeros(p, p);
            let mut e = vec![0.0; p];
            let mut col = vec![0.0; p];
            for j in 0..p {
                e[j] = 1.0;
                op.apply_into(&e, &mut col);
                e[j] = 0.0;
                for i in 0..p {
                    dense[(i, j)] = col[i];
                }
            }
            let eig = dense.symmetric_eigenvalues();
            let oracle = eig.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            let rep = hessian_spectral_norm(spec, &w, &x, 0, 1e-12, 10000, 9).unwrap();
            assert!(
                (rep.value - oracle).abs() <= 1e-6 * oracle.max(1e-12),
                "spec {si}: power {} vs dense {}",
                rep.value,
                oracle
            );
        }
    }

    #[test]
    fn hessian_bound_formula_hand_check() {
        let q = QQuantities {
            q_inf: 0.1,
            q_l: 2.0,
            q_221: 3.0,
            b_inf: vec![],
            b_two: vec![],
            jac_w: vec![],
            jac_in: vec![],
            t_ww: vec![],
            t_wa: vec![],
            t_aa: vec![],
        };
        // L = 1, Lφ = 1: C1 = 3, C2 = 1 -> 3·3·0.1 + 2/sqrt(m)
        let m = 400;
        let b = hessian_bound(&q, 1, 1.0, m);
        assert!((b - (0.9 + 2.0 / 20.0)).abs() < 1e-12);
        // zero tensor and jacobian quantities give zero bound
        let q0 = QQuantities { q_inf: 0.5, q_l: 0.0, q_221: 0.0, ..q };
        assert_eq!(hessian_bound(&q0, 3, 1.5, 64), 0.0);
    }

    #[test]
    fn measured_hessian_is_dominated_by_the_bound() {
        for seed in 0..5 {
            let spec = NetworkSpec::fully_connected(2, &[24, 24, 24], Activation::Tanh, OutputHead::Linear, 1);
            let w = init_weights(&spec, seed);
            let x = vec![0.8, -0.5];
            let trace = forward(&spec, &w, &x).unwrap();
            let q = layer_quantities(&spec, &w, &trace, 0, &QuantityParams::default()).unwrap();
            let lphi = q.jac_in.iter().fold(0.0_f64, |a, &b| a.max(b));
            let bound = hessian_bound(&q, spec.depth(), lphi, spec.min_hidden_width());
            let h = hessian_spectral_norm(&spec, &w, &x, 0, 1e-9, 2000, seed).unwrap().value;
            assert!(h <= bound, "seed {seed}: ‖H‖ = {h} exceeds bound {bound}");
        }
    }

    #[test]
    fn kappa_zero_when_labels_match_outputs() {
        let spec = NetworkSpec::shallow(1, 10, Activation::Tanh);
        let w = init_weights(&spec, 4);
        let inputs = vec![vec![0.6], vec![-0.9]];
        let labels: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| vec![forward(&spec, &w, x).unwrap().output[0]])
            .collect();
        let rep = kappa(&spec, &w, &inputs, &labels, 1.0, 1e-9, 2000, 5).unwrap();
        assert!(rep.kappa.abs() < 1e-12, "kappa {}", rep.kappa);
        assert!(rep.curvature_ratio > 0.0);
    }

    #[test]
    fn rescaling_shrinks_kappa_through_the_residual_factor_only() {
        // With f(W0) = 0 (zero weights, odd activation) the residual is
        // ‖y/alpha‖, so kappa scales as 1/alpha while B is untouched.
        let spec = NetworkSpec::shallow(1, 12, Activation::Tanh);
        let w = crate::network::zero_weights(&spec);
        let inputs = vec![vec![0.5], vec![1.5]];
        let labels = vec![vec![1.0], vec![-1.0]];
        // zero weights make tanh'' vanish; perturb slightly so ‖H‖ > 0
        let mut w = w;
        let mut rng = CounterRng::new(8, 0);
        for v in w.data.iter_mut() {
            *v = 0.05 * rng.normal();
        }
        let base = kappa(&spec, &w, &inputs, &labels, 1.0, 1e-9, 2000, 5).unwrap();
        let scaled = kappa(&spec, &w, &inputs, &labels, 100.0, 1e-9, 2000, 5).unwrap();
        assert!((scaled.curvature_ratio - base.curvature_ratio).abs() < 1e-12);
        assert!(scaled.kappa < base.kappa / 50.0, "{} vs {}", scaled.kappa, base.kappa);
    }

    #[test]
    fn ball_check_zero_radius_and_linear_model_edge_cases() {
        let spec = NetworkSpec::shallow(1, 10, Activation::Tanh);
        let w = init_weights(&spec, 6);
        let inputs = vec![vec![0.4], vec![1.0]];
        let rep = kernel_change_vs_hessian_check(&spec, &w, &inputs, 0.0, 4, 9, 1e-9, 2000).unwrap();
        assert_eq!(rep.max_kernel_change, 0.0);
        assert!(rep.holds);

        let lin = NetworkSpec::shallow(1, 10, Activation::Identity);
        let wl = init_weights(&lin, 6);
        let rep = kernel_change_vs_hessian_check(&lin, &wl, &inputs, 5.0, 6, 9, 1e-9, 2000).unwrap();
        assert_eq!(rep.max_kernel_change, 0.0, "linear model kernel is constant");
        assert!(rep.holds);
    }

    #[test]
    fn ball_check_holds_on_a_smooth_net() {
        let spec = NetworkSpec::fully_connected(2, &[32, 32], Activation::Tanh, OutputHead::Linear, 1);
        let w = init_weights(&spec, 17);
        let inputs = vec![vec![0.5, -0.3], vec![1.2, 0.1]];
        let rep = kernel_change_vs_hessian_check(&spec, &w, &inputs, 2.0, 8, 33, 1e-8, 2000).unwrap();
        assert!(rep.holds, "change {} vs bound {}", rep.max_kernel_change, rep.bound);
    }

    #[test]
    fn block_stat_zero_when_output_layer_is_zero() {
        let spec = NetworkSpec::bottleneck_quadratic(16);
        let mut w = init_weights(&spec, 3);
        let layout = spec.layout();
        let off = layout.out_off.unwrap();
        for v in w.data[off..off + layout.out_len].iter_mut() {
            *v = 0.0;
        }
        let s = bottleneck_block_stat(&spec, &w, 0.9).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn block_stat_lower_bounds_the_dense_hessian_norm() {
        let spec = NetworkSpec::bottleneck_quadratic(16);
        let w = init_weights(&spec, 11);
        let x = 1.0;
        let stat = bottleneck_block_stat(&spec, &w, x).unwrap();
        let trace = forward(&spec, &w, &[x]).unwrap();
        let op = HessianOp::new(&spec, &w, &trace, 0).unwrap();
        let p = w.data.len();
        let mut dense = nalgebra::DMatrix::zeros(p, p);
        let mut e = vec![0.0; p];
        let mut col = vec![0.0; p];
        for j in 0..p {
            e[j] = 1.0;
            op.apply_into(&e, &mut col);
            e[j] = 0.0;
            for i in 0..p {
                dense[(i, j)] = col[i];
            }
        }
        let h = dense.symmetric_eigenvalues().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        assert!(stat <= h * (1.0 + 1e-9), "stat {stat} vs dense ‖H‖ {h}");
    }

    #[test]
    fn block_stat_rejects_other_architectures() {
        let spec = NetworkSpec::fully_connected(1, &[8, 8], Activation::Quadratic, OutputHead::Linear, 1);
        let w = init_weights(&spec, 0);
        assert!(bottleneck_block_stat(&spec, &w, 1.0).is_err());
    }

    #[test]
    fn head_decomposition_inequality_holds() {
        let spec = NetworkSpec {
            head: OutputHead::Activated(Activation::Swish),
            ..NetworkSpec::fully_connected(1, &[64], Activation::Tanh, OutputHead::Linear, 1)
        };
        let w = init_weights(&spec, 21);
        let rep = nonlinear_head_decomposition(&spec, &w, &[1.0], 0, 1e-9, 3000, 8).unwrap();
        assert!(rep.holds, "‖H̃‖ = {} vs lower {}", rep.h_tilde, rep.lower);
        assert!(rep.grad_sq > 0.0);
    }
}
