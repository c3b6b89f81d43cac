//! Declarative network architectures, weight initialization, and forward
//! evaluation.
//!
//! A network is a stack of layer descriptors followed by an output layer
//! `f = s_out · V α^(L)` and an optional output nonlinearity. Two
//! parameterizations are supported: `Ntk` draws standard-normal weights and
//! keeps explicit `1/√fan` factors inside the layer maps, while `LeCun`
//! absorbs those factors into the weight variance (`N(0, 1/fan)`) and
//! applies the maps bare. With coupled draws the two compute identical
//! functions.
//!
//! Parameters live in one flat `Vec<f64>` whose layout is described by
//! [`Layout`]; every derivative pass works on slices of that buffer.

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::math;
use crate::rng::CounterRng;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    FullyConnected { width: usize, bias: bool },
    /// One-dimensional convolution over `pixels` positions with `filter`
    /// taps and `channels` output channels. Shifted pixels that fall outside
    /// the image are zero.
    Conv1d { channels: usize, pixels: usize, filter: usize },
    /// Fully-connected layer plus identity skip; requires matching widths.
    Residual { width: usize },
    /// Single hidden layer with per-neuron weight rows acting directly on
    /// the input (no fan normalization) and a fixed ±1 output vector.
    Shallow { width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    Linear,
    Activated(Activation),
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Ntk,
    LeCun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub head: OutputHead,
    pub parameterization: Parameterization,
}

/// Geometry of one layer inside the flat parameter buffer.
#[derive(Debug, Clone, Copy)]
pub struct LayerGeom {
    pub in_len: usize,
    pub out_len: usize,
    /// Fan used by the explicit normalization factor (1 for `Shallow`).
    pub fan: usize,
    /// Hidden width in the scaling sense: channels for conv layers.
    pub width: usize,
    pub w_off: usize,
    pub w_len: usize,
    pub b_off: usize,
    pub b_len: usize,
    pub skip: bool,
    pub conv: Option<ConvGeom>,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvGeom {
    pub ch_in: usize,
    pub ch_out: usize,
    pub pixels: usize,
    pub filter: usize,
}

/// Flat-buffer layout for a spec's trainable parameters.
#[derive(Debug, Clone)]
pub struct Layout {
    pub layers: Vec<LayerGeom>,
    /// Offset of the output matrix `V` (row-major `C x last_len`), or `None`
    /// when the output vector is fixed (the `Shallow` construction).
    pub out_off: Option<usize>,
    pub out_len: usize,
    pub last_len: usize,
    /// Width entering the output normalization (`channels` for conv).
    pub last_width: usize,
    pub total: usize,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec(String::from("input_dim must be >= 1")));
        }
        if self.output_dim == 0 {
            return Err(Error::InvalidSpec(String::from("output_dim must be >= 1")));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec(String::from("at least one layer required")));
        }
        let mut cur = self.input_dim;
        for (l, layer) in self.layers.iter().enumerate() {
            match layer.kind {
                LayerKind::FullyConnected { width, .. } => {
                    if width == 0 {
                        return Err(Error::InvalidSpec(alloc::format!("layer {l}: width 0")));
                    }
                    cur = width;
                }
                LayerKind::Conv1d { channels, pixels, filter } => {
                    if channels == 0 || pixels == 0 {
                        return Err(Error::InvalidSpec(alloc::format!("layer {l}: zero conv dims")));
                    }
                    if filter == 0 || filter % 2 == 0 {
                        return Err(Error::InvalidSpec(alloc::format!(
                            "layer {l}: filter size must be odd, got {filter}"
                        )));
                    }
                    if cur % pixels != 0 {
                        return Err(Error::InvalidSpec(alloc::format!(
                            "layer {l}: input length {cur} not divisible by {pixels} pixels"
                        )));
                    }
                    cur = channels * pixels;
                }
                LayerKind::Residual { width } => {
                    if width == 0 {
                        return Err(Error::InvalidSpec(alloc::format!("layer {l}: width 0")));
                    }
                    if cur != width {
                        return Err(Error::InvalidSpec(alloc::format!(
                            "layer {l}: residual width {width} must match input length {cur}"
                        )));
                    }
                }
                LayerKind::Shallow { width } => {
                    if width == 0 {
                        return Err(Error::InvalidSpec(alloc::format!("layer {l}: width 0")));
                    }
                    if self.layers.len() != 1 {
                        return Err(Error::InvalidSpec(String::from(
                            "shallow layer must be the only layer",
                        )));
                    }
                    if self.output_dim != 1 {
                        return Err(Error::InvalidSpec(String::from(
                            "shallow construction has a scalar output",
                        )));
                    }
                    cur = width;
                }
            }
        }
        if matches!(self.head, OutputHead::Softmax) && self.output_dim < 2 {
            return Err(Error::InvalidSpec(String::from("softmax head needs output_dim >= 2")));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut off = 0usize;
        let mut cur = self.input_dim;
        let mut last_width = self.input_dim;
        for layer in &self.layers {
            let geom = match layer.kind {
                LayerKind::FullyConnected { width, bias } => {
                    let g = LayerGeom {
                        in_len: cur,
                        out_len: width,
                        fan: cur,
                        width,
                        w_off: off,
                        w_len: width * cur,
                        b_off: off + width * cur,
                        b_len: if bias { width } else { 0 },
                        skip: false,
                        conv: None,
                    };
                    cur = width;
                    last_width = width;
                    g
                }
                LayerKind::Conv1d { channels, pixels, filter } => {
                    let ch_in = cur / pixels;
                    let g = LayerGeom {
                        in_len: cur,
                        out_len: channels * pixels,
                        fan: ch_in,
                        width: channels,
                        w_off: off,
                        w_len: filter * channels * ch_in,
                        b_off: off + filter * channels * ch_in,
                        b_len: 0,
                        skip: false,
                        conv: Some(ConvGeom { ch_in, ch_out: channels, pixels, filter }),
                    };
                    cur = channels * pixels;
                    last_width = channels;
                    g
                }
                LayerKind::Residual { width } => {
                    let g = LayerGeom {
                        in_len: cur,
                        out_len: width,
                        fan: cur,
                        width,
                        w_off: off,
                        w_len: width * cur,
                        b_off: off + width * cur,
                        b_len: 0,
                        skip: true,
                        conv: None,
                    };
                    cur = width;
                    last_width = width;
                    g
                }
                LayerKind::Shallow { width } => {
                    let g = LayerGeom {
                        in_len: cur,
                        out_len: width,
                        fan: 1,
                        width,
                        w_off: off,
                        w_len: width * cur,
                        b_off: off + width * cur,
                        b_len: 0,
                        skip: false,
                        conv: None,
                    };
                    cur = width;
                    last_width = width;
                    g
                }
            };
            off = geom.b_off + geom.b_len;
            layers.push(geom);
        }
        let fixed_output = matches!(self.layers[0].kind, LayerKind::Shallow { .. });
        let out_len = self.output_dim * cur;
        let out_off = if fixed_output { None } else { Some(off) };
        let total = if fixed_output { off } else { off + out_len };
        Layout { layers, out_off, out_len, last_len: cur, last_width, total }
    }

    /// Explicit normalization factor of layer `l` under NTK parameterization.
    pub fn sigma_layer(&self, geom: &LayerGeom) -> f64 {
        1.0 / math::sqrt(geom.fan as f64)
    }

    /// Explicit normalization factor of the output layer under NTK.
    pub fn sigma_out(&self, layout: &Layout) -> f64 {
        1.0 / math::sqrt(layout.last_width as f64)
    }

    /// Factor actually applied by the forward map (1 under LeCun, where the
    /// factor is absorbed into the weight variance).
    pub fn forward_scale(&self, geom: &LayerGeom) -> f64 {
        match self.parameterization {
            Parameterization::Ntk => self.sigma_layer(geom),
            Parameterization::LeCun => 1.0,
        }
    }

    pub fn forward_scale_out(&self, layout: &Layout) -> f64 {
        match self.parameterization {
            Parameterization::Ntk => self.sigma_out(layout),
            Parameterization::LeCun => 1.0,
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn min_hidden_width(&self) -> usize {
        self.layout().layers.iter().map(|g| g.width).min().unwrap_or(0)
    }

    /// All hidden activations are twice differentiable (and the head, when
    /// activated).
    pub fn is_smooth(&self) -> bool {
        let body = self.layers.iter().all(|l| l.activation.is_smooth());
        let head = match self.head {
            OutputHead::Activated(a) => a.is_smooth(),
            _ => true,
        };
        body && head
    }

    pub fn has_conv(&self) -> bool {
        self.layers.iter().any(|l| matches!(l.kind, LayerKind::Conv1d { .. }))
    }

    pub fn has_fixed_output(&self) -> bool {
        matches!(self.layers[0].kind, LayerKind::Shallow { .. })
    }

    // ----- convenience constructors -----

    /// The fixed-sign one-hidden-layer construction: trainable hidden rows,
    /// fixed ±1 output vector, scalar output.
    pub fn shallow(input_dim: usize, width: usize, activation: Activation) -> Self {
        NetworkSpec {
            input_dim,
            output_dim: 1,
            layers: vec![LayerSpec { kind: LayerKind::Shallow { width }, activation }],
            head: OutputHead::Linear,
            parameterization: Parameterization::Ntk,
        }
    }

    /// Fully-connected stack without biases.
    pub fn fully_connected(
        input_dim: usize,
        widths: &[usize],
        activation: Activation,
        head: OutputHead,
        output_dim: usize,
    ) -> Self {
        NetworkSpec {
            input_dim,
            output_dim,
            layers: widths
                .iter()
                .map(|&w| LayerSpec { kind: LayerKind::FullyConnected { width: w, bias: false }, activation })
                .collect(),
            head,
            parameterization: Parameterization::Ntk,
        }
    }

    /// The scalar-input experiment net: one biased fully-connected hidden
    /// layer, three outputs, head as configured.
    pub fn experiment_shallow(width: usize, activation: Activation, head: OutputHead) -> Self {
        NetworkSpec {
            input_dim: 1,
            output_dim: 3,
            layers: vec![LayerSpec {
                kind: LayerKind::FullyConnected { width, bias: true },
                activation,
            }],
            head,
            parameterization: Parameterization::Ntk,
        }
    }

    /// Wide/narrow/wide stack with a linear bottleneck layer, quadratic
    /// activations on the wide layers, scalar in/out. The architecture whose
    /// Hessian stays large no matter how wide the outer layers get.
    pub fn bottleneck_quadratic(width: usize) -> Self {
        NetworkSpec {
            input_dim: 1,
            output_dim: 1,
            layers: vec![
                LayerSpec {
                    kind: LayerKind::FullyConnected { width, bias: false },
                    activation: Activation::Quadratic,
                },
                LayerSpec {
                    kind: LayerKind::FullyConnected { width: 1, bias: false },
                    activation: Activation::Identity,
                },
                LayerSpec {
                    kind: LayerKind::FullyConnected { width, bias: false },
                    activation: Activation::Quadratic,
                },
            ],
            head: OutputHead::Linear,
            parameterization: Parameterization::Ntk,
        }
    }

    /// The trainable bottleneck experiment net: wide-narrow-wide with a
    /// linear bottleneck, three outputs.
    pub fn bottleneck_experiment(width: usize, bottleneck: usize, activation: Activation, head: OutputHead) -> Self {
        NetworkSpec {
            input_dim: 1,
            output_dim: 3,
            layers: vec![
                LayerSpec { kind: LayerKind::FullyConnected { width, bias: false }, activation },
                LayerSpec {
                    kind: LayerKind::FullyConnected { width: bottleneck, bias: false },
                    activation: Activation::Identity,
                },
                LayerSpec { kind: LayerKind::FullyConnected { width, bias: false }, activation },
            ],
            head,
            parameterization: Parameterization::Ntk,
        }
    }
}

/// Trainable parameters in flat canonical order, plus the fixed output
/// vector for the shallow construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub data: Vec<f64>,
    pub fixed_output: Option<Vec<f64>>,
}

impl Weights {
    pub fn param_count(&self) -> usize {
        self.data.len()
    }

    /// Euclidean norm over the flat trainable view.
    pub fn norm2(&self) -> f64 {
        linalg::norm2(&self.data)
    }

    pub fn norm_inf(&self) -> f64 {
        linalg::norm_inf(&self.data)
    }

    /// The output matrix entries (trainable or fixed).
    pub fn output_slice<'a>(&'a self, layout: &Layout) -> &'a [f64] {
        match layout.out_off {
            Some(off) => &self.data[off..off + layout.out_len],
            None => self.fixed_output.as_ref().expect("fixed output missing"),
        }
    }
}

/// Random matrix with i.i.d. `N(0, std^2)` entries from the counter-based
/// stream `(seed, 0)`. Zero `std` is valid and gives the zero matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, std: f64, seed: u64) -> DenseMatrix {
    assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
    assert!(std >= 0.0, "std must be non-negative");
    let mut m = DenseMatrix::zeros(rows, cols);
    let mut rng = CounterRng::new(seed, 0);
    rng.fill_normal(&mut m.data, std);
    m
}

/// Draw initial weights. Layer `l` uses stream `l`, the output layer uses
/// stream `L`, so any layer's draw is independent of evaluation order.
///
/// NTK mode: every entry (weights and biases) is standard normal. LeCun
/// mode: layer weights are scaled by that layer's normalization factor,
/// using the *same* underlying standard-normal draws, so the two
/// parameterizations are coupled; biases are standard normal in both modes.
pub fn init_weights(spec: &NetworkSpec, seed: u64) -> Weights {
    let layout = spec.layout();
    let mut data = vec![0.0; layout.total];
    for (l, geom) in layout.layers.iter().enumerate() {
        let mut rng = CounterRng::new(seed, l as u64);
        let std = match spec.parameterization {
            Parameterization::Ntk => 1.0,
            Parameterization::LeCun => spec.sigma_layer(geom),
        };
        rng.fill_normal(&mut data[geom.w_off..geom.w_off + geom.w_len], std);
        if geom.b_len > 0 {
            rng.fill_normal(&mut data[geom.b_off..geom.b_off + geom.b_len], 1.0);
        }
    }
    let mut out_rng = CounterRng::new(seed, layout.layers.len() as u64);
    let fixed_output = if spec.has_fixed_output() {
        let mut v = vec![0.0; layout.out_len];
        for s in v.iter_mut() {
            *s = out_rng.sign();
        }
        Some(v)
    } else {
        let off = layout.out_off.expect("trainable output");
        let std = match spec.parameterization {
            Parameterization::Ntk => 1.0,
            Parameterization::LeCun => spec.sigma_out(&layout),
        };
        out_rng.fill_normal(&mut data[off..off + layout.out_len], std);
        None
    };
    Weights { data, fixed_output }
}

/// All-zero trainable parameters (fixed output signs default to +1).
pub fn zero_weights(spec: &NetworkSpec) -> Weights {
    let layout = spec.layout();
    let fixed_output = spec.has_fixed_output().then(|| vec![1.0; layout.out_len]);
    Weights { data: vec![0.0; layout.total], fixed_output }
}

/// Cached forward pass: per-layer preactivations and activations, the
/// linear-head output, and the post-head output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub preacts: Vec<Vec<f64>>,
    pub acts: Vec<Vec<f64>>,
    /// `s_out · V α^(L)` before any output nonlinearity.
    pub body_out: Vec<f64>,
    /// Model output after the head.
    pub output: Vec<f64>,
}

pub fn forward(spec: &NetworkSpec, w: &Weights, x: &[f64]) -> Result<ForwardTrace> {
    let layout = spec.layout();
    if x.len() != spec.input_dim {
        return Err(Error::DimensionMismatch { what: "input", expected: spec.input_dim, got: x.len() });
    }
    let mut preacts = Vec::with_capacity(spec.layers.len());
    let mut acts = Vec::with_capacity(spec.layers.len());
    let mut cur: Vec<f64> = x.to_vec();
    for (l, (layer, geom)) in spec.layers.iter().zip(&layout.layers).enumerate() {
        let mut pre = vec![0.0; geom.out_len];
        lin_in_into(spec, geom, &w.data[geom.w_off..geom.w_off + geom.w_len], &cur, &mut pre);
        if geom.b_len > 0 {
            linalg::axpy(1.0, &w.data[geom.b_off..geom.b_off + geom.b_len], &mut pre);
        }
        let mut act: Vec<f64> = pre.iter().map(|&z| layer.activation.eval(z)).collect();
        if geom.skip {
            linalg::axpy(1.0, &cur, &mut act);
        }
        if !linalg::all_finite(&act) || !linalg::all_finite(&pre) {
            return Err(Error::NonFinite { layer: l });
        }
        preacts.push(pre);
        acts.push(act.clone());
        cur = act;
    }
    let s_out = spec.forward_scale_out(&layout);
    let v = w.output_slice(&layout);
    let mut body_out = vec![0.0; spec.output_dim];
    linalg::matvec(v, spec.output_dim, layout.last_len, &cur, s_out, &mut body_out);
    if !linalg::all_finite(&body_out) {
        return Err(Error::NonFinite { layer: spec.layers.len() });
    }
    let output = apply_head(spec.head, &body_out);
    Ok(ForwardTrace { input: x.to_vec(), preacts, acts, body_out, output })
}

pub fn apply_head(head: OutputHead, body: &[f64]) -> Vec<f64> {
    match head {
        OutputHead::Linear => body.to_vec(),
        OutputHead::Activated(a) => body.iter().map(|&z| a.eval(z)).collect(),
        OutputHead::Softmax => softmax(body),
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out: Vec<f64> = z.iter().map(|&v| math::exp(v - m)).collect();
    let s: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= s;
    }
    out
}

// ----- layer-local linear operations -----
//
// Every derivative pass is assembled from four linear primitives per layer:
// the action of the weights on an input direction, its adjoint, the action
// of a parameter direction on the cached input, and its adjoint. All carry
// the layer's forward scale.

/// `out = scale_l * (W ∘ u)` where `∘` is matvec or convolution.
pub(crate) fn lin_in_into(spec: &NetworkSpec, geom: &LayerGeom, w: &[f64], u: &[f64], out: &mut [f64]) {
    let s = spec.forward_scale(geom);
    match geom.conv {
        None => linalg::matvec(w, geom.out_len, geom.in_len, u, s, out),
        Some(cg) => conv_apply(w, cg, u, s, out),
    }
}

/// `out = scale_l * (W^T ∘ g)`.
pub(crate) fn lin_in_adj_into(spec: &NetworkSpec, geom: &LayerGeom, w: &[f64], g: &[f64], out: &mut [f64]) {
    let s = spec.forward_scale(geom);
    match geom.conv {
        None => linalg::matvec_t(w, geom.out_len, geom.in_len, g, s, out),
        Some(cg) => conv_apply_adjoint(w, cg, g, s, out),
    }
}

/// `out = scale_l * (U ∘ input) + u_bias` for a parameter direction given as
/// slices of a flat buffer.
pub(crate) fn lin_param_into(
    spec: &NetworkSpec,
    geom: &LayerGeom,
    dir_w: &[f64],
    dir_b: &[f64],
    input: &[f64],
    out: &mut [f64],
) {
    let s = spec.forward_scale(geom);
    match geom.conv {
        None => linalg::matvec(dir_w, geom.out_len, geom.in_len, input, s, out),
        Some(cg) => conv_apply(dir_w, cg, input, s, out),
    }
    if !dir_b.is_empty() {
        linalg::axpy(1.0, dir_b, out);
    }
}

/// Accumulate the adjoint of `lin_param` into parameter slices:
/// `out_w += scale_l * (g ⊗ input)` (outer product or conv tap gradient),
/// `out_b += g`.
pub(crate) fn lin_param_adj_accum(
    spec: &NetworkSpec,
    geom: &LayerGeom,
    g: &[f64],
    input: &[f64],
    out_w: &mut [f64],
    out_b: &mut [f64],
) {
    let s = spec.forward_scale(geom);
    match geom.conv {
        None => {
            for i in 0..geom.out_len {
                let f = s * g[i];
                if f == 0.0 {
                    continue;
                }
                let row = &mut out_w[i * geom.in_len..(i + 1) * geom.in_len];
                linalg::axpy(f, input, row);
            }
        }
        Some(cg) => conv_param_grad_accum(g, cg, input, s, out_w),
    }
    if !out_b.is_empty() {
        linalg::axpy(1.0, g, out_b);
    }
}

// Convolution kernels. Weight layout: w[(k*ch_out + i)*ch_in + j] for tap k,
// output channel i, input channel j. Images are channel-major: a[j*Q + q].

fn conv_apply(w: &[f64], cg: ConvGeom, input: &[f64], s: f64, out: &mut [f64]) {
    let q_len = cg.pixels;
    let half = (cg.filter - 1) / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..cg.filter {
        for i in 0..cg.ch_out {
            let wrow = &w[(k * cg.ch_out + i) * cg.ch_in..(k * cg.ch_out + i + 1) * cg.ch_in];
            let orow = &mut out[i * q_len..(i + 1) * q_len];
            for (j, &wv) in wrow.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                let arow = &input[j * q_len..(j + 1) * q_len];
                // q_src = q + k - half, zero outside the image
                for q in 0..q_len {
                    let q_src = q as isize + k as isize - half as isize;
                    if q_src >= 0 && (q_src as usize) < q_len {
                        orow[q] += wv * arow[q_src as usize];
                    }
                }
            }
        }
    }
    linalg::scale(out, s);
}

fn conv_apply_adjoint(w: &[f64], cg: ConvGeom, g: &[f64], s: f64, out: &mut [f64]) {
    let q_len = cg.pixels;
    let half = (cg.filter - 1) / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..cg.filter {
        for i in 0..cg.ch_out {
            let wrow = &w[(k * cg.ch_out + i) * cg.ch_in..(k * cg.ch_out + i + 1) * cg.ch_in];
            let grow = &g[i * q_len..(i + 1) * q_len];
            for (j, &wv) in wrow.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                let orow = &mut out[j * q_len..(j + 1) * q_len];
                for q in 0..q_len {
                    let q_src = q as isize + k as isize - half as isize;
                    if q_src >= 0 && (q_src as usize) < q_len {
                        orow[q_src as usize] += wv * grow[q];
                    }
                }
            }
        }
    }
    linalg::scale(out, s);
}

fn conv_param_grad_accum(g: &[f64], cg: ConvGeom, input: &[f64], s: f64, out_w: &mut [f64]) {
    let q_len = cg.pixels;
    let half = (cg.filter - 1) / 2;
    for k in 0..cg.filter {
        for i in 0..cg.ch_out {
            let grow = &g[i * q_len..(i + 1) * q_len];
            let wrow = &mut out_w[(k * cg.ch_out + i) * cg.ch_in..(k * cg.ch_out + i + 1) * cg.ch_in];
            for (j, wv) in wrow.iter_mut().enumerate() {
                let arow = &input[j * q_len..(j + 1) * q_len];
                let mut acc = 0.0;
                for q in 0..q_len {
                    let q_src = q as isize + k as isize - half as isize;
                    if q_src >= 0 && (q_src as usize) < q_len {
                        acc += grow[q] * arow[q_src as usize];
                    }
                }
                *wv += s * acc;
            }
        }
    }
}
