//! Layer descriptions and their forward/backward kernels.
//!
//! Activations are flat `f64` slices; the shape travelling with them is
//! `[n]` for vectors and `[channels, height, width]` for feature maps.

use serde::{Deserialize, Serialize};

use super::Tensor;

/// Negative-side slope of [`LayerSpec::LeakyReLU`].
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding; the filter must fit entirely inside the input.
    #[default]
    Valid,
    /// Zero padding so that the output side is `ceil(input / stride)`. The
    /// odd pixel of padding, if any, goes to the bottom/right edge.
    Same,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    Dense {
        in_units: usize,
        out_units: usize,
    },
    Conv2D {
        in_channels: usize,
        out_channels: usize,
        filter_h: usize,
        filter_w: usize,
        stride: usize,
        #[serde(default)]
        padding: Padding,
    },
    ReLU,
    LeakyReLU,
    Sigmoid,
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

fn conv_axis(input: usize, filter: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (input >= filter).then(|| ((input - filter) / stride + 1, 0)),
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + filter).saturating_sub(input);
            Some((out, total / 2))
        }
    }
}

impl LayerSpec {
    pub fn dense(in_units: usize, out_units: usize) -> Self {
        LayerSpec::Dense {
            in_units,
            out_units,
        }
    }

    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        filter: (usize, usize),
        stride: usize,
        padding: Padding,
    ) -> Self {
        LayerSpec::Conv2D {
            in_channels,
            out_channels,
            filter_h: filter.0,
            filter_w: filter.1,
            stride,
            padding,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Conv2D { .. } => "Conv2D",
            LayerSpec::ReLU => "ReLU",
            LayerSpec::LeakyReLU => "LeakyReLU",
            LayerSpec::Sigmoid => "Sigmoid",
            LayerSpec::Flatten => "Flatten",
        }
    }

    pub(crate) fn conv_geometry(&self, input: &[usize]) -> Result<ConvGeometry, String> {
        let LayerSpec::Conv2D {
            in_channels,
            out_channels,
            filter_h,
            filter_w,
            stride,
            padding,
        } = *self
        else {
            return Err("not a convolution".into());
        };
        if in_channels == 0 || out_channels == 0 || filter_h == 0 || filter_w == 0 || stride == 0 {
            return Err("convolution dimensions and stride must be positive".into());
        }
        let &[c, h, w] = input else {
            return Err(format!("Conv2D expects [channels, height, width], got {input:?}"));
        };
        if c != in_channels {
            return Err(format!("Conv2D expects {in_channels} channels, got {c}"));
        }
        let (out_h, pad_top) = conv_axis(h, filter_h, stride, padding)
            .ok_or_else(|| format!("{filter_h}-row filter does not fit {h} rows"))?;
        let (out_w, pad_left) = conv_axis(w, filter_w, stride, padding)
            .ok_or_else(|| format!("{filter_w}-column filter does not fit {w} columns"))?;
        Ok(ConvGeometry {
            in_c: c,
            in_h: h,
            in_w: w,
            out_c: out_channels,
            out_h,
            out_w,
            kh: filter_h,
            kw: filter_w,
            stride,
            pad_top,
            pad_left,
        })
    }

    /// Output shape for a given input shape, or a description of the mismatch.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
            } => {
                if in_units == 0 || out_units == 0 {
                    return Err("Dense units must be positive".into());
                }
                match input {
                    [n] if *n == in_units => Ok(vec![out_units]),
                    _ => Err(format!("Dense expects [{in_units}], got {input:?}")),
                }
            }
            LayerSpec::Conv2D { .. } => {
                let g = self.conv_geometry(input)?;
                Ok(vec![g.out_c, g.out_h, g.out_w])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::ReLU | LayerSpec::LeakyReLU | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }

    /// Shapes of this layer's parameter tensors (weights first, then bias).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
            } => vec![vec![out_units, in_units], vec![out_units]],
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                filter_h,
                filter_w,
                ..
            } => vec![
                vec![out_channels, in_channels, filter_h, filter_w],
                vec![out_channels],
            ],
            _ => Vec::new(),
        }
    }

    /// `(fan_in, fan_out)` used by the uniform initializer.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
            } => Some((in_units, out_units)),
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                filter_h,
                filter_w,
                ..
            } => Some((
                in_channels * filter_h * filter_w,
                out_channels * filter_h * filter_w,
            )),
            _ => None,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Runs one layer. `params` holds `[weights, bias]` for parametric layers.
pub(crate) fn forward(spec: &LayerSpec, in_shape: &[usize], params: &[Tensor], input: &[f64]) -> Vec<f64> {
    match spec {
        LayerSpec::Dense {
            in_units,
            out_units,
        } => {
            let (w, b) = (params[0].data(), params[1].data());
            (0..*out_units)
                .map(|o| {
                    let row = &w[o * in_units..(o + 1) * in_units];
                    b[o] + dot(row, input)
                })
                .collect()
        }
        LayerSpec::Conv2D { .. } => {
            let g = spec.conv_geometry(in_shape).expect("validated geometry");
            conv_forward(&g, params[0].data(), params[1].data(), input)
        }
        LayerSpec::ReLU => input.iter().map(|&v| v.max(0.0)).collect(),
        LayerSpec::LeakyReLU => input
            .iter()
            .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
            .collect(),
        LayerSpec::Sigmoid => input.iter().map(|&v| sigmoid(v)).collect(),
        LayerSpec::Flatten => input.to_vec(),
    }
}

/// Back-propagates `grad_out` through one layer, adding parameter gradients
/// into `param_grads` and returning the gradient with respect to the input.
pub(crate) fn backward(
    spec: &LayerSpec,
    in_shape: &[usize],
    params: &[Tensor],
    input: &[f64],
    output: &[f64],
    grad_out: &[f64],
    param_grads: &mut [Vec<f64>],
    need_input_grad: bool,
) -> Vec<f64> {
    match spec {
        LayerSpec::Dense {
            in_units,
            out_units,
        } => {
            let w = params[0].data();
            let mut grad_in = vec![0.0; if need_input_grad { *in_units } else { 0 }];
            let (gw, gb) = param_grads.split_at_mut(1);
            let (gw, gb) = (&mut gw[0], &mut gb[0]);
            for o in 0..*out_units {
                let g = grad_out[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                axpy(g, input, &mut gw[o * in_units..(o + 1) * in_units]);
                if need_input_grad {
                    axpy(g, &w[o * in_units..(o + 1) * in_units], &mut grad_in);
                }
            }
            grad_in
        }
        LayerSpec::Conv2D { .. } => {
            let g = spec.conv_geometry(in_shape).expect("validated geometry");
            conv_backward(&g, params[0].data(), input, grad_out, param_grads, need_input_grad)
        }
        LayerSpec::ReLU => input
            .iter()
            .zip(grad_out)
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
        LayerSpec::LeakyReLU => input
            .iter()
            .zip(grad_out)
            .map(|(&x, &g)| if x > 0.0 { g } else { LEAKY_SLOPE * g })
            .collect(),
        LayerSpec::Sigmoid => output
            .iter()
            .zip(grad_out)
            .map(|(&y, &g)| g * y * (1.0 - y))
            .collect(),
        LayerSpec::Flatten => grad_out.to_vec(),
    }
}

/// Dense forward over a batch. Each weight row is reused across the batch
/// while it is in cache; results equal per-sample [`forward`].
pub(crate) fn dense_forward_batch(params: &[Tensor], out_units: usize, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (w, b) = (params[0].data(), params[1].data());
    let in_units = w.len() / out_units;
    let mut out = vec![vec![0.0; out_units]; inputs.len()];
    for o in 0..out_units {
        let row = &w[o * in_units..(o + 1) * in_units];
        for (x, y) in inputs.iter().zip(out.iter_mut()) {
            y[o] = b[o] + dot(row, x);
        }
    }
    out
}

/// Dense backward over a batch. Parameter gradients accumulate in sample
/// order, so the sums equal those of per-sample [`backward`] calls.
pub(crate) fn dense_backward_batch(
    params: &[Tensor],
    out_units: usize,
    inputs: &[Vec<f64>],
    grad_out: &[Vec<f64>],
    param_grads: &mut [Vec<f64>],
    need_input_grad: bool,
) -> Vec<Vec<f64>> {
    let w = params[0].data();
    let in_units = w.len() / out_units;
    let mut grad_in = vec![vec![0.0; if need_input_grad { in_units } else { 0 }]; inputs.len()];
    let (gw, gb) = param_grads.split_at_mut(1);
    let (gw, gb) = (&mut gw[0], &mut gb[0]);
    for o in 0..out_units {
        let w_row = &w[o * in_units..(o + 1) * in_units];
        let gw_row = &mut gw[o * in_units..(o + 1) * in_units];
        for ((x, go), gi) in inputs.iter().zip(grad_out).zip(grad_in.iter_mut()) {
            let g = go[o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            axpy(g, x, gw_row);
            if need_input_grad {
                axpy(g, w_row, gi);
            }
        }
    }
    grad_in
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators let the loop vectorize
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] * b[4 * i + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Input row/column touched by output index `o` and filter tap `k`, if any.
#[inline]
fn tap(o: usize, k: usize, stride: usize, pad: usize, size: usize) -> Option<usize> {
    (o * stride + k).checked_sub(pad).filter(|&i| i < size)
}

fn conv_forward(g: &ConvGeometry, kernel: &[f64], bias: &[f64], input: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.out_c * g.out_h * g.out_w];
    for o in 0..g.out_c {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let mut acc = bias[o];
                for c in 0..g.in_c {
                    let kbase = (o * g.in_c + c) * g.kh;
                    let ibase = c * g.in_h;
                    for ky in 0..g.kh {
                        let Some(iy) = tap(oy, ky, g.stride, g.pad_top, g.in_h) else {
                            continue;
                        };
                        let krow = &kernel[(kbase + ky) * g.kw..(kbase + ky + 1) * g.kw];
                        let irow = &input[(ibase + iy) * g.in_w..(ibase + iy + 1) * g.in_w];
                        for (kx, kv) in krow.iter().enumerate() {
                            if let Some(ix) = tap(ox, kx, g.stride, g.pad_left, g.in_w) {
                                acc += kv * irow[ix];
                            }
                        }
                    }
                }
                out[(o * g.out_h + oy) * g.out_w + ox] = acc;
            }
        }
    }
    out
}

fn conv_backward(
    g: &ConvGeometry,
    kernel: &[f64],
    input: &[f64],
    grad_out: &[f64],
    param_grads: &mut [Vec<f64>],
    need_input_grad: bool,
) -> Vec<f64> {
    let mut grad_in = vec![0.0; if need_input_grad { input.len() } else { 0 }];
    let (gk, gb) = param_grads.split_at_mut(1);
    let (gk, gb) = (&mut gk[0], &mut gb[0]);
    for o in 0..g.out_c {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let go = grad_out[(o * g.out_h + oy) * g.out_w + ox];
                if go == 0.0 {
                    continue;
                }
                gb[o] += go;
                for c in 0..g.in_c {
                    let kbase = (o * g.in_c + c) * g.kh;
                    let ibase = c * g.in_h;
                    for ky in 0..g.kh {
                        let Some(iy) = tap(oy, ky, g.stride, g.pad_top, g.in_h) else {
                            continue;
                        };
                        let krow = (kbase + ky) * g.kw;
                        let irow = (ibase + iy) * g.in_w;
                        for kx in 0..g.kw {
                            if let Some(ix) = tap(ox, kx, g.stride, g.pad_left, g.in_w) {
                                gk[krow + kx] += go * input[irow + ix];
                                if need_input_grad {
                                    grad_in[irow + ix] += go * kernel[krow + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}
