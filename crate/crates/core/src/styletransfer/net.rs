//! Block-structured convolutional feature extractor (3×3 same-padding convs,
//! ReLU, 2×2 average pooling) with exact forward and backward passes.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::container::{Tensor, WeightFile};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][3][3]`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    #[inline]
    fn tap(&self, o: usize, c: usize, ky: usize, kx: usize) -> T {
        self.weights[((o * self.in_channels + c) * 3 + ky) * 3 + kx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind<T> {
    Conv(ConvParams<T>),
    Relu,
    AvgPool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub name: String,
    pub kind: LayerKind<T>,
}

/// Feature extractor. Layer names follow the `conv{block}_{index}`,
/// `relu{block}_{index}`, `pool{block}` scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet<T = f64> {
    in_channels: usize,
    layers: Vec<Layer<T>>,
}

/// Activation tensor: `channels` planes of `width × height`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensor3<T> {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self {
            channels,
            width,
            height,
            data: vec![T::zero(); channels * width * height],
        }
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }
}

impl<T: Real> ConvNet<T> {
    pub fn new(in_channels: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one input channel".into(),
            ));
        }
        let mut channels = in_channels;
        for (i, layer) in layers.iter().enumerate() {
            if layers[..i].iter().any(|l| l.name == layer.name) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate layer name `{}`",
                    layer.name
                )));
            }
            if let LayerKind::Conv(p) = &layer.kind {
                if p.in_channels != channels {
                    return Err(Error::Shape(format!(
                        "layer `{}` expects {} input channels, previous layer yields {channels}",
                        layer.name, p.in_channels
                    )));
                }
                if p.weights.len() != p.out_channels * p.in_channels * 9
                    || p.bias.len() != p.out_channels
                {
                    return Err(Error::Shape(format!(
                        "layer `{}` has inconsistent tensor sizes",
                        layer.name
                    )));
                }
                if p.weights.iter().chain(&p.bias).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "layer `{}` has non-finite weights",
                        layer.name
                    )));
                }
                channels = p.out_channels;
            }
        }
        Ok(Self {
            in_channels,
            layers,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.into()))
    }

    /// Output channel count of the layer at `idx`.
    pub fn channels_at(&self, idx: usize) -> usize {
        self.layers[..=idx]
            .iter()
            .rev()
            .find_map(|l| match &l.kind {
                LayerKind::Conv(p) => Some(p.out_channels),
                _ => None,
            })
            .unwrap_or(self.in_channels)
    }

    /// Names of the convolution layers grouped by block number, in order.
    pub fn conv_blocks(&self) -> Vec<Vec<String>> {
        let mut blocks: Vec<(usize, Vec<String>)> = Vec::new();
        for l in &self.layers {
            if let (LayerKind::Conv(_), Some((b, _))) = (&l.kind, parse_conv_name(&l.name)) {
                match blocks.last_mut() {
                    Some((cur, names)) if *cur == b => names.push(l.name.clone()),
                    _ => blocks.push((b, vec![l.name.clone()])),
                }
            }
        }
        blocks.into_iter().map(|(_, n)| n).collect()
    }

    pub fn cast<U: Real>(&self) -> ConvNet<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect();
        ConvNet {
            in_channels: self.in_channels,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    name: l.name.clone(),
                    kind: match &l.kind {
                        LayerKind::Conv(p) => LayerKind::Conv(ConvParams {
                            in_channels: p.in_channels,
                            out_channels: p.out_channels,
                            weights: conv(&p.weights),
                            bias: conv(&p.bias),
                        }),
                        LayerKind::Relu => LayerKind::Relu,
                        LayerKind::AvgPool => LayerKind::AvgPool,
                    },
                })
                .collect(),
        }
    }

    /// Runs layers `0..=last`, returning every layer output (index `i` holds
    /// the output of layer `i`).
    pub(crate) fn run(&self, input: Tensor3<T>, last: usize) -> Result<Vec<Tensor3<T>>> {
        if input.channels != self.in_channels {
            return Err(Error::Shape(format!(
                "network expects {} channels, image has {}",
                self.in_channels, input.channels
            )));
        }
        let mut outs: Vec<Tensor3<T>> = Vec::with_capacity(last + 1);
        for layer in &self.layers[..=last] {
            let x = outs.last().unwrap_or(&input);
            let y = match &layer.kind {
                LayerKind::Conv(p) => conv_forward(p, x),
                LayerKind::Relu => Tensor3 {
                    data: x.data.iter().map(|&v| v.max(T::zero())).collect(),
                    ..*x
                },
                LayerKind::AvgPool => pool_forward(x, &layer.name)?,
            };
            outs.push(y);
        }
        Ok(outs)
    }

    /// Back-propagates `grads[i]` (gradient w.r.t. the output of layer `i`,
    /// accumulated by the caller) down to the network input.
    pub(crate) fn backward(
        &self,
        input: &Tensor3<T>,
        outs: &[Tensor3<T>],
        mut grads: Vec<Tensor3<T>>,
    ) -> Tensor3<T> {
        let mut g_in = Tensor3::zeros(input.channels, input.width, input.height);
        for i in (0..grads.len()).rev() {
            let g_out = std::mem::replace(&mut grads[i], Tensor3::zeros(0, 0, 0));
            let x = if i == 0 { input } else { &outs[i - 1] };
            let g_x = match &self.layers[i].kind {
                LayerKind::Conv(p) => conv_backward(p, &g_out),
                LayerKind::Relu => Tensor3 {
                    // subgradient 0 at exactly 0
                    data: g_out
                        .data
                        .iter()
                        .zip(&x.data)
                        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                        .collect(),
                    ..g_out
                },
                LayerKind::AvgPool => pool_backward(&g_out, x.width, x.height),
            };
            let target = if i == 0 { &mut g_in } else { &mut grads[i - 1] };
            for (t, v) in target.data.iter_mut().zip(&g_x.data) {
                *t += *v;
            }
        }
        g_in
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut tensors = Vec::new();
        for l in &self.layers {
            if let LayerKind::Conv(p) = &l.kind {
                let to32 = |v: &[T]| v.iter().map(|x| x.as_f64() as f32).collect::<Vec<_>>();
                tensors.push(
                    Tensor::new(
                        format!("{}.weight", l.name),
                        vec![p.out_channels as u32, p.in_channels as u32, 3, 3],
                        to32(&p.weights),
                    )
                    .expect("consistent conv tensor"),
                );
                tensors.push(
                    Tensor::new(
                        format!("{}.bias", l.name),
                        vec![p.out_channels as u32],
                        to32(&p.bias),
                    )
                    .expect("consistent bias tensor"),
                );
            }
        }
        WeightFile::new(tensors)
    }

    /// Rebuilds a network from `conv{b}_{k}.weight` / `.bias` tensor pairs:
    /// a ReLU follows every conv and an average pool closes every block.
    pub fn from_weight_file(wf: &WeightFile) -> Result<Self> {
        if !wf.tensors.len().is_multiple_of(2) || wf.tensors.is_empty() {
            return Err(Error::Container("expected weight/bias tensor pairs".into()));
        }
        let mut layers = Vec::new();
        let mut block: Option<usize> = None;
        let mut in_channels = None;
        for pair in wf.tensors.chunks(2) {
            let (w, b) = (&pair[0], &pair[1]);
            let name = w
                .name
                .strip_suffix(".weight")
                .ok_or_else(|| Error::Container(format!("unexpected tensor `{}`", w.name)))?;
            if b.name != format!("{name}.bias") {
                return Err(Error::Container(format!("missing bias for `{name}`")));
            }
            let (blk, idx) = parse_conv_name(name)
                .ok_or_else(|| Error::Container(format!("bad layer name `{name}`")))?;
            if w.dims.len() != 4
                || w.dims[2] != 3
                || w.dims[3] != 3
                || b.dims.len() != 1
                || b.dims[0] != w.dims[0]
            {
                return Err(Error::Container(format!("bad tensor shapes for `{name}`")));
            }
            if let Some(prev) = block {
                if prev != blk {
                    layers.push(Layer {
                        name: format!("pool{prev}"),
                        kind: LayerKind::AvgPool,
                    });
                }
            }
            block = Some(blk);
            in_channels.get_or_insert(w.dims[1] as usize);
            let from32 = |v: &[f32]| v.iter().map(|&x| T::lit(x as f64)).collect();
            layers.push(Layer {
                name: name.to_string(),
                kind: LayerKind::Conv(ConvParams {
                    in_channels: w.dims[1] as usize,
                    out_channels: w.dims[0] as usize,
                    weights: from32(&w.data),
                    bias: from32(&b.data),
                }),
            });
            layers.push(Layer {
                name: format!("relu{blk}_{idx}"),
                kind: LayerKind::Relu,
            });
        }
        if let Some(b) = block {
            layers.push(Layer {
                name: format!("pool{b}"),
                kind: LayerKind::AvgPool,
            });
        }
        Self::new(in_channels.unwrap_or(0), layers)
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_weight_file().save(path)
    }
}

pub fn load_weights<T: Real>(path: impl AsRef<Path>) -> Result<ConvNet<T>> {
    ConvNet::from_weight_file(&WeightFile::load(path)?)
}

fn parse_conv_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("conv")?;
    let (b, k) = rest.split_once('_')?;
    Some((b.parse().ok()?, k.parse().ok()?))
}

/// Seeded network for 3-channel input: per block two convs (each followed by
/// ReLU) and an average pool. Weights are N(0,1)/sqrt(fan-in), rounded to
/// `f32`; biases are zero.
pub fn build_test_net<T: Real>(seed: u64, channels_per_block: &[usize]) -> Result<ConvNet<T>> {
    build_net(seed, 3, channels_per_block, 2)
}

pub fn build_net<T: Real>(
    seed: u64,
    in_channels: usize,
    channels_per_block: &[usize],
    convs_per_block: usize,
) -> Result<ConvNet<T>> {
    if channels_per_block.is_empty() || convs_per_block == 0 || channels_per_block.contains(&0) {
        return Err(Error::InvalidArgument(
            "need at least one non-empty block".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev = in_channels;
    for (bi, &ch) in channels_per_block.iter().enumerate() {
        let b = bi + 1;
        for k in 1..=convs_per_block {
            let fan_in = (prev * 9) as f64;
            let scale = 1.0 / fan_in.sqrt();
            let weights = (0..ch * prev * 9)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit((z * scale) as f32 as f64)
                })
                .collect();
            layers.push(Layer {
                name: format!("conv{b}_{k}"),
                kind: LayerKind::Conv(ConvParams {
                    in_channels: prev,
                    out_channels: ch,
                    weights,
                    bias: vec![T::zero(); ch],
                }),
            });
            layers.push(Layer {
                name: format!("relu{b}_{k}"),
                kind: LayerKind::Relu,
            });
            prev = ch;
        }
        layers.push(Layer {
            name: format!("pool{b}"),
            kind: LayerKind::AvgPool,
        });
    }
    ConvNet::new(in_channels, layers)
}

/// Adds `w · src` shifted by `(dx, dy)` into `dst` wherever both are in range:
/// `dst[y][x] += w · src[y + dy][x + dx]`.
#[inline]
fn shift_add<T: Real>(
    dst: &mut [T],
    src: &[T],
    w: T,
    width: usize,
    height: usize,
    dx: isize,
    dy: isize,
) {
    let x_lo = (-dx).max(0) as usize;
    let x_hi = (width as isize - dx).min(width as isize).max(0) as usize;
    let y_lo = (-dy).max(0) as usize;
    let y_hi = (height as isize - dy).min(height as isize).max(0) as usize;
    if x_lo >= x_hi {
        return;
    }
    for y in y_lo..y_hi {
        let sy = (y as isize + dy) as usize;
        let d = &mut dst[y * width + x_lo..y * width + x_hi];
        let s_start = (sy * width) as isize + x_lo as isize + dx;
        let s = &src[s_start as usize..s_start as usize + (x_hi - x_lo)];
        for (a, &b) in d.iter_mut().zip(s) {
            *a += w * b;
        }
    }
}

fn conv_forward<T: Real>(p: &ConvParams<T>, x: &Tensor3<T>) -> Tensor3<T> {
    let (w, h, n) = (x.width, x.height, x.plane_len());
    let mut y = Tensor3::zeros(p.out_channels, w, h);
    for o in 0..p.out_channels {
        let out = &mut y.data[o * n..(o + 1) * n];
        out.iter_mut().for_each(|v| *v = p.bias[o]);
        for c in 0..p.in_channels {
            let src = &x.data[c * n..(c + 1) * n];
            for ky in 0..3 {
                for kx in 0..3 {
                    shift_add(
                        out,
                        src,
                        p.tap(o, c, ky, kx),
                        w,
                        h,
                        kx as isize - 1,
                        ky as isize - 1,
                    );
                }
            }
        }
    }
    y
}

fn conv_backward<T: Real>(p: &ConvParams<T>, g: &Tensor3<T>) -> Tensor3<T> {
    let (w, h, n) = (g.width, g.height, g.plane_len());
    let mut gx = Tensor3::zeros(p.in_channels, w, h);
    for c in 0..p.in_channels {
        let dst = &mut gx.data[c * n..(c + 1) * n];
        for o in 0..p.out_channels {
            let src = &g.data[o * n..(o + 1) * n];
            for ky in 0..3 {
                for kx in 0..3 {
                    // transpose of the forward shift
                    shift_add(
                        dst,
                        src,
                        p.tap(o, c, ky, kx),
                        w,
                        h,
                        1 - kx as isize,
                        1 - ky as isize,
                    );
                }
            }
        }
    }
    gx
}

fn pool_forward<T: Real>(x: &Tensor3<T>, name: &str) -> Result<Tensor3<T>> {
    let (ow, oh) = (x.width / 2, x.height / 2);
    if ow == 0 || oh == 0 {
        return Err(Error::Shape(format!(
            "layer `{name}` cannot pool a {}x{} map",
            x.width, x.height
        )));
    }
    let quarter = T::lit(0.25);
    let mut y = Tensor3::zeros(x.channels, ow, oh);
    for c in 0..x.channels {
        let src = &x.data[c * x.plane_len()..];
        for oy in 0..oh {
            for ox in 0..ow {
                let i = 2 * oy * x.width + 2 * ox;
                let s = src[i] + src[i + 1] + src[i + x.width] + src[i + x.width + 1];
                y.data[c * ow * oh + oy * ow + ox] = quarter * s;
            }
        }
    }
    Ok(y)
}

fn pool_backward<T: Real>(g: &Tensor3<T>, in_w: usize, in_h: usize) -> Tensor3<T> {
    let quarter = T::lit(0.25);
    let mut gx = Tensor3::zeros(g.channels, in_w, in_h);
    let n = in_w * in_h;
    for c in 0..g.channels {
        for oy in 0..g.height {
            for ox in 0..g.width {
                let v = quarter * g.data[c * g.plane_len() + oy * g.width + ox];
                let i = c * n + 2 * oy * in_w + 2 * ox;
                gx.data[i] += v;
                gx.data[i + 1] += v;
                gx.data[i + in_w] += v;
                gx.data[i + in_w + 1] += v;
            }
        }
    }
    gx
}
