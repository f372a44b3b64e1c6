use super::features::{gram_of, image_tensor, FeatureMap, FeatureMaps, StyleTarget};
use super::net::{ConvNet, Tensor3};
use crate::error::{Error, Result};
use crate::imagekit::Image;
use crate::scalar::Real;

pub const DEFAULT_CONTENT_WEIGHT: f64 = 1.0;
pub const DEFAULT_STYLE_WEIGHT: f64 = 1e3;

/// Layer roles and weights of `L = Σ v_l·C_l + Σ w_l·S_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig<T = f64> {
    pub content_layers: Vec<String>,
    pub content_weights: Vec<T>,
    pub style_layers: Vec<String>,
    pub style_weights: Vec<T>,
}

impl<T: Real> LossConfig<T> {
    pub fn new(
        content_layers: Vec<String>,
        content_weights: Vec<T>,
        style_layers: Vec<String>,
        style_weights: Vec<T>,
    ) -> Result<Self> {
        let cfg = Self {
            content_layers,
            content_weights,
            style_layers,
            style_weights,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Content on the last conv of every block, style on the first, with
    /// uniform weights `content_weight` and `style_weight`.
    pub fn for_net(net: &ConvNet<T>, content_weight: T, style_weight: T) -> Result<Self> {
        let blocks = net.conv_blocks();
        if blocks.is_empty() {
            return Err(Error::InvalidArgument(
                "network has no conv{b}_{k} layers".into(),
            ));
        }
        let content_layers: Vec<String> =
            blocks.iter().map(|b| b.last().unwrap().clone()).collect();
        let style_layers: Vec<String> = blocks.iter().map(|b| b[0].clone()).collect();
        Self::new(
            content_layers.clone(),
            vec![content_weight; content_layers.len()],
            style_layers.clone(),
            vec![style_weight; style_layers.len()],
        )
    }

    pub fn default_for(net: &ConvNet<T>) -> Result<Self> {
        Self::for_net(
            net,
            T::lit(DEFAULT_CONTENT_WEIGHT),
            T::lit(DEFAULT_STYLE_WEIGHT),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.content_layers.len() != self.content_weights.len()
            || self.style_layers.len() != self.style_weights.len()
        {
            return Err(Error::InvalidArgument(
                "one weight per layer required".into(),
            ));
        }
        let all = self.content_weights.iter().chain(&self.style_weights);
        if all.clone().any(|w| *w < T::zero() || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        if !all.clone().any(|w| *w > T::zero()) {
            return Err(Error::InvalidArgument(
                "at least one loss weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Unweighted per-layer terms plus the weighted totals.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown<T = f64> {
    pub content: Vec<(String, T)>,
    pub style: Vec<(String, T)>,
    pub content_total: T,
    pub style_total: T,
}

impl<T: Real> LossBreakdown<T> {
    pub fn total(&self) -> T {
        self.content_total + self.style_total
    }
}

#[derive(Debug, Clone)]
pub struct LossEval<T: Real = f64> {
    pub loss: T,
    pub grad: Image<T>,
    pub breakdown: LossBreakdown<T>,
}

/// Total loss of `img` against the targets and its exact gradient with
/// respect to every sample of `img`.
pub fn loss_and_grad<T: Real>(
    net: &ConvNet<T>,
    img: &Image<T>,
    content: &FeatureMaps<T>,
    style: &StyleTarget<T>,
    cfg: &LossConfig<T>,
) -> Result<LossEval<T>> {
    cfg.validate()?;
    let content_idx = cfg
        .content_layers
        .iter()
        .map(|l| net.layer_index(l))
        .collect::<Result<Vec<_>>>()?;
    let style_idx = cfg
        .style_layers
        .iter()
        .map(|l| net.layer_index(l))
        .collect::<Result<Vec<_>>>()?;
    let last = content_idx.iter().chain(&style_idx).copied().max();
    let input = image_tensor(img);
    let Some(last) = last else {
        return Err(Error::InvalidArgument(
            "loss config selects no layers".into(),
        ));
    };
    let outs = net.run(input.clone(), last)?;
    let mut grads: Vec<Tensor3<T>> = outs
        .iter()
        .map(|o| Tensor3::zeros(o.channels, o.width, o.height))
        .collect();

    let mut breakdown = LossBreakdown {
        content: Vec::new(),
        style: Vec::new(),
        content_total: T::zero(),
        style_total: T::zero(),
    };

    for ((name, &v), &i) in cfg
        .content_layers
        .iter()
        .zip(&cfg.content_weights)
        .zip(&content_idx)
    {
        let f = &outs[i];
        let p = content.get(name)?;
        if (p.n, p.width, p.height) != (f.channels, f.width, f.height) {
            return Err(Error::Shape(format!(
                "content target `{name}` is {}x{}x{}, activations are {}x{}x{}",
                p.n, p.width, p.height, f.channels, f.width, f.height
            )));
        }
        let nm = T::count(f.data.len());
        let mut sq = T::zero();
        let scale = v / nm;
        for ((g, &a), &b) in grads[i].data.iter_mut().zip(&f.data).zip(&p.data) {
            let d = a - b;
            sq += d * d;
            *g += scale * d;
        }
        let c = sq / (T::lit(2.0) * nm);
        breakdown.content.push((name.clone(), c));
        breakdown.content_total += v * c;
    }

    for ((name, &w), &i) in cfg
        .style_layers
        .iter()
        .zip(&cfg.style_weights)
        .zip(&style_idx)
    {
        let f = &outs[i];
        let target = style
            .grams
            .get(name)
            .ok_or_else(|| Error::UnknownLayer(format!("style target has no layer `{name}`")))?;
        if target.n != f.channels {
            return Err(Error::Shape(format!(
                "style target `{name}` has {} maps, activations have {}",
                target.n, f.channels
            )));
        }
        let fm = FeatureMap {
            n: f.channels,
            width: f.width,
            height: f.height,
            data: f.data.clone(),
        };
        let g = gram_of(&fm);
        let (n, m) = (fm.n, fm.m());
        let diff: Vec<T> = g
            .data
            .iter()
            .zip(&target.data)
            .map(|(&a, &b)| a - b)
            .collect();
        let sq: T = diff.iter().map(|&d| d * d).sum();
        let nm2 = T::count(n * n) * T::count(m * m);
        let s = sq / (T::lit(4.0) * nm2);
        // dS/dF = (G − A)·F / (N²M²)
        let scale = w / nm2;
        for r in 0..n {
            let out = &mut grads[i].data[r * m..(r + 1) * m];
            for j in 0..n {
                let d = scale * diff[r * n + j];
                if d == T::zero() {
                    continue;
                }
                for (o, &x) in out.iter_mut().zip(fm.row(j)) {
                    *o += d * x;
                }
            }
        }
        breakdown.style.push((name.clone(), s));
        breakdown.style_total += w * s;
    }

    let g_in = net.backward(&input, &outs, grads);
    Ok(LossEval {
        loss: breakdown.total(),
        grad: img.with_data(g_in.data)?,
        breakdown,
    })
}
