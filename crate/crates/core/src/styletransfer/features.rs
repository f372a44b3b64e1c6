use std::collections::BTreeMap;

use super::net::{ConvNet, Tensor3};
use crate::error::{Error, Result};
use crate::imagekit::Image;
use crate::scalar::Real;

/// One layer's activations as an `n × m` matrix (`n` maps of `m` pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    pub n: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn m(&self) -> usize {
        self.width * self.height
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.m()..(i + 1) * self.m()]
    }

    fn from_tensor(t: &Tensor3<T>) -> Self {
        Self {
            n: t.channels,
            width: t.width,
            height: t.height,
            data: t.data.clone(),
        }
    }
}

/// Activations keyed by layer name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMaps<T = f64> {
    pub maps: BTreeMap<String, FeatureMap<T>>,
}

impl<T: Real> FeatureMaps<T> {
    pub fn get(&self, layer: &str) -> Result<&FeatureMap<T>> {
        self.maps
            .get(layer)
            .ok_or_else(|| Error::UnknownLayer(layer.into()))
    }
}

/// Symmetric `n × n` matrix of feature-map inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T = f64> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> GramMatrix<T> {
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }
}

/// Target Gram matrix per style layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StyleTarget<T = f64> {
    pub grams: BTreeMap<String, GramMatrix<T>>,
}

pub(crate) fn image_tensor<T: Real>(img: &Image<T>) -> Tensor3<T> {
    Tensor3 {
        channels: img.channels(),
        width: img.width(),
        height: img.height(),
        data: img.data().to_vec(),
    }
}

/// Activations of every layer.
pub fn forward<T: Real>(net: &ConvNet<T>, img: &Image<T>) -> Result<FeatureMaps<T>> {
    let names: Vec<&str> = net.layers().iter().map(|l| l.name.as_str()).collect();
    forward_layers(net, img, &names)
}

/// Activations of the named layers only; the net runs up to the deepest one.
pub fn forward_layers<T: Real, S: AsRef<str>>(
    net: &ConvNet<T>,
    img: &Image<T>,
    layers: &[S],
) -> Result<FeatureMaps<T>> {
    let idx = layers
        .iter()
        .map(|l| net.layer_index(l.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let Some(&last) = idx.iter().max() else {
        return Ok(FeatureMaps::default());
    };
    let outs = net.run(image_tensor(img), last)?;
    Ok(FeatureMaps {
        maps: layers
            .iter()
            .zip(idx)
            .map(|(name, i)| (name.as_ref().to_string(), FeatureMap::from_tensor(&outs[i])))
            .collect(),
    })
}

pub fn gram<T: Real>(features: &FeatureMaps<T>, layer: &str) -> Result<GramMatrix<T>> {
    Ok(gram_of(features.get(layer)?))
}

pub(crate) fn gram_of<T: Real>(f: &FeatureMap<T>) -> GramMatrix<T> {
    let n = f.n;
    let mut data = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let v: T = f.row(i).iter().zip(f.row(j)).map(|(&a, &b)| a * b).sum();
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    GramMatrix { n, data }
}

/// Gram matrices of `img` on the given style layers.
pub fn style_target<T: Real, S: AsRef<str>>(
    net: &ConvNet<T>,
    img: &Image<T>,
    layers: &[S],
) -> Result<StyleTarget<T>> {
    let fm = forward_layers(net, img, layers)?;
    Ok(StyleTarget {
        grams: fm
            .maps
            .iter()
            .map(|(k, f)| (k.clone(), gram_of(f)))
            .collect(),
    })
}

/// Per-layer mean `(G_A + G_B) / 2`.
pub fn style_target_average<T: Real>(
    a: &StyleTarget<T>,
    b: &StyleTarget<T>,
) -> Result<StyleTarget<T>> {
    if !a.grams.keys().eq(b.grams.keys()) {
        return Err(Error::Shape("style targets cover different layers".into()));
    }
    let half = T::lit(0.5);
    let mut grams = BTreeMap::new();
    for ((name, ga), gb) in a.grams.iter().zip(b.grams.values()) {
        if ga.n != gb.n {
            return Err(Error::Shape(format!(
                "layer `{name}`: {} vs {} maps",
                ga.n, gb.n
            )));
        }
        let data = ga
            .data
            .iter()
            .zip(&gb.data)
            .map(|(&x, &y)| half * (x + y))
            .collect();
        grams.insert(name.clone(), GramMatrix { n: ga.n, data });
    }
    Ok(StyleTarget { grams })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::styletransfer::net::{build_test_net, ConvParams, Layer, LayerKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_conv(weights: Vec<f64>, bias: f64) -> ConvNet<f64> {
        ConvNet::new(
            1,
            vec![Layer {
                name: "conv1_1".into(),
                kind: LayerKind::Conv(ConvParams {
                    in_channels: 1,
                    out_channels: 1,
                    weights,
                    bias: vec![bias],
                }),
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_net_gives_zero_maps() {
        let net = single_conv(vec![0.0; 9], 0.0);
        let img = Image::from_fn(5, 4, 1, |_, x, y| (x + y) as f64 / 8.0).unwrap();
        let fm = forward(&net, &img).unwrap();
        assert!(fm.get("conv1_1").unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn center_tap_is_identity() {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let net = single_conv(w, 0.0);
        let img = Image::from_fn(5, 4, 1, |_, x, y| (x * 3 + y) as f64 / 20.0).unwrap();
        assert_eq!(
            forward(&net, &img).unwrap().get("conv1_1").unwrap().data,
            img.data()
        );
    }

    #[test]
    fn probed_pixel_matches_hand_sum() {
        let w: Vec<f64> = (1..=9).map(f64::from).collect();
        let net = single_conv(w, 0.5);
        let img = Image::from_fn(4, 4, 1, |_, x, y| (y * 4 + x) as f64).unwrap();
        let out = forward(&net, &img).unwrap();
        let f = out.get("conv1_1").unwrap();
        // corner (0,0): taps (1,1),(1,2),(2,1),(2,2) => 5·0 + 6·1 + 8·4 + 9·5
        assert_eq!(f.data[0], 0.5 + 6.0 + 32.0 + 45.0);
        // interior (1,1): Σ w_k · pixel_k over the full window
        let mut acc = 0.5;
        for ky in 0..3 {
            for kx in 0..3 {
                acc += (ky * 3 + kx + 1) as f64 * (ky * 4 + kx) as f64;
            }
        }
        assert_eq!(f.data[5], acc);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let net = build_test_net::<f64>(1, &[2]).unwrap();
        let gray = Image::<f64>::filled(4, 4, 1, 0.5).unwrap();
        assert!(matches!(forward(&net, &gray), Err(Error::Shape(_))));
        assert!(matches!(
            gram(&FeatureMaps::<f64>::default(), "conv1_1"),
            Err(Error::UnknownLayer(_))
        ));
    }

    #[test]
    fn gram_examples_and_oracle() {
        let fm = FeatureMaps {
            maps: [(
                "l".to_string(),
                FeatureMap {
                    n: 2,
                    width: 2,
                    height: 1,
                    data: vec![1.0, 2.0, 3.0, 4.0],
                },
            )]
            .into(),
        };
        assert_eq!(gram(&fm, "l").unwrap().data, vec![5.0, 11.0, 11.0, 25.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = FeatureMap {
                n: 3,
                width: 4,
                height: 1,
                data: (0..12)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            };
            let g = gram_of(&f);
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += f.data[i * 4 + k] * f.data[j * 4 + k];
                    }
                    assert!((g.at(i, j) - s).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn average_examples() {
        let t = |v: f64| StyleTarget {
            grams: [(
                "s".to_string(),
                GramMatrix {
                    n: 1,
                    data: vec![v],
                },
            )]
            .into(),
        };
        assert_eq!(style_target_average(&t(2.0), &t(6.0)).unwrap(), t(4.0));
        assert_eq!(style_target_average(&t(3.0), &t(3.0)).unwrap(), t(3.0));
        let other = StyleTarget {
            grams: [(
                "s".to_string(),
                GramMatrix {
                    n: 2,
                    data: vec![0.0; 4],
                },
            )]
            .into(),
        };
        assert!(style_target_average(&t(1.0), &other).is_err());
    }

    #[test]
    fn gram_shape_is_size_independent() {
        let net = build_test_net::<f64>(2, &[3, 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let small = Image::from_fn(8, 6, 3, |_, _, _| rng.gen::<f64>()).unwrap();
        let big = Image::from_fn(16, 12, 3, |c, x, y| small.get(c, x / 2, y / 2)).unwrap();
        let layers = ["conv1_1", "conv2_1"];
        let a = style_target(&net, &small, &layers).unwrap();
        let b = style_target(&net, &big, &layers).unwrap();
        for name in layers {
            assert_eq!(a.grams[name].n, b.grams[name].n);
            assert_ne!(a.grams[name].data, b.grams[name].data);
        }
    }
}
