use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, FeatureVector, LabeledSample, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 50,
            seed: 0,
        }
    }
}

/// Linear margin classifier over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub scheme: Scheme,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, f: &FeatureVector) -> Result<f64> {
        if f.scheme() != self.scheme {
            return Err(Error::Shape(format!(
                "model expects {}, got {}",
                self.scheme,
                f.scheme()
            )));
        }
        Ok(self.decision(&self.standardize(f.values())))
    }

    fn standardize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    fn decision(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}

/// L2-regularized hinge loss minimized by epoch-wise stochastic subgradient
/// steps of size `1/(λ·t)`. Attacks are `+1`.
///
/// The bias is regularized like a weight on a constant feature. Left free, it
/// keeps the `1/λ`-sized first steps forever and swamps the decision value.
pub fn train_linear(samples: &[LabeledSample], cfg: &LinearConfig) -> Result<LinearModel> {
    let scheme = check_training_set(samples)?;
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {}",
            cfg.lambda
        )));
    }
    let d = scheme.len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        mean.iter_mut()
            .zip(s.features.values())
            .for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for s in samples {
        for ((v, x), m) in var.iter_mut().zip(s.features.values()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = (v / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let mut model = LinearModel {
        scheme,
        mean,
        scale,
        weights: vec![0.0; d],
        bias: 0.0,
    };
    let data: Vec<(Vec<f64>, f64)> = samples
        .iter()
        .map(|s| (model.standardize(s.features.values()), s.label.sign()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let (x, y) = &data[i];
            let margin = y * model.decision(x);
            let shrink = 1.0 - eta * cfg.lambda;
            model.weights.iter_mut().for_each(|w| *w *= shrink);
            model.bias *= shrink;
            if margin < 1.0 {
                model
                    .weights
                    .iter_mut()
                    .zip(x)
                    .for_each(|(w, xi)| *w += eta * y * xi);
                model.bias += eta * y;
            }
        }
    }
    Ok(model)
}
