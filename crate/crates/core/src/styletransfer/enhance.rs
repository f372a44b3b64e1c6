use super::features::{forward_layers, style_target, style_target_average};
use super::lbfgsb::{lbfgsb_minimize, Bounds, Minimization, OptimizerConfig};
use super::loss::{loss_and_grad, LossBreakdown, LossConfig};
use super::net::ConvNet;
use crate::error::Result;
use crate::imagekit::Image;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct Enhancement<T: Real = f64> {
    pub image: Image<T>,
    pub optimization: Minimization<T>,
    pub initial: LossBreakdown<T>,
    pub last: LossBreakdown<T>,
}

/// Pulls the blended morph toward the averaged style of both originals while
/// keeping its own content, starting from the blend itself. The box is always
/// `[0, 1]` per sample; any bounds in `opt_cfg` are ignored.
pub fn enhance_morph<T: Real>(
    blended: &Image<T>,
    orig_a: &Image<T>,
    orig_b: &Image<T>,
    net: &ConvNet<T>,
    loss_cfg: &LossConfig<T>,
    opt_cfg: &OptimizerConfig<T>,
) -> Result<Enhancement<T>> {
    blended.ensure_same_shape(orig_a, "enhancement inputs")?;
    blended.ensure_same_shape(orig_b, "enhancement inputs")?;
    loss_cfg.validate()?;
    let content = forward_layers(net, blended, &loss_cfg.content_layers)?;
    let style = style_target_average(
        &style_target(net, orig_a, &loss_cfg.style_layers)?,
        &style_target(net, orig_b, &loss_cfg.style_layers)?,
    )?;

    let eval = |data: &[T]| -> Result<(T, Vec<T>, LossBreakdown<T>)> {
        let img = blended.with_data(data.to_vec())?;
        let e = loss_and_grad(net, &img, &content, &style, loss_cfg)?;
        Ok((e.loss, e.grad.into_data(), e.breakdown))
    };

    let mut initial = None;
    let objective = |x: &[T]| {
        let (f, g, b) = eval(x)?;
        initial.get_or_insert(b);
        Ok((f, g))
    };
    let cfg = OptimizerConfig {
        bounds: Bounds::Uniform {
            lower: T::zero(),
            upper: T::one(),
        },
        ..opt_cfg.clone()
    };
    let optimization = lbfgsb_minimize(objective, blended.data(), &cfg)?;
    let initial = initial.expect("optimizer evaluates the start point");
    let last = if optimization.iterations == 0 {
        initial.clone()
    } else {
        eval(&optimization.x)?.2
    };
    log::debug!(
        "enhancement: {} iterations, loss {} -> {} ({:?})",
        optimization.iterations,
        optimization.trace[0],
        optimization.final_loss(),
        optimization.termination
    );
    Ok(Enhancement {
        image: blended.with_data(optimization.x.clone())?,
        optimization,
        initial,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::styletransfer::net::build_test_net;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize) -> Image<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, 3, |_, _, _| rng.gen()).unwrap()
    }

    #[test]
    fn identical_inputs_are_a_fixed_point() {
        let net = build_test_net::<f64>(3, &[4, 8]).unwrap();
        let cfg = LossConfig::default_for(&net).unwrap();
        let img = random_image(1, 16, 12);
        let out = enhance_morph(&img, &img, &img, &net, &cfg, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.optimization.iterations, 0);
        assert_eq!(out.image.data(), img.data());
    }

    #[test]
    fn style_loss_drops_and_output_stays_in_box() {
        let net = build_test_net::<f64>(3, &[4, 8]).unwrap();
        let cfg = LossConfig::default_for(&net).unwrap();
        let a = random_image(1, 16, 16);
        let b =
            Image::from_fn(16, 16, 3, |c, x, _| if (x + c) % 4 < 2 { 0.9 } else { 0.1 }).unwrap();
        let blended = crate::morphgen::blend(&a, &b, 0.5).unwrap();
        let opt = OptimizerConfig {
            max_iters: 30,
            ..Default::default()
        };
        let out = enhance_morph(&blended, &a, &b, &net, &cfg, &opt).unwrap();
        assert!(out.last.style_total < out.initial.style_total);
        assert!(out.optimization.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.image.is_displayable());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = build_test_net::<f64>(3, &[4]).unwrap();
        let cfg = LossConfig::default_for(&net).unwrap();
        let r = enhance_morph(
            &random_image(1, 8, 8),
            &random_image(2, 8, 8),
            &random_image(3, 8, 6),
            &net,
            &cfg,
            &OptimizerConfig::default(),
        );
        assert!(r.is_err());
    }
}
