//! Style-transfer enhancement of morphs: conv-net features, Gram-matrix
//! style targets, the content/style loss with its analytic gradient, and a
//! box-constrained quasi-Newton optimizer.

mod enhance;
mod features;
mod lbfgsb;
mod loss;
mod net;

pub use self::enhance::{enhance_morph, Enhancement};
pub use self::features::{
    forward, forward_layers, gram, style_target, style_target_average, FeatureMap, FeatureMaps,
    GramMatrix, StyleTarget,
};
pub use self::lbfgsb::{lbfgsb_minimize, Bounds, Minimization, OptimizerConfig, Termination};
pub use self::loss::{
    loss_and_grad, LossBreakdown, LossConfig, LossEval, DEFAULT_CONTENT_WEIGHT,
    DEFAULT_STYLE_WEIGHT,
};
pub use self::net::{
    build_net, build_test_net, load_weights, ConvNet, ConvParams, Layer, LayerKind,
};
