//! Size-preserving convolutional encoder and feature unfolding.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::numcore::Graph;
use crate::params::{apply_layer, Bound, Init, LayerSpec};
use crate::Scalar;

/// Residual convolutional encoder: head conv, `num_blocks` residual blocks
/// (conv-relu-conv plus skip), tail conv. All convolutions keep spatial size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub feat_channels: usize,
    pub num_blocks: usize,
    pub kernel: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { in_channels: 3, feat_channels: 64, num_blocks: 4, kernel: 3 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feat_channels == 0 || self.in_channels == 0 {
            return arg_err("encoder: channel counts must be positive");
        }
        if self.kernel.is_multiple_of(2) {
            return arg_err("encoder: kernel size must be odd");
        }
        Ok(())
    }

    /// Channel width of the unfolded feature map.
    pub fn unfolded_channels(&self) -> usize {
        9 * self.feat_channels
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let (f, k) = (self.feat_channels, self.kernel);
        let mut v = vec![LayerSpec::new("encoder.head", self.in_channels, f, k, Init::FanIn)];
        for i in 0..self.num_blocks {
            v.push(LayerSpec::new(format!("encoder.block{i}.conv1"), f, f, k, Init::FanIn));
            v.push(LayerSpec::new(format!("encoder.block{i}.conv2"), f, f, k, Init::FanIn));
        }
        v.push(LayerSpec::new("encoder.tail", f, f, k, Init::FanIn));
        v
    }

    /// Names of the biases feeding each relu, in evaluation order.
    pub fn relu_bias_names(&self) -> Vec<String> {
        (0..self.num_blocks).map(|i| format!("encoder.block{i}.conv1.bias")).collect()
    }
}

/// `[B,3,h,w] -> [B,F,h,w]`.
pub fn encode<T: Scalar, G: Graph<T>>(g: &mut G, params: &Bound<G::Node>, cfg: &EncoderConfig, img: &G::Node) -> Result<G::Node> {
    let layers = cfg.layers();
    let mut x = apply_layer(g, params, &layers[0], img)?;
    for b in 0..cfg.num_blocks {
        let h = apply_layer(g, params, &layers[1 + 2 * b], &x)?;
        let h = g.relu(&h);
        let h = apply_layer(g, params, &layers[2 + 2 * b], &h)?;
        x = g.add(&x, &h)?;
    }
    apply_layer(g, params, layers.last().expect("tail layer"), &x)
}

/// 3x3 unfolding; channel block `k` holds neighbour `(k / 3 - 1, k % 3 - 1)`.
pub fn unfold3<T: Scalar, G: Graph<T>>(g: &mut G, feat: &G::Node) -> Result<G::Node> {
    g.unfold3(feat)
}
