//! End-to-end model: encode, unfold, sample, decode.

mod check;
mod checkpoint;

pub use check::{model_gradcheck, separate_relu_kinks, ModelGradCheck};
pub use checkpoint::{Checkpoint, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use serde::{Deserialize, Serialize};

use crate::coords::{make_grid, make_positional, positional_rows};
use crate::decoder::{self, DecoderConfig, ModulationInput};
use crate::encoder::{self, EncoderConfig};
use crate::error::{arg_err, Result};
use crate::numcore::{kernels, Eager, Graph};
use crate::params::{Bound, LayerSpec, ParamSet};
use crate::{rng, ImageRGB, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub seed: u64,
}


impl ModelConfig {
    /// Small configuration for desk-scale runs and gradient checks:
    /// 8 feature channels, one residual block, 2 decoder layers of width 16.
    pub fn tiny() -> Self {
        Self {
            encoder: EncoderConfig { feat_channels: 8, num_blocks: 1, ..EncoderConfig::default() },
            decoder: DecoderConfig { num_layers: 2, hidden: 16, mode: ModulationInput::SZ, ..DecoderConfig::default() },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()
    }

    /// Decoder content width: nine unfolded neighbours of every feature.
    pub fn content_channels(&self) -> usize {
        self.encoder.unfolded_channels()
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut v = self.encoder.layers();
        v.extend(self.decoder.layers(self.content_channels()));
        v
    }

    /// `(name, shape)` of every parameter tensor, in storage order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.layers().iter().flat_map(LayerSpec::manifest).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerSpec::param_count).sum()
    }

    pub fn decoder_param_count(&self) -> usize {
        decoder::param_count(&self.decoder, self.content_channels())
    }

    /// Biases feeding each relu, in evaluation order.
    pub fn relu_bias_names(&self) -> Vec<String> {
        let mut v = self.encoder.relu_bias_names();
        v.extend(self.decoder.relu_bias_names());
        v
    }
}

/// Rows decoded per chunk during inference are chosen so a chunk holds
/// about this many output pixels.
const CHUNK_PIXELS: usize = 1 << 15;

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Model<T> {
    /// Freshly initialized model; weights depend only on `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = ParamSet::init(&config.layers(), &mut rng::stream(config.seed, "init", &[]));
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ParamSet<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, params })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model { config: self.config, params: self.params.cast() }
    }

    /// Records the full mapping from a `[B,3,h,w]` input to `[B,3,out_h,out_w]`.
    pub fn forward<G: Graph<T>>(
        &self,
        g: &mut G,
        params: &Bound<G::Node>,
        lr: &G::Node,
        out_h: usize,
        out_w: usize,
    ) -> Result<G::Node> {
        let [b, _, h, w] = g.value(lr).dims4()?;
        let grid = make_grid(h, w, out_h, out_w)?;
        let feat = encoder::encode(g, params, &self.config.encoder, lr)?;
        let z = encoder::unfold3(g, &feat)?;
        let z = g.nearest_upsample(&z, out_h, out_w)?;
        let p = g.constant(make_positional(&grid, b));
        decoder::decode(g, params, &self.config.decoder, &z, &p)
    }

    /// Unclamped prediction `[1,3,out_h,out_w]` for a `[1,3,h,w]` input.
    ///
    /// The decoder is pointwise, so output rows are decoded in chunks to
    /// bound memory; results do not depend on the chunking.
    pub fn predict(&self, lr: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
        let [b, c, h, w] = lr.dims4()?;
        if b != 1 || c != 3 {
            return arg_err(format!("predict expects a [1,3,h,w] input, got {:?}", lr.shape()));
        }
        if out_h < h || out_w < w {
            return arg_err(format!("target {out_h}x{out_w} is smaller than the input {h}x{w}"));
        }
        let grid = make_grid(h, w, out_h, out_w)?;
        let mut g = Eager;
        let params = self.params.bind(&mut g, false);
        let x = g.constant(lr.clone());
        let feat = encoder::encode(&mut g, &params, &self.config.encoder, &x)?;
        let z = encoder::unfold3(&mut g, &feat)?;

        let out_c = self.config.decoder.out_channels;
        let mut out = vec![T::zero(); out_c * out_h * out_w];
        let rows_per_chunk = (CHUNK_PIXELS / out_w).max(1);
        let mut r0 = 0;
        while r0 < out_h {
            let r1 = (r0 + rows_per_chunk).min(out_h);
            let zc = kernels::gather_rows_cols(&z, &grid.y.nearest[r0..r1], &grid.x.nearest)?;
            let zc = g.constant(zc);
            let pc = g.constant(positional_rows(&grid, r0..r1, 1));
            let y = decoder::decode(&mut g, &params, &self.config.decoder, &zc, &pc)?;
            let n = (r1 - r0) * out_w;
            for ch in 0..out_c {
                out[ch * out_h * out_w + r0 * out_w..][..n].copy_from_slice(&y.data()[ch * n..][..n]);
            }
            r0 = r1;
        }
        Tensor::new(&[1, out_c, out_h, out_w], out)
    }

    /// Super-resolves `lr` to exactly `out_h x out_w`, clamped to `[0, 1]`.
    pub fn super_resolve(&self, lr: &ImageRGB, out_h: usize, out_w: usize) -> Result<ImageRGB> {
        let pred = self.predict(&lr.to_tensor(), out_h, out_w)?;
        ImageRGB::from_tensor(&pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(h: usize, w: usize) -> ImageRGB {
        ImageRGB::from_fn(h, w, |y, x, c| (((y * 31 + x * 17 + c * 7) % 23) as f32) / 22.0)
    }

    #[test]
    fn reference_configuration_widths() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.content_channels(), 576);
        let layers = cfg.decoder.layers(576);
        let first_mod = layers.iter().find(|l| l.name == "decoder.mod0").unwrap();
        assert_eq!((first_mod.cin, first_mod.cout), (576, 256));
        let later = layers.iter().find(|l| l.name == "decoder.mod3").unwrap();
        assert_eq!(later.cin, 256 + 576);
    }

    #[test]
    fn exact_output_sizes() {
        let mut cfg = ModelConfig::tiny();
        cfg.seed = 5;
        let model = Model::<f32>::new(cfg).unwrap();
        let lr = test_image(6, 5);
        for (h, w) in [(6, 5), (15, 13), (19, 16), (36, 40)] {
            let sr = model.super_resolve(&lr, h, w).unwrap();
            assert_eq!((sr.height(), sr.width()), (h, w));
        }
        assert!(model.super_resolve(&lr, 5, 5).is_err());
    }

    #[test]
    fn chunked_prediction_matches_graph_forward() {
        let model = Model::<f32>::new(ModelConfig::tiny()).unwrap();
        let lr = test_image(5, 4).to_tensor::<f32>();
        let mut g = Eager;
        let params = model.params.bind(&mut g, false);
        let x = g.constant(lr.clone());
        // tall target so the inference path splits into several chunks
        let (oh, ow) = (CHUNK_PIXELS / 9 + 7, 9);
        let full = model.forward(&mut g, &params, &x, oh, ow).unwrap();
        let chunked = model.predict(&lr, oh, ow).unwrap();
        assert_eq!(*full, chunked);
    }

    #[test]
    fn zero_synthesis_gives_constant_image() {
        let cfg = ModelConfig::tiny();
        let mut model = Model::<f32>::new(cfg).unwrap();
        for i in 0..cfg.decoder.num_layers {
            model.params.get_mut(&format!("decoder.syn{i}.weight")).unwrap().data_mut().fill(0.0);
            model.params.get_mut(&format!("decoder.syn{i}.bias")).unwrap().data_mut().fill(0.0);
        }
        let out = model.predict(&test_image(4, 4).to_tensor(), 12, 12).unwrap();
        let bias = model.params.get("decoder.out.bias").unwrap().data().to_vec();
        for (k, &v) in out.data().iter().enumerate() {
            assert_eq!(v, bias[k / 144]);
        }
    }

    #[test]
    fn deterministic_initialization() {
        let a = Model::<f32>::new(ModelConfig::tiny()).unwrap();
        let b = Model::<f32>::new(ModelConfig::tiny()).unwrap();
        let lr = test_image(6, 6);
        assert_eq!(a.super_resolve(&lr, 13, 13).unwrap(), b.super_resolve(&lr, 13, 13).unwrap());
    }

    #[test]
    fn manifest_matches_params() {
        let cfg = ModelConfig::tiny();
        let m = Model::<f32>::new(cfg).unwrap();
        let manifest = cfg.manifest();
        assert_eq!(manifest.len(), m.params.len());
        for ((name, shape), (n, t)) in manifest.iter().zip(m.params.iter()) {
            assert_eq!(name, n);
            assert_eq!(&shape[..], t.shape());
        }
        assert_eq!(cfg.param_count(), m.params.scalar_count());
    }
}
