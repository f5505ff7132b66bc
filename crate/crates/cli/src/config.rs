//! Flat JSON run configuration shared by every command.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use diinn::decoder::{DecoderConfig, ModulationInput};
use diinn::encoder::EncoderConfig;
use diinn::metrics::{ChannelMode, MetricOptions};
use diinn::resample::BicubicKernel;
use diinn::train::TrainConfig;
use diinn::ModelConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const EFFECTIVE_CONFIG: &str = "config.json";

/// Every key, its meaning and its default. Kept next to the struct so the two
/// stay in sync (a test checks this).
pub const KEY_DOCS: &[(&str, &str)] = &[
    ("seed", "seed for initialization, sampling and shuffling"),
    ("feat_channels", "encoder feature channels F"),
    ("encoder_blocks", "residual blocks in the encoder"),
    ("decoder_layers", "modulation/synthesis layers N"),
    ("hidden", "hidden width of both decoder networks"),
    ("mode", "modulation input of layers 1..N-1: m_only, m_z or s_z"),
    ("init_positional", "apply the positional initialization layer"),
    ("omega0", "sine frequency folded into the synthesis initialization"),
    ("scales", "integer training scales"),
    ("patch_base", "LR patch side; HR crops are patch_base * s"),
    ("batch_hr", "HR images per batch"),
    ("epochs", "training epochs"),
    ("max_steps", "optional cap on optimizer steps"),
    ("lr0", "initial learning rate"),
    ("halve_every", "epochs between learning-rate halvings"),
    ("flip_prob", "probability of each flip (horizontal, vertical, transpose)"),
    ("antialias", "antialias the bicubic kernel when downsampling"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("eps", "Adam epsilon"),
    ("eval_scales", "scales used by eval and ablate"),
    ("metric_channel", "rgb or y (BT.601 luma)"),
    ("border_crop", "pixels removed from each border before PSNR/SSIM"),
    ("threads", "worker threads for per-image evaluation"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub feat_channels: usize,
    pub encoder_blocks: usize,
    pub decoder_layers: usize,
    pub hidden: usize,
    pub mode: ModulationInput,
    pub init_positional: bool,
    pub omega0: f64,
    pub scales: Vec<usize>,
    pub patch_base: usize,
    pub batch_hr: usize,
    pub epochs: u64,
    pub max_steps: Option<u64>,
    pub lr0: f64,
    pub halve_every: u64,
    pub flip_prob: f64,
    pub antialias: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub eval_scales: Vec<f64>,
    pub metric_channel: ChannelMode,
    pub border_crop: usize,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        Self::from_parts(&model, &TrainConfig::default())
    }
}

impl RunConfig {
    pub fn from_parts(model: &ModelConfig, train: &TrainConfig) -> Self {
        let metrics = MetricOptions::default();
        Self {
            seed: model.seed,
            feat_channels: model.encoder.feat_channels,
            encoder_blocks: model.encoder.num_blocks,
            decoder_layers: model.decoder.num_layers,
            hidden: model.decoder.hidden,
            mode: model.decoder.mode,
            init_positional: model.decoder.init_positional,
            omega0: model.decoder.omega0,
            scales: train.scales.clone(),
            patch_base: train.patch_base,
            batch_hr: train.batch_hr,
            epochs: train.epochs,
            max_steps: train.max_steps,
            lr0: train.lr0,
            halve_every: train.halve_every,
            flip_prob: train.flip_prob,
            antialias: train.antialias,
            beta1: train.beta1,
            beta2: train.beta2,
            eps: train.eps,
            eval_scales: vec![2.0, 3.0, 4.0],
            metric_channel: metrics.channel,
            border_crop: metrics.border_crop,
            threads: 1,
        }
    }

    /// Desk-scale model used by the gradient check and the smoke tests.
    pub fn tiny() -> Self {
        Self::from_parts(&ModelConfig::tiny(), &TrainConfig::default())
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig { feat_channels: self.feat_channels, num_blocks: self.encoder_blocks, ..EncoderConfig::default() },
            decoder: DecoderConfig {
                num_layers: self.decoder_layers,
                hidden: self.hidden,
                mode: self.mode,
                init_positional: self.init_positional,
                omega0: self.omega0,
                ..DecoderConfig::default()
            },
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            scales: self.scales.clone(),
            patch_base: self.patch_base,
            batch_hr: self.batch_hr,
            epochs: self.epochs,
            max_steps: self.max_steps,
            lr0: self.lr0,
            halve_every: self.halve_every,
            flip_prob: self.flip_prob,
            seed: self.seed,
            antialias: self.antialias,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn metrics(&self) -> MetricOptions {
        MetricOptions { channel: self.metric_channel, border_crop: self.border_crop, ..MetricOptions::default() }
    }

    pub fn kernel(&self) -> BicubicKernel {
        BicubicKernel::with_antialias(self.antialias)
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.train().validate()?;
        if self.eval_scales.iter().any(|s| !(s.is_finite() && *s >= 1.0)) {
            bail!("eval_scales must be finite and >= 1");
        }
        if self.threads == 0 {
            bail!("threads must be positive");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads `path` (or the defaults), then applies `key=value` overrides.
    ///
    /// Override values are parsed as JSON, falling back to a plain string.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        Self::load_over(Self::default(), path, overrides)
    }

    /// As [`RunConfig::load`], with `base` standing in when no file is given.
    pub fn load_over(base: Self, path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str::<Value>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => serde_json::to_value(base)?,
        };
        let obj: &mut Map<String, Value> = match value.as_object_mut() {
            Some(o) => o,
            None => bail!("config must be a JSON object"),
        };
        for kv in overrides {
            let (k, v) = kv.split_once('=').with_context(|| format!("override `{kv}` is not key=value"))?;
            let parsed = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            obj.insert(k.trim().to_string(), parsed);
        }
        let cfg: Self = serde_json::from_value(value).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes the effective configuration into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(EFFECTIVE_CONFIG), self.to_json() + "\n")?;
        Ok(())
    }
}
