//! Dual interactive implicit decoder.
//!
//! Two pointwise MLPs run side by side over the output pixel grid. The
//! modulation branch (ReLU) reads content features `z`; the synthesis branch
//! (sine) reads positional features `p`. Each synthesis activation is gated by
//! the matching modulation activation:
//!
//! ```text
//! m_0 = relu(W_0 z + b_0)           s_0 = m_0 * sin(W'_0 p + b'_0)
//! m_i = relu(W_i u_i + b_i)         s_i = m_i * sin(W'_i s_{i-1} + b'_i)
//! out = W_out s_{N-1} + b_out
//! ```
//!
//! where `u_i` depends on [`ModulationInput`]. Every dense layer is a 1x1
//! convolution, so the decoder never mixes pixels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::numcore::Graph;
use crate::params::{apply_layer, Bound, Init, LayerSpec};
use crate::Scalar;

/// Input of modulation layers after the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationInput {
    /// `u_i = m_{i-1}`
    MOnly,
    /// `u_i = [m_{i-1}; z]`
    MZ,
    /// `u_i = [s_{i-1}; z]`
    SZ,
}

impl ModulationInput {
    pub const ALL: [ModulationInput; 3] = [Self::MOnly, Self::MZ, Self::SZ];

    /// Bracket notation used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::MOnly => "[m]",
            Self::MZ => "[m z]",
            Self::SZ => "[s z]",
        }
    }
}

impl fmt::Display for ModulationInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MOnly => "m_only",
            Self::MZ => "m_z",
            Self::SZ => "s_z",
        })
    }
}

impl FromStr for ModulationInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m_only" | "m" => Ok(Self::MOnly),
            "m_z" | "mz" => Ok(Self::MZ),
            "s_z" | "sz" => Ok(Self::SZ),
            other => arg_err(format!("unknown modulation input `{other}` (expected m_only, m_z or s_z)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub mode: ModulationInput,
    /// Prepend `p <- sin(W p + b)`, `z <- p * z`.
    pub init_positional: bool,
    /// Frequency folded into the sine-layer initialization.
    pub omega0: f64,
    pub out_channels: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { num_layers: 4, hidden: 256, mode: ModulationInput::SZ, init_positional: false, omega0: 30.0, out_channels: 3 }
    }
}

/// Width of the positional features (local x, local y, inverse scale).
pub const POSITIONAL_CHANNELS: usize = 3;

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden == 0 || self.out_channels == 0 {
            return arg_err("decoder: layer count, hidden width and output channels must be positive");
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return arg_err("decoder: omega0 must be positive");
        }
        Ok(())
    }

    /// Layer specs for content width `cz`, in evaluation order.
    pub fn layers(&self, cz: usize) -> Vec<LayerSpec> {
        let h = self.hidden;
        let first = Init::SineFirst { omega0: self.omega0 };
        let hidden = Init::SineHidden { omega0: self.omega0 };
        let mut v = Vec::new();
        let (syn0_in, syn0_init) = if self.init_positional {
            v.push(LayerSpec::new("decoder.init_pos", POSITIONAL_CHANNELS, cz, 1, first));
            (cz, hidden)
        } else {
            (POSITIONAL_CHANNELS, first)
        };
        for i in 0..self.num_layers {
            let mod_in = match (i, self.mode) {
                (0, _) => cz,
                (_, ModulationInput::MOnly) => h,
                (_, ModulationInput::MZ | ModulationInput::SZ) => h + cz,
            };
            v.push(LayerSpec::new(format!("decoder.mod{i}"), mod_in, h, 1, Init::FanIn));
            let (syn_in, init) = if i == 0 { (syn0_in, syn0_init) } else { (h, hidden) };
            v.push(LayerSpec::new(format!("decoder.syn{i}"), syn_in, h, 1, init));
        }
        v.push(LayerSpec::new("decoder.out", h, self.out_channels, 1, Init::FanIn));
        v
    }

    pub fn relu_bias_names(&self) -> Vec<String> {
        (0..self.num_layers).map(|i| format!("decoder.mod{i}.bias")).collect()
    }
}

/// Exact number of trainable scalars in the decoder for content width `cz`.
pub fn param_count(cfg: &DecoderConfig, cz: usize) -> usize {
    cfg.layers(cz).iter().map(LayerSpec::param_count).sum()
}

fn find<'a>(layers: &'a [LayerSpec], name: &str) -> &'a LayerSpec {
    layers.iter().find(|l| l.name == name).expect("layer present in spec")
}

/// `p' = sin(W p + b)`, `z' = p' * z`.
pub fn init_positional<T: Scalar, G: Graph<T>>(
    g: &mut G,
    params: &Bound<G::Node>,
    cfg: &DecoderConfig,
    z: &G::Node,
    p: &G::Node,
) -> Result<(G::Node, G::Node)> {
    let cz = g.value(z).shape()[1];
    let layers = cfg.layers(cz);
    let pre = apply_layer(g, params, find(&layers, "decoder.init_pos"), p)?;
    let p2 = g.sin(&pre);
    let z2 = g.hadamard(&p2, z)?;
    Ok((z2, p2))
}

/// Predicts `[B, out_channels, H, W]` from content `z: [B,Cz,H,W]` and
/// positional `p: [B,3,H,W]`.
pub fn decode<T: Scalar, G: Graph<T>>(
    g: &mut G,
    params: &Bound<G::Node>,
    cfg: &DecoderConfig,
    z: &G::Node,
    p: &G::Node,
) -> Result<G::Node> {
    let zs = g.value(z).shape().to_vec();
    let ps = g.value(p).shape().to_vec();
    if zs.len() != 4 || ps.len() != 4 || zs[0] != ps[0] || zs[2..] != ps[2..] || ps[1] != POSITIONAL_CHANNELS {
        return Err(Error::Dimension(format!("decode: content {zs:?} and positional {ps:?} do not match")));
    }
    let layers = cfg.layers(zs[1]);
    let (z, p) = if cfg.init_positional {
        init_positional(g, params, cfg, z, p)?
    } else {
        (z.clone(), p.clone())
    };

    let mut m = {
        let pre = apply_layer(g, params, find(&layers, "decoder.mod0"), &z)?;
        g.relu(&pre)
    };
    let mut s = {
        let pre = apply_layer(g, params, find(&layers, "decoder.syn0"), &p)?;
        let a = g.sin(&pre);
        g.hadamard(&m, &a)?
    };
    for i in 1..cfg.num_layers {
        let u = match cfg.mode {
            ModulationInput::MOnly => m.clone(),
            ModulationInput::MZ => g.concat_channels(&[m.clone(), z.clone()])?,
            ModulationInput::SZ => g.concat_channels(&[s.clone(), z.clone()])?,
        };
        let pre = apply_layer(g, params, find(&layers, &format!("decoder.mod{i}")), &u)?;
        m = g.relu(&pre);
        let pre = apply_layer(g, params, find(&layers, &format!("decoder.syn{i}")), &s)?;
        let a = g.sin(&pre);
        s = g.hadamard(&m, &a)?;
    }
    apply_layer(g, params, find(&layers, "decoder.out"), &s)
}
