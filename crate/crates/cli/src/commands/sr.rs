use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use diinn::model::Checkpoint;
use diinn::ImageRGB;

/// Requested output: a scale factor or an exact size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Scale(f64),
    Size(usize, usize),
}

/// `HxW`, e.g. `151x151`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size(pub usize, pub usize);

impl FromStr for Size {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (h, w) = s.split_once(['x', 'X']).with_context(|| format!("`{s}` is not HxW"))?;
        let (h, w): (usize, usize) = (h.trim().parse()?, w.trim().parse()?);
        if h == 0 || w == 0 {
            bail!("size `{s}` has a zero side");
        }
        Ok(Size(h, w))
    }
}

/// Output size for an `h x w` input.
pub fn target_size(h: usize, w: usize, target: Target) -> Result<(usize, usize)> {
    match target {
        Target::Scale(s) => {
            if !(s.is_finite() && s >= 1.0) {
                bail!("scale must be a finite number >= 1, got {s}");
            }
            Ok(((s * h as f64).round() as usize, (s * w as f64).round() as usize))
        }
        Target::Size(oh, ow) => {
            if oh < h || ow < w {
                bail!("target {oh}x{ow} is smaller than the {h}x{w} input");
            }
            Ok((oh, ow))
        }
    }
}

#[derive(Clone, Debug)]
pub struct SrArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    pub target: Target,
    pub output: PathBuf,
}

pub fn run(args: &SrArgs) -> Result<(usize, usize)> {
    let model = Checkpoint::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?.model()?;
    let lr = ImageRGB::load(&args.input)?;
    let (oh, ow) = target_size(lr.height(), lr.width(), args.target)?;
    let sr = model.super_resolve(&lr, oh, ow)?;
    sr.save(&args.output)?;
    Ok((oh, ow))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(target_size(48, 48, Target::Scale(2.5)).unwrap(), (120, 120));
        assert_eq!(target_size(48, 40, Target::Scale(1.0)).unwrap(), (48, 40));
        assert_eq!(target_size(48, 48, Target::Scale(std::f64::consts::PI)).unwrap(), (151, 151));
        assert!(target_size(48, 48, Target::Scale(0.5)).is_err());
        assert!(target_size(48, 48, Target::Size(40, 60)).is_err());
        assert_eq!("151x150".parse::<Size>().unwrap(), Size(151, 150));
        assert!("151".parse::<Size>().is_err());
    }
}
