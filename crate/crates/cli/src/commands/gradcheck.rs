use anyhow::Result;
use diinn::model::{model_gradcheck, ModelGradCheck};

use super::ConfigSource;
use crate::{RunConfig, VerificationFailed};

pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradcheckArgs {
    /// Model settings; the tiny model when no file or override is given.
    pub config: ConfigSource,
    pub lr_size: usize,
    pub scale: usize,
    pub step: f64,
}

impl Default for GradcheckArgs {
    fn default() -> Self {
        Self { config: ConfigSource::default(), lr_size: 6, scale: 2, step: 1e-3 }
    }
}

/// Runs the whole-model check; fails with [`VerificationFailed`] unless the
/// maximum relative error is below [`TOLERANCE`].
pub fn run(args: &GradcheckArgs) -> Result<ModelGradCheck> {
    let cfg = args.config.resolve_over(RunConfig::tiny())?;
    let r = model_gradcheck(&cfg.model(), args.lr_size, args.lr_size * args.scale, args.step)?;
    println!(
        "max relative error {:.3e} over {} parameters (worst: tensor {} element {}, kink crossings {})",
        r.report.max_rel_error, r.report.checked, r.report.worst.0, r.report.worst.1, r.report.kink_crossings
    );
    if !r.report.passes(TOLERANCE) {
        return Err(VerificationFailed(format!("max relative error {:.3e} >= {TOLERANCE:e}", r.report.max_rel_error)).into());
    }
    Ok(r)
}
