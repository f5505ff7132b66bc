use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use diinn::model::Checkpoint;
use diinn::resample::{bicubic_resize, BicubicKernel};
use diinn::{rng, Model, Tensor};
use rand::Rng;

use super::sr::Size;
use super::ConfigSource;
use crate::report::Table;

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub config: ConfigSource,
    /// Checkpoint to time; a freshly initialized model from the config otherwise.
    pub model: Option<PathBuf>,
    pub input: Size,
    pub outputs: Vec<Size>,
    pub repeats: usize,
    pub warmup: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub outputs: Vec<Size>,
    pub bicubic_ms: Vec<f64>,
    pub model_ms: Vec<f64>,
    pub repeats: usize,
}

impl BenchReport {
    pub fn table(&self) -> Table {
        let mut header = vec!["method".to_string()];
        header.extend(self.outputs.iter().map(|s| format!("{}x{}", s.0, s.1)));
        let mut t = Table { header, rows: Vec::new() };
        for (name, ms) in [("bicubic", &self.bicubic_ms), ("diinn", &self.model_ms)] {
            let mut row = vec![name.to_string()];
            row.extend(ms.iter().map(|v| format!("{v:.3}")));
            t.push(row);
        }
        t
    }
}

fn time_ms(warmup: usize, repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let start = Instant::now();
    for _ in 0..repeats {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / repeats as f64)
}

/// Mean forward-pass time per output size, after `warmup` untimed passes.
pub fn run(args: &BenchArgs) -> Result<BenchReport> {
    if args.repeats == 0 {
        bail!("repeats must be positive");
    }
    let cfg = args.config.resolve()?;
    let model = match &args.model {
        Some(p) => Checkpoint::load(p).with_context(|| format!("loading {}", p.display()))?.model()?,
        None => Model::<f32>::new(cfg.model())?,
    };
    let Size(h, w) = args.input;
    let mut r = rng::stream(cfg.seed, "bench", &[]);
    let lr = Tensor::from_fn(&[1, 3, h, w], |_| r.gen_range(0.0f32..1.0));
    let kernel = BicubicKernel::default();
    let mut report = BenchReport { outputs: args.outputs.clone(), bicubic_ms: Vec::new(), model_ms: Vec::new(), repeats: args.repeats };
    for &Size(oh, ow) in &args.outputs {
        report.bicubic_ms.push(time_ms(args.warmup, args.repeats, || {
            bicubic_resize(&lr, oh, ow, &kernel)?;
            Ok(())
        })?);
        report.model_ms.push(time_ms(args.warmup, args.repeats, || {
            model.predict(&lr, oh, ow)?;
            Ok(())
        })?);
    }
    print!("{}", report.table().to_aligned());
    Ok(report)
}
