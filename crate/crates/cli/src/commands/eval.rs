use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use diinn::data::DatasetFolder;
use diinn::metrics::{evaluate, MetricOptions, MetricReport};
use diinn::model::Checkpoint;
use diinn::resample::{bicubic_resize, BicubicKernel};
use diinn::{ImageRGB, Model};
use log::warn;

use super::ConfigSource;
use crate::report::{db, ratio, scale_label, Table};
use crate::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Model,
    Bicubic,
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Method::Model),
            "bicubic" => Ok(Method::Bicubic),
            other => bail!("unknown method `{other}` (expected model or bicubic)"),
        }
    }
}

/// How SR images are produced from LR inputs.
#[derive(Clone, Copy, Debug)]
pub enum Upscaler<'a> {
    Bicubic,
    Model(&'a Model<f32>),
}

impl Upscaler<'_> {
    pub fn upscale(&self, lr: &ImageRGB, out_h: usize, out_w: usize) -> Result<ImageRGB> {
        Ok(match self {
            Upscaler::Bicubic => {
                let up = bicubic_resize(&lr.to_tensor::<f32>(), out_h, out_w, &BicubicKernel::default())?;
                ImageRGB::from_tensor(&up)?
            }
            Upscaler::Model(m) => m.super_resolve(lr, out_h, out_w)?,
        })
    }
}

/// Benchmark degradation at scale `s`: the LR side is `max(1, floor(n / s))`,
/// the HR image is cropped from the top-left to `round(lr * s)` and bicubic
/// downsampled to the LR size, then quantized to 8 bits.
pub fn degrade(hr: &ImageRGB, scale: f64, kernel: &BicubicKernel) -> Result<(ImageRGB, ImageRGB)> {
    let lr_side = |n: usize| ((n as f64 / scale).floor() as usize).max(1);
    let (lh, lw) = (lr_side(hr.height()), lr_side(hr.width()));
    let crop = |l: usize, n: usize| ((l as f64 * scale).round() as usize).min(n);
    let hr = hr.crop(0, 0, crop(lh, hr.height()), crop(lw, hr.width()))?;
    let lr = bicubic_resize(&hr.to_tensor::<f32>(), lh, lw, kernel)?;
    Ok((hr, ImageRGB::from_tensor(&lr)?.quantized()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub image: String,
    pub scale: f64,
    pub lr_size: (usize, usize),
    pub out_size: (usize, usize),
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleMean {
    pub scale: f64,
    pub images: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub lr_psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
    pub means: Vec<ScaleMean>,
}

impl EvalSummary {
    pub fn rows_table(&self) -> Table {
        let mut t = Table::new(&["image", "scale", "lr_h", "lr_w", "out_h", "out_w", "psnr_db", "ssim", "lr_psnr_db"]);
        for r in &self.rows {
            t.push(vec![
                r.image.clone(),
                scale_label(r.scale),
                r.lr_size.0.to_string(),
                r.lr_size.1.to_string(),
                r.out_size.0.to_string(),
                r.out_size.1.to_string(),
                db(r.report.psnr_db),
                ratio(r.report.ssim),
                db(r.report.lr_psnr_db),
            ]);
        }
        t
    }

    pub fn means_table(&self) -> Table {
        let mut t = Table::new(&["scale", "images", "psnr_db", "ssim", "lr_psnr_db"]);
        for m in &self.means {
            t.push(vec![scale_label(m.scale), m.images.to_string(), db(m.psnr_db), ratio(m.ssim), db(m.lr_psnr_db)]);
        }
        t
    }

    pub fn mean(&self, scale: f64) -> Option<&ScaleMean> {
        self.means.iter().find(|m| m.scale == scale)
    }
}

/// Evaluates every (image, scale) pair. `threads > 1` spreads images over
/// workers; results are reduced in dataset order, so output does not depend on it.
pub fn evaluate_dataset(
    dataset: &DatasetFolder,
    upscaler: Upscaler<'_>,
    scales: &[f64],
    kernel: &BicubicKernel,
    opts: &MetricOptions,
    threads: usize,
) -> Result<EvalSummary> {
    let jobs: Vec<(usize, f64)> = scales.iter().flat_map(|&s| (0..dataset.len()).map(move |i| (i, s))).collect();
    let run_one = |&(i, s): &(usize, f64)| -> Result<EvalRow> {
        let (hr, lr) = degrade(dataset.image(i), s, kernel)?;
        let sr = upscaler.upscale(&lr, hr.height(), hr.width())?.quantized();
        let report = evaluate(&sr, &hr, lr.height(), lr.width(), kernel, opts)?;
        Ok(EvalRow {
            image: dataset.name(i),
            scale: s,
            lr_size: (lr.height(), lr.width()),
            out_size: (hr.height(), hr.width()),
            report,
        })
    };
    let results: Vec<Result<EvalRow>> = if threads <= 1 {
        jobs.iter().map(run_one).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<EvalRow>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..threads.min(jobs.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    if k >= jobs.len() {
                        break;
                    }
                    let r = run_one(&jobs[k]);
                    slots.lock().expect("worker panicked")[k] = Some(r);
                });
            }
        });
        slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every job ran")).collect()
    };
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let means = scales
        .iter()
        .map(|&s| {
            let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.scale == s).collect();
            let n = sel.len() as f64;
            ScaleMean {
                scale: s,
                images: sel.len(),
                psnr_db: sel.iter().map(|r| r.report.psnr_db).sum::<f64>() / n,
                ssim: sel.iter().map(|r| r.report.ssim).sum::<f64>() / n,
                lr_psnr_db: sel.iter().map(|r| r.report.lr_psnr_db).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(EvalSummary { rows, means })
}

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub config: ConfigSource,
    pub method: Method,
    pub model: Option<PathBuf>,
    pub dataset: PathBuf,
    pub scales: Option<Vec<f64>>,
    pub csv: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub fn run(args: &EvalArgs) -> Result<EvalSummary> {
    let mut cfg = args.config.resolve()?;
    if let Some(s) = &args.scales {
        cfg.eval_scales = s.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    let model = match (args.method, &args.model) {
        (Method::Model, Some(path)) => {
            let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            if ckpt.meta.antialias != cfg.antialias {
                warn!("model was trained with antialias={}, evaluating with antialias={}", ckpt.meta.antialias, cfg.antialias);
            }
            Some(ckpt.model()?)
        }
        (Method::Model, None) => bail!("--method model needs --model"),
        (Method::Bicubic, _) => None,
    };
    let summary = eval_with(&cfg, &args.dataset, model.as_ref())?;
    print!("{}", summary.means_table().to_aligned());
    if let Some(csv) = &args.csv {
        summary.rows_table().write_csv(csv)?;
    }
    Ok(summary)
}

/// Evaluates `model` (bicubic when `None`) on `dataset` under `cfg`.
pub fn eval_with(cfg: &RunConfig, dataset: &Path, model: Option<&Model<f32>>) -> Result<EvalSummary> {
    let data = DatasetFolder::open(dataset).with_context(|| format!("loading evaluation data from {}", dataset.display()))?;
    let upscaler = model.map_or(Upscaler::Bicubic, Upscaler::Model);
    evaluate_dataset(&data, upscaler, &cfg.eval_scales, &cfg.kernel(), &cfg.metrics(), cfg.threads)
}
