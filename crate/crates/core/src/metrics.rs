//! PSNR, SSIM and LR-consistency PSNR.
//!
//! Defaults: RGB, whole image, data range 1.0, evaluated on unquantized
//! values. Y-channel and border-crop variants are available for comparing
//! against other evaluation conventions.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::resample::{bicubic_resize, BicubicKernel};
use crate::{ImageRGB, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    #[default]
    Rgb,
    /// ITU-R BT.601 luma, `16/255 + (65.481 R + 128.553 G + 24.966 B) / 255`.
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub channel: ChannelMode,
    pub border_crop: usize,
    pub data_range: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { channel: ChannelMode::Rgb, border_crop: 0, data_range: 1.0 }
    }
}

/// Per-image quality figures plus the conventions they were computed under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub lr_psnr_db: f64,
    pub channel: ChannelMode,
    pub border_crop: usize,
    pub antialias: bool,
}

/// Displayed value for tables: identical images report `inf`, capped at 100 dB
/// wherever a number is required.
pub const PSNR_TABLE_CAP: f64 = 100.0;

pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

struct Planes {
    h: usize,
    w: usize,
    planes: Vec<Vec<f64>>,
}

fn planes_of(chw: &Tensor<f64>, opts: &MetricOptions) -> Result<Planes> {
    let (h, w) = (chw.shape()[1], chw.shape()[2]);
    let crop = opts.border_crop;
    if 2 * crop >= h || 2 * crop >= w {
        return dim_err(format!("border crop {crop} leaves nothing of a {h}x{w} image"));
    }
    let (ch, cw) = (h - 2 * crop, w - 2 * crop);
    let plane = h * w;
    let px = |c: usize, y: usize, x: usize| chw.data()[c * plane + (y + crop) * w + x + crop];
    let planes = match opts.channel {
        ChannelMode::Rgb => (0..3)
            .map(|c| (0..ch * cw).map(|k| px(c, k / cw, k % cw)).collect())
            .collect(),
        ChannelMode::Y => vec![(0..ch * cw)
            .map(|k| {
                let (y, x) = (k / cw, k % cw);
                16.0 / 255.0 + (65.481 * px(0, y, x) + 128.553 * px(1, y, x) + 24.966 * px(2, y, x)) / 255.0
            })
            .collect()],
    };
    Ok(Planes { h: ch, w: cw, planes })
}

fn check_same(a: &ImageRGB, b: &ImageRGB) -> Result<()> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return dim_err(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        ));
    }
    Ok(())
}

fn psnr_planes(a: &Planes, b: &Planes, range: f64) -> f64 {
    let n = (a.planes.len() * a.h * a.w) as f64;
    let sse: f64 = a
        .planes
        .iter()
        .zip(&b.planes)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)))
        .sum();
    if sse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (range * range / (sse / n)).log10()
}

/// `10 log10(range^2 / MSE)`; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &ImageRGB, b: &ImageRGB) -> Result<f64> {
    psnr_with(a, b, &MetricOptions::default())
}

pub fn psnr_with(a: &ImageRGB, b: &ImageRGB, opts: &MetricOptions) -> Result<f64> {
    check_same(a, b)?;
    psnr_tensors(&a.to_chw(), &b.to_chw(), opts)
}

/// PSNR of two `[3,H,W]` tensors (values not clamped).
pub fn psnr_tensors(a: &Tensor<f64>, b: &Tensor<f64>, opts: &MetricOptions) -> Result<f64> {
    if a.shape() != b.shape() || a.shape().len() != 3 || a.shape()[0] != 3 {
        return dim_err(format!("psnr: shapes {:?} and {:?}", a.shape(), b.shape()));
    }
    Ok(psnr_planes(&planes_of(a, opts)?, &planes_of(b, opts)?, opts.data_range))
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of an `h x w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, win: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = win.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for xo in 0..ow {
            tmp[y * ow + xo] = win.iter().enumerate().map(|(i, &c)| c * x[y * w + xo + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for yo in 0..oh {
        for xo in 0..ow {
            out[yo * ow + xo] = win.iter().enumerate().map(|(i, &c)| c * tmp[(yo + i) * ow + xo]).sum();
        }
    }
    (out, oh, ow)
}

/// Standard SSIM window extent and width.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, range: f64) -> f64 {
    // images smaller than the window use the largest odd window that fits
    let mut size = SSIM_WINDOW.min(h).min(w);
    if size.is_multiple_of(2) {
        size -= 1;
    }
    let win = gaussian_window(size, SSIM_SIGMA);
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
    let (mu_a, oh, ow) = filter_valid(a, h, w, &win);
    let (mu_b, ..) = filter_valid(b, h, w, &win);
    let (aa, ..) = filter_valid(&prod(a, a), h, w, &win);
    let (bb, ..) = filter_valid(&prod(b, b), h, w, &win);
    let (ab, ..) = filter_valid(&prod(a, b), h, w, &win);
    let n = oh * ow;
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / n as f64
}

/// Mean SSIM per channel, averaged over channels: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, valid windows only.
pub fn ssim(a: &ImageRGB, b: &ImageRGB) -> Result<f64> {
    ssim_with(a, b, &MetricOptions::default())
}

pub fn ssim_with(a: &ImageRGB, b: &ImageRGB, opts: &MetricOptions) -> Result<f64> {
    check_same(a, b)?;
    let (pa, pb) = (planes_of(&a.to_chw(), opts)?, planes_of(&b.to_chw(), opts)?);
    let s: f64 = pa.planes.iter().zip(&pb.planes).map(|(x, y)| ssim_plane(x, y, pa.h, pa.w, opts.data_range)).sum();
    Ok(s / pa.planes.len() as f64)
}

/// PSNR between `sr` and `hr` after both are bicubic-resized to `lr_h x lr_w`.
pub fn lr_psnr(sr: &ImageRGB, hr: &ImageRGB, lr_h: usize, lr_w: usize, kernel: &BicubicKernel) -> Result<f64> {
    lr_psnr_with(sr, hr, lr_h, lr_w, kernel, &MetricOptions { border_crop: 0, ..MetricOptions::default() })
}

pub fn lr_psnr_with(
    sr: &ImageRGB,
    hr: &ImageRGB,
    lr_h: usize,
    lr_w: usize,
    kernel: &BicubicKernel,
    opts: &MetricOptions,
) -> Result<f64> {
    check_same(sr, hr)?;
    let a = bicubic_resize(&sr.to_chw::<f64>(), lr_h, lr_w, kernel)?;
    let b = bicubic_resize(&hr.to_chw::<f64>(), lr_h, lr_w, kernel)?;
    psnr_tensors(&a, &b, opts)
}

/// All three figures for one SR/HR pair. Border crop does not apply to LR-PSNR.
pub fn evaluate(
    sr: &ImageRGB,
    hr: &ImageRGB,
    lr_h: usize,
    lr_w: usize,
    kernel: &BicubicKernel,
    opts: &MetricOptions,
) -> Result<MetricReport> {
    let lr_opts = MetricOptions { border_crop: 0, ..*opts };
    Ok(MetricReport {
        psnr_db: psnr_with(sr, hr, opts)?,
        ssim: ssim_with(sr, hr, opts)?,
        lr_psnr_db: lr_psnr_with(sr, hr, lr_h, lr_w, kernel, &lr_opts)?,
        channel: opts.channel,
        border_crop: opts.border_crop,
        antialias: kernel.antialias,
    })
}
