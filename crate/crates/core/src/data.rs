//! Image folders and the training-pair sampler.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::resample::{bicubic_resize, BicubicKernel};
use crate::train::TrainConfig;
use crate::{rng, ImageRGB, Tensor};

const EXTENSIONS: [&str; 2] = ["png", "bmp"];

/// Directory of 8-bit RGB images, listed in lexicographic order and decoded up front.
#[derive(Clone, Debug)]
pub struct DatasetFolder {
    root: PathBuf,
    entries: Vec<PathBuf>,
    images: Vec<ImageRGB>,
}

impl DatasetFolder {
    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::Dataset(format!("{} is not a directory", root.display())));
        }
        let mut entries: Vec<PathBuf> = fs::read_dir(root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        entries.sort();
        if entries.is_empty() {
            return Err(Error::Dataset(format!("no PNG/BMP images in {}", root.display())));
        }
        let images = entries.iter().map(|p| ImageRGB::load(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self { root: root.to_path_buf(), entries, images })
    }

    /// In-memory dataset; `names` stand in for file paths.
    pub fn from_images(names: Vec<String>, images: Vec<ImageRGB>) -> Result<Self> {
        if images.is_empty() || names.len() != images.len() {
            return Err(Error::Dataset("empty dataset or mismatched names".into()));
        }
        Ok(Self { root: PathBuf::new(), entries: names.into_iter().map(PathBuf::from).collect(), images })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &ImageRGB {
        &self.images[i]
    }

    pub fn path(&self, i: usize) -> &Path {
        &self.entries[i]
    }

    pub fn name(&self, i: usize) -> String {
        self.entries[i].file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

/// Flips applied to an HR patch, in this order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flips {
    pub horizontal: bool,
    pub vertical: bool,
    /// Diagonal flip, i.e. transpose.
    pub transpose: bool,
}

impl Flips {
    pub fn apply(&self, chw: &Tensor<f32>) -> Tensor<f32> {
        let mut t = chw.clone();
        if self.horizontal {
            t = hflip(&t);
        }
        if self.vertical {
            t = vflip(&t);
        }
        if self.transpose {
            t = transpose(&t);
        }
        t
    }
}

fn dims3(t: &Tensor<f32>) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

pub fn hflip(t: &Tensor<f32>) -> Tensor<f32> {
    let (_, _, w) = dims3(t);
    Tensor::from_fn(t.shape(), |k| {
        let (row, x) = (k / w, k % w);
        t.data()[row * w + (w - 1 - x)]
    })
}

pub fn vflip(t: &Tensor<f32>) -> Tensor<f32> {
    let (_, h, w) = dims3(t);
    Tensor::from_fn(t.shape(), |k| {
        let (c, y, x) = (k / (h * w), (k / w) % h, k % w);
        t.data()[(c * h + (h - 1 - y)) * w + x]
    })
}

pub fn transpose(t: &Tensor<f32>) -> Tensor<f32> {
    let (c, h, w) = dims3(t);
    Tensor::from_fn(&[c, w, h], |k| {
        let (ch, y, x) = (k / (h * w), (k / h) % w, k % h);
        t.data()[(ch * h + x) * w + y]
    })
}

/// Side length of the square HR crop for scale `s`: `base * s` when it fits,
/// otherwise the largest multiple of `s` that fits. `None` if not even `s` fits.
pub fn crop_size(h: usize, w: usize, scale: usize, base: usize) -> Option<usize> {
    let limit = h.min(w);
    let want = base * scale;
    if want <= limit {
        Some(want)
    } else {
        let fit = limit / scale * scale;
        (fit > 0).then_some(fit)
    }
}

/// One LR/HR training pair, planar `[3, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub lr: Tensor<f32>,
    pub hr: Tensor<f32>,
    pub scale: usize,
    pub image: usize,
    /// `(top, left, side)` of the crop in the source image.
    pub crop: (usize, usize, usize),
    pub flips: Flips,
}

/// Crops, flips and degrades one pair for every (image, scale) combination.
pub fn sample_pairs(dataset: &DatasetFolder, images: &[usize], cfg: &TrainConfig, rng: &mut impl Rng) -> Result<Vec<TrainingPair>> {
    let kernel = BicubicKernel::with_antialias(cfg.antialias);
    let mut pairs = Vec::with_capacity(images.len() * cfg.scales.len());
    for &i in images {
        let img = dataset.image(i);
        for &s in &cfg.scales {
            let side = crop_size(img.height(), img.width(), s, cfg.patch_base).ok_or_else(|| {
                Error::Dataset(format!("{} is smaller than scale {s}", dataset.name(i)))
            })?;
            if side < cfg.patch_base * s {
                warn!("{}: {side}px crop instead of {}px at x{s}", dataset.name(i), cfg.patch_base * s);
            }
            let top = rng.gen_range(0..=img.height() - side);
            let left = rng.gen_range(0..=img.width() - side);
            let flips = Flips {
                horizontal: rng.gen_bool(cfg.flip_prob),
                vertical: rng.gen_bool(cfg.flip_prob),
                transpose: rng.gen_bool(cfg.flip_prob),
            };
            let hr = flips.apply(&img.crop(top, left, side, side)?.to_chw());
            let lr = bicubic_resize(&hr, side / s, side / s, &kernel)?;
            pairs.push(TrainingPair { lr, hr, scale: s, image: i, crop: (top, left, side), flips });
        }
    }
    Ok(pairs)
}

/// Shuffled image order for an epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "shuffle", &[epoch]));
    order
}

pub fn batches_per_epoch(n: usize, batch_hr: usize) -> usize {
    n.div_ceil(batch_hr.max(1))
}

/// Pairs for batch `batch` of `epoch`; depends only on `(seed, epoch, batch)`.
pub fn sample_batch(dataset: &DatasetFolder, cfg: &TrainConfig, epoch: u64, batch: usize) -> Result<Vec<TrainingPair>> {
    if dataset.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    let order = epoch_order(dataset.len(), cfg.seed, epoch);
    let per = cfg.batch_hr.max(1);
    let start = batch * per;
    if start >= order.len() {
        return Err(Error::Argument(format!("batch {batch} beyond epoch of {} images", order.len())));
    }
    let images = &order[start..(start + per).min(order.len())];
    sample_pairs(dataset, images, cfg, &mut rng::stream(cfg.seed, "sample", &[epoch, batch as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> ImageRGB {
        ImageRGB::from_fn(h, w, |y, x, c| ((y * 3 + x * 5 + c) % 29) as f32 / 28.0)
    }

    fn dataset(sizes: &[(usize, usize)]) -> DatasetFolder {
        let imgs: Vec<ImageRGB> = sizes.iter().map(|&(h, w)| ramp(h, w)).collect();
        let names = (0..imgs.len()).map(|i| format!("{i:03}.png")).collect();
        DatasetFolder::from_images(names, imgs).unwrap()
    }

    #[test]
    fn default_batch_shapes() {
        let ds = dataset(&[(200, 210), (230, 200), (196, 196), (250, 240), (201, 199)]);
        let cfg = TrainConfig::default();
        let pairs = sample_batch(&ds, &cfg, 0, 0).unwrap();
        assert_eq!(pairs.len(), 12);
        for p in &pairs {
            assert_eq!(p.lr.shape(), &[3, 48, 48]);
            assert_eq!(p.hr.shape(), &[3, 48 * p.scale, 48 * p.scale]);
            let (top, left, side) = p.crop;
            let img = ds.image(p.image);
            assert!(top + side <= img.height() && left + side <= img.width());
        }
        assert_eq!(pairs.iter().map(|p| p.scale).collect::<Vec<_>>()[..3], [2, 3, 4]);
    }

    #[test]
    fn no_flips_means_plain_degradation() {
        let ds = dataset(&[(120, 130)]);
        let cfg = TrainConfig { flip_prob: 0.0, scales: vec![2], patch_base: 16, ..TrainConfig::default() };
        for p in sample_batch(&ds, &cfg, 3, 0).unwrap() {
            let (top, left, side) = p.crop;
            let hr = ds.image(0).crop(top, left, side, side).unwrap().to_chw::<f32>();
            assert_eq!(p.hr, hr);
            let lr = bicubic_resize(&hr, side / 2, side / 2, &BicubicKernel::default()).unwrap();
            assert_eq!(p.lr, lr);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let ds = dataset(&[(100, 100), (90, 110), (120, 95)]);
        let cfg = TrainConfig { scales: vec![2, 3], patch_base: 12, batch_hr: 2, ..TrainConfig::default() };
        for (e, b) in [(0, 0), (0, 1), (5, 1)] {
            assert_eq!(sample_batch(&ds, &cfg, e, b).unwrap(), sample_batch(&ds, &cfg, e, b).unwrap());
        }
        assert_ne!(sample_batch(&ds, &cfg, 0, 0).unwrap(), sample_batch(&ds, &cfg, 1, 0).unwrap());
        assert!(sample_batch(&ds, &cfg, 0, 2).is_err());
    }

    #[test]
    fn small_images_fall_back_to_multiple_of_scale() {
        assert_eq!(crop_size(64, 80, 2, 48), Some(64));
        assert_eq!(crop_size(100, 70, 3, 48), Some(69));
        assert_eq!(crop_size(500, 500, 4, 48), Some(192));
        assert_eq!(crop_size(2, 5, 3, 48), None);
    }

    #[test]
    fn flips_are_involutions() {
        let t = ramp(5, 7).to_chw::<f32>();
        assert_eq!(hflip(&hflip(&t)), t);
        assert_eq!(vflip(&vflip(&t)), t);
        assert_eq!(transpose(&transpose(&t)), t);
        assert_eq!(transpose(&t).shape(), &[3, 7, 5]);
        assert_eq!(hflip(&t).data()[0], t.data()[6]);
    }

    #[test]
    fn empty_folder_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(DatasetFolder::open(dir.path()), Err(Error::Dataset(_))));
        assert!(DatasetFolder::open(&dir.path().join("missing")).is_err());
    }
}
