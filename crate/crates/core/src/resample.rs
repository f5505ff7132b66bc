//! Separable bicubic resizing with pixel-centre alignment.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Result};
use crate::{Scalar, Tensor};

/// Cubic convolution kernel configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicubicKernel {
    /// Cubic convolution parameter.
    pub a: f64,
    /// Stretch the kernel over the source footprint when shrinking.
    pub antialias: bool,
}

impl Default for BicubicKernel {
    fn default() -> Self {
        Self { a: -0.5, antialias: true }
    }
}

impl BicubicKernel {
    pub fn with_antialias(antialias: bool) -> Self {
        Self { antialias, ..Self::default() }
    }
}

/// Cubic convolution weight at distance `x`.
pub fn cubic_weight(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Contributing source indices and normalized weights for one output sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Taps {
    pub index: Vec<usize>,
    pub weight: Vec<f64>,
}

/// Tap table for resizing an axis of `src` samples to `dst` samples.
///
/// Output `i` is centred at source coordinate `(i + 0.5) * src / dst - 0.5`.
/// Source indices past the edges are clamped.
pub fn axis_taps(src: usize, dst: usize, kernel: &BicubicKernel) -> Vec<Taps> {
    let ratio = src as f64 / dst as f64;
    let stretch = if kernel.antialias && ratio > 1.0 { ratio } else { 1.0 };
    let support = 2.0 * stretch;
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * ratio - 0.5;
            let first = (center - support).floor() as i64 + 1;
            let last = (center + support).floor() as i64;
            let mut index = Vec::with_capacity((last - first + 1) as usize);
            let mut weight = Vec::with_capacity(index.capacity());
            for j in first..=last {
                index.push(j.clamp(0, src as i64 - 1) as usize);
                weight.push(cubic_weight((j as f64 - center) / stretch, kernel.a));
            }
            let total: f64 = weight.iter().sum();
            for w in &mut weight {
                *w /= total;
            }
            Taps { index, weight }
        })
        .collect()
}

/// Bicubic resize of a `[..., H, W]` tensor (every leading index is a plane).
///
/// No clamping of the output range.
pub fn bicubic_resize<T: Scalar>(img: &Tensor<T>, out_h: usize, out_w: usize, kernel: &BicubicKernel) -> Result<Tensor<T>> {
    if out_h == 0 || out_w == 0 {
        return arg_err(format!("bicubic_resize: target {out_h}x{out_w} must be positive"));
    }
    let shape = img.shape();
    if shape.len() < 2 {
        return dim_err(format!("bicubic_resize: need at least 2 dims, got {shape:?}"));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if (h, w) == (out_h, out_w) && kernel_is_interpolating(kernel) {
        // weights are exactly one-hot here; skip the arithmetic
        return Ok(img.clone());
    }
    let cols = axis_taps(w, out_w, kernel);
    let rows = axis_taps(h, out_h, kernel);
    let to_t = |taps: Vec<Taps>| -> Vec<(Vec<usize>, Vec<T>)> {
        taps.into_iter().map(|t| (t.index, t.weight.into_iter().map(T::of).collect())).collect()
    };
    let (cols, rows) = (to_t(cols), to_t(rows));

    let planes = img.numel() / (h * w);
    let mut out = Vec::with_capacity(planes * out_h * out_w);
    let mut tmp = vec![T::zero(); h * out_w];
    for plane in img.data().chunks_exact(h * w) {
        for y in 0..h {
            let row = &plane[y * w..][..w];
            for (x, (idx, wt)) in cols.iter().enumerate() {
                tmp[y * out_w + x] = idx.iter().zip(wt).fold(T::zero(), |acc, (&j, &c)| acc + c * row[j]);
            }
        }
        for (idx, wt) in &rows {
            for x in 0..out_w {
                out.push(idx.iter().zip(wt).fold(T::zero(), |acc, (&j, &c)| acc + c * tmp[j * out_w + x]));
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let n = out_shape.len();
    out_shape[n - 2] = out_h;
    out_shape[n - 1] = out_w;
    Tensor::new(&out_shape, out)
}

fn kernel_is_interpolating(kernel: &BicubicKernel) -> bool {
    cubic_weight(0.0, kernel.a) == 1.0 && cubic_weight(1.0, kernel.a) == 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_offset_weights() {
        assert_eq!(cubic_weight(0.5, -0.5), 0.5625);
        assert_eq!(cubic_weight(1.5, -0.5), -0.0625);
        assert_eq!(cubic_weight(0.0, -0.5), 1.0);
        assert_eq!(cubic_weight(1.0, -0.5), 0.0);
        assert_eq!(cubic_weight(2.0, -0.5), 0.0);
        // 2x downsample without antialias: centre falls halfway between samples
        let taps = axis_taps(8, 4, &BicubicKernel::with_antialias(false));
        assert_eq!(taps[1].index, vec![1, 2, 3, 4]);
        assert_eq!(taps[1].weight, vec![-0.0625, 0.5625, 0.5625, -0.0625]);
    }

    #[test]
    fn tap_counts() {
        for (src, dst, aa, n) in [(10, 20, true, 4), (20, 10, false, 4), (20, 10, true, 8), (40, 10, true, 16)] {
            let taps = axis_taps(src, dst, &BicubicKernel::with_antialias(aa));
            assert!(taps.iter().all(|t| t.index.len() == n), "{src}->{dst} aa={aa}");
            for t in &taps {
                assert!((t.weight.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_size_is_exact() {
        let img = Tensor::<f32>::from_fn(&[3, 5, 7], |i| ((i * 37) % 11) as f32 / 11.0);
        for aa in [false, true] {
            let out = bicubic_resize(&img, 5, 7, &BicubicKernel::with_antialias(aa)).unwrap();
            assert_eq!(out, img);
        }
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = Tensor::<f64>::full(&[2, 9, 13], 0.3);
        for (h, w) in [(4, 5), (18, 26), (9, 1), (31, 7)] {
            for aa in [false, true] {
                let out = bicubic_resize(&img, h, w, &BicubicKernel::with_antialias(aa)).unwrap();
                assert_eq!(out.shape(), &[2, h, w]);
                assert!(out.data().iter().all(|&v| (v - 0.3).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn rejects_empty_target() {
        let img = Tensor::<f32>::zeros(&[1, 4, 4]);
        assert!(matches!(
            bicubic_resize(&img, 0, 3, &BicubicKernel::default()),
            Err(crate::Error::Argument(_))
        ));
    }
}
