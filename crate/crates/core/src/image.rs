//! RGB images in `[0, 1]` and their file and tensor forms.

use std::path::Path;

use crate::error::{dim_err, Error, Result};
use crate::{Scalar, Tensor};

/// `height x width x 3` image, interleaved RGB, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRGB {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageRGB {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * 3 {
            return dim_err(format!("image {height}x{width}x3 cannot hold {} values", data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Planar `[3, H, W]` tensor.
    pub fn to_chw<T: Scalar>(&self) -> Tensor<T> {
        let plane = self.height * self.width;
        Tensor::from_fn(&[3, self.height, self.width], |k| T::of(self.data[(k % plane) * 3 + k / plane] as f64))
    }

    /// Batched `[1, 3, H, W]` tensor.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        self.to_chw::<T>().reshape(&[1, 3, self.height, self.width]).expect("same size")
    }

    /// Builds an image from a `[3,H,W]` or `[1,3,H,W]` tensor, clamping to `[0, 1]`.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let (h, w) = match *t.shape() {
            [3, h, w] | [1, 3, h, w] => (h, w),
            ref s => return dim_err(format!("expected [3,H,W] or [1,3,H,W], got {s:?}")),
        };
        let plane = h * w;
        let mut data = Vec::with_capacity(3 * plane);
        for p in 0..plane {
            for c in 0..3 {
                data.push(t.data()[c * plane + p].as_f32().clamp(0.0, 1.0));
            }
        }
        Self::new(h, w, data)
    }

    /// Rounds every value to the nearest 8-bit level.
    pub fn quantized(&self) -> Self {
        Self { data: self.data.iter().map(|&v| quantize(v) as f32 / 255.0).collect(), ..self.clone() }
    }

    /// Top-left crop.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return dim_err(format!(
                "crop {height}x{width} at ({top},{left}) outside {}x{}",
                self.height, self.width
            ));
        }
        Ok(Self::from_fn(height, width, |y, x, c| self.get(top + y, left + x, c)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
        Self::new(h as usize, w as usize, data)
    }

    /// Writes an 8-bit image; the format follows the file extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size");
        buf.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }
}

/// `round(clamp(v, 0, 1) * 255)`.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_roundtrip_and_clamp() {
        let img = ImageRGB::from_fn(3, 4, |y, x, c| (y * 12 + x * 3 + c) as f32 / 40.0);
        let t = img.to_tensor::<f64>();
        assert_eq!(t.shape(), &[1, 3, 3, 4]);
        assert_eq!(t.data()[12 + 5] as f32, img.get(1, 1, 1));
        assert_eq!(ImageRGB::from_tensor(&t).unwrap(), img);
        let over = Tensor::<f32>::full(&[3, 1, 1], 1.7);
        assert_eq!(ImageRGB::from_tensor(&over).unwrap().data(), &[1.0; 3]);
    }

    #[test]
    fn png_roundtrip_is_eight_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = ImageRGB::from_fn(5, 6, |y, x, c| ((y + x + c) % 7) as f32 / 6.3);
        img.save(&path).unwrap();
        let back = ImageRGB::load(&path).unwrap();
        assert_eq!(back, img.quantized());
    }
}
