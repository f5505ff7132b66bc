//! Forward and backward kernels on plain tensors.
//!
//! These are shared by the eager executor and the tape; neither owns any
//! arithmetic of its own.

use crate::error::{dim_err, Result};
use crate::{Scalar, Tensor};

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Geometry of one 2-d convolution call.
#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&Tensor<T>>, pad: usize) -> Result<Self> {
        let [batch, cin, h, w] = x.dims4()?;
        let [cout, wc, kh, kw] = weight.dims4()?;
        if wc != cin {
            return dim_err(format!("conv2d: input has {cin} channels but weight expects {wc}"));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return dim_err(format!("conv2d: kernel {kh}x{kw} must have odd extents"));
        }
        if let Some(b) = bias {
            if b.shape() != [cout] {
                return dim_err(format!("conv2d: bias shape {:?} != [{cout}]", b.shape()));
            }
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return dim_err(format!("conv2d: kernel {kh}x{kw} larger than padded input {h}x{w}+{pad}"));
        }
        Ok(Self { batch, cin, cout, h, w, kh, kw, pad, oh: h + 2 * pad - kh + 1, ow: w + 2 * pad - kw + 1 })
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.pad == 0
    }

    /// Valid output-column range for kernel column `kx`, and the input column
    /// matching its first element.
    fn col_span(&self, kx: usize) -> Option<(usize, usize, usize)> {
        let lo = self.pad.saturating_sub(kx);
        let hi = (self.w + self.pad).saturating_sub(kx).min(self.ow);
        (lo < hi).then(|| (lo, hi, lo + kx - self.pad))
    }

    fn in_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy + ky).checked_sub(self.pad)?;
        (iy < self.h).then_some(iy)
    }
}

/// Zero-padded cross-correlation, `[B,C,H,W] * [O,C,kh,kw] -> [B,O,H',W']`.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&Tensor<T>>, pad: usize) -> Result<Tensor<T>> {
    let g = ConvGeom::new(x, weight, bias, pad)?;
    let (xs, ws) = (x.data(), weight.data());
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;
    let mut out = vec![T::zero(); g.batch * g.cout * out_plane];
    for b in 0..g.batch {
        for o in 0..g.cout {
            let dst = &mut out[(b * g.cout + o) * out_plane..][..out_plane];
            if let Some(bias) = bias {
                dst.fill(bias.data()[o]);
            }
            for c in 0..g.cin {
                let src = &xs[(b * g.cin + c) * in_plane..][..in_plane];
                let wbase = (o * g.cin + c) * g.kh * g.kw;
                if g.pointwise() {
                    axpy(ws[wbase], src, dst);
                    continue;
                }
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let wv = ws[wbase + ky * g.kw + kx];
                        let Some((lo, hi, ix0)) = g.col_span(kx) else { continue };
                        for oy in 0..g.oh {
                            let Some(iy) = g.in_row(oy, ky) else { continue };
                            axpy(wv, &src[iy * g.w + ix0..][..hi - lo], &mut dst[oy * g.ow + lo..oy * g.ow + hi]);
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[g.batch, g.cout, g.oh, g.ow], out)
}

/// Gradients of [`conv2d`] with respect to input, weight and bias.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    pad: usize,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = ConvGeom::new(x, weight, None, pad)?;
    let (xs, ws, dys) = (x.data(), weight.data(), dy.data());
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;
    let mut dx = vec![T::zero(); xs.len()];
    let mut dw = vec![T::zero(); ws.len()];
    let mut db = vec![T::zero(); g.cout];
    for b in 0..g.batch {
        for o in 0..g.cout {
            let gout = &dys[(b * g.cout + o) * out_plane..][..out_plane];
            db[o] += gout.iter().copied().sum::<T>();
            for c in 0..g.cin {
                let src = &xs[(b * g.cin + c) * in_plane..][..in_plane];
                let gin = &mut dx[(b * g.cin + c) * in_plane..][..in_plane];
                let wbase = (o * g.cin + c) * g.kh * g.kw;
                if g.pointwise() {
                    axpy(ws[wbase], gout, gin);
                    dw[wbase] += dot(gout, src);
                    continue;
                }
                for ky in 0..g.kh {
                    for kx in 0..g.kw {
                        let widx = wbase + ky * g.kw + kx;
                        let Some((lo, hi, ix0)) = g.col_span(kx) else { continue };
                        let mut acc = T::zero();
                        for oy in 0..g.oh {
                            let Some(iy) = g.in_row(oy, ky) else { continue };
                            let grow = &gout[oy * g.ow + lo..oy * g.ow + hi];
                            acc += dot(grow, &src[iy * g.w + ix0..][..hi - lo]);
                            axpy(ws[widx], grow, &mut gin[iy * g.w + ix0..][..hi - lo]);
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(x.shape(), dx)?,
        Tensor::new(weight.shape(), dw)?,
        Tensor::new(&[g.cout], db)?,
    ))
}

fn same_shape<T: Scalar>(op: &str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return dim_err(format!("{op}: shapes {:?} and {:?} differ", a.shape(), b.shape()));
    }
    Ok(())
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::new(a.shape(), data)
}

pub fn hadamard<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("hadamard", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::new(a.shape(), data)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Relu derivative: 1 strictly above zero, 0 at and below.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

pub fn sin<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(T::sin)
}

pub fn sin_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().zip(dy.data()).map(|(&v, &g)| g * v.cos()).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

pub fn scale<T: Scalar>(x: &Tensor<T>, factor: T) -> Tensor<T> {
    x.map(|v| v * factor)
}

/// Concatenates `[B,Ci,H,W]` tensors along the channel axis.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = parts.first() else {
        return dim_err("concat_channels: no inputs");
    };
    let [b, _, h, w] = first.dims4()?;
    let mut total = 0;
    for p in parts {
        let [pb, pc, ph, pw] = p.dims4()?;
        if (pb, ph, pw) != (b, h, w) {
            return dim_err(format!(
                "concat_channels: non-channel dims {:?} differ from {:?}",
                p.shape(),
                first.shape()
            ));
        }
        total += pc;
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(b * total * plane);
    for bi in 0..b {
        for p in parts {
            let c = p.shape()[1];
            out.extend_from_slice(&p.data()[bi * c * plane..][..c * plane]);
        }
    }
    Tensor::new(&[b, total, h, w], out)
}

/// Channels `[start, start+len)` of a `[B,C,H,W]` tensor.
pub fn slice_channels<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let [b, c, h, w] = x.dims4()?;
    if len == 0 || start + len > c {
        return dim_err(format!("slice_channels: [{start}, {}) outside {c} channels", start + len));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(b * len * plane);
    for bi in 0..b {
        out.extend_from_slice(&x.data()[(bi * c + start) * plane..][..len * plane]);
    }
    Tensor::new(&[b, len, h, w], out)
}

/// Neighbour offset `(dy, dx)` stored in unfolding block `k`.
#[inline]
pub fn unfold_offset(k: usize) -> (isize, isize) {
    ((k / 3) as isize - 1, (k % 3) as isize - 1)
}

#[inline]
fn shifted(i: usize, d: isize, n: usize) -> Option<usize> {
    let j = i as isize + d;
    (0..n as isize).contains(&j).then_some(j as usize)
}

/// 3x3 feature unfolding: `[B,F,H,W] -> [B,9F,H,W]`, block-major channels,
/// zeros for out-of-image neighbours.
pub fn unfold3<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, f, h, w] = x.dims4()?;
    let plane = h * w;
    let mut out = vec![T::zero(); b * 9 * f * plane];
    for bi in 0..b {
        for k in 0..9 {
            let (dy, dx) = unfold_offset(k);
            for c in 0..f {
                let src = &x.data()[(bi * f + c) * plane..][..plane];
                let dst = &mut out[((bi * 9 + k) * f + c) * plane..][..plane];
                for y in 0..h {
                    let Some(sy) = shifted(y, dy, h) else { continue };
                    for xx in 0..w {
                        if let Some(sx) = shifted(xx, dx, w) {
                            dst[y * w + xx] = src[sy * w + sx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[b, 9 * f, h, w], out)
}

pub fn unfold3_backward<T: Scalar>(input_shape: &[usize], dy: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, f, h, w] = match input_shape {
        &[b, f, h, w] => [b, f, h, w],
        _ => return dim_err("unfold3_backward: input must be 4-d"),
    };
    let plane = h * w;
    let mut dx = vec![T::zero(); b * f * plane];
    for bi in 0..b {
        for k in 0..9 {
            let (oy, ox) = unfold_offset(k);
            for c in 0..f {
                let g = &dy.data()[((bi * 9 + k) * f + c) * plane..][..plane];
                let dst = &mut dx[(bi * f + c) * plane..][..plane];
                for y in 0..h {
                    let Some(sy) = shifted(y, oy, h) else { continue };
                    for xx in 0..w {
                        if let Some(sx) = shifted(xx, ox, w) {
                            dst[sy * w + sx] += g[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(input_shape, dx)
}

/// Source cell for output index `i` when mapping `src` cells onto `dst`
/// cells by pixel centres: `floor((i + 0.5) * src / dst)`, clamped.
#[inline]
pub fn nearest_index(i: usize, src: usize, dst: usize) -> usize {
    (((2 * i + 1) * src) / (2 * dst)).min(src - 1)
}

/// Gathers rows/columns of a `[B,C,h,w]` tensor given per-output-row and
/// per-output-column source indices.
pub fn gather_rows_cols<T: Scalar>(x: &Tensor<T>, rows: &[usize], cols: &[usize]) -> Result<Tensor<T>> {
    let [b, c, h, w] = x.dims4()?;
    if rows.iter().any(|&r| r >= h) || cols.iter().any(|&q| q >= w) {
        return dim_err("gather: source index out of range");
    }
    let (oh, ow) = (rows.len(), cols.len());
    let mut out = Vec::with_capacity(b * c * oh * ow);
    for plane in x.data().chunks_exact(h * w) {
        for &r in rows {
            let row = &plane[r * w..][..w];
            out.extend(cols.iter().map(|&q| row[q]));
        }
    }
    Tensor::new(&[b, c, oh, ow], out)
}

/// Nearest-neighbour resize of a `[B,C,h,w]` map.
pub fn nearest_upsample<T: Scalar>(x: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let [_, _, h, w] = x.dims4()?;
    if out_h < h || out_w < w {
        return dim_err(format!("nearest_upsample: target {out_h}x{out_w} smaller than source {h}x{w}"));
    }
    let rows: Vec<usize> = (0..out_h).map(|i| nearest_index(i, h, out_h)).collect();
    let cols: Vec<usize> = (0..out_w).map(|j| nearest_index(j, w, out_w)).collect();
    gather_rows_cols(x, &rows, &cols)
}

pub fn nearest_upsample_backward<T: Scalar>(input_shape: &[usize], dy: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, h, w] = match input_shape {
        &[b, c, h, w] => [b, c, h, w],
        _ => return dim_err("nearest_upsample_backward: input must be 4-d"),
    };
    let [_, _, oh, ow] = dy.dims4()?;
    let rows: Vec<usize> = (0..oh).map(|i| nearest_index(i, h, oh)).collect();
    let cols: Vec<usize> = (0..ow).map(|j| nearest_index(j, w, ow)).collect();
    let mut dx = vec![T::zero(); b * c * h * w];
    for (dst, g) in dx.chunks_exact_mut(h * w).zip(dy.data().chunks_exact(oh * ow)) {
        for (i, &r) in rows.iter().enumerate() {
            for (j, &q) in cols.iter().enumerate() {
                dst[r * w + q] += g[i * ow + j];
            }
        }
    }
    Tensor::new(input_shape, dx)
}

/// Mean absolute error.
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape("l1_loss", pred, target)?;
    let n = T::of(pred.numel() as f64);
    let sum: T = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t).abs()).sum();
    Ok(Tensor::scalar(sum / n))
}

/// Subgradient of [`l1_loss`] w.r.t. `pred`; exact ties get 0.
pub fn l1_loss_backward<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, upstream: T) -> Tensor<T> {
    let g = upstream / T::of(pred.numel() as f64);
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| match p.partial_cmp(&t) {
            Some(std::cmp::Ordering::Greater) => g,
            Some(std::cmp::Ordering::Less) => -g,
            _ => T::zero(),
        })
        .collect();
    Tensor::new(pred.shape(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn pointwise_identity_conv_is_identity() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 4, 5], |i| i as f64 * 0.1 - 2.0);
        let w = Tensor::from_fn(&[3, 3, 1, 1], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let b = Tensor::zeros(&[3]);
        assert_eq!(conv2d(&x, &w, Some(&b), 0).unwrap(), x);
    }

    #[test]
    fn ones_kernel_on_constant_input() {
        let x = Tensor::<f64>::full(&[1, 1, 5, 6], 0.75);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &w, None, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 5, 6]);
        for r in 1..4 {
            for c in 1..5 {
                assert_eq!(y.data()[r * 6 + c], 9.0 * 0.75);
            }
        }
        // corner sees a 2x2 window
        assert_eq!(y.data()[0], 4.0 * 0.75);
    }

    #[test]
    fn conv_output_size_formula() {
        let x = Tensor::<f32>::zeros(&[1, 2, 7, 9]);
        let w = Tensor::zeros(&[4, 2, 5, 3]);
        let y = conv2d(&x, &w, None, 2).unwrap();
        assert_eq!(y.shape(), &[1, 4, 7 + 4 - 5 + 1, 9 + 4 - 3 + 1]);
    }

    #[test]
    fn conv_channel_mismatch_is_dimension_error() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]);
        let w = Tensor::zeros(&[1, 3, 3, 3]);
        assert!(matches!(conv2d(&x, &w, None, 1), Err(crate::Error::Dimension(_))));
        let w_even = Tensor::zeros(&[1, 2, 2, 2]);
        assert!(conv2d(&x, &w_even, None, 0).is_err());
    }

    #[test]
    fn relu_and_sin_values() {
        let x = t(&[2], vec![-1.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
        let z = t(&[1], vec![0.0]);
        assert_eq!(sin(&z).data(), &[0.0]);
        assert_eq!(sin_backward(&z, &t(&[1], vec![1.0])).data(), &[1.0]);
        assert_eq!(relu_backward(&z, &t(&[1], vec![1.0])).data(), &[0.0]);
    }

    #[test]
    fn l1_values_and_ties() {
        let p = t(&[2], vec![0.0, 1.0]);
        let q = t(&[2], vec![1.0, 1.0]);
        assert_eq!(l1_loss(&p, &q).unwrap().item(), 0.5);
        assert_eq!(l1_loss(&p, &p).unwrap().item(), 0.0);
        assert_eq!(l1_loss_backward(&p, &q, 1.0).data(), &[-0.5, 0.0]);
    }

    #[test]
    fn unfold_constant_map() {
        let x = Tensor::<f64>::full(&[1, 2, 4, 4], 3.0);
        let u = unfold3(&x).unwrap();
        assert_eq!(u.shape(), &[1, 18, 4, 4]);
        let at = |k: usize, c: usize, y: usize, xx: usize| u.data()[((k * 2 + c) * 4 + y) * 4 + xx];
        for k in 0..9 {
            assert_eq!(at(k, 1, 1, 2), 3.0);
        }
        // corner (0,0): valid neighbours are offsets with dy,dx >= 0
        let valid: Vec<usize> = (0..9).filter(|&k| at(k, 0, 0, 0) != 0.0).collect();
        assert_eq!(valid, vec![4, 5, 7, 8]);
    }

    #[test]
    fn unfold_single_pixel() {
        let x = t(&[1, 1, 1, 1], vec![5.0]);
        let u = unfold3(&x).unwrap();
        let expect: Vec<f64> = (0..9).map(|k| if k == 4 { 5.0 } else { 0.0 }).collect();
        assert_eq!(u.data(), &expect[..]);
    }

    #[test]
    fn nearest_two_by_two_to_four_by_four() {
        let x = t(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let y = nearest_upsample(&x, 4, 4).unwrap();
        // oracle: source index floor((i + 0.5) * 2 / 4) evaluated in f64
        for i in 0..4 {
            for j in 0..4 {
                let si = ((i as f64 + 0.5) * 0.5).floor() as usize;
                let sj = ((j as f64 + 0.5) * 0.5).floor() as usize;
                assert_eq!(y.data()[i * 4 + j], x.data()[si * 2 + sj]);
            }
        }
    }

    #[test]
    fn nearest_identity_and_constant() {
        let x = Tensor::<f64>::from_fn(&[2, 3, 3, 5], |i| i as f64);
        assert_eq!(nearest_upsample(&x, 3, 5).unwrap(), x);
        let one = t(&[1, 1, 1, 1], vec![0.25]);
        let y = nearest_upsample(&one, 7, 3).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.25));
        assert!(nearest_upsample(&x, 2, 5).is_err());
    }

    #[test]
    fn nearest_backward_scatters_additively() {
        let dy = Tensor::<f64>::full(&[1, 1, 6, 6], 1.0);
        let dx = nearest_upsample_backward(&[1, 1, 2, 3], &dy).unwrap();
        assert_eq!(dx.data(), &[6.0; 6]);
    }

    #[test]
    fn concat_then_slice_roundtrip() {
        let a = Tensor::<f64>::from_fn(&[2, 3, 2, 2], |i| i as f64);
        let b = Tensor::<f64>::from_fn(&[2, 1, 2, 2], |i| -(i as f64));
        let c = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(slice_channels(&c, 0, 3).unwrap(), a);
        assert_eq!(slice_channels(&c, 3, 1).unwrap(), b);
        let bad = Tensor::<f64>::zeros(&[2, 1, 3, 2]);
        assert!(concat_channels(&[&a, &bad]).is_err());
    }
}
