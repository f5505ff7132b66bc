//! Global and local pixel-centre coordinates for a target resolution.
//!
//! Pixels are unit squares addressed by their centres. Along an axis with
//! `lr` input cells and `out` output cells (`s = out / lr`), output pixel `i`
//! sits at input-cell position `c = (i + 0.5) / s`. Its nearest input cell is
//! `floor(c)` and its local coordinate is `2 (c - (j + 0.5))`, so the input
//! cell spans `[-1, 1]`. All of it is evaluated on integer numerators, which
//! keeps the grid exact for any pair of sizes.

use std::ops::Range;

use crate::error::{arg_err, Result};
use crate::numcore::kernels::nearest_index;
use crate::{Scalar, Tensor};

/// Per-axis coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisCoords {
    pub global: Vec<f64>,
    pub nearest: Vec<usize>,
    pub local: Vec<f64>,
}

impl AxisCoords {
    pub fn new(lr: usize, out: usize) -> Self {
        let global = (0..out).map(|i| ((2 * i + 1) as f64 - out as f64) / out as f64).collect();
        let nearest: Vec<usize> = (0..out).map(|i| nearest_index(i, lr, out)).collect();
        let local = nearest
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let num = ((2 * i + 1) * lr) as i64 - ((2 * j + 1) * out) as i64;
                (num as f64 / out as f64).clamp(-1.0, 1.0)
            })
            .collect();
        Self { global, nearest, local }
    }
}

/// Coordinates of every output pixel. Channel 0 is x (columns), channel 1 is y (rows).
#[derive(Clone, Debug, PartialEq)]
pub struct CoordGrid {
    pub lr_h: usize,
    pub lr_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub x: AxisCoords,
    pub y: AxisCoords,
}

impl CoordGrid {
    /// Global coordinates as `[2, out_h, out_w]`.
    pub fn global_xy<T: Scalar>(&self) -> Tensor<T> {
        self.stack(|a| &a.global)
    }

    /// Local coordinates as `[2, out_h, out_w]`.
    pub fn local_xy<T: Scalar>(&self) -> Tensor<T> {
        self.stack(|a| &a.local)
    }

    /// Nearest low-resolution cell of each output pixel as `[2, out_h, out_w]`.
    pub fn nearest_lr_index(&self) -> Vec<usize> {
        let plane = self.out_h * self.out_w;
        let mut out = Vec::with_capacity(2 * plane);
        out.extend((0..plane).map(|p| self.x.nearest[p % self.out_w]));
        out.extend((0..plane).map(|p| self.y.nearest[p / self.out_w]));
        out
    }

    fn stack<T: Scalar>(&self, pick: impl Fn(&AxisCoords) -> &Vec<f64>) -> Tensor<T> {
        let (xs, ys) = (pick(&self.x), pick(&self.y));
        let plane = self.out_h * self.out_w;
        Tensor::from_fn(&[2, self.out_h, self.out_w], |k| {
            let p = k % plane;
            T::of(if k < plane { xs[p % self.out_w] } else { ys[p / self.out_w] })
        })
    }

    /// Mean upscale ratio `(s_x + s_y) / 2`.
    pub fn mean_scale(&self) -> f64 {
        (self.out_w as f64 / self.lr_w as f64 + self.out_h as f64 / self.lr_h as f64) / 2.0
    }

    pub fn is_isotropic(&self) -> bool {
        self.out_w * self.lr_h == self.out_h * self.lr_w
    }
}

pub fn make_grid(lr_h: usize, lr_w: usize, out_h: usize, out_w: usize) -> Result<CoordGrid> {
    if lr_h == 0 || lr_w == 0 {
        return arg_err("make_grid: input size must be positive");
    }
    if out_h < lr_h || out_w < lr_w {
        return arg_err(format!("make_grid: target {out_h}x{out_w} smaller than input {lr_h}x{lr_w}"));
    }
    Ok(CoordGrid { lr_h, lr_w, out_h, out_w, x: AxisCoords::new(lr_w, out_w), y: AxisCoords::new(lr_h, out_h) })
}

/// Positional features `(local_x, local_y, 1/s)` as `[batch, 3, out_h, out_w]`.
pub fn make_positional<T: Scalar>(grid: &CoordGrid, batch: usize) -> Tensor<T> {
    positional_rows(grid, 0..grid.out_h, batch)
}

/// Positional features restricted to output rows `rows`.
pub fn positional_rows<T: Scalar>(grid: &CoordGrid, rows: Range<usize>, batch: usize) -> Tensor<T> {
    let inv = T::of(1.0 / grid.mean_scale());
    let (n, w) = (rows.len(), grid.out_w);
    let plane = n * w;
    let mut one = Vec::with_capacity(3 * plane);
    for _ in rows.clone() {
        one.extend(grid.x.local.iter().map(|&v| T::of(v)));
    }
    for r in rows {
        one.extend(std::iter::repeat_n(T::of(grid.y.local[r]), w));
    }
    one.extend(std::iter::repeat_n(inv, plane));
    let mut data = Vec::with_capacity(batch * one.len());
    for _ in 0..batch {
        data.extend_from_slice(&one);
    }
    Tensor::new(&[batch, 3, n, w], data).expect("positional shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_coordinates_of_four_pixels() {
        let a = AxisCoords::new(2, 4);
        assert_eq!(a.global, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn local_coordinates_scale_two_and_three() {
        let two = AxisCoords::new(3, 6);
        assert_eq!(two.local, vec![-0.5, 0.5, -0.5, 0.5, -0.5, 0.5]);
        assert_eq!(two.nearest, vec![0, 0, 1, 1, 2, 2]);
        let three = AxisCoords::new(2, 6);
        let t = 2.0 / 3.0;
        assert_eq!(three.local, vec![-t, 0.0, t, -t, 0.0, t]);
    }

    #[test]
    fn identity_scale_has_zero_local_coordinates() {
        let g = make_grid(5, 7, 5, 7).unwrap();
        assert!(g.local_xy::<f64>().data().iter().all(|&v| v == 0.0));
        let p = make_positional::<f32>(&g, 2);
        assert_eq!(p.shape(), &[2, 3, 5, 7]);
        assert!(p.data()[2 * 35..3 * 35].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn inverse_scale_channel() {
        let g = make_grid(4, 4, 8, 8).unwrap();
        let p = make_positional::<f32>(&g, 1);
        assert!(p.data()[128..].iter().all(|&v| v == 0.5));
        let aniso = make_grid(4, 4, 8, 16).unwrap();
        assert!(!aniso.is_isotropic());
        assert_eq!(aniso.mean_scale(), 3.0);
    }

    #[test]
    fn rejects_shrinking() {
        assert!(make_grid(4, 4, 3, 8).is_err());
    }

    #[test]
    fn row_subset_matches_full() {
        let g = make_grid(3, 4, 7, 11).unwrap();
        let full = make_positional::<f64>(&g, 1);
        let part = positional_rows::<f64>(&g, 2..5, 1);
        for c in 0..3 {
            for (r, fr) in (2..5).enumerate() {
                for x in 0..11 {
                    assert_eq!(part.data()[(c * 3 + r) * 11 + x], full.data()[(c * 7 + fr) * 11 + x]);
                }
            }
        }
    }
}
