use diinn::coords::make_grid;
use diinn::metrics::{lr_psnr, psnr};
use diinn::resample::{bicubic_resize, BicubicKernel};
use diinn::{ImageRGB, Tensor};
use num_rational::Ratio;

type Q = Ratio<i64>;

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Per-pixel enumeration: centre `(i + 1/2) * lr / out` in input-cell units,
/// nearest cell by floor, local offset `2 (c - (j + 1/2))` clamped to [-1, 1].
fn axis_oracle(lr: i64, out: i64) -> Vec<(f64, usize, f64)> {
    let half = Q::new(1, 2);
    let one = Q::from_integer(1);
    (0..out)
        .map(|i| {
            let c = (Q::from_integer(i) + half) * Q::new(lr, out);
            let j = c.floor().to_integer().min(lr - 1);
            let local = (Q::from_integer(2) * (c - (Q::from_integer(j) + half))).max(-one).min(one);
            let global = Q::from_integer(2) * (Q::from_integer(i) + half) / Q::from_integer(out) - one;
            (to_f64(global), j as usize, to_f64(local))
        })
        .collect()
}

#[test]
fn grid_matches_rational_enumeration() {
    let mut cases = 0;
    for lr in 1..=8usize {
        for out in lr..=32usize {
            let g = make_grid(lr, lr, out, out).unwrap();
            let oracle = axis_oracle(lr as i64, out as i64);
            for (axis, name) in [(&g.x, "x"), (&g.y, "y")] {
                for (i, &(glob, j, loc)) in oracle.iter().enumerate() {
                    assert_eq!(axis.global[i], glob, "{name} global lr={lr} out={out} i={i}");
                    assert_eq!(axis.nearest[i], j, "{name} nearest lr={lr} out={out} i={i}");
                    assert_eq!(axis.local[i], loc, "{name} local lr={lr} out={out} i={i}");
                }
            }
            cases += 1;
        }
    }
    assert_eq!(cases, (1..=8).map(|lr| 33 - lr).sum::<usize>());
}

#[test]
fn anisotropic_grid_matches_per_axis_oracle() {
    for (lh, lw, oh, ow) in [(3, 5, 7, 16), (8, 2, 31, 9), (1, 6, 4, 6)] {
        let g = make_grid(lh, lw, oh, ow).unwrap();
        let ox = axis_oracle(lw as i64, ow as i64);
        let oy = axis_oracle(lh as i64, oh as i64);
        assert_eq!(g.x.local, ox.iter().map(|t| t.2).collect::<Vec<_>>());
        assert_eq!(g.y.nearest, oy.iter().map(|t| t.1).collect::<Vec<_>>());
    }
}

fn keys(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x < 1.0 {
        1.5 * x.powi(3) - 2.5 * x.powi(2) + 1.0
    } else if x < 2.0 {
        a * x.powi(3) - 5.0 * a * x.powi(2) + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Direct two-dimensional evaluation, no tap tables.
fn resize_oracle(src: &[f64], h: usize, w: usize, oh: usize, ow: usize, antialias: bool) -> Vec<f64> {
    let axis = |n: usize, m: usize, i: usize| -> Vec<(usize, f64)> {
        let r = n as f64 / m as f64;
        let s = if antialias && n > m { r } else { 1.0 };
        let c = (i as f64 + 0.5) * r - 0.5;
        let lo = (c - 3.0 * s).floor() as i64;
        let hi = (c + 3.0 * s).ceil() as i64;
        let mut taps: Vec<(usize, f64)> = (lo..=hi)
            .filter(|&t| ((t as f64 - c) / s).abs() < 2.0)
            .map(|t| (t.clamp(0, n as i64 - 1) as usize, keys((t as f64 - c) / s)))
            .collect();
        let total: f64 = taps.iter().map(|t| t.1).sum();
        taps.iter_mut().for_each(|t| t.1 /= total);
        taps
    };
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for &(sy, wy) in &axis(h, oh, y) {
                for &(sx, wx) in &axis(w, ow, x) {
                    acc += wy * wx * src[sy * w + sx];
                }
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

#[test]
fn bicubic_matches_direct_evaluation() {
    let sizes = [(9, 7, 4, 3), (9, 7, 18, 21), (12, 12, 5, 5), (5, 8, 13, 3), (16, 16, 16, 16), (7, 10, 3, 25)];
    for (h, w, oh, ow) in sizes {
        let src: Vec<f64> = (0..h * w).map(|i| ((i * 37 + 11) % 53) as f64 / 53.0).collect();
        let t = Tensor::new(&[1, h, w], src.clone()).unwrap();
        for aa in [false, true] {
            let got = bicubic_resize(&t, oh, ow, &BicubicKernel::with_antialias(aa)).unwrap();
            let want = resize_oracle(&src, h, w, oh, ow, aa);
            for (a, b) in got.data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{h}x{w}->{oh}x{ow} aa={aa}: {a} vs {b}");
            }
        }
    }
}

/// `(-1)^x` with the two end samples raised to 1.25 in magnitude: every
/// x2 bicubic (non-antialiased) output sample of it is exactly zero.
fn null_pattern(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let v = if i % 2 == 0 { 1.0 } else { -1.0 };
            if i == 0 || i == n - 1 { 1.25 * v } else { v }
        })
        .collect()
}

#[test]
fn lr_psnr_is_blind_to_the_downsampling_null_space() {
    let n = 16;
    let a = null_pattern(n);
    let down = resize_oracle(&a, 1, n, 1, n / 2, false);
    assert!(down.iter().all(|&v| v == 0.0), "{down:?}");

    let eps = 1.0 / 32.0;
    let hr = ImageRGB::from_fn(n, n, |y, x, _| (0.5 + eps * a[y] * a[x]) as f32);
    let flat = ImageRGB::from_fn(n, n, |_, _, _| 0.5);
    let kernel = BicubicKernel::with_antialias(false);
    assert_eq!(lr_psnr(&flat, &hr, n / 2, n / 2, &kernel).unwrap(), f64::INFINITY);
    assert!(psnr(&flat, &hr).unwrap().is_finite());
    // the antialiased kernel does see the pattern
    assert!(lr_psnr(&flat, &hr, n / 2, n / 2, &BicubicKernel::default()).unwrap().is_finite());
}

#[test]
fn bicubic_upsample_has_finite_lr_psnr() {
    let hr = ImageRGB::from_fn(24, 24, |y, x, c| (((y * 5 + x * 3 + c) % 11) as f32) / 10.0);
    let kernel = BicubicKernel::default();
    let lr = bicubic_resize(&hr.to_chw::<f64>(), 12, 12, &kernel).unwrap();
    let up = bicubic_resize(&lr, 24, 24, &kernel).unwrap();
    let sr = ImageRGB::from_tensor(&up.reshape(&[1, 3, 24, 24]).unwrap()).unwrap();
    let v = lr_psnr(&sr, &hr, 12, 12, &kernel).unwrap();
    assert!(v.is_finite() && v > psnr(&sr, &hr).unwrap(), "{v}");
}
