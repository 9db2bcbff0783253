use crate::image::Image;

/// Bilinear resampling with half-pixel centers (not corner-aligned):
/// output pixel `x` samples source coordinate `(x + 0.5) * in / out - 0.5`,
/// clamped to the source grid.
pub fn resize_bilinear_to(img: &Image, out_w: usize, out_h: usize) -> Image {
    assert!(!img.is_empty(), "cannot resize an empty image");
    let (in_w, in_h) = (img.width(), img.height());
    if in_w == out_w && in_h == out_h {
        return img.clone();
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, (src - i0 as f64) as f32)
            })
            .collect()
    };
    let xs = taps(out_w, in_w);
    let ys = taps(out_h, in_h);
    let src = img.data();
    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| src[(y * in_w + x) * 3 + c];
                let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * tx;
                let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * tx;
                out.push(top + (bottom - top) * ty);
            }
        }
    }
    Image::from_raw(out_w, out_h, out)
}

pub fn resize_bilinear(img: &Image, out_size: usize) -> Image {
    resize_bilinear_to(img, out_size, out_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Triangle-filter formulation: weight of source pixel `i` is
    /// `max(0, 1 - |src - i|)` after clamping `src` to the grid.
    fn reference(img: &Image, out_w: usize, out_h: usize) -> Image {
        let (in_w, in_h) = (img.width(), img.height());
        let mut out = Image::new(out_w, out_h);
        for oy in 0..out_h {
            let sy = ((oy as f64 + 0.5) * in_h as f64 / out_h as f64 - 0.5).clamp(0.0, (in_h - 1) as f64);
            for ox in 0..out_w {
                let sx = ((ox as f64 + 0.5) * in_w as f64 / out_w as f64 - 0.5).clamp(0.0, (in_w - 1) as f64);
                let mut acc = [0f64; 3];
                for iy in 0..in_h {
                    let wy = (1.0 - (sy - iy as f64).abs()).max(0.0);
                    if wy == 0.0 {
                        continue;
                    }
                    for ix in 0..in_w {
                        let wx = (1.0 - (sx - ix as f64).abs()).max(0.0);
                        if wx == 0.0 {
                            continue;
                        }
                        let p = img.get(ix, iy);
                        for c in 0..3 {
                            acc[c] += wx * wy * p[c] as f64;
                        }
                    }
                }
                out.set(ox, oy, [acc[0] as f32, acc[1] as f32, acc[2] as f32]);
            }
        }
        out
    }

    #[test]
    fn same_size_is_identity() {
        let mut img = Image::new(7, 5);
        img.set(3, 2, [0.1, 0.7, 0.3]);
        assert_eq!(resize_bilinear_to(&img, 7, 5), img);
    }

    #[test]
    fn two_by_two_ramp_upsamples_monotonically() {
        let img = Image::from_raw(2, 2, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let out = resize_bilinear(&img, 4);
        for x in 0..4 {
            let col: Vec<f32> = (0..4).map(|y| out.get(x, y)[0]).collect();
            assert!(col.windows(2).all(|v| v[1] >= v[0]), "{col:?}");
            assert_eq!(col[0], 0.0);
            assert_eq!(col[3], 1.0);
            assert!((col[1] - 0.25).abs() < 1e-6 && (col[2] - 0.75).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_reference_resampler() {
        let mut rng = crate::seed::rng_from(17);
        let data: Vec<f32> = (0..64 * 64 * 3).map(|_| rng.gen::<f32>()).collect();
        let img = Image::from_raw(64, 64, data);
        for (w, h) in [(64, 64), (37, 23), (128, 96), (16, 16)] {
            let a = resize_bilinear_to(&img, w, h);
            let b = reference(&img, w, h);
            let worst = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f32::max);
            assert!(worst <= 1.0 / 255.0, "{w}x{h}: {worst}");
        }
    }
}
