//! Sprite rasterizer with depth-ordered occlusion.

use serde::{Deserialize, Serialize};

use super::appearance::ObjectAppearance;
use crate::image::Image;
use crate::seed::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub appearance: ObjectAppearance,
    /// Sub-pixel center; may lie outside the frame.
    pub center: [f32; 2],
    pub radius_px: f32,
    pub rotation: f32,
    /// Higher values occlude lower ones; ties go to the later object.
    pub depth_order: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Background {
    /// Low-saturation floor texture; the seed selects the patch of floor.
    Clutter { seed: u64 },
    /// Uniform mid-gray, used for the canonical test images.
    Clean,
}

pub const CLEAN_GRAY: [f32; 3] = [0.55, 0.55, 0.55];

pub const NO_OWNER: u16 = u16::MAX;

/// Visible-pixel mask for one object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<bool>,
}

impl Mask {
    pub fn area(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.pixels[y * self.width + x]
    }
}

/// Per-pixel owner map: `owner[y * w + x]` is the index (into the object list
/// passed to the rasterizer) of the visible object, or [`NO_OWNER`].
#[derive(Debug, Clone)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub owner: Vec<u16>,
    pub visible_px: Vec<usize>,
}

impl LabelMap {
    pub fn mask(&self, object: usize) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            pixels: self.owner.iter().map(|&o| o as usize == object).collect(),
        }
    }

    pub fn masks(&self) -> Vec<Mask> {
        (0..self.visible_px.len()).map(|i| self.mask(i)).collect()
    }

    pub fn visible_fraction(&self, object: usize) -> f32 {
        self.visible_px[object] as f32 / (self.width * self.height) as f32
    }

    #[inline]
    pub fn owner_at(&self, x: usize, y: usize) -> Option<usize> {
        match self.owner[y * self.width + x] {
            NO_OWNER => None,
            o => Some(o as usize),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub image: Image,
    pub labels: LabelMap,
}

impl Rendered {
    pub fn masks(&self) -> Vec<Mask> {
        self.labels.masks()
    }
}

fn paint_order(objects: &[SceneObject]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by(|&a, &b| {
        objects[b]
            .depth_order
            .cmp(&objects[a].depth_order)
            .then(b.cmp(&a))
    });
    order
}

/// Front-to-back rasterization; each pixel goes to the first object that
/// covers it. `paint` receives (pixel index, object index, local u, v).
fn rasterize(
    objects: &[SceneObject],
    w: usize,
    h: usize,
    mut paint: impl FnMut(usize, usize, f32, f32),
) -> LabelMap {
    assert!(objects.len() < NO_OWNER as usize);
    let mut owner = vec![NO_OWNER; w * h];
    let mut visible_px = vec![0usize; objects.len()];
    for idx in paint_order(objects) {
        let obj = &objects[idx];
        let r = obj.radius_px;
        if !(r > 0.0) {
            continue;
        }
        let [cx, cy] = obj.center;
        let x0 = (cx - r).floor().max(0.0) as usize;
        let y0 = (cy - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as i64).min(w as i64 - 1);
        let y1 = ((cy + r).ceil() as i64).min(h as i64 - 1);
        if x1 < 0 || y1 < 0 || x0 >= w || y0 >= h {
            continue;
        }
        let (sin, cos) = (-obj.rotation).sin_cos();
        let inv_r = 1.0 / r;
        for y in y0..=y1 as usize {
            let dy = y as f32 - cy;
            for x in x0..=x1 as usize {
                let p = y * w + x;
                if owner[p] != NO_OWNER {
                    continue;
                }
                let dx = x as f32 - cx;
                let u = (dx * cos - dy * sin) * inv_r;
                let v = (dx * sin + dy * cos) * inv_r;
                if obj.appearance.shape.contains(u, v) {
                    owner[p] = idx as u16;
                    visible_px[idx] += 1;
                    paint(p, idx, u, v);
                }
            }
        }
    }
    LabelMap {
        width: w,
        height: h,
        owner,
        visible_px,
    }
}

/// Masks only; no color work. Used for per-frame ground truth.
pub fn label_map(objects: &[SceneObject], w: usize, h: usize) -> LabelMap {
    rasterize(objects, w, h, |_, _, _, _| {})
}

pub fn render_frame(
    objects: &[SceneObject],
    w: usize,
    h: usize,
    background: Background,
) -> Rendered {
    assert!(w > 0 && h > 0, "frame dimensions must be positive");
    let mut image = Image::new(w, h);
    let labels = {
        let data = image.data_mut();
        rasterize(objects, w, h, |p, idx, u, v| {
            if let Some(rgb) = objects[idx].appearance.shade(u, v) {
                data[p * 3..p * 3 + 3].copy_from_slice(&rgb);
            }
        })
    };
    let data = image.data_mut();
    match background {
        Background::Clean => {
            for (p, &o) in labels.owner.iter().enumerate() {
                if o == NO_OWNER {
                    data[p * 3..p * 3 + 3].copy_from_slice(&CLEAN_GRAY);
                }
            }
        }
        Background::Clutter { seed } => {
            let cell = (w as f32 / 40.0).max(2.0);
            for (p, &o) in labels.owner.iter().enumerate() {
                if o == NO_OWNER {
                    let (x, y) = ((p % w) as f32, (p / w) as f32);
                    data[p * 3..p * 3 + 3].copy_from_slice(&floor_texture(seed, x, y, cell));
                }
            }
        }
    }
    Rendered { image, labels }
}

#[inline]
fn lattice(seed: u64, ix: i64, iy: i64) -> f32 {
    let h = splitmix64(seed ^ splitmix64((ix as u64) ^ ((iy as u64) << 32)));
    (h >> 40) as f32 / (1u64 << 24) as f32
}

fn value_noise(seed: u64, x: f32, y: f32) -> f32 {
    let (fx, fy) = (x.floor(), y.floor());
    let (tx, ty) = (x - fx, y - fy);
    let (ix, iy) = (fx as i64, fy as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Two octaves of value noise tinted as a warm, desaturated floor.
fn floor_texture(seed: u64, x: f32, y: f32, cell: f32) -> [f32; 3] {
    let coarse = value_noise(seed, x / (cell * 4.0), y / (cell * 4.0));
    let fine = value_noise(seed ^ 0x5bd1_e995, x / cell, y / cell);
    let tone = 0.5 * coarse + 0.5 * fine;
    let value = 0.38 + 0.3 * tone;
    let tint = value_noise(seed ^ 0x27d4_eb2f, x / (cell * 8.0), y / (cell * 8.0));
    let sat = 0.08 + 0.12 * tint;
    crate::image::hsv_to_rgb(30.0 + 20.0 * tint, sat, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::appearance::{make_inventory, Pattern, Shape};

    fn circle(center: [f32; 2], radius: f32, depth: i32) -> SceneObject {
        let mut appearance = make_inventory(0)[0];
        appearance.shape = Shape::Circle;
        appearance.pattern = Pattern::Solid;
        SceneObject {
            appearance,
            center,
            radius_px: radius,
            rotation: 0.3,
            depth_order: depth,
        }
    }

    #[test]
    fn centered_circle_area_matches_analytic() {
        let out = render_frame(&[circle([320.0, 240.0], 50.0, 0)], 640, 480, Background::Clean);
        let area = out.masks()[0].area() as f64;
        let analytic = std::f64::consts::PI * 2500.0;
        assert!((area - analytic).abs() / analytic < 0.02, "{area} vs {analytic}");
    }

    #[test]
    fn full_occlusion_empties_the_lower_mask() {
        let objs = [circle([100.0, 100.0], 30.0, 1), circle([100.0, 100.0], 30.0, 0)];
        let out = render_frame(&objs, 200, 200, Background::Clean);
        let masks = out.masks();
        assert!(masks[0].area() > 0);
        assert_eq!(masks[1].area(), 0);
    }

    #[test]
    fn empty_scene_is_background_only() {
        let out = render_frame(&[], 32, 16, Background::Clean);
        assert!(out.masks().is_empty());
        assert!(out.image.data().chunks(3).all(|p| p == CLEAN_GRAY));
    }

    #[test]
    fn clipped_objects_are_allowed() {
        let objs = [circle([-10.0, 50.0], 20.0, 0), circle([500.0, 500.0], 20.0, 0)];
        let out = render_frame(&objs, 100, 100, Background::Clutter { seed: 3 });
        let masks = out.masks();
        assert!(masks[0].area() > 0 && masks[0].area() < 600);
        assert_eq!(masks[1].area(), 0);
    }

    #[test]
    fn masks_are_disjoint_and_fractions_sum_below_one() {
        let inv = make_inventory(4);
        let objs: Vec<SceneObject> = (0..6)
            .map(|i| SceneObject {
                appearance: inv[i],
                center: [40.0 + 15.0 * i as f32, 50.0],
                radius_px: 25.0,
                rotation: i as f32,
                depth_order: (i % 3) as i32,
            })
            .collect();
        let out = render_frame(&objs, 120, 100, Background::Clutter { seed: 1 });
        let masks = out.masks();
        for p in 0..120 * 100 {
            assert!(masks.iter().filter(|m| m.pixels[p]).count() <= 1);
        }
        let total: f32 = (0..6).map(|i| out.labels.visible_fraction(i)).sum();
        assert!(total <= 1.0);
    }
}
