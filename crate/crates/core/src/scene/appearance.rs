use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::image::hsv_to_rgb;
use crate::seed::derive_rng;

pub const N_CATEGORIES: usize = 24;

pub type Category = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Ring,
    Cross,
    Star,
}

impl Shape {
    pub const ALL: [Shape; 6] = [
        Shape::Circle,
        Shape::Square,
        Shape::Triangle,
        Shape::Ring,
        Shape::Cross,
        Shape::Star,
    ];

    /// Membership test in sprite-local coordinates, where the sprite's
    /// bounding radius is 1.
    pub fn contains(self, u: f32, v: f32) -> bool {
        let r2 = u * u + v * v;
        if r2 > 1.0 {
            return false;
        }
        match self {
            Shape::Circle => true,
            Shape::Square => u.abs() <= 0.8 && v.abs() <= 0.8,
            Shape::Ring => r2 >= 0.25,
            Shape::Cross => (u.abs() <= 0.36) || (v.abs() <= 0.36),
            Shape::Triangle => {
                // Vertices at 90°, 210°, 330° on the unit circle; each edge
                // sits at distance 0.5 from the center.
                let edge = |nx: f32, ny: f32| u * nx + v * ny <= 0.5;
                edge(0.0, 1.0) && edge(-0.866_025_4, -0.5) && edge(0.866_025_4, -0.5)
            }
            Shape::Star => {
                let theta = v.atan2(u) + std::f32::consts::FRAC_PI_2;
                let sector = std::f32::consts::TAU / 5.0;
                let t = (theta.rem_euclid(sector) / sector - 0.5).abs() * 2.0;
                // t = 1 at a spike, 0 between spikes.
                let limit = 0.45 + 0.55 * t;
                r2.sqrt() <= limit
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Solid,
    Stripes,
    Checker,
    Dots,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [
        Pattern::Solid,
        Pattern::Stripes,
        Pattern::Checker,
        Pattern::Dots,
    ];

    /// True where the secondary shade is painted.
    fn secondary(self, u: f32, v: f32, phase: f32) -> bool {
        match self {
            Pattern::Solid => false,
            Pattern::Stripes => (u * 9.0 + phase).sin() > 0.0,
            Pattern::Checker => {
                let a = (u * 2.5 + phase).floor() as i32;
                let b = (v * 2.5).floor() as i32;
                (a + b).rem_euclid(2) == 0
            }
            Pattern::Dots => {
                let gu = u * 2.5 + phase;
                let gv = v * 2.5;
                let du = gu - gu.round();
                let dv = gv - gv.round();
                du * du + dv * dv < 0.09
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectAppearance {
    pub category: Category,
    pub base_hue: f32,
    pub shape: Shape,
    pub pattern: Pattern,
    pub pattern_phase: f32,
}

impl ObjectAppearance {
    pub fn primary_rgb(&self) -> [f32; 3] {
        hsv_to_rgb(self.base_hue, 0.8, 0.95)
    }

    pub fn secondary_rgb(&self) -> [f32; 3] {
        hsv_to_rgb(self.base_hue, 0.9, 0.5)
    }

    /// Color at sprite-local coordinates, or `None` outside the shape.
    #[inline]
    pub fn shade(&self, u: f32, v: f32) -> Option<[f32; 3]> {
        if !self.shape.contains(u, v) {
            return None;
        }
        Some(if self.pattern.secondary(u, v, self.pattern_phase) {
            self.secondary_rgb()
        } else {
            self.primary_rgb()
        })
    }
}

/// Builds the 24-toy room inventory.
///
/// Hues occupy 24 slots 15° apart under a seeded rotation and permutation,
/// and the 24 (shape, pattern) combinations are dealt out by a second
/// permutation, so every category is unique on hue alone and on
/// shape+pattern alone.
pub fn make_inventory(appearance_seed: u64) -> Vec<ObjectAppearance> {
    let mut rng = derive_rng(appearance_seed, "inventory", 0);
    let offset: f32 = rng.gen_range(0.0..15.0);
    let mut hue_slots: Vec<usize> = (0..N_CATEGORIES).collect();
    hue_slots.shuffle(&mut rng);
    let mut combos: Vec<(Shape, Pattern)> = Shape::ALL
        .iter()
        .flat_map(|&s| Pattern::ALL.iter().map(move |&p| (s, p)))
        .collect();
    combos.shuffle(&mut rng);
    (0..N_CATEGORIES)
        .map(|c| ObjectAppearance {
            category: c as Category,
            base_hue: hue_slots[c] as f32 * 15.0 + offset,
            shape: combos[c].0,
            pattern: combos[c].1,
            pattern_phase: rng.gen_range(0.0..std::f32::consts::TAU),
        })
        .collect()
}
