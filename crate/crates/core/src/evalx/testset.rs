//! Canonical test images: one centered toy on a clean background.

use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::image::{quantize, Image};
use crate::learner::{image_to_chw, resize_bilinear, Model, Workspace};
use crate::scene::{render_frame, Background, Category, ObjectAppearance, SceneObject, N_CATEGORIES};
use crate::seed::derive_rng;

pub const VIEWS_PER_CATEGORY: usize = 8;
/// Radius of the unscaled test sprite as a fraction of the frame height.
pub const TEST_RADIUS_FRAC: f32 = 0.3;
pub const SCALE_JITTER: f32 = 0.3;
pub const ORIENTATION_JITTER_DEG: f32 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TestImage {
    pub category: Category,
    /// In-plane rotation step, `view * 45` degrees.
    pub view: usize,
    pub variant: usize,
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub images: Vec<TestImage>,
}

/// Renders `24 * 8 * variants_per_view` images at `w x h`. Variant 0 of
/// each view is the canonical pose (scale 1, no jitter); further variants
/// draw a scale in `1 +- 0.3` and an orientation jitter of up to 10 degrees
/// from `seed`.
pub fn render_test_set(
    inventory: &[ObjectAppearance],
    variants_per_view: usize,
    w: usize,
    h: usize,
    seed: u64,
) -> TestSet {
    assert_eq!(inventory.len(), N_CATEGORIES, "inventory must hold 24 categories");
    let mut images = Vec::with_capacity(N_CATEGORIES * VIEWS_PER_CATEGORY * variants_per_view);
    for app in inventory {
        for view in 0..VIEWS_PER_CATEGORY {
            for variant in 0..variants_per_view {
                let (scale, jitter) = if variant == 0 {
                    (1.0, 0.0)
                } else {
                    let idx = ((app.category as usize * VIEWS_PER_CATEGORY + view) * variants_per_view
                        + variant) as u64;
                    let mut rng = derive_rng(seed, "test-variant", idx);
                    (
                        1.0 + rng.gen_range(-SCALE_JITTER..=SCALE_JITTER),
                        rng.gen_range(-ORIENTATION_JITTER_DEG..=ORIENTATION_JITTER_DEG),
                    )
                };
                let obj = SceneObject {
                    appearance: *app,
                    center: [(w as f32 - 1.0) / 2.0, (h as f32 - 1.0) / 2.0],
                    radius_px: TEST_RADIUS_FRAC * h as f32 * scale,
                    rotation: (view as f32 * 45.0 + jitter).to_radians(),
                    depth_order: 0,
                };
                images.push(TestImage {
                    category: app.category,
                    view,
                    variant,
                    image: render_frame(&[obj], w, h, Background::Clean).image,
                });
            }
        }
    }
    TestSet { images }
}

pub fn image_hash(img: &Image) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    (img.width(), img.height()).hash(&mut h);
    img.to_rgb8().hash(&mut h);
    h.finish()
}

/// Test images whose 8-bit content hash also occurs among `training`.
pub fn duplicates_of<'a>(test: &TestSet, training: impl IntoIterator<Item = &'a Image>) -> usize {
    let seen: HashSet<u64> = training.into_iter().map(image_hash).collect();
    test.images.iter().filter(|t| seen.contains(&image_hash(&t.image))).count()
}

/// Prepared test inputs that are byte-identical to some training input.
pub fn duplicate_inputs(test: &PreparedTestSet, training: &[crate::learner::PreparedEvent]) -> usize {
    let seen: HashSet<&[u8]> = training.iter().flat_map(|e| e.frames.iter().map(|f| f.as_slice())).collect();
    test.inputs.iter().filter(|x| seen.contains(x.as_slice())).count()
}

/// Test images resized to the model input and quantized like training frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTestSet {
    pub labels: Vec<Category>,
    pub inputs: Vec<Vec<u8>>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn prepare(&self, input_size: usize) -> PreparedTestSet {
        PreparedTestSet {
            labels: self.images.iter().map(|t| t.category).collect(),
            inputs: self
                .images
                .iter()
                .map(|t| {
                    let small = resize_bilinear(&t.image, input_size);
                    image_to_chw(&small).into_iter().map(quantize).collect()
                })
                .collect(),
        }
    }
}

/// Anything that labels a prepared test input.
pub trait Classifier {
    fn classify(&self, input: &[u8]) -> Category;
}

impl Classifier for Model {
    fn classify(&self, input: &[u8]) -> Category {
        let mut ws = Workspace::new(self.config());
        self.predict_u8(input, &mut ws)
    }
}

/// Fraction of test images classified correctly.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, test: &PreparedTestSet) -> f64 {
    if test.inputs.is_empty() {
        return 0.0;
    }
    let correct = test
        .inputs
        .iter()
        .zip(&test.labels)
        .filter(|(x, &y)| model.classify(x) == y)
        .count();
    correct as f64 / test.inputs.len() as f64
}

/// Faster path for a trained model: one workspace for the whole set.
pub fn model_accuracy(model: &Model, test: &PreparedTestSet) -> f64 {
    let mut ws = Workspace::new(model.config());
    let correct = test
        .inputs
        .iter()
        .zip(&test.labels)
        .filter(|(x, &y)| model.predict_u8(x, &mut ws) == y)
        .count();
    correct as f64 / test.inputs.len().max(1) as f64
}
