//! Toy-play session simulator: moving objects, a two-level gaze model
//! (object-level attention episodes made of ~3/s fixations), and timed
//! parent utterances.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::appearance::{make_inventory, Category, ObjectAppearance, N_CATEGORIES};
use super::render::{label_map, render_frame, Background, Rendered, SceneObject};
use crate::events::attended_from_labels;
use crate::seed::{derive_rng, derive_seed, Rng};

/// Minimum silence separating two utterances.
pub const MIN_SILENCE_MS: u64 = 400;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("session duration {0} s is below the 60 s minimum")]
    TooShort(f64),
    #[error("invalid session config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewProfile {
    Infant,
    Parent,
}

impl ViewProfile {
    pub fn name(self) -> &'static str {
        match self {
            ViewProfile::Infant => "infant",
            ViewProfile::Parent => "parent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub duration_s: f64,
    pub fps: f64,
    pub frame_w: usize,
    pub frame_h: usize,
    pub fov_h_deg: f64,
    pub n_objects_in_room: usize,
    pub objects_in_view_mean: f64,
    pub utterance_rate_per_min: f64,
    pub referential_rate_per_min: f64,
    pub view_profile: ViewProfile,
    pub sustain_bias: f64,
    pub follow_in_prob: f64,
    pub seed: u64,
    pub appearance_seed: u64,
    /// Resting sprite radius as a fraction of frame width.
    pub object_radius_frac: f64,
    /// Radius multiplier reached by an object while it is attended.
    pub close_up_zoom: f64,
    /// Multiplier on attention-episode durations.
    pub dwell_scale: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let base = Self {
            duration_s: 450.0,
            fps: 30.0,
            frame_w: 640,
            frame_h: 480,
            fov_h_deg: 70.0,
            n_objects_in_room: N_CATEGORIES,
            objects_in_view_mean: 0.0,
            utterance_rate_per_min: 15.51,
            referential_rate_per_min: 4.82,
            view_profile: ViewProfile::Infant,
            sustain_bias: 0.2,
            follow_in_prob: 0.95,
            seed: 0,
            appearance_seed: 0,
            object_radius_frac: 0.0,
            close_up_zoom: 0.0,
            dwell_scale: 0.0,
        };
        apply_view_profile(&base)
    }
}

impl SessionConfig {
    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    pub fn ppd(&self) -> f64 {
        self.frame_w as f64 / self.fov_h_deg
    }

    /// Gaze-to-object snap radius: 25 px at 640 px width, scaled with the
    /// frame so it stays ~2.7° of visual angle.
    pub fn snap_radius_px(&self) -> f32 {
        25.0 * self.frame_w as f32 / 640.0
    }

    pub fn frame_time_ms(&self, index: usize) -> f64 {
        index as f64 * 1000.0 / self.fps
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.duration_s < 60.0 {
            return Err(SessionError::TooShort(self.duration_s));
        }
        let invalid = |m: &str| Err(SessionError::Invalid(m.to_string()));
        let frames = self.fps * self.duration_s;
        if !(self.fps > 0.0) || (frames - frames.round()).abs() > 1e-6 {
            return invalid("fps x duration_s must be a whole number of frames");
        }
        if self.frame_w == 0 || self.frame_h == 0 {
            return invalid("frame dimensions must be positive");
        }
        if !(self.referential_rate_per_min > 0.0
            && self.referential_rate_per_min <= self.utterance_rate_per_min)
        {
            return invalid("need 0 < referential_rate_per_min <= utterance_rate_per_min");
        }
        // Mean utterance plus mandatory silence takes 2.15 s.
        if self.utterance_rate_per_min >= 60.0 / 2.15 {
            return invalid("utterance rate leaves no room for 400 ms silences");
        }
        if !(0.0..=1.0).contains(&self.sustain_bias) || !(0.0..=1.0).contains(&self.follow_in_prob)
        {
            return invalid("sustain_bias and follow_in_prob must lie in [0, 1]");
        }
        if self.n_objects_in_room < 2 || self.n_objects_in_room > N_CATEGORIES {
            return invalid("n_objects_in_room must lie in [2, 24]");
        }
        if !(self.objects_in_view_mean >= 1.0) {
            return invalid("objects_in_view_mean must be >= 1");
        }
        if !(self.object_radius_frac > 0.0 && self.close_up_zoom >= 1.0 && self.dwell_scale > 0.0)
        {
            return invalid("view parameters must be positive (zoom >= 1)");
        }
        if !(self.fov_h_deg > 0.0) {
            return invalid("fov_h_deg must be positive");
        }
        Ok(())
    }
}

/// Returns a copy with the camera-dependent parameters of the configured
/// profile filled in. Infant view: few objects, attended toys brought close.
/// Parent view: more, smaller objects and shorter dwells.
pub fn apply_view_profile(cfg: &SessionConfig) -> SessionConfig {
    let mut out = cfg.clone();
    match cfg.view_profile {
        ViewProfile::Infant => {
            out.objects_in_view_mean = 4.0;
            out.object_radius_frac = 0.105;
            out.close_up_zoom = 2.1;
            out.dwell_scale = 1.0;
        }
        ViewProfile::Parent => {
            out.objects_in_view_mean = 8.0;
            out.object_radius_frac = 0.08;
            out.close_up_zoom = 1.35;
            out.dwell_scale = 0.7;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub onset_ms: u64,
    pub offset_ms: u64,
    pub is_referential: bool,
    pub referent_category: Option<Category>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaze {
    pub x: f32,
    pub y: f32,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectTruth {
    pub category: Category,
    pub visible_size_fraction: f32,
    /// Index into the frame's object list; the mask is re-derived by
    /// rasterizing that list.
    pub mask_ref: u16,
}

/// One egocentric frame. Pixels are not stored; [`FrameRecord::render`]
/// reproduces them exactly from the object list and background seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub timestamp_ms: f64,
    pub gaze: Gaze,
    pub background: Background,
    pub objects: Vec<SceneObject>,
    pub object_truth: Vec<ObjectTruth>,
    pub attended_category: Option<Category>,
}

impl FrameRecord {
    pub fn render(&self, w: usize, h: usize) -> Rendered {
        render_frame(&self.objects, w, h, self.background)
    }

    pub fn visible_fraction_of(&self, category: Category) -> f32 {
        self.object_truth
            .iter()
            .filter(|t| t.category == category)
            .map(|t| t.visible_size_fraction)
            .sum()
    }
}

/// An object-level attention episode; gaze stays on one toy throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazeEpisode {
    pub start_frame: usize,
    pub end_frame: usize,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub config: SessionConfig,
    pub frames: Vec<FrameRecord>,
    pub utterances: Vec<Utterance>,
    pub episodes: Vec<GazeEpisode>,
    /// Frame index at which each fixation begins.
    pub fixation_onsets: Vec<usize>,
}

impl Session {
    pub fn inventory(&self) -> Vec<ObjectAppearance> {
        make_inventory(self.config.appearance_seed)
    }

    pub fn render_frame(&self, index: usize) -> Rendered {
        self.frames[index].render(self.config.frame_w, self.config.frame_h)
    }

    pub fn duration_min(&self) -> f64 {
        self.config.duration_s / 60.0
    }

    pub fn referential_count(&self) -> usize {
        self.utterances.iter().filter(|u| u.is_referential).count()
    }

    pub fn fixation_rate_hz(&self) -> f64 {
        self.fixation_onsets.len() as f64 / self.config.duration_s
    }
}

struct Toy {
    category: Category,
    anchor: [f64; 2],
    base_radius: f64,
    rotation: f64,
    spin: f64,
    jitter_freq: [f64; 2],
    jitter_phase: [f64; 2],
    closeness: f64,
}

impl Toy {
    fn spawn(category: Category, cfg: &SessionConfig, rng: &mut Rng) -> Self {
        let (w, h) = (cfg.frame_w as f64, cfg.frame_h as f64);
        let margin = 0.05 * w;
        let log_scale: f64 = rng.gen_range(-0.3..0.3);
        Self {
            category,
            anchor: [rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin)],
            base_radius: cfg.object_radius_frac * w * log_scale.exp(),
            rotation: rng.gen_range(0.0..std::f64::consts::TAU),
            spin: rng.gen_range(-0.6..0.6),
            jitter_freq: [rng.gen_range(0.3..1.0), rng.gen_range(0.3..1.0)],
            jitter_phase: [
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ],
            closeness: 1.0,
        }
    }

    fn pose(&self, cfg: &SessionConfig, t_s: f64) -> ([f64; 2], f64) {
        let w = cfg.frame_w as f64;
        let amp = 0.015 * w * self.closeness;
        let jx = amp * (std::f64::consts::TAU * self.jitter_freq[0] * t_s + self.jitter_phase[0]).sin();
        let jy = amp * (std::f64::consts::TAU * self.jitter_freq[1] * t_s + self.jitter_phase[1]).sin();
        let free = [self.anchor[0] + jx, self.anchor[1] + jy];
        let pull = if cfg.close_up_zoom > 1.01 {
            0.55 * (self.closeness - 1.0) / (cfg.close_up_zoom - 1.0)
        } else {
            0.0
        };
        let hold = [0.5 * w + jx, 0.62 * cfg.frame_h as f64 + jy];
        let center = [
            free[0] + (hold[0] - free[0]) * pull,
            free[1] + (hold[1] - free[1]) * pull,
        ];
        (center, self.base_radius * self.closeness)
    }
}

/// Point inside the shape, in sprite-local units, away from the rim.
fn fixation_offset(appearance: &ObjectAppearance, rng: &mut Rng) -> [f32; 2] {
    for _ in 0..64 {
        let u: f32 = rng.gen_range(-0.7..0.7);
        let v: f32 = rng.gen_range(-0.7..0.7);
        if appearance.shape.contains(u, v) {
            return [u, v];
        }
    }
    [0.0, 0.0]
}

fn episode_frames(cfg: &SessionConfig, rng: &mut Rng) -> usize {
    let secs = if rng.gen_bool(cfg.sustain_bias) {
        rng.gen_range(2.0..5.0)
    } else {
        rng.gen_range(0.3..1.2)
    } * cfg.dwell_scale;
    ((secs * cfg.fps).round() as usize).max(1)
}

fn view_size(cfg: &SessionConfig, rng: &mut Rng) -> usize {
    let jitter: f64 = rng.gen_range(-1.5..1.5);
    ((cfg.objects_in_view_mean + jitter).round() as usize).clamp(1, cfg.n_objects_in_room)
}

pub fn simulate_session(cfg: &SessionConfig) -> Result<Session, SessionError> {
    cfg.validate()?;
    let inventory = make_inventory(cfg.appearance_seed);
    let n_frames = cfg.frame_count();
    let (w, h) = (cfg.frame_w, cfg.frame_h);
    let snap = cfg.snap_radius_px();

    let mut scene_rng = derive_rng(cfg.seed, "scene", 0);
    let mut gaze_rng = derive_rng(cfg.seed, "gaze", 0);
    let room: Vec<Category> = (0..cfg.n_objects_in_room as Category).collect();

    let mut in_view: Vec<Toy> = {
        let k = view_size(cfg, &mut scene_rng);
        room.choose_multiple(&mut scene_rng, k)
            .map(|&c| Toy::spawn(c, cfg, &mut scene_rng))
            .collect()
    };
    let mut background_seed = derive_seed(cfg.seed, "floor", 0);

    let mut frames = Vec::with_capacity(n_frames);
    let mut episodes: Vec<GazeEpisode> = Vec::new();
    let mut fixation_onsets = Vec::new();

    let mut attended: usize = 0;
    let mut episode_end = 0usize;
    let mut fixation_end = 0usize;
    let mut offset = [0.0f32; 2];
    let dt = 1.0 / cfg.fps;
    let closeness_rate = 1.0 - (-dt / 0.25).exp();
    let walk_sigma = 0.02 * w as f64 * dt.sqrt();

    for i in 0..n_frames {
        if i == episode_end {
            // Head turns only happen between attention episodes.
            if i > 0 && scene_rng.gen_bool(0.3) {
                let target_k = view_size(cfg, &mut scene_rng);
                in_view.retain(|_| !scene_rng.gen_bool(0.5));
                in_view.truncate(target_k);
                while in_view.len() < target_k {
                    let free: Vec<Category> = room
                        .iter()
                        .copied()
                        .filter(|c| in_view.iter().all(|t| t.category != *c))
                        .collect();
                    let c = *free.choose(&mut scene_rng).expect("room larger than view");
                    in_view.push(Toy::spawn(c, cfg, &mut scene_rng));
                }
                background_seed = derive_seed(cfg.seed, "floor", i as u64);
            }
            let previous = episodes.last().map(|e| e.category);
            let candidates: Vec<usize> = (0..in_view.len())
                .filter(|&j| Some(in_view[j].category) != previous || in_view.len() == 1)
                .collect();
            attended = *candidates.choose(&mut gaze_rng).expect("non-empty view");
            let len = episode_frames(cfg, &mut gaze_rng);
            episode_end = (i + len).min(n_frames);
            episodes.push(GazeEpisode {
                start_frame: i,
                end_frame: episode_end,
                category: in_view[attended].category,
            });
            fixation_end = i;
        }
        if i == fixation_end {
            let secs: f64 = gaze_rng.gen_range(0.15..0.52);
            fixation_end = (i + ((secs * cfg.fps).round() as usize).max(1)).min(episode_end);
            offset = fixation_offset(&inventory[in_view[attended].category as usize], &mut gaze_rng);
            fixation_onsets.push(i);
        }

        let t_s = i as f64 * dt;
        for (j, toy) in in_view.iter_mut().enumerate() {
            let goal = if j == attended { cfg.close_up_zoom } else { 1.0 };
            toy.closeness += (goal - toy.closeness) * closeness_rate;
            toy.rotation += toy.spin * dt;
            toy.anchor[0] = (toy.anchor[0] + walk_sigma * gaussian(&mut scene_rng)).clamp(0.0, w as f64);
            toy.anchor[1] = (toy.anchor[1] + walk_sigma * gaussian(&mut scene_rng)).clamp(0.0, h as f64);
        }

        // Attended toy on top, the rest stacked by apparent size.
        let mut rank: Vec<usize> = (0..in_view.len()).collect();
        rank.sort_by(|&a, &b| {
            let ra = in_view[a].base_radius * in_view[a].closeness;
            let rb = in_view[b].base_radius * in_view[b].closeness;
            ra.total_cmp(&rb).then(in_view[a].category.cmp(&in_view[b].category))
        });
        let mut objects = Vec::with_capacity(in_view.len());
        for (j, toy) in in_view.iter().enumerate() {
            let (center, radius) = toy.pose(cfg, t_s);
            let depth = if j == attended {
                in_view.len() as i32
            } else {
                rank.iter().position(|&r| r == j).unwrap() as i32
            };
            objects.push(SceneObject {
                appearance: inventory[toy.category as usize],
                center: [center[0] as f32, center[1] as f32],
                radius_px: radius as f32,
                rotation: toy.rotation as f32,
                depth_order: depth,
            });
        }

        let focus = &objects[attended];
        let (sin, cos) = focus.rotation.sin_cos();
        let gx = focus.center[0] + (offset[0] * cos - offset[1] * sin) * focus.radius_px;
        let gy = focus.center[1] + (offset[0] * sin + offset[1] * cos) * focus.radius_px;
        let gaze = Gaze {
            x: gx.clamp(0.0, (w - 1) as f32),
            y: gy.clamp(0.0, (h - 1) as f32),
            valid: true,
        };

        let labels = label_map(&objects, w, h);
        let object_truth = objects
            .iter()
            .enumerate()
            .map(|(j, o)| ObjectTruth {
                category: o.appearance.category,
                visible_size_fraction: labels.visible_fraction(j),
                mask_ref: j as u16,
            })
            .collect();
        let attended_category = attended_from_labels(&labels, &objects, gaze, snap);

        frames.push(FrameRecord {
            timestamp_ms: cfg.frame_time_ms(i),
            gaze,
            background: Background::Clutter {
                seed: background_seed,
            },
            objects,
            object_truth,
            attended_category,
        });
    }

    let utterances = sample_utterances(cfg, &episodes);
    Ok(Session {
        config: cfg.clone(),
        frames,
        utterances,
        episodes,
        fixation_onsets,
    })
}

fn gaussian(rng: &mut Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Renewal process over speech: durations U[1.5 s, 2.0 s], then at least
/// 400 ms of silence plus an exponential pause sized so the long-run onset
/// rate equals the configured utterance rate.
fn sample_utterances(cfg: &SessionConfig, episodes: &[GazeEpisode]) -> Vec<Utterance> {
    let mut rng = derive_rng(cfg.seed, "speech", 0);
    let total_ms = (cfg.duration_s * 1000.0).round() as u64;
    let mean_cycle_s = 60.0 / cfg.utterance_rate_per_min;
    let pause_mean_s = mean_cycle_s - 1.75 - MIN_SILENCE_MS as f64 / 1000.0;
    let p_ref = cfg.referential_rate_per_min / cfg.utterance_rate_per_min;

    let exp_ms = |rng: &mut Rng| -> u64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        (-u.ln() * pause_mean_s * 1000.0).round() as u64
    };

    let mut out = Vec::new();
    // Start mid-pause so the first onset is not pinned to t = 0.
    let mut t = exp_ms(&mut rng);
    loop {
        let dur = rng.gen_range(1500..=2000u64);
        if t + dur > total_ms {
            break;
        }
        let is_referential = rng.gen_bool(p_ref);
        let referent_category = is_referential.then(|| {
            let follow = rng.gen_bool(cfg.follow_in_prob);
            let other = rng.gen_range(0..cfg.n_objects_in_room) as Category;
            if follow {
                let frame = ((t as f64) * cfg.fps / 1000.0).ceil() as usize;
                episodes
                    .iter()
                    .find(|e| e.start_frame <= frame && frame < e.end_frame)
                    .map_or(other, |e| e.category)
            } else {
                other
            }
        });
        out.push(Utterance {
            onset_ms: t,
            offset_ms: t + dur,
            is_referential,
            referent_category,
        });
        t += dur + MIN_SILENCE_MS + exp_ms(&mut rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SessionConfig {
        SessionConfig {
            duration_s: 420.0,
            frame_w: 160,
            frame_h: 120,
            seed,
            ..SessionConfig::default()
        }
    }

    #[test]
    fn rejects_short_sessions() {
        let cfg = SessionConfig {
            duration_s: 30.0,
            ..small(0)
        };
        assert_eq!(simulate_session(&cfg).unwrap_err(), SessionError::TooShort(30.0));
    }

    #[test]
    fn rejects_inconsistent_rates() {
        let cfg = SessionConfig {
            referential_rate_per_min: 20.0,
            ..small(0)
        };
        assert!(matches!(simulate_session(&cfg), Err(SessionError::Invalid(_))));
    }

    #[test]
    fn utterance_count_tracks_rate() {
        let s = simulate_session(&small(3)).unwrap();
        let n = s.utterances.len() as f64;
        assert!((15.51 * 7.0 * 0.8..=15.51 * 7.0 * 1.2).contains(&n), "{n}");
    }

    #[test]
    fn utterances_respect_silence_and_bounds() {
        let s = simulate_session(&small(5)).unwrap();
        for pair in s.utterances.windows(2) {
            assert!(pair[1].onset_ms >= pair[0].offset_ms + MIN_SILENCE_MS);
        }
        for u in &s.utterances {
            assert!(u.offset_ms > u.onset_ms && u.offset_ms <= 420_000);
            assert_eq!(u.is_referential, u.referent_category.is_some());
        }
    }

    #[test]
    fn frames_and_timestamps() {
        let s = simulate_session(&small(1)).unwrap();
        assert_eq!(s.frames.len(), 420 * 30);
        assert!(s.frames.windows(2).all(|f| f[1].timestamp_ms > f[0].timestamp_ms));
        for f in &s.frames {
            let total: f32 = f.object_truth.iter().map(|t| t.visible_size_fraction).sum();
            assert!(total <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_session(&small(9)).unwrap();
        let b = simulate_session(&small(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn full_sustain_bias_gives_long_episodes() {
        let cfg = SessionConfig {
            sustain_bias: 1.0,
            ..small(2)
        };
        let s = simulate_session(&cfg).unwrap();
        let window = (3.0 * cfg.fps) as usize;
        let last = s.episodes.len() - 1;
        for (k, e) in s.episodes.iter().enumerate() {
            if k == last {
                continue; // truncated by session end
            }
            assert!((e.end_frame - e.start_frame) * 10 >= window * 6, "{e:?}");
        }
    }

    #[test]
    fn fixation_rate_is_plausible() {
        let s = simulate_session(&small(4)).unwrap();
        let rate = s.fixation_rate_hz();
        assert!((2.0..=4.0).contains(&rate), "{rate}");
    }

    #[test]
    fn view_profile_is_idempotent_and_pure() {
        let cfg = SessionConfig {
            view_profile: ViewProfile::Parent,
            ..SessionConfig::default()
        };
        let once = apply_view_profile(&cfg);
        assert_eq!(apply_view_profile(&once), once);
        assert_eq!(cfg.view_profile, ViewProfile::Parent);
        assert!(once.objects_in_view_mean > apply_view_profile(&small(0)).objects_in_view_mean);
    }
}
