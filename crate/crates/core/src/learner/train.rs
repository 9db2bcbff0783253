use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{prepare_event, PreparedEvent};
use super::net::{log_sum_exp, Workspace};
use super::{LearnerError, Model};
use crate::acuity::AcuityParams;
use crate::events::NamingEvent;
use crate::scene::Session;
use crate::seed::derive_rng;

/// Fraction of training events held out to drive the plateau schedule.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub lr_init: f64,
    pub lr_factor: f64,
    pub lr_final: f64,
    pub plateau_patience: usize,
    /// Use every n-th frame of each event window.
    pub frame_stride: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            momentum: 0.9,
            lr_init: 0.01,
            lr_factor: 10.0,
            lr_final: 1e-4,
            plateau_patience: 3,
            frame_stride: 18,
            max_epochs: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidConfig(m.to_string()));
        if !(self.lr_final > 0.0 && self.lr_final < self.lr_init) {
            return bad("need 0 < lr_final < lr_init");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.lr_factor > 1.0) {
            return bad("lr_factor must be > 1");
        }
        if self.frame_stride == 0 || self.max_epochs == 0 || self.plateau_patience == 0 {
            return bad("frame_stride, max_epochs and plateau_patience must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LrFloor,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Every learning rate the schedule took, in order.
    pub lr_trajectory: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Reduce-on-plateau: divide the rate by `factor` after `patience` epochs
/// without a new best loss; stop once the rate reaches `floor`.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    pub lr: f64,
    factor: f64,
    floor: f64,
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStep {
    Continue,
    Decayed,
    Stop,
}

impl LrSchedule {
    pub fn new(tcfg: &TrainConfig) -> Self {
        Self {
            lr: tcfg.lr_init,
            factor: tcfg.lr_factor,
            floor: tcfg.lr_final,
            patience: tcfg.plateau_patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> ScheduleStep {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            return ScheduleStep::Continue;
        }
        self.bad_epochs += 1;
        if self.bad_epochs < self.patience {
            return ScheduleStep::Continue;
        }
        self.bad_epochs = 0;
        self.lr /= self.factor;
        // Relative slack absorbs rounding in repeated division.
        if self.lr <= self.floor * (1.0 + 1e-9) {
            ScheduleStep::Stop
        } else {
            ScheduleStep::Decayed
        }
    }
}

/// Foveates and resizes every `frame_stride`-th frame of each event, then
/// trains. `sessions[i]` must be the session with id `i`.
pub fn train(
    model: Model,
    events: &[NamingEvent],
    sessions: &[Session],
    tcfg: &TrainConfig,
    acuity: &AcuityParams,
) -> Result<(Model, History), LearnerError> {
    if events.is_empty() {
        return Err(LearnerError::EmptyEvents);
    }
    let input_size = model.config().input_size;
    let prepared = events
        .iter()
        .map(|e| {
            let s = sessions
                .get(e.session_id as usize)
                .ok_or(LearnerError::MissingSession(e.session_id))?;
            prepare_event(e, s, acuity, input_size, tcfg.frame_stride)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&PreparedEvent> = prepared.iter().collect();
    train_prepared(model, &refs, tcfg)
}

/// Training on already prepared events. A tenth of the events (at least
/// one when there are ten or more) is held out for the plateau signal;
/// with fewer events the training loss is used instead.
pub fn train_prepared(
    mut model: Model,
    events: &[&PreparedEvent],
    tcfg: &TrainConfig,
) -> Result<(Model, History), LearnerError> {
    tcfg.validate()?;
    if events.is_empty() || events.iter().all(|e| e.frames.is_empty()) {
        return Err(LearnerError::EmptyEvents);
    }
    let input_len = model.config().input_len();
    if let Some(e) = events.iter().flat_map(|e| &e.frames).find(|f| f.len() != input_len) {
        return Err(LearnerError::ShapeMismatch(format!(
            "prepared frame has {} values, model expects {input_len}",
            e.len()
        )));
    }

    let mut order: Vec<usize> = (0..events.len()).collect();
    order.shuffle(&mut derive_rng(tcfg.seed, "split", 0));
    let n_val = (events.len() as f64 * VALIDATION_FRACTION).floor() as usize;
    let (val_ids, train_ids) = order.split_at(n_val);
    let pairs = |ids: &[usize]| -> Vec<(usize, usize)> {
        ids.iter()
            .flat_map(|&e| (0..events[e].frames.len()).map(move |f| (e, f)))
            .collect()
    };
    let mut train_pairs = pairs(train_ids);
    let val_pairs = pairs(val_ids);
    if train_pairs.is_empty() {
        return Err(LearnerError::EmptyEvents);
    }

    let (mean, std) = channel_stats(events, &train_pairs);
    model.input_mean = mean;
    model.input_scale = std.map(|s| if s > 1e-3 { 1.0 / s } else { 1.0 });
    model.current_lr = tcfg.lr_init;
    let mut schedule = LrSchedule::new(tcfg);
    let mut history = History {
        epochs: Vec::new(),
        lr_trajectory: vec![tcfg.lr_init],
        stop_reason: StopReason::MaxEpochs,
    };
    let mut ws = Workspace::new(model.config());
    let mut grads = model.net.zeros_like();
    let mut x = Vec::with_capacity(input_len);

    for epoch in 1..=tcfg.max_epochs {
        train_pairs.shuffle(&mut derive_rng(tcfg.seed, "epoch", epoch as u64));
        let mut total = 0.0;
        for batch in train_pairs.chunks(tcfg.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            let scale = 1.0 / batch.len() as f32;
            for &(e, f) in batch {
                model.normalize_u8(&events[e].frames[f], &mut x);
                let label = events[e].target as usize;
                total += model.net.sample_loss_and_grad(&x, label, scale, &mut ws, &mut grads);
            }
            model.sgd_step(&grads, schedule.lr, tcfg.momentum)?;
        }
        if !model.all_finite() {
            return Err(LearnerError::NonFinite(epoch));
        }
        let train_loss = total / train_pairs.len() as f64;
        let val_loss = if val_pairs.is_empty() {
            train_loss
        } else {
            mean_loss(&model, events, &val_pairs, &mut ws, &mut x)
        };
        model.epoch = epoch;
        history.epochs.push(EpochRecord {
            epoch,
            lr: schedule.lr,
            train_loss,
            val_loss,
        });
        match schedule.observe(val_loss) {
            ScheduleStep::Continue => {}
            ScheduleStep::Decayed => history.lr_trajectory.push(schedule.lr),
            ScheduleStep::Stop => {
                history.lr_trajectory.push(schedule.lr);
                history.stop_reason = StopReason::LrFloor;
                model.current_lr = schedule.lr;
                break;
            }
        }
        model.current_lr = schedule.lr;
    }
    Ok((model, history))
}

/// Per-channel mean and standard deviation of `[0, 1]` pixels.
fn channel_stats(events: &[&PreparedEvent], pairs: &[(usize, usize)]) -> ([f32; 3], [f32; 3]) {
    let mut sums = [0u64; 3];
    let mut squares = [0u64; 3];
    let mut count = 0u64;
    for &(e, f) in pairs {
        let frame = &events[e].frames[f];
        let plane = frame.len() / 3;
        for (c, ch) in frame.chunks_exact(plane).enumerate() {
            for &b in ch {
                sums[c] += b as u64;
                squares[c] += (b as u64) * (b as u64);
            }
        }
        count += plane as u64;
    }
    let n = count as f64;
    let mean = sums.map(|s| s as f64 / n);
    let mut std = [0f32; 3];
    for c in 0..3 {
        let var = (squares[c] as f64 / n - mean[c] * mean[c]).max(0.0);
        std[c] = (var.sqrt() / 255.0) as f32;
    }
    (mean.map(|m| (m / 255.0) as f32), std)
}

fn mean_loss(
    model: &Model,
    events: &[&PreparedEvent],
    pairs: &[(usize, usize)],
    ws: &mut Workspace<f32>,
    x: &mut Vec<f32>,
) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|&(e, f)| {
            model.normalize_u8(&events[e].frames[f], x);
            let logits = model.logits(x, ws);
            log_sum_exp(&logits) - logits[events[e].target as usize]
        })
        .sum();
    total / pairs.len() as f64
}

pub fn write_history_csv(history: &History, path: &Path) -> Result<(), LearnerError> {
    let io = |source| LearnerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "epoch,lr,train_loss,val_loss").map_err(io)?;
    for r in &history.epochs {
        writeln!(out, "{},{},{},{}", r.epoch, r.lr, r.train_loss, r.val_loss).map_err(io)?;
    }
    out.flush().map_err(io)
}
