use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{compare_named, mean, sd, se, Comparison};
use super::testset::{model_accuracy, PreparedTestSet};
use super::EvalError;
use crate::events::{median_split, NamingEvent};
use crate::learner::{train_prepared, Model, ModelConfig, PreparedEvent, TrainConfig};
use crate::scene::ViewProfile;
use crate::seed::derive_seed;

/// Smallest training set a Study 2 or Study 3 condition may use.
pub const MIN_CONDITION_EVENTS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    /// Size/orientation variants per (category, view) in the test set.
    pub variants_per_view: usize,
    pub n_boot: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200, 400],
            repeats: 10,
            variants_per_view: 2,
            n_boot: 10_000,
        }
    }
}

/// Shared inputs of every training run.
pub struct StudyContext<'a> {
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub test: &'a PreparedTestSet,
    pub study: &'a StudyConfig,
    pub master_seed: u64,
}

/// A corpus' event metadata with the matching prepared inputs.
pub struct PreparedCorpus<'a> {
    pub view: ViewProfile,
    pub events: &'a [NamingEvent],
    pub prepared: &'a [PreparedEvent],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    /// Training-set size (events) per run.
    pub n_events: usize,
}

pub fn condition_result(name: &str, accuracies: Vec<f64>, n_events: usize) -> ConditionResult {
    ConditionResult {
        name: name.to_string(),
        mean: mean(&accuracies),
        sd: sd(&accuracies),
        se: se(&accuracies),
        accuracies,
        n_events,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub view: ViewProfile,
    pub size: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub conditions: Vec<ConditionResult>,
    pub comparisons: Vec<Comparison>,
    pub curves: Vec<CurvePoint>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }
}

/// `k` of `pool` without replacement, sorted; the whole pool when `k`
/// equals its size.
pub fn subsample(pool: &[usize], k: usize, seed: u64) -> Vec<usize> {
    assert!(k <= pool.len());
    let mut out: Vec<usize> = if k == pool.len() {
        pool.to_vec()
    } else {
        let mut rng = crate::seed::rng_from(seed);
        index::sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
    };
    out.sort_unstable();
    out
}

struct Job<'c> {
    condition: usize,
    repeat: usize,
    corpus: &'c PreparedCorpus<'c>,
    events: Vec<usize>,
}

/// Trains and scores every job. Run `r` of every condition shares the same
/// initialization and shuffling seeds, which is what pairs the runs.
fn run_jobs(ctx: &StudyContext, jobs: Vec<Job>, names: &[String]) -> Result<Vec<ConditionResult>, EvalError> {
    let scores = jobs
        .par_iter()
        .map(|job| {
            let model = Model::new(&ModelConfig {
                init_seed: derive_seed(ctx.master_seed, "init", job.repeat as u64),
                ..ctx.model.clone()
            })?;
            let tcfg = TrainConfig {
                seed: derive_seed(ctx.master_seed, "train", job.repeat as u64),
                ..ctx.train.clone()
            };
            let data: Vec<&PreparedEvent> = job.events.iter().map(|&i| &job.corpus.prepared[i]).collect();
            let (model, _) = train_prepared(model, &data, &tcfg)?;
            Ok(model_accuracy(&model, ctx.test))
        })
        .collect::<Result<Vec<f64>, EvalError>>()?;
    let mut per: Vec<(Vec<(usize, f64)>, usize)> = vec![(Vec::new(), 0); names.len()];
    for (job, acc) in jobs.iter().zip(scores) {
        per[job.condition].0.push((job.repeat, acc));
        per[job.condition].1 = job.events.len();
    }
    Ok(names
        .iter()
        .zip(per)
        .map(|(name, (mut runs, n))| {
            runs.sort_by_key(|r| r.0);
            condition_result(name, runs.into_iter().map(|r| r.1).collect(), n)
        })
        .collect())
}

fn compare_pairs(
    ctx: &StudyContext,
    study: &str,
    conditions: &[ConditionResult],
    pairs: &[(String, String)],
) -> Result<Vec<Comparison>, EvalError> {
    pairs
        .iter()
        .map(|(a, b)| {
            let find = |n: &str| conditions.iter().find(|c| c.name == n).expect("known condition");
            let seed = derive_seed(ctx.master_seed, &format!("{study}/bootstrap/{a}>{b}"), 0);
            compare_named(a, &find(a).accuracies, b, &find(b).accuracies, ctx.study.n_boot, seed)
        })
        .collect()
}

fn subsample_seed(ctx: &StudyContext, study: &str, condition: &str, repeat: usize) -> u64 {
    derive_seed(ctx.master_seed, &format!("{study}/{condition}"), repeat as u64)
}

/// Infant versus parent view across training-set sizes; a fresh subsample
/// per repeat.
pub fn run_study1(
    ctx: &StudyContext,
    infant: &PreparedCorpus,
    parent: &PreparedCorpus,
) -> Result<StudyReport, EvalError> {
    let mut names = Vec::new();
    let mut jobs = Vec::new();
    let mut sizes = ctx.study.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    for corpus in [infant, parent] {
        for &size in &sizes {
            if size > corpus.events.len() {
                return Err(EvalError::SizeExceedsCorpus {
                    view: corpus.view.name().to_string(),
                    size,
                    available: corpus.events.len(),
                });
            }
            if size == 0 {
                return Err(EvalError::Empty("study sizes must be positive".into()));
            }
            let name = format!("{}_{size}", corpus.view.name());
            let pool: Vec<usize> = (0..corpus.events.len()).collect();
            for r in 0..ctx.study.repeats {
                jobs.push(Job {
                    condition: names.len(),
                    repeat: r,
                    corpus,
                    events: subsample(&pool, size, subsample_seed(ctx, "study1", &name, r)),
                });
            }
            names.push(name);
        }
    }
    let conditions = run_jobs(ctx, jobs, &names)?;
    let pairs: Vec<(String, String)> = sizes
        .iter()
        .map(|s| (format!("infant_{s}"), format!("parent_{s}")))
        .collect();
    let comparisons = compare_pairs(ctx, "study1", &conditions, &pairs)?;
    let curves = conditions
        .iter()
        .zip(
            [ViewProfile::Infant, ViewProfile::Parent]
                .iter()
                .flat_map(|&v| sizes.iter().map(move |&s| (v, s))),
        )
        .map(|(c, (view, size))| CurvePoint {
            view,
            size,
            mean: c.mean,
            sd: c.sd,
        })
        .collect();
    Ok(StudyReport {
        study: "study1".into(),
        conditions,
        comparisons,
        curves,
        notes: vec![],
    })
}

fn check_min(name: &str, n: usize) -> Result<(), EvalError> {
    if n < MIN_CONDITION_EVENTS {
        return Err(EvalError::TooFewEvents {
            condition: name.to_string(),
            n,
        });
    }
    Ok(())
}

/// Sustained versus distributed attention (each side subsampled to the
/// smaller count), and on-target versus on-non-target within sustained
/// attention (counts matched exactly the same way).
pub fn run_study2(ctx: &StudyContext, corpus: &PreparedCorpus) -> Result<StudyReport, EvalError> {
    let ev = corpus.events;
    let sa: Vec<usize> = (0..ev.len()).filter(|&i| ev[i].is_sustained()).collect();
    let da: Vec<usize> = (0..ev.len()).filter(|&i| !ev[i].is_sustained()).collect();
    let on: Vec<usize> = sa.iter().copied().filter(|&i| ev[i].on_target).collect();
    let off: Vec<usize> = sa.iter().copied().filter(|&i| !ev[i].on_target).collect();
    let m_att = sa.len().min(da.len());
    let m_tgt = on.len().min(off.len());
    let conds: [(&str, &[usize], usize); 4] = [
        ("sa", &sa, m_att),
        ("da", &da, m_att),
        ("on_target", &on, m_tgt),
        ("on_non_target", &off, m_tgt),
    ];
    for (name, _, k) in &conds {
        check_min(name, *k)?;
    }
    let mut names = Vec::new();
    let mut jobs = Vec::new();
    for (name, pool, k) in conds {
        for r in 0..ctx.study.repeats {
            jobs.push(Job {
                condition: names.len(),
                repeat: r,
                corpus,
                events: subsample(pool, k, subsample_seed(ctx, "study2", name, r)),
            });
        }
        names.push(name.to_string());
    }
    let conditions = run_jobs(ctx, jobs, &names)?;
    let pairs = [("sa", "da"), ("on_target", "on_non_target")].map(|(a, b)| (a.to_string(), b.to_string()));
    let comparisons = compare_pairs(ctx, "study2", &conditions, &pairs)?;
    Ok(StudyReport {
        study: "study2".into(),
        conditions,
        comparisons,
        curves: vec![],
        notes: vec![
            format!(
                "sa/da matched to {m_att} events each (from {} sa, {} da)",
                sa.len(),
                da.len()
            ),
            format!(
                "on_target/on_non_target matched to {m_tgt} events each (from {} on-target, {} on-non-target)",
                on.len(),
                off.len()
            ),
        ],
    })
}

fn split_pool(name: &str, ev: &[NamingEvent], pool: &[usize]) -> Result<(Vec<usize>, Vec<usize>, f64), EvalError> {
    if pool.is_empty() {
        return Err(EvalError::TooFewEvents {
            condition: name.to_string(),
            n: 0,
        });
    }
    let sizes: Vec<f32> = pool.iter().map(|&i| ev[i].target_size_fraction).collect();
    let split = median_split(&sizes).map_err(|_| EvalError::DegenerateSplit(name.to_string()))?;
    if split.large.is_empty() || split.small.is_empty() {
        return Err(EvalError::DegenerateSplit(name.to_string()));
    }
    Ok((
        split.large.iter().map(|&k| pool[k]).collect(),
        split.small.iter().map(|&k| pool[k]).collect(),
        split.median,
    ))
}

/// Median split on target size, overall and separately within sustained
/// and distributed attention, each stratum with its own median. All events
/// of a side are used in every run; repeats differ in their seeds.
pub fn run_study3(ctx: &StudyContext, corpus: &PreparedCorpus) -> Result<StudyReport, EvalError> {
    let ev = corpus.events;
    let all: Vec<usize> = (0..ev.len()).collect();
    let sa: Vec<usize> = all.iter().copied().filter(|&i| ev[i].is_sustained()).collect();
    let da: Vec<usize> = all.iter().copied().filter(|&i| !ev[i].is_sustained()).collect();
    let mut names = Vec::new();
    let mut jobs = Vec::new();
    let mut notes = Vec::new();
    let mut pairs = Vec::new();
    for (prefix, pool) in [("", &all), ("sa_", &sa), ("da_", &da)] {
        let stratum = if prefix.is_empty() { "overall" } else { &prefix[..2] };
        let (large, small, median) = split_pool(stratum, ev, pool)?;
        notes.push(format!(
            "{stratum}: median target size {:.4}, {} large, {} small",
            median,
            large.len(),
            small.len()
        ));
        for (side, set) in [("large", large), ("small", small)] {
            let name = format!("{prefix}{side}");
            check_min(&name, set.len())?;
            for r in 0..ctx.study.repeats {
                jobs.push(Job {
                    condition: names.len(),
                    repeat: r,
                    corpus,
                    events: set.clone(),
                });
            }
            names.push(name);
        }
        pairs.push((format!("{prefix}large"), format!("{prefix}small")));
    }
    let conditions = run_jobs(ctx, jobs, &names)?;
    let comparisons = compare_pairs(ctx, "study3", &conditions, &pairs)?;
    Ok(StudyReport {
        study: "study3".into(),
        conditions,
        comparisons,
        curves: vec![],
        notes,
    })
}
