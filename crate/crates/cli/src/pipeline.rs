//! Stages and on-disk layout of a run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use egoword::corpus::{build_corpus, corpus_stats, prepare_corpus, Corpus, CorpusStats};
use egoword::events::{extract_naming_events, read_events_jsonl, write_events_jsonl, DEFAULT_WINDOW_S};
use egoword::evalx::{
    duplicate_inputs, render_test_set, run_study1, run_study2, run_study3, write_comparisons_csv,
    write_curves_csv, write_studies_csv, PreparedCorpus, PreparedTestSet, StudyContext, StudyReport,
};
use egoword::learner::PreparedEvent;
use egoword::scene::{export_session, make_inventory, simulate_session, SessionConfig, ViewProfile};
use egoword::seed::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{runtime_check, study1_checks, study2_checks, study3_checks, synth_checks, Check};
use crate::{CliError, RunConfig};

pub const CORPUS_FILE: &str = "corpus.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const STATS_FILE: &str = "stats.json";
const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Study1,
    Study2,
    Study3,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Synth, Stage::Study1, Stage::Study2, Stage::Study3];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Study1 => "study1",
            Stage::Study2 => "study2",
            Stage::Study3 => "study3",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }
}

/// Where every artifact of a run lives under the output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn corpus_dir(&self, view: ViewProfile) -> PathBuf {
        self.root.join("corpus").join(view.name())
    }

    pub fn study_json(&self, stage: Stage) -> PathBuf {
        self.root.join(format!("{}.json", stage.name()))
    }

    pub fn studies_csv(&self) -> PathBuf {
        self.root.join("studies.csv")
    }

    pub fn comparisons_csv(&self) -> PathBuf {
        self.root.join("comparisons.csv")
    }

    pub fn curves_csv(&self) -> PathBuf {
        self.root.join("curves.csv")
    }

    pub fn summary_md(&self) -> PathBuf {
        self.root.join("summary.md")
    }

    pub fn train_dir(&self, view: ViewProfile) -> PathBuf {
        self.root.join("train").join(view.name())
    }
}

/// Seeds of every subsystem, derived from the master seed by label.
pub fn corpus_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.master_seed, "corpus", 0)
}

pub fn appearance_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.master_seed, "appearance", 0)
}

pub fn testset_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.master_seed, "testset", 0)
}

pub fn studies_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.master_seed, "studies", 0)
}

pub fn session_template(cfg: &RunConfig) -> SessionConfig {
    SessionConfig {
        appearance_seed: appearance_seed(cfg),
        ..cfg.session.clone()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let bytes = serde_json::to_vec_pretty(value).expect("serializable");
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Inconsistent {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Sessions are stored by config only; they are re-simulated on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusFile {
    version: u32,
    view: ViewProfile,
    sessions: Vec<SessionConfig>,
    dropped: usize,
}

pub fn synthesize(cfg: &RunConfig, view: ViewProfile) -> Result<Corpus, CliError> {
    let min_events = match view {
        ViewProfile::Infant => cfg.corpus.infant_events,
        ViewProfile::Parent => cfg.corpus.parent_events,
    };
    Ok(build_corpus(&session_template(cfg), view, min_events, corpus_seed(cfg))?)
}

/// Writes the corpus into a scratch directory first and renames it into
/// place, so a failure never leaves a half-written corpus behind.
pub fn save_corpus(cfg: &RunConfig, layout: &OutputLayout, corpus: &Corpus) -> Result<CorpusStats, CliError> {
    let dir = layout.corpus_dir(corpus.view);
    let parent = dir.parent().expect("corpus dir has a parent");
    create_dir(parent)?;
    let scratch = parent.join(format!(".{}.partial", corpus.view.name()));
    if scratch.exists() {
        fs::remove_dir_all(&scratch).map_err(|e| CliError::io(&scratch, e))?;
    }
    let result = (|| {
        create_dir(&scratch)?;
        let stats = corpus_stats(corpus);
        write_json(
            &scratch.join(CORPUS_FILE),
            &CorpusFile {
                version: CORPUS_VERSION,
                view: corpus.view,
                sessions: corpus.sessions.iter().map(|s| s.config.clone()).collect(),
                dropped: corpus.dropped,
            },
        )?;
        write_events_jsonl(&corpus.events, &scratch.join(EVENTS_FILE))?;
        write_json(&scratch.join(STATS_FILE), &stats)?;
        if cfg.corpus.export_manifests {
            for (i, s) in corpus.sessions.iter().enumerate() {
                export_session(s, &scratch.join("sessions").join(format!("session_{i:03}")), cfg.corpus.export_frames)?;
            }
        }
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::rename(&scratch, &dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(stats)
    })();
    if result.is_err() && scratch.exists() {
        let _ = fs::remove_dir_all(&scratch);
    }
    result
}

/// Re-simulates the stored sessions and checks that they reproduce the
/// stored events.
pub fn load_corpus(layout: &OutputLayout, view: ViewProfile) -> Result<Corpus, CliError> {
    let dir = layout.corpus_dir(view);
    let file: CorpusFile = read_json(&dir.join(CORPUS_FILE))?;
    let events_path = dir.join(EVENTS_FILE);
    if !events_path.exists() {
        return Err(CliError::MissingArtifact(events_path));
    }
    let inconsistent = |reason: String| CliError::Inconsistent {
        path: dir.clone(),
        reason,
    };
    if file.version != CORPUS_VERSION || file.view != view {
        return Err(inconsistent("wrong version or view".into()));
    }
    let stored = read_events_jsonl(&events_path)?;
    let sessions = file
        .sessions
        .par_iter()
        .map(simulate_session)
        .collect::<Result<Vec<_>, _>>()?;
    let events: Vec<_> = sessions
        .iter()
        .enumerate()
        .flat_map(|(i, s)| extract_naming_events(s, i as u32, DEFAULT_WINDOW_S).events)
        .collect();
    let events: Vec<_> = events.into_iter().take(stored.len()).collect();
    if events != stored {
        return Err(inconsistent("sessions do not reproduce the stored events".into()));
    }
    Ok(Corpus {
        view,
        sessions,
        events,
        dropped: file.dropped,
    })
}

pub fn load_stats(layout: &OutputLayout, view: ViewProfile) -> Result<CorpusStats, CliError> {
    read_json(&layout.corpus_dir(view).join(STATS_FILE))
}

/// The canonical test set at model resolution.
pub fn test_set(cfg: &RunConfig) -> PreparedTestSet {
    render_test_set(
        &make_inventory(appearance_seed(cfg)),
        cfg.study.variants_per_view,
        cfg.session.frame_w,
        cfg.session.frame_h,
        testset_seed(cfg),
    )
    .prepare(cfg.model.input_size)
}

pub fn prepare(cfg: &RunConfig, corpus: &Corpus) -> Result<Vec<PreparedEvent>, CliError> {
    Ok(prepare_corpus(
        corpus,
        &cfg.acuity,
        cfg.model.input_size,
        cfg.train.frame_stride,
    )?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: Stage,
    pub completed: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub stages: Vec<StageStatus>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub elapsed_s: f64,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.stages.iter().all(|s| s.completed) && self.checks.iter().all(|c| c.passed)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::from("# egoword run summary\n\n## Stages\n\n");
        for s in &self.stages {
            let state = if s.completed { "completed" } else { "FAILED" };
            md.push_str(&format!("- {}: {state} ({:.1} s)", s.stage.name(), s.seconds));
            if let Some(e) = &s.error {
                md.push_str(&format!(": {e}"));
            }
            md.push('\n');
        }
        md.push_str("\n## Checks\n\n| check | result | detail |\n|---|---|---|\n");
        for c in &self.checks {
            let r = if c.passed { "PASS" } else { "FAIL" };
            md.push_str(&format!("| {} | {r} | {} |\n", c.name, c.detail));
        }
        if !self.notes.is_empty() {
            md.push_str("\n## Notes\n\n");
            for n in &self.notes {
                md.push_str(&format!("- {n}\n"));
            }
        }
        md.push_str(&format!("\nTotal wall time: {:.1} min\n", self.elapsed_s / 60.0));
        md
    }
}

/// Corpora, prepared inputs and the test set, loaded or built on first use.
struct Workbench<'a> {
    cfg: &'a RunConfig,
    layout: &'a OutputLayout,
    corpora: Vec<(Corpus, Vec<PreparedEvent>)>,
    test: Option<PreparedTestSet>,
}

impl<'a> Workbench<'a> {
    fn corpus(&mut self, view: ViewProfile) -> Result<usize, CliError> {
        if let Some(i) = self.corpora.iter().position(|(c, _)| c.view == view) {
            return Ok(i);
        }
        let corpus = load_corpus(self.layout, view)?;
        self.insert(corpus)
    }

    fn insert(&mut self, corpus: Corpus) -> Result<usize, CliError> {
        self.corpora.retain(|(c, _)| c.view != corpus.view);
        let prepared = prepare(self.cfg, &corpus)?;
        self.corpora.push((corpus, prepared));
        Ok(self.corpora.len() - 1)
    }

    fn test(&mut self) -> &PreparedTestSet {
        self.test.get_or_insert_with(|| test_set(self.cfg))
    }
}

fn run_stage(
    bench: &mut Workbench,
    stage: Stage,
    checks: &mut Vec<Check>,
    notes: &mut Vec<String>,
) -> Result<(), CliError> {
    let cfg = bench.cfg;
    let layout = bench.layout;
    match stage {
        Stage::Synth => {
            let mut stats = Vec::new();
            for view in [ViewProfile::Infant, ViewProfile::Parent] {
                let corpus = synthesize(cfg, view)?;
                stats.push(save_corpus(cfg, layout, &corpus)?);
                bench.insert(corpus)?;
            }
            for s in &stats {
                notes.push(format!(
                    "{} corpus: {} sessions, {:.1} min, {:.2} utterances/min, {:.2} referential/min, {} events ({} SA / {} DA, {} on-target), target-size median {:.2}%",
                    s.view.name(),
                    s.sessions,
                    s.minutes,
                    s.utterances_per_min,
                    s.referential_per_min,
                    s.events,
                    s.sustained,
                    s.distributed,
                    s.on_target,
                    100.0 * s.target_size_median
                ));
            }
            checks.extend(synth_checks(&stats.iter().collect::<Vec<_>>(), cfg.session.referential_rate_per_min));
        }
        Stage::Study1 | Stage::Study2 | Stage::Study3 => {
            let views: &[ViewProfile] = if stage == Stage::Study1 {
                &[ViewProfile::Infant, ViewProfile::Parent]
            } else {
                &[ViewProfile::Infant]
            };
            let idx = views
                .iter()
                .map(|&v| bench.corpus(v))
                .collect::<Result<Vec<_>, _>>()?;
            bench.test();
            let test = bench.test.as_ref().expect("test set built");
            let dups: usize = idx.iter().map(|&i| duplicate_inputs(test, &bench.corpora[i].1)).sum();
            if dups > 0 {
                return Err(CliError::Inconsistent {
                    path: layout.root.clone(),
                    reason: format!("{dups} test inputs duplicate training inputs"),
                });
            }
            let ctx = StudyContext {
                model: &cfg.model,
                train: &cfg.train,
                test,
                study: &cfg.study,
                master_seed: studies_seed(cfg),
            };
            let prepared: Vec<PreparedCorpus> = idx
                .iter()
                .map(|&i| PreparedCorpus {
                    view: bench.corpora[i].0.view,
                    events: &bench.corpora[i].0.events,
                    prepared: &bench.corpora[i].1,
                })
                .collect();
            let report = match stage {
                Stage::Study1 => run_study1(&ctx, &prepared[0], &prepared[1])?,
                Stage::Study2 => run_study2(&ctx, &prepared[0])?,
                _ => run_study3(&ctx, &prepared[0])?,
            };
            write_json(&layout.study_json(stage), &report)?;
            notes.extend(report.notes.iter().map(|n| format!("{}: {n}", stage.name())));
            notes.push(format!("{}: test set has {} images, none duplicating a training input", stage.name(), test.inputs.len()));
            checks.extend(match stage {
                Stage::Study1 => study1_checks(&report, &cfg.study.sizes, cfg.study.repeats),
                Stage::Study2 => study2_checks(&report, cfg.study.repeats),
                _ => study3_checks(&report, cfg.study.repeats),
            });
        }
    }
    Ok(())
}

/// Rewrites the CSV bundle from every study report present on disk.
pub fn write_csvs(layout: &OutputLayout) -> Result<(), CliError> {
    let mut reports: Vec<StudyReport> = Vec::new();
    for stage in [Stage::Study1, Stage::Study2, Stage::Study3] {
        let path = layout.study_json(stage);
        if path.exists() {
            reports.push(read_json(&path)?);
        }
    }
    let refs: Vec<&StudyReport> = reports.iter().collect();
    write_studies_csv(&refs, &layout.studies_csv())?;
    write_comparisons_csv(&refs, &layout.comparisons_csv())?;
    if let Some(s1) = reports.iter().find(|r| r.study == "study1") {
        write_curves_csv(s1, &layout.curves_csv())?;
    }
    Ok(())
}

/// Runs the requested stages in order. A failing stage stops the run; the
/// summary still records what completed and the error is returned with the
/// stage name.
pub fn run_stages(cfg: &RunConfig, stages: &[Stage]) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let layout = OutputLayout::new(&cfg.output_dir);
    create_dir(&layout.root)?;
    write_json(&layout.config(), cfg)?;
    let mut bench = Workbench {
        cfg,
        layout: &layout,
        corpora: Vec::new(),
        test: None,
    };
    let mut summary = RunSummary {
        stages: Vec::new(),
        checks: Vec::new(),
        notes: Vec::new(),
        elapsed_s: 0.0,
    };
    let mut failure = None;
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    for stage in ordered.iter().copied() {
        let t = Instant::now();
        let result = run_stage(&mut bench, stage, &mut summary.checks, &mut summary.notes);
        summary.stages.push(StageStatus {
            stage,
            completed: result.is_ok(),
            seconds: t.elapsed().as_secs_f64(),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
        if let Err(e) = result {
            failure = Some(CliError::Stage {
                stage: stage.name(),
                source: Box::new(e),
            });
            break;
        }
    }
    if ordered.iter().any(|s| *s != Stage::Synth) {
        write_csvs(&layout)?;
    }
    let elapsed = start.elapsed();
    if failure.is_none() && ordered == Stage::ALL {
        summary.checks.push(runtime_check(elapsed));
    }
    summary.elapsed_s = elapsed.as_secs_f64();
    fs::write(layout.summary_md(), summary.to_markdown()).map_err(|e| CliError::io(&layout.summary_md(), e))?;
    write_json(&layout.root.join("summary.json"), &summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}
