use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egoword::acuity::{foveate, AcuityParams};
use egoword::events::{extract_naming_events, write_events_jsonl, DEFAULT_WINDOW_S};
use egoword::evalx::{model_accuracy, subsample};
use egoword::learner::{
    load_checkpoint, save_checkpoint, train_prepared, write_history_csv, Model, PreparedEvent,
};
use egoword::scene::{import_session, FrameExport, ViewProfile};
use egoword::seed::derive_seed;
use egoword::Image;
use egoword_cli::pipeline::{self, load_corpus, prepare, run_stages, test_set, OutputLayout};
use egoword_cli::{CliError, RunConfig, RunSummary, Stage};
use serde_json::json;

#[derive(Parser)]
#[command(name = "egoword", version, about = "Egocentric word-learning simulator")]
struct Cli {
    /// JSON config; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the effective config and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum View {
    Infant,
    Parent,
}

impl From<View> for ViewProfile {
    fn from(v: View) -> Self {
        match v {
            View::Infant => ViewProfile::Infant,
            View::Parent => ViewProfile::Parent,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Frames {
    All,
    Naming,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Generate infant and parent corpora and print their statistics.
    Synth {
        /// Also write one manifest per session.
        #[arg(long)]
        manifests: bool,
        /// Frames written as PNG next to each manifest.
        #[arg(long, value_enum, default_value = "none")]
        frames: Frames,
    },
    /// Apply the acuity filter to a PNG.
    Foveate(FoveateArgs),
    /// Extract naming events from one session.
    Events {
        #[arg(long, value_enum, default_value = "infant")]
        view: View,
        /// Session index within the stored corpus.
        #[arg(long, conflicts_with = "manifest")]
        session: Option<u32>,
        /// Exported session directory instead of a corpus session.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train one model on a stored corpus.
    Train {
        #[arg(long, value_enum, default_value = "infant")]
        view: View,
        /// Random subset of this many events; all events by default.
        #[arg(long)]
        events: Option<usize>,
    },
    /// Score a checkpoint on the canonical test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    Study1,
    Study2,
    Study3,
    /// Every stage in order, or the listed ones.
    RunAll {
        #[arg(long, value_delimiter = ',', value_parser = parse_stage)]
        only: Vec<Stage>,
    },
}

#[derive(Args)]
struct FoveateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    gx: f64,
    #[arg(long)]
    gy: f64,
    /// Pixels per degree; defaults to image width over a 70 degree field.
    #[arg(long)]
    ppd: Option<f64>,
    #[arg(long)]
    e2: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Output PNG; defaults to `<out>/foveated.png`.
    #[arg(long)]
    save: Option<PathBuf>,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| format!("unknown stage {s:?} (synth, study1, study2, study3)"))
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(summary: &RunSummary) -> bool {
    for n in &summary.notes {
        println!("{n}");
    }
    for c in &summary.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    summary.all_passed()
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    fs::write(path, serde_json::to_vec_pretty(value).expect("json")).map_err(|e| CliError::io(path, e))
}

fn cmd_foveate(cfg: &RunConfig, a: &FoveateArgs) -> Result<(), CliError> {
    let img = Image::load_png(&a.input)?;
    let defaults = AcuityParams::for_frame(img.width(), cfg.session.fov_h_deg);
    let params = AcuityParams {
        ppd: a.ppd.unwrap_or(defaults.ppd),
        e2_deg: a.e2.unwrap_or(cfg.acuity.e2_deg),
        max_levels: a.levels.unwrap_or(cfg.acuity.max_levels),
        sigma0_px: defaults.sigma0_px,
    };
    let out = foveate(&img, [a.gx, a.gy], &params)?;
    let path = match &a.save {
        Some(p) => p.clone(),
        None => {
            fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
            cfg.output_dir.join("foveated.png")
        }
    };
    out.image.save_png(&path)?;
    if out.gaze_clamped {
        eprintln!("warning: gaze outside the image was clamped to the border");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_events(cfg: &RunConfig, view: ViewProfile, session: Option<u32>, manifest: Option<&Path>) -> Result<(), CliError> {
    let layout = OutputLayout::new(&cfg.output_dir);
    let (s, id, name) = match (manifest, session) {
        (Some(dir), _) => (import_session(dir)?, 0, "manifest".to_string()),
        (None, idx) => {
            let idx = idx.unwrap_or(0);
            let mut corpus = load_corpus(&layout, view)?;
            if idx as usize >= corpus.sessions.len() {
                return Err(CliError::Config(format!(
                    "session {idx} not in the {} corpus ({} sessions)",
                    view.name(),
                    corpus.sessions.len()
                )));
            }
            (corpus.sessions.swap_remove(idx as usize), idx, format!("{}_{idx:03}", view.name()))
        }
    };
    let ex = extract_naming_events(&s, id, DEFAULT_WINDOW_S);
    let dir = cfg.output_dir.join("events");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join(format!("{name}.jsonl"));
    write_events_jsonl(&ex.events, &path)?;
    let sustained = ex.events.iter().filter(|e| e.is_sustained()).count();
    let on_target = ex.events.iter().filter(|e| e.on_target).count();
    println!(
        "{} naming events ({sustained} SA, {} DA, {on_target} on-target), {} dropped at the session end -> {}",
        ex.events.len(),
        ex.events.len() - sustained,
        ex.dropped,
        path.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, view: ViewProfile, k: Option<usize>) -> Result<(), CliError> {
    let layout = OutputLayout::new(&cfg.output_dir);
    let corpus = load_corpus(&layout, view)?;
    let prepared = prepare(cfg, &corpus)?;
    let all: Vec<usize> = (0..prepared.len()).collect();
    let k = k.unwrap_or(all.len());
    if k == 0 || k > all.len() {
        return Err(CliError::Config(format!("--events must be in 1..={}", all.len())));
    }
    let seed = pipeline::studies_seed(cfg);
    let chosen = subsample(&all, k, derive_seed(seed, &format!("train/{}", view.name()), 0));
    let data: Vec<&PreparedEvent> = chosen.iter().map(|&i| &prepared[i]).collect();
    let model = Model::new(&egoword::ModelConfig {
        init_seed: derive_seed(seed, "init", 0),
        ..cfg.model.clone()
    })?;
    let tcfg = egoword::TrainConfig {
        seed: derive_seed(seed, "train", 0),
        ..cfg.train.clone()
    };
    let (model, history) = train_prepared(model, &data, &tcfg)?;
    let dir = layout.train_dir(view);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    save_checkpoint(&model, &dir.join("model.ckpt"))?;
    write_history_csv(&history, &dir.join("history.csv"))?;
    let acc = model_accuracy(&model, &test_set(cfg));
    write_json(
        &dir.join("eval.json"),
        &json!({"view": view.name(), "events": k, "epochs": history.epochs.len(), "test_accuracy": acc}),
    )?;
    println!(
        "trained on {k} {} events for {} epochs ({:?}); test accuracy {:.2}% -> {}",
        view.name(),
        history.epochs.len(),
        history.stop_reason,
        100.0 * acc,
        dir.display()
    );
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, checkpoint: &Path) -> Result<(), CliError> {
    let model = load_checkpoint(checkpoint)?;
    let mut cfg = cfg.clone();
    cfg.model.input_size = model.config().input_size;
    let acc = model_accuracy(&model, &test_set(&cfg));
    println!("test accuracy {:.2}% over {} images", 100.0 * acc, test_set(&cfg).inputs.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        println!("{}", cfg.to_pretty_json());
        return Ok(true);
    }
    let stages = |s: &[Stage]| -> Result<bool, CliError> { Ok(report(&run_stages(&cfg, s)?)) };
    match cli.command.as_ref() {
        None => Err(CliError::Config("no subcommand given (see --help)".into())),
        Some(Command::Synth { manifests, frames }) => {
            let mut cfg = cfg.clone();
            cfg.corpus.export_manifests |= *manifests;
            cfg.corpus.export_frames = match frames {
                Frames::All => FrameExport::All,
                Frames::Naming => FrameExport::Naming,
                Frames::None => cfg.corpus.export_frames,
            };
            Ok(report(&run_stages(&cfg, &[Stage::Synth])?))
        }
        Some(Command::Foveate(a)) => cmd_foveate(&cfg, a).map(|_| true),
        Some(Command::Events { view, session, manifest }) => {
            cmd_events(&cfg, (*view).into(), *session, manifest.as_deref()).map(|_| true)
        }
        Some(Command::Train { view, events }) => cmd_train(&cfg, (*view).into(), *events).map(|_| true),
        Some(Command::Eval { checkpoint }) => cmd_eval(&cfg, checkpoint).map(|_| true),
        Some(Command::Study1) => stages(&[Stage::Study1]),
        Some(Command::Study2) => stages(&[Stage::Study2]),
        Some(Command::Study3) => stages(&[Stage::Study3]),
        Some(Command::RunAll { only }) => {
            if only.is_empty() {
                stages(&Stage::ALL)
            } else {
                stages(only)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
