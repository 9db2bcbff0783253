//! Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL
//! line each. Runs the full desk-scale pipeline twice, so expect about half
//! an hour on a small machine.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use egoword_cli::{Check, RunSummary, Stage};

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let mut out = std::io::stdout().lock();
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    writeln!(out, "[{verdict}] {:>2}. {}: {}", o.id, o.name, o.detail).unwrap();
    out.flush().unwrap();
}

fn gradient() -> Outcome {
    let t0 = Instant::now();
    let worst = support::gradient_check(100);
    let secs = t0.elapsed().as_secs_f64();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    Outcome {
        id: 1,
        name: "gradient oracle",
        passed: worst.len() == 4 && max < 1e-4 && secs < 60.0,
        detail: format!(
            "worst relative error {max:.2e} over 100 probes x 4 layer kinds (need < 1e-4), {secs:.1} s"
        ),
    }
}

fn foveation() -> Outcome {
    let t0 = Instant::now();
    let fovea = support::worst_gaze_pixel_error(200, 1);
    let excess = support::worst_outer_excess(&support::checkerboard_annuli());
    let p95 = support::variable_sigma_p95();
    let secs = t0.elapsed().as_secs_f64();
    Outcome {
        id: 2,
        name: "foveation invariants",
        passed: fovea <= 1.0 / 255.0 && excess <= 0.02 && p95 <= 3.0 / 255.0 && secs < 60.0,
        detail: format!(
            "gaze pixel error {:.3}/255 (<= 1), worst outer annulus excess {:+.2}% (<= 2%), oracle p95 {:.3}/255 (<= 3), {secs:.1} s",
            fovea * 255.0,
            100.0 * excess,
            p95 * 255.0
        ),
    }
}

fn segmentation() -> Outcome {
    let t0 = Instant::now();
    let result = support::exhaustive_segmentation();
    let boundary = egoword::events::segment_utterances(&[(0, 100), (500, 600)])
        .map(|u| u.len() == 2)
        .unwrap_or(false);
    let secs = t0.elapsed().as_secs_f64();
    let (passed, detail) = match result {
        Ok(n) => (boundary && secs < 60.0, format!("{n} interval sets agree; 400 ms gap splits: {boundary}; {secs:.1} s")),
        Err(e) => (false, format!("disagreement on {e}")),
    };
    Outcome {
        id: 3,
        name: "segmentation oracle",
        passed,
        detail,
    }
}

fn run_all(out: &Path) -> Result<(RunSummary, Duration), String> {
    let t0 = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_egoword"))
        .args(["run-all", "--seed", "0", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let summary_path = out.join("summary.json");
    let bytes = std::fs::read(&summary_path).map_err(|e| {
        format!(
            "no summary ({e}); exit {:?}; stderr: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        )
    })?;
    let summary: RunSummary = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    Ok((summary, elapsed))
}

fn from_checks(id: usize, name: &'static str, checks: &[&Check], extra: &str) -> Outcome {
    let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
    let mut detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{}{}: {}", if c.passed { "" } else { "FAILED " }, c.name, c.detail))
        .collect();
    if checks.is_empty() {
        detail.push("check missing from the run summary".into());
    }
    if !extra.is_empty() {
        detail.push(extra.to_string());
    }
    Outcome {
        id,
        name,
        passed,
        detail: detail.join(" | "),
    }
}

fn main() {
    let mut outcomes = Vec::new();
    for f in [gradient, foveation, segmentation] {
        let o = f();
        line(&o);
        outcomes.push(o);
    }

    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    match run_all(&a) {
        Err(e) => {
            for (id, name) in [
                (4, "learning above chance"),
                (5, "view contrast"),
                (6, "attention contrast"),
                (7, "size contrast"),
                (8, "corpus calibration"),
                (10, "run-all runtime"),
            ] {
                let o = Outcome {
                    id,
                    name,
                    passed: false,
                    detail: format!("run-all failed: {e}"),
                };
                line(&o);
                outcomes.push(o);
            }
        }
        Ok((summary, elapsed)) => {
            let find = |prefix: &str| -> Vec<&Check> {
                summary.checks.iter().filter(|c| c.name.starts_with(prefix)).collect()
            };
            let study1_s = summary
                .stages
                .iter()
                .find(|s| s.stage == Stage::Study1)
                .map_or(f64::NAN, |s| s.seconds);
            let extra = format!(
                "study 1 took {:.1} min (budget 20 min)",
                study1_s / 60.0
            );
            let mut s1 = from_checks(4, "learning above chance", &find("learning above chance"), &extra);
            s1.passed &= study1_s <= 20.0 * 60.0;
            for o in [
                s1,
                from_checks(5, "view contrast", &find("view contrast"), ""),
                from_checks(6, "attention contrast", &find("attention contrast"), ""),
                from_checks(7, "size contrast", &find("size contrast"), ""),
                from_checks(8, "corpus calibration", &find("corpus calibration"), ""),
                from_checks(
                    10,
                    "run-all runtime",
                    &find("run-all runtime"),
                    &format!("process wall time {:.1} min", elapsed.as_secs_f64() / 60.0),
                ),
            ] {
                line(&o);
                outcomes.push(o);
            }
        }
    }

    let det = match run_all(&b) {
        Err(e) => Outcome {
            id: 9,
            name: "determinism",
            passed: false,
            detail: format!("second run-all failed: {e}"),
        },
        Ok(_) => {
            let read = |p: &Path| std::fs::read(p.join("studies.csv")).ok();
            let (x, y) = (read(&a), read(&b));
            let same = x.is_some() && x == y;
            Outcome {
                id: 9,
                name: "determinism",
                passed: same,
                detail: format!(
                    "studies.csv from two run-all invocations with seed 0 is {} ({} bytes)",
                    if same { "byte-identical" } else { "different or missing" },
                    x.map_or(0, |v| v.len())
                ),
            }
        }
    };
    line(&det);
    outcomes.push(det);

    outcomes.sort_by_key(|o| o.id);
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance: {}/{} criteria passed", outcomes.len() - failed.len(), outcomes.len()).unwrap();
    if !failed.is_empty() {
        writeln!(out, "failed criteria: {failed:?}").unwrap();
        std::process::exit(1);
    }
}
