//! Pass/fail checks evaluated on stage outputs.

use std::time::Duration;

use egoword::corpus::CorpusStats;
use egoword::evalx::{spearman, StudyReport};
use serde::{Deserialize, Serialize};

pub const CHANCE: f64 = 1.0 / 24.0;
pub const RUNTIME_BUDGET: Duration = Duration::from_secs(45 * 60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Paired-run majority needed for a directional claim: 8 of 10, scaled.
pub fn majority(repeats: usize) -> usize {
    (repeats * 8).div_ceil(10)
}

pub fn synth_checks(stats: &[&CorpusStats], configured_referential: f64) -> Vec<Check> {
    let mut out = Vec::new();
    for s in stats {
        let rel = (s.referential_per_min - configured_referential).abs() / configured_referential;
        out.push(check(
            &format!("referential rate ({})", s.view.name()),
            rel <= 0.2,
            format!(
                "{:.2}/min vs configured {configured_referential:.2}/min ({:+.1}%)",
                s.referential_per_min,
                100.0 * (s.referential_per_min - configured_referential) / configured_referential
            ),
        ));
    }
    if let Some(s) = stats.iter().find(|s| s.view == egoword::ViewProfile::Infant) {
        let ok = (0.04..=0.08).contains(&s.target_size_median)
            && (0.35..=0.65).contains(&s.sustained_fraction)
            && (0.45..=0.75).contains(&s.on_target_fraction_of_sustained);
        out.push(check(
            "corpus calibration",
            ok,
            format!(
                "target-size median {:.2}% (4-8%), SA fraction {:.3} (0.35-0.65), on-target of SA {:.3} (0.45-0.75)",
                100.0 * s.target_size_median,
                s.sustained_fraction,
                s.on_target_fraction_of_sustained
            ),
        ));
    }
    out
}

fn directional(report: &StudyReport, name: &str, a: &str, b: &str, need: usize) -> Check {
    match report.comparison(a, b) {
        Some(c) => check(
            name,
            c.consistency >= need,
            format!(
                "{a} > {b} in {}/{} paired runs (need {need}), diff {:+.2} pts, 95% CI [{:+.2}, {:+.2}]",
                c.consistency,
                c.n,
                100.0 * c.diff,
                100.0 * c.ci_lo,
                100.0 * c.ci_hi
            ),
        ),
        None => check(name, false, format!("comparison {a} > {b} missing")),
    }
}

pub fn study1_checks(report: &StudyReport, sizes: &[usize], repeats: usize) -> Vec<Check> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let largest = *sizes.last().expect("study sizes are non-empty");
    let means: Vec<f64> = sizes
        .iter()
        .map(|s| report.condition(&format!("infant_{s}")).map_or(f64::NAN, |c| c.mean))
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let rho = spearman(&xs, &means);
    let top = means[means.len() - 1];
    let learning = check(
        "learning above chance",
        top >= 3.0 * CHANCE && rho > 0.0,
        format!(
            "infant mean at {largest} events {:.2}% (need >= {:.2}%), Spearman rho over sizes {rho:.3} (need > 0); means {}",
            100.0 * top,
            300.0 * CHANCE,
            means
                .iter()
                .zip(&sizes)
                .map(|(m, s)| format!("{s}:{:.2}%", 100.0 * m))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    let a = format!("infant_{largest}");
    let b = format!("parent_{largest}");
    let mut view = directional(report, "view contrast", &a, &b, majority(repeats));
    if let Some(c) = report.comparison(&a, &b) {
        view.passed &= c.ci_lo > 0.0;
        view.detail.push_str(if c.ci_lo > 0.0 { "; CI excludes 0" } else { "; CI includes 0" });
    }
    vec![learning, view]
}

pub fn study2_checks(report: &StudyReport, repeats: usize) -> Vec<Check> {
    let attention = directional(report, "attention contrast (SA > DA)", "sa", "da", majority(repeats));
    let on = report.condition("on_target");
    let off = report.condition("on_non_target");
    let target = match (on, off) {
        (Some(on), Some(off)) => check(
            "attention contrast (on-target > on-non-target)",
            on.mean > off.mean && off.mean <= 3.0 * CHANCE && on.n_events == off.n_events,
            format!(
                "on-target {:.2}% vs on-non-target {:.2}% (need <= {:.2}%), {} vs {} events",
                100.0 * on.mean,
                100.0 * off.mean,
                300.0 * CHANCE,
                on.n_events,
                off.n_events
            ),
        ),
        _ => check("attention contrast (on-target > on-non-target)", false, "conditions missing".into()),
    };
    vec![attention, target]
}

pub fn study3_checks(report: &StudyReport, repeats: usize) -> Vec<Check> {
    let need = majority(repeats);
    vec![
        directional(report, "size contrast (overall)", "large", "small", need),
        directional(report, "size contrast (within SA)", "sa_large", "sa_small", need),
        directional(report, "size contrast (within DA)", "da_large", "da_small", need),
    ]
}

pub fn runtime_check(elapsed: Duration) -> Check {
    check(
        "run-all runtime",
        elapsed <= RUNTIME_BUDGET,
        format!(
            "{:.1} min (budget {:.0} min)",
            elapsed.as_secs_f64() / 60.0,
            RUNTIME_BUDGET.as_secs_f64() / 60.0
        ),
    )
}
