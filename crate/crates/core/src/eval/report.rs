use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{EvalError, JsdReport};
use crate::format::g17;

/// Metrics for one stage grammar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub name: String,
    pub f1: f64,
    pub mean_jsd: f64,
    pub mean_loglik: f64,
    /// Sentences parsed during training at this stage.
    pub n_parsed: usize,
    pub jsd: JsdReport,
}

/// `stage,f1,mean_jsd,mean_loglik,N_parsed`
pub fn metrics_csv(stages: &[StageMetrics]) -> String {
    let mut out = String::from("stage,f1,mean_jsd,mean_loglik,N_parsed\n");
    for s in stages {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.stage,
            g17(s.f1),
            g17(s.mean_jsd),
            g17(s.mean_loglik),
            s.n_parsed
        )
        .unwrap();
    }
    out
}

/// `stage,nt,jsd`, one row per category that counts towards the stage's
/// mean.
pub fn jsd_per_nt_csv(stages: &[StageMetrics], include_unavailable: bool) -> String {
    let mut out = String::from("stage,nt,jsd\n");
    for s in stages {
        for e in s.jsd.entries.iter().filter(|e| e.available || include_unavailable) {
            writeln!(out, "{},{},{}", s.stage, e.nt, g17(e.jsd)).unwrap();
        }
    }
    out
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    stage: usize,
    name: &'a str,
    f1: f64,
    mean_jsd: f64,
    mean_loglik: f64,
    #[serde(rename = "N_parsed")]
    n_parsed: usize,
}

#[derive(Serialize)]
struct NtRow<'a> {
    stage: usize,
    nt: &'a str,
    jsd: f64,
    available: bool,
}

/// Write `metrics.csv`, `jsd_per_nt.csv`, a JSON twin of each, and
/// `summary.json` with the full per-stage detail into `dir`.
pub fn write_report(dir: &Path, stages: &[StageMetrics], include_unavailable: bool) -> Result<(), EvalError> {
    if stages.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(stages))?;
    std::fs::write(dir.join("jsd_per_nt.csv"), jsd_per_nt_csv(stages, include_unavailable))?;

    let rows: Vec<MetricsRow> = stages
        .iter()
        .map(|s| MetricsRow {
            stage: s.stage,
            name: &s.name,
            f1: s.f1,
            mean_jsd: s.mean_jsd,
            mean_loglik: s.mean_loglik,
            n_parsed: s.n_parsed,
        })
        .collect();
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&rows)?)?;

    let nt_rows: Vec<NtRow> = stages
        .iter()
        .flat_map(|s| {
            s.jsd
                .entries
                .iter()
                .filter(move |e| e.available || include_unavailable)
                .map(move |e| NtRow {
                    stage: s.stage,
                    nt: &e.nt,
                    jsd: e.jsd,
                    available: e.available,
                })
        })
        .collect();
    std::fs::write(dir.join("jsd_per_nt.json"), serde_json::to_string_pretty(&nt_rows)?)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(stages)?)?;
    Ok(())
}
