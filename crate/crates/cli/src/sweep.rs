use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stagegram_core::eval::{wilcoxon_signed_rank, Alternative};

use crate::args::RunConfig;
use crate::pipeline::{plan_for, train_into, TrainData};
use crate::{prepare_out, read_text, write_text, CliError};

/// Parameter grid crossed by `sweep`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub curricula: Vec<String>,
    pub s_l: Vec<f64>,
    pub s_p: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Grid, CliError> {
        let grid: Grid = toml::from_str(text).map_err(|e| CliError::Usage(format!("grid: {e}")))?;
        for (name, len) in [
            ("curricula", grid.curricula.len()),
            ("s_l", grid.s_l.len()),
            ("s_p", grid.s_p.len()),
            ("eta", grid.eta.len()),
        ] {
            if len == 0 {
                return Err(CliError::Usage(format!("grid: {name} is empty")));
            }
        }
        Ok(grid)
    }

    /// Cells in curriculum-major order, then s_l, s_p and eta.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for c in &self.curricula {
            for &s_l in &self.s_l {
                for &s_p in &self.s_p {
                    for &eta in &self.eta {
                        out.push(Cell {
                            curriculum: c.clone(),
                            s_l,
                            s_p,
                            eta,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub curriculum: String,
    pub s_l: f64,
    pub s_p: f64,
    pub eta: f64,
}

impl Cell {
    fn dir_name(&self) -> String {
        let stem = Path::new(&self.curriculum)
            .file_stem()
            .map_or(self.curriculum.clone(), |s| s.to_string_lossy().into_owned());
        format!("{stem}_sl{}_sp{}_eta{}", self.s_l, self.s_p, self.eta)
    }

    fn key(&self) -> (u64, u64, u64) {
        (self.s_l.to_bits(), self.s_p.to_bits(), self.eta.to_bits())
    }
}

/// Final-stage metrics of one cell, or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub cell: Cell,
    pub f1: f64,
    pub loglik: f64,
    pub mean_jsd: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    /// `a` is the first curriculum of the grid, `b` the second.
    pub a: String,
    pub b: String,
    pub alternative: String,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub rank_biserial: f64,
    pub median_difference: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub comparisons: Vec<ComparisonRow>,
}

fn run_cell(data: &TrainData, cfg: &RunConfig, cell: &Cell, root: &Path) -> SweepRow {
    let result = (|| {
        let mut cell_cfg = cfg.clone();
        cell_cfg.s_l = Some(cell.s_l);
        cell_cfg.s_p = Some(cell.s_p);
        cell_cfg.eta = Some(cell.eta);
        cell_cfg.curriculum = cell.curriculum.clone();
        let dir: PathBuf = root.join(cell.dir_name());
        cell_cfg.out = Some(dir.clone());
        let plan = plan_for(&cell_cfg, &cell.curriculum)?;
        prepare_out(&dir, cfg.force)?;
        train_into(data, &plan, &cell_cfg, &dir)
    })();
    match result {
        Ok(metrics) => {
            let last = metrics.last().expect("at least one stage");
            SweepRow {
                cell: cell.clone(),
                f1: last.f1,
                loglik: last.mean_loglik,
                mean_jsd: last.mean_jsd,
                error: None,
            }
        }
        Err(e) => SweepRow {
            cell: cell.clone(),
            f1: f64::NAN,
            loglik: f64::NAN,
            mean_jsd: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Paired one-sided tests of the first curriculum against the second over
/// matched parameter settings: F1 and log-likelihood higher, JSD lower.
pub fn compare(rows: &[SweepRow], a: &str, b: &str) -> Vec<ComparisonRow> {
    type Metric = (&'static str, fn(&SweepRow) -> f64, Alternative);
    let metrics: [Metric; 3] = [
        ("f1", |r| r.f1, Alternative::Greater),
        ("loglik", |r| r.loglik, Alternative::Greater),
        ("mean_jsd", |r| r.mean_jsd, Alternative::Less),
    ];
    metrics
        .iter()
        .map(|(name, get, alt)| {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.cell.curriculum == a && r.error.is_none())
                .filter_map(|ra| {
                    rows.iter()
                        .find(|rb| rb.cell.curriculum == b && rb.error.is_none() && rb.cell.key() == ra.cell.key())
                        .map(|rb| (get(ra), get(rb)))
                })
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            let alternative = match alt {
                Alternative::Greater => "greater",
                Alternative::Less => "less",
            };
            let mut row = ComparisonRow {
                metric: name.to_string(),
                a: a.to_owned(),
                b: b.to_owned(),
                alternative: alternative.to_owned(),
                n: 0,
                statistic: f64::NAN,
                p_value: f64::NAN,
                rank_biserial: f64::NAN,
                median_difference: f64::NAN,
                error: None,
            };
            if pairs.is_empty() {
                row.error = Some("no matched pairs with finite values".into());
                return row;
            }
            match wilcoxon_signed_rank(&pairs, *alt) {
                Ok(w) => {
                    row.n = w.n;
                    row.statistic = w.statistic;
                    row.p_value = w.p_value;
                    row.rank_biserial = w.rank_biserial;
                    row.median_difference = w.median_difference;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

fn f(x: f64) -> String {
    stagegram_core::format::g17(x)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Pipeline(e.to_string());
    w.write_record(["curriculum", "s_l", "s_p", "eta", "f1", "loglik", "mean_jsd", "error"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.cell.curriculum.clone(),
            f(r.cell.s_l),
            f(r.cell.s_p),
            f(r.cell.eta),
            f(r.f1),
            f(r.loglik),
            f(r.mean_jsd),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Pipeline(e.to_string()))?).expect("utf-8"))
}

pub fn wilcoxon_csv(rows: &[ComparisonRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Pipeline(e.to_string());
    w.write_record([
        "metric",
        "a",
        "b",
        "alternative",
        "n",
        "statistic",
        "p_value",
        "rank_biserial",
        "median_difference",
        "error",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            r.a.clone(),
            r.b.clone(),
            r.alternative.clone(),
            r.n.to_string(),
            f(r.statistic),
            f(r.p_value),
            f(r.rank_biserial),
            f(r.median_difference),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Pipeline(e.to_string()))?).expect("utf-8"))
}

/// Train every grid cell under `out/cells/` and write `sweep.csv`, plus
/// `wilcoxon.csv` when the grid names exactly two curricula. Failed cells
/// are recorded and the sweep carries on.
pub fn cmd_sweep(cfg: &RunConfig, grid_path: &Path, parallel: bool) -> Result<SweepOutcome, CliError> {
    let grid = Grid::parse(&read_text(grid_path)?)?;
    let out = cfg.out_dir()?;
    for c in &grid.curricula {
        plan_for(cfg, c)?;
    }
    let data = TrainData::load(cfg)?;
    prepare_out(out, cfg.force)?;
    let root = out.join("cells");
    let cells = grid.cells();
    let rows: Vec<SweepRow> = if parallel {
        cells.par_iter().map(|c| run_cell(&data, cfg, c, &root)).collect()
    } else {
        cells
            .iter()
            .map(|c| {
                let row = run_cell(&data, cfg, c, &root);
                eprintln!("{}: F1={:.4} JSD={:.4}", c.dir_name(), row.f1, row.mean_jsd);
                row
            })
            .collect()
    };
    write_text(&out.join("sweep.csv"), &sweep_csv(&rows)?)?;
    write_text(&out.join("sweep.json"), &serde_json::to_string_pretty(&rows).expect("rows serialize"))?;
    let comparisons = match grid.curricula.as_slice() {
        [a, b] => {
            let cmp = compare(&rows, a, b);
            write_text(&out.join("wilcoxon.csv"), &wilcoxon_csv(&cmp)?)?;
            write_text(&out.join("wilcoxon.json"), &serde_json::to_string_pretty(&cmp).expect("rows serialize"))?;
            cmp
        }
        _ => Vec::new(),
    };
    let failures: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    if !failures.is_empty() {
        eprintln!("{} of {} cells failed:", failures.len(), rows.len());
        for r in &failures {
            eprintln!("  {}: {}", r.cell.dir_name(), r.error.as_deref().unwrap_or(""));
        }
    }
    Ok(SweepOutcome { rows, comparisons })
}
