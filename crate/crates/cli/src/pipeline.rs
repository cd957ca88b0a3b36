use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stagegram_core::chart::viterbi_parse;
use stagegram_core::curriculum::{resolve_plan, run_curriculum, write_stage_outputs, CurriculumPlan};
use stagegram_core::estimate::{jitter, EstimationMode, EstimatorConfig};
use stagegram_core::eval::{
    mean_sentence_loglik, per_nt_jsd, unlabelled_f1, write_report, JsdOptions, JsdReport, StageMetrics,
};
use stagegram_core::grammar::{binarize, write_grammar_file, Grammar};
use stagegram_core::treebank::{coverage_csv, coverage_sweep, extract_pcfg, filter_sentences, BracketOptions, CoverageRow, Tree};
use stagegram_core::treebank::parse_trees;
use stagegram_core::{read_sentences, Sentence};

use crate::args::{Init, RunConfig};
use crate::{io_err, prepare_out, read_grammar, read_text, read_treebank, write_text, CliError};

/// Thresholds tried when `--f-m` is not given.
pub const AUTO_F_M_MAX: usize = 20;

/// Shortest sentence kept from a treebank is `MIN_LEN + 1` tokens.
pub const MIN_LEN: usize = 1;

#[derive(Debug, Clone)]
pub struct Extraction {
    pub grammar: Grammar,
    pub f_m: usize,
    pub coverage: Vec<CoverageRow>,
}

/// Sweep thresholds and keep the smallest grammar that still parses every
/// sentence, or the grammar at `forced` when given.
pub fn select_oracle(trees: &[Tree], forced: Option<usize>) -> Result<Extraction, CliError> {
    let top = forced.unwrap_or(AUTO_F_M_MAX);
    let thresholds: Vec<usize> = (1..=top).collect();
    let coverage = coverage_sweep(trees, &thresholds)?;
    let f_m = match forced {
        Some(f) => f,
        None => {
            let size = |r: &CoverageRow| r.productions + r.lexicalisations;
            let full = coverage
                .iter()
                .filter(|r| r.coverage == 1.0)
                .min_by(|a, b| size(a).cmp(&size(b)).then(b.min_freq.cmp(&a.min_freq)));
            match full {
                Some(r) => r.min_freq,
                None => {
                    let best = coverage
                        .iter()
                        .max_by(|a, b| a.coverage.total_cmp(&b.coverage))
                        .expect("at least one threshold");
                    return Err(CliError::Pipeline(format!(
                        "no f_m reaches full coverage; best is f_m={} at {}",
                        best.min_freq, best.coverage
                    )));
                }
            }
        }
    };
    Ok(Extraction {
        grammar: extract_pcfg(trees, f_m)?,
        f_m,
        coverage,
    })
}

fn load_trees(cfg: &RunConfig) -> Result<Vec<Tree>, CliError> {
    let trees = read_treebank(cfg.treebank_path()?)?;
    Ok(filter_sentences(trees, MIN_LEN))
}

/// Writes `oracle.gr` and `coverage.csv`.
pub fn cmd_extract(cfg: &RunConfig) -> Result<Extraction, CliError> {
    let trees = load_trees(cfg)?;
    let out = cfg.out_dir()?;
    prepare_out(out, cfg.force)?;
    let ex = select_oracle(&trees, cfg.f_m)?;
    write_text(&out.join("oracle.gr"), &write_grammar_file(&ex.grammar)?)?;
    write_text(&out.join("coverage.csv"), &coverage_csv(&ex.coverage))?;
    eprintln!(
        "f_m={}: {} productions, {} lexicalisations, {} words",
        ex.f_m,
        ex.grammar.num_productions(),
        ex.grammar.num_lexicalisations(),
        ex.grammar.vocabulary_size()
    );
    Ok(ex)
}

/// Inputs shared by every stage, and by every cell of a sweep.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub oracle: Grammar,
    /// Set when the oracle was extracted rather than read from a file.
    pub extracted_f_m: Option<usize>,
    pub corpus: Vec<Sentence>,
    /// Gold trees scored by F1; empty without a treebank.
    pub sample: Vec<Tree>,
    pub child_speech: Option<Vec<Sentence>>,
}

/// Ascending indices of a seeded sample of `n` out of `len`, or all of
/// them when `len <= n`.
pub fn sample_indices(len: usize, n: usize, seed: Option<u64>) -> Result<Vec<usize>, CliError> {
    if len <= n {
        return Ok((0..len).collect());
    }
    let seed = seed.ok_or_else(|| CliError::Usage(format!("sampling {n} of {len} trees needs --seed")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, len, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

impl TrainData {
    pub fn load(cfg: &RunConfig) -> Result<TrainData, CliError> {
        let trees = match &cfg.treebank {
            Some(_) => load_trees(cfg)?,
            None => Vec::new(),
        };
        let (oracle, extracted_f_m) = match &cfg.grammar {
            Some(path) => (read_grammar(path)?, None),
            None if !trees.is_empty() => {
                let ex = select_oracle(&trees, cfg.f_m)?;
                (ex.grammar, Some(ex.f_m))
            }
            None => return Err(CliError::Usage("--grammar or --treebank is required".into())),
        };
        let corpus = match &cfg.sentences {
            Some(path) => read_sentences(&read_text(path)?),
            None => trees.iter().map(Tree::sentence).collect(),
        };
        if corpus.is_empty() {
            return Err(CliError::Usage("no training sentences; pass --sentences or --treebank".into()));
        }
        let sample = sample_indices(trees.len(), cfg.eval_sample, cfg.seed)?
            .into_iter()
            .map(|i| trees[i].clone())
            .collect();
        let child_speech = match &cfg.child_speech {
            Some(path) => Some(read_sentences(&read_text(path)?)),
            None => None,
        };
        Ok(TrainData {
            oracle,
            extracted_f_m,
            corpus,
            sample,
            child_speech,
        })
    }
}

pub fn plan_for(cfg: &RunConfig, curriculum: &str) -> Result<CurriculumPlan, CliError> {
    let plan = resolve_plan(curriculum)?;
    let (s_p, s_l, eta) = (
        cfg.s_p.unwrap_or(plan.s_p),
        cfg.s_l.unwrap_or(plan.s_l),
        cfg.eta.unwrap_or(plan.eta),
    );
    Ok(plan.with_parameters(s_p, s_l, eta)?)
}

/// Evaluation of one grammar.
#[derive(Debug, Clone)]
pub struct GrammarEval {
    pub f1: f64,
    pub jsd: JsdReport,
    pub mean_loglik: f64,
    /// Viterbi trees of the F1 sample.
    pub parses: Vec<Option<Tree>>,
}

pub fn evaluate(
    g: &Grammar,
    oracle: Option<&Grammar>,
    sample: &[Tree],
    child_speech: Option<&[Sentence]>,
    cfg: &RunConfig,
) -> Result<GrammarEval, CliError> {
    let bg = binarize(g)?;
    let parses: Vec<Option<Tree>> = sample
        .par_iter()
        .map(|t| viterbi_parse(&bg, &t.tokens()).map(|v| v.tree))
        .collect();
    let f1 = if sample.is_empty() {
        f64::NAN
    } else {
        let opts = BracketOptions {
            include_root: cfg.include_root,
        };
        unlabelled_f1(sample, &parses, opts)?.f1
    };
    let jsd_opts = JsdOptions {
        base: cfg.jsd_base,
        ..JsdOptions::default()
    };
    let jsd = match oracle {
        Some(o) => per_nt_jsd(o, g, None, jsd_opts)?,
        None => JsdReport {
            entries: Vec::new(),
            mean: f64::NAN,
            base: cfg.jsd_base,
        },
    };
    let mean_loglik = match child_speech {
        Some(s) => mean_sentence_loglik(g, s)?.mean,
        None => f64::NAN,
    };
    Ok(GrammarEval {
        f1,
        jsd,
        mean_loglik,
        parses,
    })
}

/// One bracketed tree per line, `(NOPARSE <tokens>)` for failures.
pub fn parses_text(parses: &[Option<Tree>], sentences: &[Vec<&str>]) -> String {
    let mut out = String::new();
    for (p, s) in parses.iter().zip(sentences) {
        match p {
            Some(t) => out.push_str(&t.to_string()),
            None => {
                out.push_str("(NOPARSE");
                for w in s {
                    out.push(' ');
                    out.push_str(w);
                }
                out.push(')');
            }
        }
        out.push('\n');
    }
    out
}

/// Read back the output of [`parses_text`]: `None` for each sentinel line.
pub fn read_parses(text: &str) -> Result<Vec<Option<Tree>>, CliError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            if l.trim_start().starts_with("(NOPARSE") {
                Ok(None)
            } else {
                let mut t = parse_trees(l)?;
                Ok(t.pop())
            }
        })
        .collect()
}

/// Train every stage of `plan` into `out` and evaluate each stage grammar.
pub fn train_into(data: &TrainData, plan: &CurriculumPlan, cfg: &RunConfig, out: &Path) -> Result<Vec<StageMetrics>, CliError> {
    let start = match cfg.init {
        Init::Uniform => data.oracle.uniform(),
        Init::Oracle => data.oracle.clone(),
    };
    let start = match cfg.jitter {
        Some(seed) => jitter(&start, seed)?,
        None => start,
    };
    let est = EstimatorConfig {
        mode: EstimationMode::Vb,
        iterations: cfg.iterations,
        tolerance: 0.0,
        reproducible: cfg.reproducible,
    };
    let results = run_curriculum(&start, &data.corpus, plan, &est)?;
    write_stage_outputs(out, &results)?;
    if data.extracted_f_m.is_some() {
        write_text(&out.join("oracle.gr"), &write_grammar_file(&data.oracle)?)?;
    }
    let sentences: Vec<Vec<&str>> = data.sample.iter().map(Tree::tokens).collect();
    let mut metrics = Vec::with_capacity(results.len());
    for r in &results {
        let ev = evaluate(&r.grammar, Some(&data.oracle), &data.sample, data.child_speech.as_deref(), cfg)?;
        if !data.sample.is_empty() {
            write_text(&out.join(format!("parses_{}.txt", r.index)), &parses_text(&ev.parses, &sentences))?;
        }
        metrics.push(StageMetrics {
            stage: r.index,
            name: r.name.clone(),
            f1: ev.f1,
            mean_jsd: ev.jsd.mean,
            mean_loglik: ev.mean_loglik,
            n_parsed: r.parsed(),
            jsd: ev.jsd,
        });
    }
    write_report(out, &metrics, false)?;
    let config = serde_json::to_string_pretty(cfg).expect("config serializes");
    write_text(&out.join("config.json"), &config)?;
    Ok(metrics)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<StageMetrics>, CliError> {
    let out = cfg.out_dir()?;
    let plan = plan_for(cfg, &cfg.curriculum)?;
    let data = TrainData::load(cfg)?;
    prepare_out(out, cfg.force)?;
    let metrics = train_into(&data, &plan, cfg, out)?;
    for m in &metrics {
        eprintln!(
            "stage {} ({}): N={} F1={:.4} JSD={:.4} loglik={:.4}",
            m.stage, m.name, m.n_parsed, m.f1, m.mean_jsd, m.mean_loglik
        );
    }
    Ok(metrics)
}

/// Viterbi-parse every line of `sentences`. No-parse lines are written as
/// sentinels and counted on standard error.
pub fn cmd_parse(grammar: &Path, sentences: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let g = read_grammar(grammar)?;
    let bg = binarize(&g).map_err(|source| CliError::GrammarFile {
        path: grammar.to_owned(),
        source,
    })?;
    let lines = read_sentences(&read_text(sentences)?);
    if lines.is_empty() {
        eprintln!("warning: {} has no sentences", sentences.display());
    }
    let parses: Vec<Option<Tree>> = lines
        .par_iter()
        .map(|s| viterbi_parse(&bg, s).map(|v| v.tree))
        .collect();
    let words: Vec<Vec<&str>> = lines.iter().map(|s| s.iter().map(String::as_str).collect()).collect();
    let text = parses_text(&parses, &words);
    match out {
        Some(path) => write_text(path, &text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    let failed = parses.iter().filter(|p| p.is_none()).count();
    eprintln!("{} sentences, {} without a parse", lines.len(), failed);
    Ok(())
}

/// Score one grammar and write a single-row report. `N_parsed` counts the
/// F1 sample sentences the grammar parses.
pub fn cmd_eval(cfg: &RunConfig, oracle: Option<&Path>) -> Result<(), CliError> {
    let path = cfg
        .grammar
        .as_deref()
        .ok_or_else(|| CliError::Usage("--grammar is required".into()))?;
    let g = read_grammar(path)?;
    let oracle = oracle.map(read_grammar).transpose()?;
    let trees = match &cfg.treebank {
        Some(_) => load_trees(cfg)?,
        None => Vec::new(),
    };
    let sample: Vec<Tree> = sample_indices(trees.len(), cfg.eval_sample, cfg.seed)?
        .into_iter()
        .map(|i| trees[i].clone())
        .collect();
    let child = match &cfg.child_speech {
        Some(p) => Some(read_sentences(&read_text(p)?)),
        None => None,
    };
    let out = cfg.out_dir()?;
    prepare_out(out, cfg.force)?;
    let ev = evaluate(&g, oracle.as_ref(), &sample, child.as_deref(), cfg)?;
    let name = path.file_stem().map_or("grammar".into(), |s| s.to_string_lossy().into_owned());
    let metrics = [StageMetrics {
        stage: 1,
        name,
        f1: ev.f1,
        mean_jsd: ev.jsd.mean,
        mean_loglik: ev.mean_loglik,
        n_parsed: ev.parses.iter().filter(|p| p.is_some()).count(),
        jsd: ev.jsd,
    }];
    write_report(out, &metrics, false)?;
    let m = &metrics[0];
    eprintln!("F1={:.4} JSD={:.4} loglik={:.4}", m.f1, m.mean_jsd, m.mean_loglik);
    Ok(())
}

