//! EM and variational Bayes re-estimation over a corpus of sentences.

mod digamma;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::chart::{self, ChartError, CountVector};
use crate::format::g17;
use crate::grammar::{binarize, BinarizedGrammar, Grammar, GrammarError};
use crate::Sentence;

pub use digamma::digamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no sentence of the corpus can be parsed")]
    NoParses,
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("convergence tolerance must be finite and nonnegative, got {0}")]
    BadTolerance(f64),
    #[error("rule {rule}: pseudocount must be positive, got {value}")]
    NonPositivePseudocount { rule: String, value: f64 },
    #[error("digamma is undefined at {0}")]
    DigammaDomain(f64),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMode {
    Em,
    Vb,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub mode: EstimationMode,
    pub iterations: usize,
    /// Stop early once the relative change in corpus log-likelihood falls
    /// below this. 0 disables early stopping.
    pub tolerance: f64,
    /// Reduce per-sentence counts in a fixed order so results are
    /// bit-identical across thread counts.
    pub reproducible: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            mode: EstimationMode::Vb,
            iterations: 20,
            tolerance: 0.0,
            reproducible: true,
        }
    }
}

impl EstimatorConfig {
    fn check(&self) -> Result<(), EstimateError> {
        if self.iterations == 0 {
            return Err(EstimateError::ZeroIterations);
        }
        if !(self.tolerance >= 0.0) || !self.tolerance.is_finite() {
            return Err(EstimateError::BadTolerance(self.tolerance));
        }
        Ok(())
    }
}

/// Corpus log-likelihood at the start of an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub parsed_sentences: usize,
}

/// `iteration,log_likelihood,parsed_sentences`
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,log_likelihood,parsed_sentences\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.iteration, g17(r.log_likelihood), r.parsed_sentences).unwrap();
    }
    out
}

/// Expected counts and log-likelihood of one pass over the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    pub counts: CountVector,
    pub log_likelihood: f64,
}

impl EStep {
    fn zeros(num_rules: usize) -> EStep {
        EStep {
            counts: CountVector::zeros(num_rules),
            log_likelihood: 0.0,
        }
    }

    fn add_sentence(mut self, bg: &BinarizedGrammar, s: &Sentence) -> Result<EStep, ChartError> {
        let c = chart::inside(bg, s);
        if c.is_parsed() {
            let c = chart::outside(bg, c)?;
            self.counts.add_chart(bg, &c)?;
            self.log_likelihood += c.marginal();
        }
        Ok(self)
    }

    fn merge(mut self, other: EStep) -> EStep {
        self.counts.merge(&other.counts);
        self.log_likelihood += other.log_likelihood;
        self
    }
}

const CHUNK: usize = 32;

/// Parse every sentence and sum expected counts over those that parse.
pub fn e_step(bg: &BinarizedGrammar, corpus: &[Sentence], reproducible: bool) -> Result<EStep, ChartError> {
    let n = bg.base().len();
    if reproducible {
        let parts: Vec<EStep> = corpus
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .try_fold(EStep::zeros(n), |acc, s| acc.add_sentence(bg, s))
            })
            .collect::<Result<_, _>>()?;
        Ok(parts.into_iter().fold(EStep::zeros(n), EStep::merge))
    } else {
        corpus
            .par_iter()
            .try_fold(|| EStep::zeros(n), |acc, s| acc.add_sentence(bg, s))
            .try_reduce(|| EStep::zeros(n), |a, b| Ok(a.merge(b)))
    }
}

fn converged(cfg: &EstimatorConfig, prev: Option<f64>, cur: f64) -> bool {
    match prev {
        Some(p) if cfg.tolerance > 0.0 => ((cur - p) / p.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tolerance,
        _ => false,
    }
}

/// Result of EM: the re-weighted grammar and the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub grammar: Grammar,
    /// Counts of the last E-step.
    pub counts: Vec<f64>,
    pub parsed: usize,
    pub trace: Vec<TraceRow>,
}

/// Maximum-likelihood re-estimation. Weights of a category whose rules
/// received no expected count are left as they were.
pub fn run_em(g: &Grammar, corpus: &[Sentence], cfg: &EstimatorConfig) -> Result<EmResult, EstimateError> {
    cfg.check()?;
    if corpus.is_empty() {
        return Err(EstimateError::EmptyCorpus);
    }
    let mut bg = binarize(g)?;
    let mut weights = g.weights();
    let mut trace = Vec::new();
    let mut counts = Vec::new();
    let mut parsed = 0;
    for it in 1..=cfg.iterations {
        let e = e_step(&bg, corpus, cfg.reproducible)?;
        if e.counts.sentences == 0 {
            return Err(EstimateError::NoParses);
        }
        let prev = trace.last().map(|r: &TraceRow| r.log_likelihood);
        trace.push(TraceRow {
            iteration: it,
            log_likelihood: e.log_likelihood,
            parsed_sentences: e.counts.sentences,
        });
        for lhs in g.lhs_symbols() {
            let rules = g.rules_for(lhs);
            let total: f64 = rules.iter().map(|&r| e.counts.counts[r]).sum();
            if total > 0.0 {
                for &r in rules {
                    weights[r] = e.counts.counts[r] / total;
                }
            }
        }
        bg = bg.with_weights(&weights)?;
        counts = e.counts.counts;
        parsed = e.counts.sentences;
        if converged(cfg, prev, e.log_likelihood) {
            break;
        }
    }
    Ok(EmResult {
        grammar: g.with_weights(&weights)?,
        counts,
        parsed,
        trace,
    })
}

/// Posterior quantities after variational training.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    /// Expected counts from the last E-step.
    pub counts: Vec<f64>,
    /// Dirichlet pseudocounts.
    pub alphas: Vec<f64>,
    /// Posterior means (α + c) / Σ_lhs (α + c).
    pub means: Vec<f64>,
    /// Variational weights used for parsing.
    pub weights: Vec<f64>,
    /// Sentences parsed in the last E-step.
    pub parsed: usize,
    pub trace: Vec<TraceRow>,
}

impl PosteriorSummary {
    /// `g` carrying the posterior means as weights.
    pub fn mean_grammar(&self, g: &Grammar) -> Result<Grammar, GrammarError> {
        g.with_weights(&self.means)
    }
}

fn check_alphas(g: &Grammar, alphas: &[f64]) -> Result<(), EstimateError> {
    if alphas.len() != g.len() {
        return Err(EstimateError::LengthMismatch {
            expected: g.len(),
            found: alphas.len(),
        });
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !(a > 0.0) || !a.is_finite() {
            return Err(EstimateError::NonPositivePseudocount {
                rule: g.rule_string(i),
                value: a,
            });
        }
    }
    Ok(())
}

/// p_r = (α_r + c_r) / Σ_{r' with the same lhs} (α_r' + c_r').
pub fn posterior_mean(g: &Grammar, alphas: &[f64], counts: &[f64]) -> Result<Vec<f64>, EstimateError> {
    check_alphas(g, alphas)?;
    if counts.len() != g.len() {
        return Err(EstimateError::LengthMismatch {
            expected: g.len(),
            found: counts.len(),
        });
    }
    let mut p = vec![0.0; g.len()];
    for lhs in g.lhs_symbols() {
        let rules = g.rules_for(lhs);
        let total: f64 = rules.iter().map(|&r| alphas[r] + counts[r]).sum();
        for &r in rules {
            p[r] = (alphas[r] + counts[r]) / total;
        }
    }
    Ok(p)
}

/// w_r = exp(ψ(α_r + c_r) − ψ(Σ_lhs (α + c))).
pub fn variational_weights(g: &Grammar, alphas: &[f64], counts: &[f64]) -> Result<Vec<f64>, EstimateError> {
    let mut w = vec![0.0; g.len()];
    for lhs in g.lhs_symbols() {
        let rules = g.rules_for(lhs);
        let total: f64 = rules.iter().map(|&r| alphas[r] + counts[r]).sum();
        let psi_total = digamma(total)?;
        for &r in rules {
            w[r] = (digamma(alphas[r] + counts[r])? - psi_total).exp();
        }
    }
    Ok(w)
}

/// Variational Bayes with Dirichlet priors given by the grammar's
/// pseudocounts. Parsing starts from the grammar's weights.
pub fn run_vb(g: &Grammar, corpus: &[Sentence], cfg: &EstimatorConfig) -> Result<PosteriorSummary, EstimateError> {
    cfg.check()?;
    if corpus.is_empty() {
        return Err(EstimateError::EmptyCorpus);
    }
    let alphas = g.pseudocounts();
    check_alphas(g, &alphas)?;
    let mut bg = binarize(g)?;
    let mut weights = g.weights();
    let mut trace = Vec::new();
    let mut counts = Vec::new();
    let mut parsed = 0;
    for it in 1..=cfg.iterations {
        let e = e_step(&bg, corpus, cfg.reproducible)?;
        if e.counts.sentences == 0 {
            return Err(EstimateError::NoParses);
        }
        let prev = trace.last().map(|r: &TraceRow| r.log_likelihood);
        trace.push(TraceRow {
            iteration: it,
            log_likelihood: e.log_likelihood,
            parsed_sentences: e.counts.sentences,
        });
        weights = variational_weights(g, &alphas, &e.counts.counts)?;
        bg = bg.with_weights(&weights)?;
        counts = e.counts.counts;
        parsed = e.counts.sentences;
        if converged(cfg, prev, e.log_likelihood) {
            break;
        }
    }
    let means = posterior_mean(g, &alphas, &counts)?;
    Ok(PosteriorSummary {
        counts,
        alphas,
        means,
        weights,
        parsed,
        trace,
    })
}

/// Multiply every weight by an independent factor in [0.9, 1.1] and
/// renormalize.
pub fn jitter(g: &Grammar, seed: u64) -> Result<Grammar, GrammarError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = g.weights().iter().map(|w| w * rng.gen_range(0.9..=1.1)).collect();
    g.with_weights(&w)?.normalize()
}

#[cfg(test)]
mod tests;
