//! Evaluation: unlabelled bracket F1, per-category Jensen-Shannon
//! divergence, length-normalized log-likelihood and the paired Wilcoxon
//! signed-rank test.

mod report;
mod wilcoxon;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{self, ParseStatus};
use crate::grammar::{binarize, Grammar, GrammarError};
use crate::treebank::{tree_to_brackets_with, BracketOptions, Tree};
use crate::Sentence;

pub use report::{jsd_per_nt_csv, metrics_csv, write_report, StageMetrics};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, WilcoxonOptions, WilcoxonResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{gold} gold trees but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("sentence {index}: predicted tree has a different yield from the gold tree")]
    YieldMismatch { index: usize },
    #[error("distributions have {p} and {q} outcomes")]
    DimensionMismatch { p: usize, q: usize },
    #[error("probability {0} is negative or not finite")]
    BadProbability(f64),
    #[error("probabilities sum to {0}, not 1")]
    BadSum(f64),
    #[error("log base must be positive and not 1, got {0}")]
    BadBase(f64),
    #[error("{0} is not a category of the reference grammar")]
    UnknownNonterminal(String),
    #[error("sentence {index} is empty")]
    EmptySentence { index: usize },
    #[error("every pair is tied")]
    AllTied,
    #[error("pair {index} is not finite")]
    NonFinitePair { index: usize },
    #[error("no stages to report")]
    EmptyReport,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Result {
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Result {
    fn from_counts(matched: usize, gold: usize, predicted: usize) -> F1Result {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        F1Result {
            matched,
            gold,
            predicted,
            precision,
            recall,
            f1,
        }
    }
}

/// Micro-averaged unlabelled bracket F1. A `None` prediction (no parse)
/// contributes its gold brackets and nothing else.
pub fn unlabelled_f1(gold: &[Tree], predicted: &[Option<Tree>], opts: BracketOptions) -> Result<F1Result, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let (mut matched, mut n_gold, mut n_pred) = (0, 0, 0);
    for (index, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let gb = tree_to_brackets_with(g, opts);
        n_gold += gb.len();
        if let Some(p) = p {
            if p.tokens() != g.tokens() {
                return Err(EvalError::YieldMismatch { index });
            }
            let pb = tree_to_brackets_with(p, opts);
            n_pred += pb.len();
            matched += gb.unlabelled_matches(&pb);
        }
    }
    Ok(F1Result::from_counts(matched, n_gold, n_pred))
}

fn check_distribution(p: &[f64]) -> Result<(), EvalError> {
    if let Some(&x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(EvalError::BadProbability(x));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EvalError::BadSum(sum));
    }
    Ok(())
}

/// Jensen-Shannon divergence in bits.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, EvalError> {
    jsd_with_base(p, q, 2.0)
}

/// Jensen-Shannon divergence with logarithms to `base`. Each outcome's
/// contribution is computed symmetrically in `p` and `q`, so swapping the
/// arguments gives exactly the same value.
pub fn jsd_with_base(p: &[f64], q: &[f64], base: f64) -> Result<f64, EvalError> {
    if !(base > 0.0) || base == 1.0 || !base.is_finite() {
        return Err(EvalError::BadBase(base));
    }
    if p.len() != q.len() {
        return Err(EvalError::DimensionMismatch { p: p.len(), q: q.len() });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let half_kl = |a: f64, m: f64| if a > 0.0 { 0.5 * a * (a / m).ln() } else { 0.0 };
    let nats: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            half_kl(a, m) + half_kl(b, m)
        })
        .sum();
    let upper = std::f64::consts::LN_2 / base.ln();
    Ok((nats / base.ln()).clamp(0.0, upper.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsdOptions {
    pub base: f64,
    /// Leave categories without rules in the induced grammar out of the mean.
    pub exclude_unavailable: bool,
}

impl Default for JsdOptions {
    fn default() -> Self {
        JsdOptions {
            base: 2.0,
            exclude_unavailable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NtDivergence {
    pub nt: String,
    pub jsd: f64,
    /// False when the induced grammar has no rule for this category; the
    /// divergence is then reported as the maximum.
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsdReport {
    pub entries: Vec<NtDivergence>,
    /// Mean over the entries that count towards it; NaN if there are none.
    pub mean: f64,
    pub base: f64,
}

fn renormalized(mut v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    }
    v
}

/// Compare the expansion distribution of every category of `oracle` (or of
/// `nts`, in the given order) with that of `induced`. Rules missing on one
/// side have probability 0 there.
pub fn per_nt_jsd(
    oracle: &Grammar,
    induced: &Grammar,
    nts: Option<&[String]>,
    opts: JsdOptions,
) -> Result<JsdReport, EvalError> {
    let names: Vec<String> = match nts {
        Some(list) => {
            for nt in list {
                let known = oracle.table().get(nt).is_some_and(|s| !oracle.rules_for(s).is_empty());
                if !known {
                    return Err(EvalError::UnknownNonterminal(nt.clone()));
                }
            }
            list.to_vec()
        }
        None => oracle.lhs_symbols().map(|s| oracle.name(s).to_owned()).collect(),
    };
    let upper = (std::f64::consts::LN_2 / opts.base.ln()).abs();
    let mut entries = Vec::with_capacity(names.len());
    for nt in names {
        let a = oracle.table().get(&nt).expect("checked above");
        let induced_rules: Vec<usize> = induced
            .table()
            .get(&nt)
            .map(|s| induced.rules_for(s).to_vec())
            .unwrap_or_default();
        if induced_rules.is_empty() {
            entries.push(NtDivergence {
                nt,
                jsd: upper,
                available: false,
            });
            continue;
        }
        let mut keys: Vec<Vec<String>> = Vec::new();
        let mut seen = HashSet::new();
        let rhs_names = |g: &Grammar, r: usize| -> Vec<String> {
            g.rule(r).rule.rhs.iter().map(|&s| g.name(s).to_owned()).collect()
        };
        for &r in oracle.rules_for(a) {
            let k = rhs_names(oracle, r);
            if seen.insert(k.clone()) {
                keys.push(k);
            }
        }
        for &r in &induced_rules {
            let k = rhs_names(induced, r);
            if seen.insert(k.clone()) {
                keys.push(k);
            }
        }
        let prob = |g: &Grammar, k: &[String]| {
            let rhs: Vec<&str> = k.iter().map(String::as_str).collect();
            g.find_rule(&nt, &rhs).map_or(0.0, |r| g.rule(r).weight)
        };
        let p = renormalized(keys.iter().map(|k| prob(oracle, k)).collect());
        let q = renormalized(keys.iter().map(|k| prob(induced, k)).collect());
        let d = jsd_with_base(&p, &q, opts.base)?;
        entries.push(NtDivergence {
            nt,
            jsd: d,
            available: true,
        });
    }
    let counted: Vec<f64> = entries
        .iter()
        .filter(|e| e.available || !opts.exclude_unavailable)
        .map(|e| e.jsd)
        .collect();
    let mean = if counted.is_empty() {
        f64::NAN
    } else {
        counted.iter().sum::<f64>() / counted.len() as f64
    };
    Ok(JsdReport {
        entries,
        mean,
        base: opts.base,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceLoglik {
    pub length: usize,
    /// Natural-log marginal; `None` when skipped.
    pub log_marginal: Option<f64>,
    /// The unknown token that caused the sentence to be skipped, if any.
    pub unknown_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoglikReport {
    /// (1/N) Σ ℓ_i / T_i over scored sentences; NaN if none was scored.
    pub mean: f64,
    pub scored: usize,
    pub skipped: usize,
    pub sentences: Vec<SentenceLoglik>,
}

/// Mean per-token log marginal over the sentences `g` can parse.
/// Sentences with unknown tokens or without a parse are skipped.
pub fn mean_sentence_loglik(g: &Grammar, sentences: &[Sentence]) -> Result<LoglikReport, EvalError> {
    if let Some(index) = sentences.iter().position(|s| s.is_empty()) {
        return Err(EvalError::EmptySentence { index });
    }
    let bg = binarize(g)?;
    let records: Vec<SentenceLoglik> = sentences
        .par_iter()
        .map(|s| {
            let c = chart::inside(&bg, s);
            let unknown_token = match c.status() {
                ParseStatus::OutOfVocabulary { token, .. } => Some(token.clone()),
                _ => None,
            };
            SentenceLoglik {
                length: s.len(),
                log_marginal: c.is_parsed().then(|| c.marginal()),
                unknown_token,
            }
        })
        .collect();
    let mut total = 0.0;
    let mut scored = 0;
    for r in &records {
        if let Some(l) = r.log_marginal {
            total += l / r.length as f64;
            scored += 1;
        }
    }
    Ok(LoglikReport {
        mean: if scored == 0 { f64::NAN } else { total / scored as f64 },
        scored,
        skipped: records.len() - scored,
        sentences: records,
    })
}

#[cfg(test)]
mod tests;
