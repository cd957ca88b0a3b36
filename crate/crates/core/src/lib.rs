//! Staged grammar induction for probabilistic context-free grammars.
//!
//! The crate is organised around the pipeline it supports:
//!
//! - [`grammar`]: PCFG representation, the rule-line file format, normalisation
//!   and binarisation into the binary/unary/lexical form the chart parser needs.
//! - [`treebank`]: bracketed tree reading, oracle grammar extraction with a
//!   production frequency threshold, coverage sweeps and bracket sets.
//! - [`chart`]: log-domain inside/outside, expected rule counts, Viterbi
//!   parsing and a brute-force parse enumerator used as a test oracle.
//! - [`estimate`]: EM and variational Bayes re-estimation over a corpus.
//! - [`curriculum`]: stage plans, rule-to-stage assignment, cross-stage
//!   pseudocount transfer and the multi-stage training loop.
//! - [`eval`]: unlabelled bracketing F1, Jensen-Shannon divergence, mean
//!   length-normalised log-likelihood, the Wilcoxon signed-rank test and
//!   report files.

pub mod chart;
pub mod curriculum;
pub mod estimate;
pub mod eval;
pub mod format;
pub mod grammar;
pub mod treebank;

/// A tokenised sentence.
pub type Sentence = Vec<String>;

/// Split whitespace-separated lines into sentences, skipping blank lines.
pub fn read_sentences(text: &str) -> Vec<Sentence> {
    text.lines()
        .map(|line| line.split_whitespace().map(str::to_owned).collect::<Sentence>())
        .filter(|s| !s.is_empty())
        .collect()
}
