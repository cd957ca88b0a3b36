//! Bracketed treebanks: reading, oracle grammar extraction and bracket sets.

mod brackets;
mod extract;
mod tree;

use thiserror::Error;

use crate::grammar::GrammarError;

pub use brackets::{tree_to_brackets, tree_to_brackets_with, BracketOptions, BracketSet};
pub use extract::{
    count_rules, coverage_csv, coverage_sweep, extract_pcfg, CoverageRow, RuleCounts, RuleKey,
};
pub use tree::{parse_trees, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreebankError {
    #[error("line {line}: unbalanced parentheses")]
    Unbalanced { line: usize },
    #[error("line {line}: node with no children")]
    EmptyNode { line: usize },
    #[error("line {line}: node {label} mixes bare tokens with other children")]
    MixedChildren { line: usize, label: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("treebank is empty")]
    EmptyTreebank,
    #[error("tree {index} is rooted at {found}, expected {expected}")]
    InconsistentRoot {
        index: usize,
        found: String,
        expected: String,
    },
    #[error("tree {index} is a bare token")]
    LeafRoot { index: usize },
    #[error("token {0} is also used as a category label")]
    TokenLabelClash(String),
    #[error("every rule of the start symbol {0} was pruned")]
    StartPruned(String),
    #[error("frequency thresholds must be positive and ascending")]
    BadThresholds,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// Keep trees whose yield is longer than `min_len` tokens.
pub fn filter_sentences(trees: Vec<Tree>, min_len: usize) -> Vec<Tree> {
    trees.into_iter().filter(|t| t.yield_len() > min_len).collect()
}
