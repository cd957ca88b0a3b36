//! Per-sentence charts: inside and outside scores, expected rule counts,
//! Viterbi parsing and a brute-force enumerator.
//!
//! All scores are natural-log probabilities; `-inf` marks an empty cell.

mod enumerate;
mod viterbi;

use thiserror::Error;

use crate::grammar::{BinarizedGrammar, GrammarError, Origin, SymbolId};

pub use enumerate::{enumerate_parses, DEFAULT_ENUMERATION_CAP};
pub use viterbi::{viterbi_parse, ViterbiParse};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("sentence has no parse")]
    Unparsed,
    #[error("outside scores have not been computed")]
    NoOutside,
    #[error("more than {cap} parses")]
    CapExceeded { cap: usize },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseStatus {
    Parsed,
    NoParse,
    OutOfVocabulary { position: usize, token: String },
}

#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Inside (and optionally outside) scores for one sentence.
///
/// Cells are stored for every span `0 <= i < j <= n` in a triangular
/// layout, one score per symbol of the binarized grammar.
#[derive(Debug, Clone)]
pub struct Chart {
    tokens: Vec<String>,
    terminals: Vec<SymbolId>,
    width: usize,
    inside: Vec<f64>,
    active: Vec<Vec<SymbolId>>,
    outside: Option<Vec<f64>>,
    marginal: f64,
    status: ParseStatus,
}

impl Chart {
    fn empty(tokens: Vec<String>, status: ParseStatus) -> Chart {
        Chart {
            tokens,
            terminals: Vec::new(),
            width: 0,
            inside: Vec::new(),
            active: Vec::new(),
            outside: None,
            marginal: f64::NEG_INFINITY,
            status,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn status(&self) -> &ParseStatus {
        &self.status
    }

    pub fn is_parsed(&self) -> bool {
        self.status == ParseStatus::Parsed
    }

    /// log P(sentence); `-inf` when unparsed.
    pub fn marginal(&self) -> f64 {
        self.marginal
    }

    fn cell(&self, i: usize, j: usize) -> usize {
        span_slot(self.len(), i, j)
    }

    /// Inside score of `sym` over tokens `i..j`, `-inf` if absent.
    pub fn inside_score(&self, i: usize, j: usize, sym: SymbolId) -> f64 {
        if self.inside.is_empty() || sym.index() >= self.width || i >= j || j > self.len() {
            return f64::NEG_INFINITY;
        }
        self.inside[self.cell(i, j) * self.width + sym.index()]
    }

    /// Outside score, if the outside pass has run.
    pub fn outside_score(&self, i: usize, j: usize, sym: SymbolId) -> Option<f64> {
        let out = self.outside.as_ref()?;
        if sym.index() >= self.width || i >= j || j > self.len() {
            return Some(f64::NEG_INFINITY);
        }
        Some(out[self.cell(i, j) * self.width + sym.index()])
    }

    /// Symbols with a finite inside score over `i..j`.
    pub fn active(&self, i: usize, j: usize) -> &[SymbolId] {
        if self.active.is_empty() {
            return &[];
        }
        &self.active[self.cell(i, j)]
    }

    pub fn has_outside(&self) -> bool {
        self.outside.is_some()
    }
}

// Triangular slot of span (i, j): rows by start position, row r holding
// the n - r spans that start at r.
#[inline]
fn span_slot(n: usize, i: usize, j: usize) -> usize {
    i * n - i * i.saturating_sub(1) / 2 + (j - i - 1)
}

fn num_slots(n: usize) -> usize {
    n * (n + 1) / 2
}

fn apply_unaries(g: &BinarizedGrammar, scores: &mut [f64]) {
    for &k in g.unary_order() {
        let u = &g.unary_rules()[k];
        let c = scores[u.child.index()];
        if c == f64::NEG_INFINITY || u.log_weight == f64::NEG_INFINITY {
            continue;
        }
        let a = &mut scores[u.lhs.index()];
        *a = log_add(*a, u.log_weight + c);
    }
}

fn finite_symbols(scores: &[f64]) -> Vec<SymbolId> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > f64::NEG_INFINITY)
        .map(|(k, _)| SymbolId(k as u32))
        .collect()
}

/// Map tokens to terminal ids, reporting the first unknown token.
pub(crate) fn lookup_tokens<S: AsRef<str>>(
    g: &BinarizedGrammar,
    sentence: &[S],
) -> Result<Vec<SymbolId>, ParseStatus> {
    sentence
        .iter()
        .enumerate()
        .map(|(position, t)| {
            g.terminal_id(t.as_ref()).ok_or_else(|| ParseStatus::OutOfVocabulary {
                position,
                token: t.as_ref().to_owned(),
            })
        })
        .collect()
}

/// CKY inside pass. Unknown tokens and empty sentences give an unparsed
/// chart rather than an error.
pub fn inside<S: AsRef<str>>(g: &BinarizedGrammar, sentence: &[S]) -> Chart {
    let tokens: Vec<String> = sentence.iter().map(|t| t.as_ref().to_owned()).collect();
    if tokens.is_empty() {
        return Chart::empty(tokens, ParseStatus::NoParse);
    }
    let terminals = match lookup_tokens(g, sentence) {
        Ok(ids) => ids,
        Err(status) => return Chart::empty(tokens, status),
    };
    let n = tokens.len();
    let width = g.num_symbols();
    let mut inside = vec![f64::NEG_INFINITY; num_slots(n) * width];
    let mut active: Vec<Vec<SymbolId>> = vec![Vec::new(); num_slots(n)];

    for (i, &t) in terminals.iter().enumerate() {
        let c = span_slot(n, i, i + 1);
        let scores = &mut inside[c * width..(c + 1) * width];
        for &k in g.lexical_for(t) {
            let r = &g.lexical_rules()[k];
            if r.log_weight > f64::NEG_INFINITY {
                let s = &mut scores[r.preterminal.index()];
                *s = log_add(*s, r.log_weight);
            }
        }
        apply_unaries(g, scores);
        active[c] = finite_symbols(scores);
    }

    let mut acc = vec![f64::NEG_INFINITY; width];
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            acc.fill(f64::NEG_INFINITY);
            for k in i + 1..j {
                let left = span_slot(n, i, k);
                let right = span_slot(n, k, j);
                for &b in &active[left] {
                    let lb = inside[left * width + b.index()];
                    for &r in g.binary_with_left(b) {
                        let rule = &g.binary_rules()[r];
                        let rc = inside[right * width + rule.right.index()];
                        if rc == f64::NEG_INFINITY || rule.log_weight == f64::NEG_INFINITY {
                            continue;
                        }
                        let a = &mut acc[rule.lhs.index()];
                        *a = log_add(*a, rule.log_weight + lb + rc);
                    }
                }
            }
            apply_unaries(g, &mut acc);
            let c = span_slot(n, i, j);
            inside[c * width..(c + 1) * width].copy_from_slice(&acc);
            active[c] = finite_symbols(&acc);
        }
    }

    let marginal = inside[span_slot(n, 0, n) * width + g.start().index()];
    let status = if marginal > f64::NEG_INFINITY {
        ParseStatus::Parsed
    } else {
        ParseStatus::NoParse
    };
    Chart {
        tokens,
        terminals,
        width,
        inside,
        active,
        outside: None,
        marginal,
        status,
    }
}

/// Top-down outside pass over a parsed chart.
pub fn outside(g: &BinarizedGrammar, mut chart: Chart) -> Result<Chart, ChartError> {
    if !chart.is_parsed() {
        return Err(ChartError::Unparsed);
    }
    let n = chart.len();
    let width = chart.width;
    let inside = &chart.inside;
    let mut out = vec![f64::NEG_INFINITY; inside.len()];
    out[span_slot(n, 0, n) * width + g.start().index()] = 0.0;

    for len in (1..=n).rev() {
        for i in 0..=n - len {
            let j = i + len;
            let c = span_slot(n, i, j);
            for &k in g.unary_order().iter().rev() {
                let u = &g.unary_rules()[k];
                let oa = out[c * width + u.lhs.index()];
                if oa == f64::NEG_INFINITY
                    || u.log_weight == f64::NEG_INFINITY
                    || inside[c * width + u.child.index()] == f64::NEG_INFINITY
                {
                    continue;
                }
                let o = &mut out[c * width + u.child.index()];
                *o = log_add(*o, u.log_weight + oa);
            }
            for k in i + 1..j {
                let left = span_slot(n, i, k);
                let right = span_slot(n, k, j);
                for &b in &chart.active[left] {
                    let lb = inside[left * width + b.index()];
                    for &r in g.binary_with_left(b) {
                        let rule = &g.binary_rules()[r];
                        let oa = out[c * width + rule.lhs.index()];
                        let rc = inside[right * width + rule.right.index()];
                        if oa == f64::NEG_INFINITY
                            || rc == f64::NEG_INFINITY
                            || rule.log_weight == f64::NEG_INFINITY
                        {
                            continue;
                        }
                        let ol = &mut out[left * width + b.index()];
                        *ol = log_add(*ol, rule.log_weight + oa + rc);
                        let or = &mut out[right * width + rule.right.index()];
                        *or = log_add(*or, rule.log_weight + oa + lb);
                    }
                }
            }
        }
    }
    chart.outside = Some(out);
    Ok(chart)
}

/// Expected rule counts for the original grammar, with the number of
/// sentences they were collected from.
#[derive(Debug, Clone, PartialEq)]
pub struct CountVector {
    pub counts: Vec<f64>,
    pub sentences: usize,
}

impl CountVector {
    pub fn zeros(num_rules: usize) -> CountVector {
        CountVector {
            counts: vec![0.0; num_rules],
            sentences: 0,
        }
    }

    pub fn merge(&mut self, other: &CountVector) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.sentences += other.sentences;
    }

    pub fn merged(mut self, other: &CountVector) -> CountVector {
        self.merge(other);
        self
    }

    /// Add one sentence's expected counts.
    pub fn add_chart(&mut self, g: &BinarizedGrammar, chart: &Chart) -> Result<(), ChartError> {
        accumulate_counts(g, chart, &mut self.counts)?;
        self.sentences += 1;
        Ok(())
    }
}

pub fn expected_counts(g: &BinarizedGrammar, chart: &Chart) -> Result<CountVector, ChartError> {
    let mut cv = CountVector::zeros(g.base().len());
    cv.add_chart(g, chart)?;
    Ok(cv)
}

/// Add the posterior expected count of every original rule to `counts`.
pub fn accumulate_counts(g: &BinarizedGrammar, chart: &Chart, counts: &mut [f64]) -> Result<(), ChartError> {
    if !chart.is_parsed() {
        return Err(ChartError::Unparsed);
    }
    let out = chart.outside.as_ref().ok_or(ChartError::NoOutside)?;
    let n = chart.len();
    let width = chart.width;
    let inside = &chart.inside;
    let z = chart.marginal;

    for (i, &t) in chart.terminals.iter().enumerate() {
        let c = span_slot(n, i, i + 1);
        for &k in g.lexical_for(t) {
            let r = &g.lexical_rules()[k];
            let o = out[c * width + r.preterminal.index()];
            if o > f64::NEG_INFINITY && r.log_weight > f64::NEG_INFINITY {
                counts[r.origin] += (o + r.log_weight - z).exp();
            }
        }
    }
    for i in 0..n {
        for j in i + 1..=n {
            let c = span_slot(n, i, j);
            for u in g.unary_rules() {
                let o = out[c * width + u.lhs.index()];
                let ic = inside[c * width + u.child.index()];
                if o > f64::NEG_INFINITY && ic > f64::NEG_INFINITY && u.log_weight > f64::NEG_INFINITY {
                    counts[u.origin] += (o + u.log_weight + ic - z).exp();
                }
            }
            for k in i + 1..j {
                let left = span_slot(n, i, k);
                let right = span_slot(n, k, j);
                for &b in &chart.active[left] {
                    let lb = inside[left * width + b.index()];
                    for &r in g.binary_with_left(b) {
                        let rule = &g.binary_rules()[r];
                        let Origin::Rule(origin) = rule.origin else {
                            continue;
                        };
                        let o = out[c * width + rule.lhs.index()];
                        let rc = inside[right * width + rule.right.index()];
                        if o > f64::NEG_INFINITY && rc > f64::NEG_INFINITY && rule.log_weight > f64::NEG_INFINITY {
                            counts[origin] += (o + rule.log_weight + lb + rc - z).exp();
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
