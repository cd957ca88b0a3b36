//! PCFG representation.
//!
//! A [`Grammar`] owns a [`SymbolTable`], a list of [`WeightedRule`]s in a
//! fixed order and a start symbol. Rule order is significant: it is the
//! order of the grammar file, the index space of every per-rule vector
//! (weights, pseudocounts, expected counts) and the tie-breaking order of
//! the Viterbi parser.

mod binarize;
mod format;
mod validate;

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use binarize::{
    binarize, BinarizedGrammar, BinaryRule, Intermediate, LexicalRule, Origin, UnaryRule,
};
pub use format::{parse_grammar_file, write_grammar_file};
pub use validate::{unary_cycles, validate, Diagnostics};

/// Tolerance used when checking that per-lhs weights sum to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Pseudocount given to rules that carry no other prior information.
pub const DEFAULT_PSEUDOCOUNT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate rule {rule}")]
    DuplicateRule { line: usize, rule: String },
    #[error("duplicate rule {rule}")]
    DuplicateRuleSpec { rule: String },
    #[error("line {line}: pseudocount must be positive, got {value}")]
    NonPositivePseudocount { line: usize, value: f64 },
    #[error("rule {rule}: pseudocount must be positive, got {value}")]
    InvalidPseudocount { rule: String, value: f64 },
    #[error("rule {rule}: weight must be finite and nonnegative, got {value}")]
    InvalidWeight { rule: String, value: f64 },
    #[error("rule {rule} mixes terminals with other symbols")]
    MixedRule { rule: String },
    #[error("rule {rule} has an empty right-hand side")]
    EmptyRhs { rule: String },
    #[error("grammar has no rules")]
    NoRules,
    #[error("start symbol {0} is not a nonterminal")]
    StartNotNonterminal(String),
    #[error("weights of {lhs} sum to zero")]
    ZeroMass { lhs: String },
    #[error("unary cycle among nonterminals: {}", .symbols.join(", "))]
    UnaryCycle { symbols: Vec<String> },
    #[error("intermediate symbol {0} collides with an existing symbol")]
    IntermediateCollision(String),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Dense identifier of an interned symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bidirectional mapping between symbol strings and dense ids.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    names: Vec<String>,
    ids: HashMap<String, SymbolId>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> SymbolId {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = SymbolId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<SymbolId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl PartialEq for SymbolTable {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Production,
    Lexicalisation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
    pub kind: RuleKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRule {
    pub rule: Rule,
    pub weight: f64,
    pub pseudocount: f64,
}

/// A rule written with symbol strings, the input form of [`Grammar::from_specs`].
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub lhs: String,
    pub rhs: Vec<String>,
    pub weight: f64,
    pub pseudocount: f64,
}

impl RuleSpec {
    pub fn new(lhs: &str, rhs: &[&str], weight: f64, pseudocount: f64) -> Self {
        RuleSpec {
            lhs: lhs.to_owned(),
            rhs: rhs.iter().map(|s| (*s).to_owned()).collect(),
            weight,
            pseudocount,
        }
    }

    fn display(&self) -> String {
        format!("{} --> {}", self.lhs, self.rhs.join(" "))
    }
}

/// A probabilistic context-free grammar.
#[derive(Debug, Clone)]
pub struct Grammar {
    table: SymbolTable,
    nonterminal: Vec<bool>,
    rules: Vec<WeightedRule>,
    start: SymbolId,
    by_lhs: Vec<Vec<usize>>,
    index: HashMap<(SymbolId, Vec<SymbolId>), usize>,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.table == other.table
            && self.nonterminal == other.nonterminal
            && self.start == other.start
            && self.rules == other.rules
    }
}

impl Grammar {
    /// Build a grammar from string rules.
    ///
    /// Symbols are interned in order of first appearance (lhs before rhs,
    /// rule by rule), then the start symbol and any `extra_nonterminals`
    /// that no rule mentions. A symbol is a nonterminal iff it is some
    /// rule's lhs or is listed in `extra_nonterminals`. `start` defaults to
    /// the lhs of the first rule.
    pub fn from_specs(
        start: Option<&str>,
        specs: &[RuleSpec],
        extra_nonterminals: &[String],
    ) -> Result<Grammar, GrammarError> {
        Self::build(start, specs, extra_nonterminals, None)
    }

    pub(crate) fn build(
        start: Option<&str>,
        specs: &[RuleSpec],
        extra_nonterminals: &[String],
        lines: Option<&[usize]>,
    ) -> Result<Grammar, GrammarError> {
        if specs.is_empty() {
            return Err(GrammarError::NoRules);
        }
        let nt_names: HashSet<&str> = specs
            .iter()
            .map(|s| s.lhs.as_str())
            .chain(extra_nonterminals.iter().map(String::as_str))
            .collect();

        let mut table = SymbolTable::new();
        let mut rules = Vec::with_capacity(specs.len());
        let mut index = HashMap::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if spec.rhs.is_empty() {
                return Err(GrammarError::EmptyRhs { rule: spec.display() });
            }
            if !(spec.pseudocount > 0.0) || !spec.pseudocount.is_finite() {
                return Err(match lines {
                    Some(lines) if spec.pseudocount.is_finite() => {
                        GrammarError::NonPositivePseudocount {
                            line: lines[i],
                            value: spec.pseudocount,
                        }
                    }
                    _ => GrammarError::InvalidPseudocount {
                        rule: spec.display(),
                        value: spec.pseudocount,
                    },
                });
            }
            if !(spec.weight >= 0.0) || !spec.weight.is_finite() {
                return Err(GrammarError::InvalidWeight {
                    rule: spec.display(),
                    value: spec.weight,
                });
            }
            let terminals = spec
                .rhs
                .iter()
                .filter(|s| !nt_names.contains(s.as_str()))
                .count();
            let kind = match (terminals, spec.rhs.len()) {
                (0, _) => RuleKind::Production,
                (1, 1) => RuleKind::Lexicalisation,
                _ => return Err(GrammarError::MixedRule { rule: spec.display() }),
            };
            let lhs = table.intern(&spec.lhs);
            let rhs: Vec<SymbolId> = spec.rhs.iter().map(|s| table.intern(s)).collect();
            if index.insert((lhs, rhs.clone()), i).is_some() {
                return Err(match lines {
                    Some(lines) => GrammarError::DuplicateRule {
                        line: lines[i],
                        rule: spec.display(),
                    },
                    None => GrammarError::DuplicateRuleSpec { rule: spec.display() },
                });
            }
            rules.push(WeightedRule {
                rule: Rule { lhs, rhs, kind },
                weight: spec.weight,
                pseudocount: spec.pseudocount,
            });
        }

        let start_name = start.unwrap_or(&specs[0].lhs);
        if !nt_names.contains(start_name) {
            return Err(GrammarError::StartNotNonterminal(start_name.to_owned()));
        }
        let start = table.intern(start_name);
        for extra in extra_nonterminals {
            table.intern(extra);
        }

        let nonterminal: Vec<bool> = table
            .names()
            .iter()
            .map(|n| nt_names.contains(n.as_str()))
            .collect();
        let mut by_lhs = vec![Vec::new(); table.len()];
        for (i, r) in rules.iter().enumerate() {
            by_lhs[r.rule.lhs.index()].push(i);
        }
        Ok(Grammar {
            table,
            nonterminal,
            rules,
            start,
            by_lhs,
            index,
        })
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn rules(&self) -> &[WeightedRule] {
        &self.rules
    }

    pub fn rule(&self, i: usize) -> &WeightedRule {
        &self.rules[i]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        self.table.name(id)
    }

    pub fn is_nonterminal(&self, id: SymbolId) -> bool {
        self.nonterminal[id.index()]
    }

    /// Indices of the rules whose lhs is `lhs`, in rule order.
    pub fn rules_for(&self, lhs: SymbolId) -> &[usize] {
        &self.by_lhs[lhs.index()]
    }

    /// Nonterminals with at least one rule, in symbol-id order.
    pub fn lhs_symbols(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.table.len())
            .map(|i| SymbolId(i as u32))
            .filter(move |&id| !self.by_lhs[id.index()].is_empty())
    }

    /// Nonterminals, with or without rules, in symbol-id order.
    pub fn nonterminals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.table.len())
            .map(|i| SymbolId(i as u32))
            .filter(move |&id| self.nonterminal[id.index()])
    }

    pub fn terminal_id(&self, token: &str) -> Option<SymbolId> {
        self.table.get(token).filter(|&id| !self.is_nonterminal(id))
    }

    pub fn find_rule(&self, lhs: &str, rhs: &[&str]) -> Option<usize> {
        let lhs = self.table.get(lhs)?;
        let rhs = rhs
            .iter()
            .map(|s| self.table.get(s))
            .collect::<Option<Vec<_>>>()?;
        self.index.get(&(lhs, rhs)).copied()
    }

    pub fn num_productions(&self) -> usize {
        self.rules
            .iter()
            .filter(|r| r.rule.kind == RuleKind::Production)
            .count()
    }

    pub fn num_lexicalisations(&self) -> usize {
        self.rules.len() - self.num_productions()
    }

    /// Number of distinct terminals appearing in lexicalisations.
    pub fn vocabulary_size(&self) -> usize {
        self.rules
            .iter()
            .filter(|r| r.rule.kind == RuleKind::Lexicalisation)
            .map(|r| r.rule.rhs[0])
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.weight).collect()
    }

    pub fn pseudocounts(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.pseudocount).collect()
    }

    pub fn rule_string(&self, i: usize) -> String {
        let r = &self.rules[i].rule;
        let rhs: Vec<&str> = r.rhs.iter().map(|&s| self.name(s)).collect();
        format!("{} --> {}", self.name(r.lhs), rhs.join(" "))
    }

    pub fn specs(&self) -> Vec<RuleSpec> {
        self.rules
            .iter()
            .map(|r| RuleSpec {
                lhs: self.name(r.rule.lhs).to_owned(),
                rhs: r.rule.rhs.iter().map(|&s| self.name(s).to_owned()).collect(),
                weight: r.weight,
                pseudocount: r.pseudocount,
            })
            .collect()
    }

    /// Nonterminals (by name) that have no rules.
    pub fn ruleless_nonterminals(&self) -> Vec<String> {
        self.nonterminals()
            .filter(|&id| self.by_lhs[id.index()].is_empty())
            .map(|id| self.name(id).to_owned())
            .collect()
    }

    pub fn with_weights(&self, weights: &[f64]) -> Result<Grammar, GrammarError> {
        self.check_len(weights.len())?;
        let mut g = self.clone();
        for (r, &w) in g.rules.iter_mut().zip(weights) {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(GrammarError::InvalidWeight {
                    rule: String::new(),
                    value: w,
                });
            }
            r.weight = w;
        }
        Ok(g)
    }

    pub fn with_pseudocounts(&self, pseudocounts: &[f64]) -> Result<Grammar, GrammarError> {
        self.check_len(pseudocounts.len())?;
        let mut g = self.clone();
        for (i, (r, &a)) in g.rules.iter_mut().zip(pseudocounts).enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(GrammarError::InvalidPseudocount {
                    rule: self.rule_string(i),
                    value: a,
                });
            }
            r.pseudocount = a;
        }
        Ok(g)
    }

    pub fn with_constant_pseudocount(&self, alpha: f64) -> Result<Grammar, GrammarError> {
        self.with_pseudocounts(&vec![alpha; self.len()])
    }

    /// Uniform weights per lhs: `1 / |rules of lhs|`.
    pub fn uniform(&self) -> Grammar {
        let mut g = self.clone();
        for rules in &self.by_lhs {
            let w = 1.0 / rules.len() as f64;
            for &i in rules {
                g.rules[i].weight = w;
            }
        }
        g
    }

    /// Rescale weights so that they sum to one for every lhs.
    ///
    /// An lhs whose weights already sum to one within 1e-12 is left
    /// untouched, which makes the operation exactly idempotent.
    pub fn normalize(&self) -> Result<Grammar, GrammarError> {
        let mut g = self.clone();
        for (lhs, rules) in self.by_lhs.iter().enumerate() {
            if rules.is_empty() {
                continue;
            }
            let sum: f64 = rules.iter().map(|&i| self.rules[i].weight).sum();
            if sum <= 0.0 {
                return Err(GrammarError::ZeroMass {
                    lhs: self.table.names()[lhs].clone(),
                });
            }
            if (sum - 1.0).abs() <= 1e-12 {
                continue;
            }
            for &i in rules {
                g.rules[i].weight = self.rules[i].weight / sum;
            }
        }
        Ok(g)
    }

    /// The grammar restricted to the given rules (kept in the given order).
    ///
    /// Symbols are re-interned from scratch, so a subset containing every
    /// rule reproduces `self` exactly. Symbols that are nonterminals here
    /// stay nonterminals in the subset even if none of their rules survive;
    /// the start symbol is always kept.
    pub fn subset(&self, rule_indices: &[usize]) -> Result<Grammar, GrammarError> {
        let specs: Vec<RuleSpec> = {
            let all = self.specs();
            rule_indices.iter().map(|&i| all[i].clone()).collect()
        };
        let mut with_rules: HashSet<&str> = HashSet::new();
        for s in &specs {
            with_rules.insert(s.lhs.as_str());
        }
        let mut extra = Vec::new();
        let mut seen = HashSet::new();
        let start = self.name(self.start);
        if !with_rules.contains(start) {
            seen.insert(start.to_owned());
            extra.push(start.to_owned());
        }
        for s in &specs {
            for sym in &s.rhs {
                let id = self.table.get(sym).expect("rule symbol is interned");
                if self.is_nonterminal(id)
                    && !with_rules.contains(sym.as_str())
                    && seen.insert(sym.clone())
                {
                    extra.push(sym.clone());
                }
            }
        }
        Grammar::from_specs(Some(start), &specs, &extra)
    }

    fn check_len(&self, n: usize) -> Result<(), GrammarError> {
        if n != self.rules.len() {
            return Err(GrammarError::LengthMismatch {
                expected: self.rules.len(),
                found: n,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match write_grammar_file(self) {
            Ok(text) => f.write_str(&text),
            Err(_) => Err(fmt::Error),
        }
    }
}
