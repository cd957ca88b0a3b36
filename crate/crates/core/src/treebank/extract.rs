use std::collections::HashSet;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;

use super::{Tree, TreebankError};
use crate::chart;
use crate::format::g17;
use crate::grammar::{binarize, Grammar, RuleSpec, DEFAULT_PSEUDOCOUNT};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleKey {
    pub lhs: String,
    pub rhs: Vec<String>,
    pub lexical: bool,
}

/// Rule occurrence counts over a treebank, in first-occurrence order.
#[derive(Debug, Clone, Default)]
pub struct RuleCounts {
    pub counts: IndexMap<RuleKey, usize>,
    pub lhs_totals: IndexMap<String, usize>,
}

/// Count every internal-node expansion; preterminal → token nodes count as
/// lexicalisations. Traversal is pre-order, trees in input order.
pub fn count_rules(trees: &[Tree]) -> RuleCounts {
    fn visit(t: &Tree, rc: &mut RuleCounts) {
        if let Tree::Node { label, children } = t {
            let key = RuleKey {
                lhs: label.clone(),
                rhs: children.iter().map(|c| c.label().to_owned()).collect(),
                lexical: t.is_preterminal(),
            };
            *rc.counts.entry(key).or_insert(0) += 1;
            *rc.lhs_totals.entry(label.clone()).or_insert(0) += 1;
            for c in children {
                visit(c, rc);
            }
        }
    }
    let mut rc = RuleCounts::default();
    for t in trees {
        visit(t, &mut rc);
    }
    rc
}

fn root_label(trees: &[Tree]) -> Result<&str, TreebankError> {
    let first = trees.first().ok_or(TreebankError::EmptyTreebank)?;
    if first.is_leaf() {
        return Err(TreebankError::LeafRoot { index: 0 });
    }
    let root = first.label();
    for (i, t) in trees.iter().enumerate() {
        if t.is_leaf() {
            return Err(TreebankError::LeafRoot { index: i });
        }
        if t.label() != root {
            return Err(TreebankError::InconsistentRoot {
                index: i,
                found: t.label().to_owned(),
                expected: root.to_owned(),
            });
        }
    }
    Ok(root)
}

/// Read a relative-frequency PCFG off `trees`, dropping productions seen
/// fewer than `min_freq` times.
///
/// Lexicalisations are never pruned. A production whose rhs mentions a
/// category left without any rule is dropped as well, repeatedly, so the
/// result never refers to an unexpandable category. Weights are recomputed
/// over the surviving rules; every pseudocount is 0.1.
pub fn extract_pcfg(trees: &[Tree], min_freq: usize) -> Result<Grammar, TreebankError> {
    let root = root_label(trees)?;
    let counts = count_rules(trees);

    let labels: HashSet<&str> = counts.lhs_totals.keys().map(String::as_str).collect();
    for key in counts.counts.keys().filter(|k| k.lexical) {
        if labels.contains(key.rhs[0].as_str()) {
            return Err(TreebankError::TokenLabelClash(key.rhs[0].clone()));
        }
    }

    let mut kept: Vec<(&RuleKey, usize)> = counts
        .counts
        .iter()
        .filter(|(k, &c)| k.lexical || c >= min_freq)
        .map(|(k, &c)| (k, c))
        .collect();
    loop {
        let expandable: HashSet<&str> = kept.iter().map(|(k, _)| k.lhs.as_str()).collect();
        let before = kept.len();
        kept.retain(|(k, _)| k.lexical || k.rhs.iter().all(|s| expandable.contains(s.as_str())));
        if kept.len() == before {
            break;
        }
    }
    if !kept.iter().any(|(k, _)| k.lhs == root) {
        return Err(TreebankError::StartPruned(root.to_owned()));
    }

    let mut totals: IndexMap<&str, usize> = IndexMap::new();
    for (k, c) in &kept {
        *totals.entry(k.lhs.as_str()).or_insert(0) += c;
    }
    let specs: Vec<RuleSpec> = kept
        .iter()
        .map(|(k, c)| RuleSpec {
            lhs: k.lhs.clone(),
            rhs: k.rhs.clone(),
            weight: *c as f64 / totals[k.lhs.as_str()] as f64,
            pseudocount: DEFAULT_PSEUDOCOUNT,
        })
        .collect();
    Ok(Grammar::from_specs(Some(root), &specs, &[])?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub min_freq: usize,
    pub productions: usize,
    pub lexicalisations: usize,
    /// Fraction of trees whose token string has at least one parse.
    pub coverage: f64,
}

/// Extract a grammar at each threshold and measure how many treebank
/// sentences it can parse.
///
/// A threshold that prunes every rule of the start symbol yields a row
/// with zero productions and zero coverage rather than an error.
pub fn coverage_sweep(trees: &[Tree], thresholds: &[usize]) -> Result<Vec<CoverageRow>, TreebankError> {
    if thresholds.is_empty()
        || thresholds[0] == 0
        || thresholds.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(TreebankError::BadThresholds);
    }
    let sentences: Vec<Vec<String>> = trees.iter().map(Tree::sentence).collect();
    let mut rows = Vec::with_capacity(thresholds.len());
    for &f in thresholds {
        let g = match extract_pcfg(trees, f) {
            Ok(g) => g,
            Err(TreebankError::StartPruned(_)) => {
                let lexicalisations = count_rules(trees).counts.keys().filter(|k| k.lexical).count();
                rows.push(CoverageRow {
                    min_freq: f,
                    productions: 0,
                    lexicalisations,
                    coverage: 0.0,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let bg = binarize(&g)?;
        let parsed: usize = sentences
            .par_iter()
            .map(|s| usize::from(chart::inside(&bg, s).is_parsed()))
            .sum();
        rows.push(CoverageRow {
            min_freq: f,
            productions: g.num_productions(),
            lexicalisations: g.num_lexicalisations(),
            coverage: parsed as f64 / sentences.len() as f64,
        });
    }
    Ok(rows)
}

/// `f_m,productions,lexicalisations,coverage`
pub fn coverage_csv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("f_m,productions,lexicalisations,coverage\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.min_freq,
            r.productions,
            r.lexicalisations,
            g17(r.coverage)
        )
        .unwrap();
    }
    out
}
