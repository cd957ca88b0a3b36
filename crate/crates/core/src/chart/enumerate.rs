use std::collections::HashMap;
use std::rc::Rc;

use super::ChartError;
use crate::grammar::{unary_cycles, Grammar, GrammarError, RuleKind, SymbolId};
use crate::treebank::Tree;

pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;

type Parses = Rc<Vec<(Tree, f64)>>;

struct Enumerator<'a> {
    g: &'a Grammar,
    tokens: &'a [SymbolId],
    words: Vec<&'a str>,
    cap: usize,
    memo: HashMap<(SymbolId, usize, usize), Parses>,
}

impl Enumerator<'_> {
    fn check(&self, len: usize) -> Result<(), ChartError> {
        if len > self.cap {
            Err(ChartError::CapExceeded { cap: self.cap })
        } else {
            Ok(())
        }
    }

    fn parses(&mut self, sym: SymbolId, i: usize, j: usize) -> Result<Parses, ChartError> {
        if let Some(p) = self.memo.get(&(sym, i, j)) {
            return Ok(p.clone());
        }
        let mut out: Vec<(Tree, f64)> = Vec::new();
        let label = self.g.name(sym).to_owned();
        for &ri in self.g.rules_for(sym) {
            let wr = self.g.rule(ri);
            let rhs = &wr.rule.rhs;
            if wr.rule.kind == RuleKind::Lexicalisation {
                if j == i + 1 && rhs[0] == self.tokens[i] {
                    out.push((Tree::preterminal(label.clone(), self.words[i]), wr.weight));
                }
                continue;
            }
            if rhs.len() > j - i {
                continue;
            }
            // Every way of cutting i..j into rhs.len() nonempty pieces.
            let mut partial: Vec<(Vec<Tree>, f64, usize)> = vec![(Vec::new(), wr.weight, i)];
            for (pos, &child) in rhs.iter().enumerate() {
                let remaining = rhs.len() - pos - 1;
                let mut next = Vec::new();
                for (trees, p, start) in &partial {
                    let last = if remaining == 0 { j } else { j - remaining };
                    let first = if remaining == 0 { j } else { start + 1 };
                    for end in first..=last {
                        if end <= *start {
                            continue;
                        }
                        let sub = self.parses(child, *start, end)?;
                        for (t, q) in sub.iter() {
                            let mut ts = trees.clone();
                            ts.push(t.clone());
                            next.push((ts, p * q, end));
                            self.check(next.len())?;
                        }
                    }
                }
                partial = next;
            }
            for (children, p, _) in partial {
                out.push((Tree::node(label.clone(), children), p));
                self.check(out.len())?;
            }
        }
        let out = Rc::new(out);
        self.memo.insert((sym, i, j), out.clone());
        Ok(out)
    }
}

/// Every parse of `sentence` under the unbinarized grammar with its
/// probability, by exhaustive span splitting. Test oracle only.
///
/// Returns an empty list when there is no parse, and an error once more
/// than `cap` parses of any constituent are found.
pub fn enumerate_parses<S: AsRef<str>>(
    g: &Grammar,
    sentence: &[S],
    cap: usize,
) -> Result<Vec<(Tree, f64)>, ChartError> {
    if let Some(cycle) = unary_cycles(g).into_iter().next() {
        return Err(GrammarError::UnaryCycle {
            symbols: cycle.iter().map(|&s| g.name(s).to_owned()).collect(),
        }
        .into());
    }
    let Some(tokens) = sentence
        .iter()
        .map(|t| g.terminal_id(t.as_ref()))
        .collect::<Option<Vec<_>>>()
    else {
        return Ok(Vec::new());
    };
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let mut e = Enumerator {
        g,
        tokens: &tokens,
        words: sentence.iter().map(|t| t.as_ref()).collect(),
        cap,
        memo: HashMap::new(),
    };
    let top = e.parses(g.start(), 0, tokens.len())?;
    Ok(top.iter().filter(|(_, p)| *p > 0.0).cloned().collect())
}
