//! Right-branching binarisation.
//!
//! A production `A -> B1 B2 ... Bn` with `n > 2` becomes
//!
//! ```text
//! A          -> B1 A|B2...Bn      (weight of the original rule)
//! A|B2...Bn  -> B2 A|B3...Bn      (weight 1)
//! ...
//! A|Bn-1.Bn  -> Bn-1 Bn           (weight 1)
//! ```
//!
//! with the rhs symbols of an intermediate name joined by `.`. Chain tails
//! are shared between productions that end in the same symbols, so a tail
//! rule's origin is its intermediate symbol, while every chain head maps
//! back to exactly one original rule.

use std::collections::HashMap;

use super::{unary_cycles, Grammar, GrammarError, RuleKind, SymbolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// The rule is, or heads the chain of, this original rule.
    Rule(usize),
    /// Weight-1 chain tail expanding this intermediate symbol.
    Chain(SymbolId),
}

impl Origin {
    pub fn rule(self) -> Option<usize> {
        match self {
            Origin::Rule(i) => Some(i),
            Origin::Chain(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRule {
    pub lhs: SymbolId,
    pub left: SymbolId,
    pub right: SymbolId,
    pub log_weight: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnaryRule {
    pub lhs: SymbolId,
    pub child: SymbolId,
    pub log_weight: f64,
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalRule {
    pub preterminal: SymbolId,
    pub terminal: SymbolId,
    pub log_weight: f64,
    pub origin: usize,
}

/// An intermediate symbol and the original rules whose chains pass through it.
#[derive(Debug, Clone, PartialEq)]
pub struct Intermediate {
    pub symbol: SymbolId,
    pub name: String,
    pub used_by: Vec<usize>,
}

/// A grammar in binary/unary/lexical form, ready for chart parsing.
///
/// Symbol ids below `base().table().len()` are those of the base grammar;
/// ids above are intermediate symbols.
#[derive(Debug, Clone)]
pub struct BinarizedGrammar {
    base: Grammar,
    names: Vec<String>,
    intermediates: Vec<Intermediate>,
    binary: Vec<BinaryRule>,
    unary: Vec<UnaryRule>,
    lexical: Vec<LexicalRule>,
    binary_by_left: Vec<Vec<usize>>,
    lexical_by_terminal: Vec<Vec<usize>>,
    unary_order: Vec<usize>,
}

pub fn binarize(g: &Grammar) -> Result<BinarizedGrammar, GrammarError> {
    if let Some(cycle) = unary_cycles(g).into_iter().next() {
        return Err(GrammarError::UnaryCycle {
            symbols: cycle.iter().map(|&s| g.name(s).to_owned()).collect(),
        });
    }

    let mut names: Vec<String> = g.table().names().to_vec();
    let mut inter_ids: HashMap<String, usize> = HashMap::new();
    let mut intermediates: Vec<Intermediate> = Vec::new();
    let mut binary = Vec::new();
    let mut unary = Vec::new();
    let mut lexical = Vec::new();

    for (i, wr) in g.rules().iter().enumerate() {
        let r = &wr.rule;
        let lw = wr.weight.ln();
        match (r.kind, r.rhs.len()) {
            (RuleKind::Lexicalisation, _) => lexical.push(LexicalRule {
                preterminal: r.lhs,
                terminal: r.rhs[0],
                log_weight: lw,
                origin: i,
            }),
            (RuleKind::Production, 1) => unary.push(UnaryRule {
                lhs: r.lhs,
                child: r.rhs[0],
                log_weight: lw,
                origin: i,
            }),
            (RuleKind::Production, 2) => binary.push(BinaryRule {
                lhs: r.lhs,
                left: r.rhs[0],
                right: r.rhs[1],
                log_weight: lw,
                origin: Origin::Rule(i),
            }),
            (RuleKind::Production, n) => {
                let lhs_name = g.name(r.lhs);
                let mut parent = r.lhs;
                for pos in 0..n - 1 {
                    let right = if pos == n - 2 {
                        r.rhs[n - 1]
                    } else {
                        let rest: Vec<&str> = r.rhs[pos + 1..].iter().map(|&s| g.name(s)).collect();
                        let name = format!("{}|{}", lhs_name, rest.join("."));
                        if let Some(&k) = inter_ids.get(&name) {
                            intermediates[k].used_by.push(i);
                            let sym = intermediates[k].symbol;
                            binary.push(BinaryRule {
                                lhs: parent,
                                left: r.rhs[pos],
                                right: sym,
                                log_weight: if pos == 0 { lw } else { 0.0 },
                                origin: if pos == 0 { Origin::Rule(i) } else { Origin::Chain(parent) },
                            });
                            // The rest of the chain already exists.
                            break;
                        }
                        if g.table().get(&name).is_some() {
                            return Err(GrammarError::IntermediateCollision(name));
                        }
                        let sym = SymbolId(names.len() as u32);
                        names.push(name.clone());
                        inter_ids.insert(name.clone(), intermediates.len());
                        intermediates.push(Intermediate {
                            symbol: sym,
                            name,
                            used_by: vec![i],
                        });
                        sym
                    };
                    binary.push(BinaryRule {
                        lhs: parent,
                        left: r.rhs[pos],
                        right,
                        log_weight: if pos == 0 { lw } else { 0.0 },
                        origin: if pos == 0 { Origin::Rule(i) } else { Origin::Chain(parent) },
                    });
                    parent = right;
                }
            }
        }
    }

    let n_sym = names.len();
    let mut binary_by_left = vec![Vec::new(); n_sym];
    for (k, b) in binary.iter().enumerate() {
        binary_by_left[b.left.index()].push(k);
    }
    let mut lexical_by_terminal = vec![Vec::new(); n_sym];
    for (k, l) in lexical.iter().enumerate() {
        lexical_by_terminal[l.terminal.index()].push(k);
    }

    // Children before parents: depth-first post-order over the acyclic
    // unary graph, visiting symbols in id order.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_sym];
    for u in &unary {
        children[u.lhs.index()].push(u.child.index());
    }
    let mut rank = vec![usize::MAX; n_sym];
    let mut next = 0;
    for root in 0..n_sym {
        if rank[root] != usize::MAX {
            continue;
        }
        let mut work = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut c)) = work.last_mut() {
            if *c < children[v].len() {
                let w = children[v][*c];
                *c += 1;
                if rank[w] == usize::MAX {
                    work.push((w, 0));
                }
            } else {
                work.pop();
                if rank[v] == usize::MAX {
                    rank[v] = next;
                    next += 1;
                }
            }
        }
    }
    let mut unary_order: Vec<usize> = (0..unary.len()).collect();
    unary_order.sort_by_key(|&k| (rank[unary[k].lhs.index()], k));

    Ok(BinarizedGrammar {
        base: g.clone(),
        names,
        intermediates,
        binary,
        unary,
        lexical,
        binary_by_left,
        lexical_by_terminal,
        unary_order,
    })
}

impl BinarizedGrammar {
    pub fn base(&self) -> &Grammar {
        &self.base
    }

    pub fn num_symbols(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, s: SymbolId) -> &str {
        &self.names[s.index()]
    }

    pub fn is_intermediate(&self, s: SymbolId) -> bool {
        s.index() >= self.base.table().len()
    }

    pub fn start(&self) -> SymbolId {
        self.base.start()
    }

    pub fn intermediates(&self) -> &[Intermediate] {
        &self.intermediates
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary
    }

    pub fn unary_rules(&self) -> &[UnaryRule] {
        &self.unary
    }

    pub fn lexical_rules(&self) -> &[LexicalRule] {
        &self.lexical
    }

    /// Binary rule indices whose left child is `s`.
    pub fn binary_with_left(&self, s: SymbolId) -> &[usize] {
        &self.binary_by_left[s.index()]
    }

    /// Lexical rule indices producing terminal `t`.
    pub fn lexical_for(&self, t: SymbolId) -> &[usize] {
        &self.lexical_by_terminal[t.index()]
    }

    /// Unary rule indices ordered so that every rule appears after all
    /// rules whose lhs is its child.
    pub fn unary_order(&self) -> &[usize] {
        &self.unary_order
    }

    pub fn terminal_id(&self, token: &str) -> Option<SymbolId> {
        self.base.terminal_id(token)
    }

    /// Same structure with new weights for the original rules.
    pub fn with_weights(&self, weights: &[f64]) -> Result<BinarizedGrammar, GrammarError> {
        let base = self.base.with_weights(weights)?;
        let mut out = self.clone();
        for b in &mut out.binary {
            if let Origin::Rule(i) = b.origin {
                b.log_weight = weights[i].ln();
            }
        }
        for u in &mut out.unary {
            u.log_weight = weights[u.origin].ln();
        }
        for l in &mut out.lexical {
            l.log_weight = weights[l.origin].ln();
        }
        out.base = base;
        Ok(out)
    }
}
