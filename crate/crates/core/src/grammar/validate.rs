use std::collections::VecDeque;

use super::{Grammar, RuleKind, SymbolId, SUM_TOLERANCE};

/// Structural problems found by [`validate`]. Empty means clean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub unreachable: Vec<String>,
    pub no_lexical_yield: Vec<String>,
    pub unary_cycles: Vec<Vec<String>>,
    pub bad_weight_sums: Vec<(String, f64)>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.unreachable.is_empty()
            && self.no_lexical_yield.is_empty()
            && self.unary_cycles.is_empty()
            && self.bad_weight_sums.is_empty()
    }
}

pub fn validate(g: &Grammar) -> Diagnostics {
    let n = g.table().len();

    let mut reachable = vec![false; n];
    let mut queue = VecDeque::from([g.start()]);
    reachable[g.start().index()] = true;
    while let Some(a) = queue.pop_front() {
        for &i in g.rules_for(a) {
            for &s in &g.rule(i).rule.rhs {
                if g.is_nonterminal(s) && !reachable[s.index()] {
                    reachable[s.index()] = true;
                    queue.push_back(s);
                }
            }
        }
    }

    // Least fixed point of "some rule has an all-productive rhs".
    let mut productive = vec![false; n];
    let mut changed = true;
    while changed {
        changed = false;
        for r in g.rules() {
            if productive[r.rule.lhs.index()] {
                continue;
            }
            let ok = r
                .rule
                .rhs
                .iter()
                .all(|&s| !g.is_nonterminal(s) || productive[s.index()]);
            if ok {
                productive[r.rule.lhs.index()] = true;
                changed = true;
            }
        }
    }

    let mut d = Diagnostics::default();
    for nt in g.nonterminals() {
        if !reachable[nt.index()] {
            d.unreachable.push(g.name(nt).to_owned());
        }
        if !productive[nt.index()] {
            d.no_lexical_yield.push(g.name(nt).to_owned());
        }
    }
    d.unary_cycles = unary_cycles(g)
        .into_iter()
        .map(|c| c.into_iter().map(|s| g.name(s).to_owned()).collect())
        .collect();
    for lhs in g.lhs_symbols() {
        let sum: f64 = g.rules_for(lhs).iter().map(|&i| g.rule(i).weight).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            d.bad_weight_sums.push((g.name(lhs).to_owned(), sum));
        }
    }
    d
}

/// Strongly connected components of the unary production graph that
/// contain a cycle (size > 1, or a self-loop), each sorted by symbol id.
pub fn unary_cycles(g: &Grammar) -> Vec<Vec<SymbolId>> {
    let n = g.table().len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for r in g.rules() {
        if r.rule.kind == RuleKind::Production && r.rule.rhs.len() == 1 {
            let (a, b) = (r.rule.lhs.index(), r.rule.rhs[0].index());
            succ[a].push(b);
            if a == b {
                self_loop[a] = true;
            }
        }
    }

    // Iterative Tarjan.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0usize;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX || succ[root].is_empty() {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child < succ[v].len() {
                let w = succ[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(SymbolId(w as u32));
                        if w == v {
                            break;
                        }
                    }
                    if comp.len() > 1 || self_loop[v] {
                        comp.sort();
                        out.push(comp);
                    }
                }
            }
        }
    }
    out.sort();
    out
}
