use super::{lookup_tokens, span_slot, num_slots};
use crate::grammar::{BinarizedGrammar, Origin, SymbolId};
use crate::treebank::Tree;

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiParse {
    pub tree: Tree,
    pub log_prob: f64,
}

#[derive(Debug, Clone, Copy)]
enum Back {
    None,
    Lexical,
    Unary { child: SymbolId },
    Binary { rule: usize, split: usize },
}

// Candidates with equal scores are ordered by (original rule, binarized
// rule, split point); the smallest wins.
type Key = (usize, usize, usize);

struct Best {
    score: f64,
    key: Key,
    back: Back,
}

impl Best {
    const EMPTY: Best = Best {
        score: f64::NEG_INFINITY,
        key: (usize::MAX, usize::MAX, usize::MAX),
        back: Back::None,
    };

    fn offer(&mut self, score: f64, key: Key, back: Back) {
        if score == f64::NEG_INFINITY {
            return;
        }
        if score > self.score || (score == self.score && key < self.key) {
            *self = Best { score, key, back };
        }
    }
}

fn origin_key(o: Origin) -> usize {
    o.rule().unwrap_or(usize::MAX)
}

/// Most probable parse. `None` when the sentence has no parse (including
/// unknown tokens). Binarization symbols are spliced out of the tree.
pub fn viterbi_parse<S: AsRef<str>>(g: &BinarizedGrammar, sentence: &[S]) -> Option<ViterbiParse> {
    if sentence.is_empty() {
        return None;
    }
    let terminals = lookup_tokens(g, sentence).ok()?;
    let n = terminals.len();
    let width = g.num_symbols();
    let mut chart: Vec<Best> = (0..num_slots(n) * width).map(|_| Best::EMPTY).collect();

    let unaries = |cell: &mut [Best]| {
        for &k in g.unary_order() {
            let u = &g.unary_rules()[k];
            let c = cell[u.child.index()].score;
            cell[u.lhs.index()].offer(
                u.log_weight + c,
                (u.origin, k, 0),
                Back::Unary { child: u.child },
            );
        }
    };

    for (i, &t) in terminals.iter().enumerate() {
        let c = span_slot(n, i, i + 1);
        let cell = &mut chart[c * width..(c + 1) * width];
        for &k in g.lexical_for(t) {
            let r = &g.lexical_rules()[k];
            cell[r.preterminal.index()].offer(r.log_weight, (r.origin, k, 0), Back::Lexical);
        }
        unaries(cell);
    }

    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            let c = span_slot(n, i, j);
            for k in i + 1..j {
                let left = span_slot(n, i, k);
                let right = span_slot(n, k, j);
                for b in 0..width {
                    let lb = chart[left * width + b].score;
                    if lb == f64::NEG_INFINITY {
                        continue;
                    }
                    for &r in g.binary_with_left(SymbolId(b as u32)) {
                        let rule = &g.binary_rules()[r];
                        let rc = chart[right * width + rule.right.index()].score;
                        if rc == f64::NEG_INFINITY {
                            continue;
                        }
                        chart[c * width + rule.lhs.index()].offer(
                            rule.log_weight + lb + rc,
                            (origin_key(rule.origin), r, k),
                            Back::Binary { rule: r, split: k },
                        );
                    }
                }
            }
            unaries(&mut chart[c * width..(c + 1) * width]);
        }
    }

    let top = &chart[span_slot(n, 0, n) * width + g.start().index()];
    if top.score == f64::NEG_INFINITY {
        return None;
    }
    let log_prob = top.score;
    let builder = Builder {
        g,
        chart: &chart,
        n,
        width,
        tokens: sentence.iter().map(|t| t.as_ref()).collect(),
    };
    Some(ViterbiParse {
        tree: builder.tree(g.start(), 0, n),
        log_prob,
    })
}

struct Builder<'a> {
    g: &'a BinarizedGrammar,
    chart: &'a [Best],
    n: usize,
    width: usize,
    tokens: Vec<&'a str>,
}

impl Builder<'_> {
    fn back(&self, sym: SymbolId, i: usize, j: usize) -> Back {
        self.chart[span_slot(self.n, i, j) * self.width + sym.index()].back
    }

    fn tree(&self, sym: SymbolId, i: usize, j: usize) -> Tree {
        let label = self.g.name(sym);
        match self.back(sym, i, j) {
            Back::Lexical => Tree::preterminal(label, self.tokens[i]),
            Back::Unary { child } => Tree::node(label, vec![self.tree(child, i, j)]),
            Back::Binary { .. } => Tree::node(label, self.children(sym, i, j)),
            Back::None => unreachable!("backpointer into an empty cell"),
        }
    }

    // Children of a binary node, flattening right-branching intermediates.
    fn children(&self, sym: SymbolId, i: usize, j: usize) -> Vec<Tree> {
        let Back::Binary { rule, split } = self.back(sym, i, j) else {
            unreachable!("intermediate symbols only expand through binary rules")
        };
        let r = &self.g.binary_rules()[rule];
        let mut out = vec![self.tree(r.left, i, split)];
        if self.g.is_intermediate(r.right) {
            out.extend(self.children(r.right, split, j));
        } else {
            out.push(self.tree(r.right, split, j));
        }
        out
    }
}
