use std::collections::BTreeMap;

use super::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BracketOptions {
    /// Count the bracket of the top node.
    pub include_root: bool,
}

impl Default for BracketOptions {
    fn default() -> Self {
        BracketOptions { include_root: true }
    }
}

/// Multiset of labelled constituent spans `(start, end, label)` with
/// `end - start >= 2`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BracketSet {
    spans: BTreeMap<(usize, usize, String), usize>,
}

impl BracketSet {
    pub fn spans(&self) -> &BTreeMap<(usize, usize, String), usize> {
        &self.spans
    }

    /// Total number of brackets, counting multiplicity.
    pub fn len(&self) -> usize {
        self.spans.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Spans with labels dropped, multiplicities merged.
    pub fn unlabelled(&self) -> BTreeMap<(usize, usize), usize> {
        let mut out = BTreeMap::new();
        for ((s, e, _), n) in &self.spans {
            *out.entry((*s, *e)).or_insert(0) += n;
        }
        out
    }

    /// Size of the multiset intersection of the unlabelled spans.
    pub fn unlabelled_matches(&self, other: &BracketSet) -> usize {
        let mine = self.unlabelled();
        let theirs = other.unlabelled();
        mine.iter()
            .map(|(span, &n)| n.min(theirs.get(span).copied().unwrap_or(0)))
            .sum()
    }
}

pub fn tree_to_brackets(t: &Tree) -> BracketSet {
    tree_to_brackets_with(t, BracketOptions::default())
}

pub fn tree_to_brackets_with(t: &Tree, opts: BracketOptions) -> BracketSet {
    let mut set = BracketSet::default();
    collect(t, 0, true, opts, &mut set);
    set
}

fn collect(t: &Tree, start: usize, is_root: bool, opts: BracketOptions, set: &mut BracketSet) -> usize {
    match t {
        Tree::Leaf(_) => start + 1,
        Tree::Node { label, children } => {
            let mut end = start;
            for c in children {
                end = collect(c, end, false, opts, set);
            }
            if end - start >= 2 && (opts.include_root || !is_root) {
                *set.spans.entry((start, end, label.clone())).or_insert(0) += 1;
            }
            end
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_trees;
    use proptest::prelude::*;

    fn spans(line: &str) -> Vec<(usize, usize, String)> {
        let t = &parse_trees(line).unwrap()[0];
        tree_to_brackets(t).spans().keys().cloned().collect()
    }

    #[test]
    fn two_token_tree() {
        assert_eq!(
            spans("(ROOT (S (NP (PRP you)) (VP (VB go))))"),
            vec![(0, 2, "ROOT".to_owned()), (0, 2, "S".to_owned())]
        );
    }

    #[test]
    fn single_token_tree_is_empty() {
        assert!(spans("(ROOT (INTJ (UH hi)))").is_empty());
    }

    #[test]
    fn flat_tree() {
        assert_eq!(
            spans("(ROOT (S (A a) (B b) (C c)))"),
            vec![(0, 3, "ROOT".to_owned()), (0, 3, "S".to_owned())]
        );
    }

    #[test]
    fn root_flag_and_multiplicity() {
        let t = &parse_trees("(ROOT (S (S (A a) (B b))))").unwrap()[0];
        let all = tree_to_brackets(t);
        assert_eq!(all.len(), 3);
        assert_eq!(all.spans()[&(0, 2, "S".to_owned())], 2);
        let no_root = tree_to_brackets_with(t, BracketOptions { include_root: false });
        assert_eq!(no_root.len(), 2);
    }

    fn arb_tree() -> impl Strategy<Value = Tree> {
        let leaf = "[a-c]".prop_map(|t| Tree::preterminal("P", t));
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop::collection::vec(inner, 1..4).prop_map(|cs| Tree::node("X", cs))
        })
    }

    proptest! {
        #[test]
        fn spans_nest_or_are_disjoint(t in arb_tree()) {
            let b = tree_to_brackets(&t);
            prop_assert!(b.len() <= t.internal_nodes());
            let spans: Vec<(usize, usize)> = b.unlabelled().keys().copied().collect();
            for &(s1, e1) in &spans {
                prop_assert!(e1 - s1 >= 2 && e1 <= t.yield_len());
                for &(s2, e2) in &spans {
                    let crossing = s1 < s2 && s2 < e1 && e1 < e2;
                    prop_assert!(!crossing);
                }
            }
        }
    }
}
