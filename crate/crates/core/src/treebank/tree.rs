use std::fmt;

use super::TreebankError;

/// A labelled ordered tree. Internal nodes carry a category label, leaves a token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Node { label: String, children: Vec<Tree> },
    Leaf(String),
}

impl Tree {
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(token: impl Into<String>) -> Tree {
        Tree::Leaf(token.into())
    }

    /// `(label token)`.
    pub fn preterminal(label: impl Into<String>, token: impl Into<String>) -> Tree {
        Tree::node(label, vec![Tree::leaf(token)])
    }

    /// The category label, or the token for a leaf.
    pub fn label(&self) -> &str {
        match self {
            Tree::Node { label, .. } => label,
            Tree::Leaf(token) => token,
        }
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Node { children, .. } => children,
            Tree::Leaf(_) => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    pub fn is_preterminal(&self) -> bool {
        matches!(self, Tree::Node { children, .. } if children.len() == 1 && children[0].is_leaf())
    }

    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf(t) => out.push(t),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_tokens(out)),
        }
    }

    /// The yield as owned strings.
    pub fn sentence(&self) -> Vec<String> {
        self.tokens().into_iter().map(str::to_owned).collect()
    }

    pub fn yield_len(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::yield_len).sum(),
        }
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => 1 + children.iter().map(Tree::internal_nodes).sum::<usize>(),
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(t) => f.write_str(t),
            Tree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token::Atom(&line[s..i]));
            }
            match c {
                '(' => out.push(Token::Open),
                ')' => out.push(Token::Close),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token::Atom(&line[s..]));
    }
    out
}

struct LineParser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn malformed(&self, message: &str) -> TreebankError {
        TreebankError::Malformed {
            line: self.line,
            message: message.to_owned(),
        }
    }

    fn unbalanced(&self) -> TreebankError {
        TreebankError::Unbalanced { line: self.line }
    }

    // Called with `pos` just past an opening parenthesis.
    fn node(&mut self) -> Result<Tree, TreebankError> {
        let label = match self.tokens.get(self.pos) {
            Some(Token::Atom(a)) => {
                self.pos += 1;
                (*a).to_owned()
            }
            Some(Token::Open) => return Err(self.malformed("node without a label")),
            Some(Token::Close) => return Err(TreebankError::EmptyNode { line: self.line }),
            None => return Err(self.unbalanced()),
        };
        let mut subtrees = Vec::new();
        let mut atoms = Vec::new();
        loop {
            match self.tokens.get(self.pos) {
                Some(Token::Open) => {
                    self.pos += 1;
                    subtrees.push(self.node()?);
                }
                Some(Token::Atom(a)) => {
                    self.pos += 1;
                    atoms.push((*a).to_owned());
                }
                Some(Token::Close) => {
                    self.pos += 1;
                    break;
                }
                None => return Err(self.unbalanced()),
            }
        }
        match (subtrees.is_empty(), atoms.len()) {
            (true, 0) => Err(TreebankError::EmptyNode { line: self.line }),
            (true, 1) => Ok(Tree::preterminal(label, atoms.pop().unwrap())),
            (true, _) => Err(TreebankError::MixedChildren {
                line: self.line,
                label,
            }),
            (false, 0) => Ok(Tree::node(label, subtrees)),
            (false, _) => Err(TreebankError::MixedChildren {
                line: self.line,
                label,
            }),
        }
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<Tree, TreebankError> {
    let tokens = lex(line);
    let mut p = LineParser {
        tokens,
        pos: 0,
        line: line_no,
    };
    match p.tokens.first() {
        Some(Token::Open) => p.pos = 1,
        Some(Token::Close) => return Err(p.unbalanced()),
        _ => return Err(p.malformed("a tree must start with `(`")),
    }
    let tree = p.node()?;
    match p.tokens.get(p.pos) {
        None => Ok(tree),
        Some(Token::Close) => Err(p.unbalanced()),
        Some(_) => Err(p.malformed("trailing content after the tree")),
    }
}

/// Read one bracketed tree per non-blank line.
pub fn parse_trees(text: &str) -> Result<Vec<Tree>, TreebankError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}
