//! The rule-line grammar file format.
//!
//! ```text
//! # comment
//! %start ROOT
//! %nonterminal NP
//! 0.1 0.25 S --> NP VP
//! 0.1 1 NP --> dog
//! ```
//!
//! Each rule line is `<pseudocount> <weight> <lhs> --> <rhs>...`. `%start`
//! may only be the first non-comment line. `%nonterminal` lines declare
//! nonterminals that have no rules of their own (this happens for stage
//! grammars that keep a category whose expansions are not yet available);
//! they must precede the first rule.

use std::fmt::Write as _;

use super::{Grammar, GrammarError, RuleSpec};
use crate::format::g17;

const ARROW: &str = "-->";

pub fn parse_grammar_file(text: &str) -> Result<Grammar, GrammarError> {
    let mut start: Option<String> = None;
    let mut extra: Vec<String> = Vec::new();
    let mut specs: Vec<RuleSpec> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    let mut seen_content = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |message: &str| GrammarError::Malformed {
            line: line_no,
            message: message.to_owned(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();

        if let Some(directive) = fields[0].strip_prefix('%') {
            match directive {
                "start" => {
                    if seen_content {
                        return Err(malformed("%start must be the first non-comment line"));
                    }
                    if fields.len() != 2 || fields[1] == ARROW {
                        return Err(malformed("expected `%start <symbol>`"));
                    }
                    start = Some(fields[1].to_owned());
                }
                "nonterminal" => {
                    if !specs.is_empty() {
                        return Err(malformed("%nonterminal must precede the first rule"));
                    }
                    if fields.len() < 2 || fields[1..].contains(&ARROW) {
                        return Err(malformed("expected `%nonterminal <symbol>...`"));
                    }
                    extra.extend(fields[1..].iter().map(|s| (*s).to_owned()));
                }
                _ => return Err(malformed(&format!("unknown directive %{directive}"))),
            }
            seen_content = true;
            continue;
        }
        seen_content = true;

        if fields.len() < 5 || fields[3] != ARROW {
            return Err(malformed(
                "expected `<pseudocount> <weight> <lhs> --> <rhs>...`",
            ));
        }
        let pseudocount: f64 = fields[0]
            .parse()
            .map_err(|_| malformed(&format!("bad pseudocount {:?}", fields[0])))?;
        let weight: f64 = fields[1]
            .parse()
            .map_err(|_| malformed(&format!("bad weight {:?}", fields[1])))?;
        if pseudocount.is_nan() {
            return Err(malformed("pseudocount is NaN"));
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(malformed(&format!("weight must be finite and nonnegative, got {weight}")));
        }
        if fields[2] == ARROW || fields[4..].contains(&ARROW) {
            return Err(malformed("misplaced `-->`"));
        }
        if pseudocount <= 0.0 {
            return Err(GrammarError::NonPositivePseudocount {
                line: line_no,
                value: pseudocount,
            });
        }
        specs.push(RuleSpec {
            lhs: fields[2].to_owned(),
            rhs: fields[4..].iter().map(|s| (*s).to_owned()).collect(),
            weight,
            pseudocount,
        });
        lines.push(line_no);
    }

    // Declared nonterminals that turn out to have rules are redundant but harmless.
    Grammar::build(start.as_deref(), &specs, &extra, Some(&lines))
}

pub fn write_grammar_file(g: &Grammar) -> Result<String, GrammarError> {
    if g.is_empty() {
        return Err(GrammarError::NoRules);
    }
    let mut out = String::new();
    let first_lhs = g.rules()[0].rule.lhs;
    if g.start() != first_lhs {
        writeln!(out, "%start {}", g.name(g.start())).unwrap();
    }
    let ruleless = g.ruleless_nonterminals();
    if !ruleless.is_empty() {
        writeln!(out, "%nonterminal {}", ruleless.join(" ")).unwrap();
    }
    for r in g.rules() {
        write!(
            out,
            "{} {} {} {}",
            g17(r.pseudocount),
            g17(r.weight),
            g.name(r.rule.lhs),
            ARROW
        )
        .unwrap();
        for &s in &r.rule.rhs {
            write!(out, " {}", g.name(s)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
