use super::*;
use crate::chart::{enumerate_parses, DEFAULT_ENUMERATION_CAP};
use crate::grammar::{parse_grammar_file, RuleSpec};
use crate::treebank::{extract_pcfg, parse_trees};
use proptest::prelude::*;

fn grammar(text: &str) -> Grammar {
    parse_grammar_file(text).unwrap()
}

fn tree(s: &str) -> Tree {
    parse_trees(s).unwrap().remove(0)
}

fn sent(s: &str) -> Sentence {
    s.split_whitespace().map(str::to_owned).collect()
}

const SS: &str = "0.1 0.5 S --> S S\n0.1 0.5 S --> a";

#[test]
fn f1_identity_and_hand_example() {
    let opts = BracketOptions::default();
    let gold = vec![tree("(S (NP (A a) (B b)) (VP (C c)))")];
    let same: Vec<Option<Tree>> = gold.iter().cloned().map(Some).collect();
    assert_eq!(unlabelled_f1(&gold, &same, opts).unwrap().f1, 1.0);

    let pred = vec![Some(tree("(S (NP (A a)) (VP (B b) (C c)))"))];
    let r = unlabelled_f1(&gold, &pred, opts).unwrap();
    assert_eq!((r.matched, r.gold, r.predicted), (1, 2, 2));
    assert_eq!(r.precision, 0.5);
    assert_eq!(r.recall, 0.5);
    assert_eq!(r.f1, 0.5);

    let r = unlabelled_f1(&gold, &[None], opts).unwrap();
    assert_eq!((r.matched, r.gold, r.predicted), (0, 2, 0));
    assert_eq!(r.f1, 0.0);
}

#[test]
fn f1_errors() {
    let opts = BracketOptions::default();
    let gold = vec![tree("(S (A a) (B b))")];
    assert!(matches!(
        unlabelled_f1(&gold, &[], opts),
        Err(EvalError::LengthMismatch { gold: 1, predicted: 0 })
    ));
    let pred = vec![Some(tree("(S (A a) (B c))"))];
    assert!(matches!(
        unlabelled_f1(&gold, &pred, opts),
        Err(EvalError::YieldMismatch { index: 0 })
    ));
}

#[test]
fn f1_self_parse_unambiguous() {
    let text = "(S (NP (D the) (N dog)) (VP (V saw) (NP (D a) (N cat))))\n\
                (S (NP (N cats)) (VP (V run)))\n\
                (S (NP (D a) (N dog)) (VP (V run)))";
    let gold = parse_trees(text).unwrap();
    let g = extract_pcfg(&gold, 1).unwrap();
    let bg = binarize(&g).unwrap();
    let pred: Vec<Option<Tree>> = gold
        .iter()
        .map(|t| chart::viterbi_parse(&bg, &t.tokens()).map(|v| v.tree))
        .collect();
    let r = unlabelled_f1(&gold, &pred, BracketOptions::default()).unwrap();
    assert_eq!(r.f1, 1.0);
}

#[test]
fn jsd_examples() {
    let v = jsd(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    assert!((v - 0.3112781).abs() < 1e-6);
    assert!((v - 0.31127812445913283).abs() < 1e-15);
    assert_eq!(jsd(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]).unwrap(), 0.0);
    assert_eq!(jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    let nats = jsd_with_base(&[1.0, 0.0], &[0.0, 1.0], std::f64::consts::E).unwrap();
    assert!((nats - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn jsd_errors() {
    assert!(matches!(jsd(&[1.0], &[0.5, 0.5]), Err(EvalError::DimensionMismatch { p: 1, q: 2 })));
    assert!(matches!(jsd(&[1.5, -0.5], &[0.5, 0.5]), Err(EvalError::BadProbability(_))));
    assert!(matches!(jsd(&[0.5, 0.4], &[0.5, 0.5]), Err(EvalError::BadSum(_))));
    assert!(matches!(jsd_with_base(&[1.0], &[1.0], 1.0), Err(EvalError::BadBase(_))));
}

const ORACLE: &str = "0.1 1 S --> NP VP\n\
                      0.1 0.7 NP --> N\n\
                      0.1 0.3 NP --> NP SBAR\n\
                      0.1 1 SBAR --> C S\n\
                      0.1 1 VP --> V\n\
                      0.1 1 N --> n\n\
                      0.1 1 V --> v\n\
                      0.1 1 C --> c";

#[test]
fn per_nt_identity() {
    let g = grammar(ORACLE);
    let r = per_nt_jsd(&g, &g, None, JsdOptions::default()).unwrap();
    assert_eq!(r.entries.len(), 7);
    assert!(r.entries.iter().all(|e| e.jsd == 0.0 && e.available));
    assert_eq!(r.mean, 0.0);
}

#[test]
fn per_nt_unavailable_category() {
    let oracle = grammar(ORACLE);
    let induced = grammar(
        "0.1 1 S --> NP VP\n0.1 1 NP --> N\n0.1 1 VP --> V\n0.1 1 N --> n\n0.1 1 V --> v",
    );
    let r = per_nt_jsd(&oracle, &induced, None, JsdOptions::default()).unwrap();
    let get = |nt: &str| r.entries.iter().find(|e| e.nt == nt).unwrap().clone();
    let sbar = get("SBAR");
    assert_eq!((sbar.jsd, sbar.available), (1.0, false));
    assert!(!get("C").available);
    // NP: (0.7, 0.3) against (1, 0).
    let np = jsd(&[0.7, 0.3], &[1.0, 0.0]).unwrap();
    assert_eq!(get("NP").jsd, np);
    assert_eq!(r.mean, np / 5.0);

    let all = JsdOptions {
        exclude_unavailable: false,
        ..JsdOptions::default()
    };
    let r = per_nt_jsd(&oracle, &induced, None, all).unwrap();
    assert!((r.mean - (np + 2.0) / 7.0).abs() < 1e-15);

    let nts = vec!["NP".to_owned(), "SBAR".to_owned()];
    let r = per_nt_jsd(&oracle, &induced, Some(&nts), JsdOptions::default()).unwrap();
    assert_eq!(r.entries.len(), 2);
    assert_eq!(r.mean, np);

    let bad = vec!["ADJP".to_owned()];
    assert!(matches!(
        per_nt_jsd(&oracle, &induced, Some(&bad), JsdOptions::default()),
        Err(EvalError::UnknownNonterminal(nt)) if nt == "ADJP"
    ));
}

#[test]
fn per_nt_rule_only_in_induced() {
    let oracle = grammar("0.1 1 S --> a");
    let induced = grammar("0.1 0.5 S --> a\n0.1 0.5 S --> b");
    let r = per_nt_jsd(&oracle, &induced, None, JsdOptions::default()).unwrap();
    assert_eq!(r.entries[0].jsd, jsd(&[1.0, 0.0], &[0.5, 0.5]).unwrap());
}

#[test]
fn loglik_examples() {
    let r = mean_sentence_loglik(&grammar("0.1 1 S --> a"), &[sent("a")]).unwrap();
    assert_eq!(r.mean, 0.0);
    assert_eq!((r.scored, r.skipped), (1, 0));

    let r = mean_sentence_loglik(&grammar(SS), &[sent("a a")]).unwrap();
    assert!((r.mean - 0.125f64.ln() / 2.0).abs() < 1e-12);
    assert!((r.mean - -1.0397).abs() < 1e-4);
    assert_eq!(r.sentences[0].length, 2);
}

#[test]
fn loglik_skips_and_errors() {
    let g = grammar("0.1 1 S --> A B\n0.1 1 A --> a\n0.1 1 B --> b");
    let input = vec![sent("a b"), sent("b a"), sent("a zebra")];
    let r = mean_sentence_loglik(&g, &input).unwrap();
    assert_eq!((r.scored, r.skipped), (1, 2));
    assert_eq!(r.mean, 0.0);
    assert_eq!(r.sentences[1].log_marginal, None);
    assert_eq!(r.sentences[1].unknown_token, None);
    assert_eq!(r.sentences[2].unknown_token.as_deref(), Some("zebra"));

    let r = mean_sentence_loglik(&g, &[sent("b a")]).unwrap();
    assert!(r.mean.is_nan());

    assert!(matches!(
        mean_sentence_loglik(&g, &[sent("a b"), vec![]]),
        Err(EvalError::EmptySentence { index: 1 })
    ));
}

#[test]
fn wilcoxon_all_positive_exact() {
    let pairs: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 + 0.5, 0.0)).collect();
    let r = wilcoxon_signed_rank(&pairs, Alternative::Greater).unwrap();
    assert!(r.exact);
    assert_eq!(r.n, 10);
    assert_eq!(r.statistic, 55.0);
    assert!((r.p_value - 1.0 / 1024.0).abs() < 1e-12);
    assert_eq!(r.rank_biserial, 1.0);
    assert_eq!(r.median_difference, 6.0);

    let r = wilcoxon_signed_rank(&pairs, Alternative::Less).unwrap();
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn wilcoxon_all_tied() {
    let pairs = vec![(0.3, 0.3); 8];
    assert!(matches!(
        wilcoxon_signed_rank(&pairs, Alternative::Greater),
        Err(EvalError::AllTied)
    ));
    assert!(matches!(
        wilcoxon_signed_rank(&[(1.0, f64::NAN)], Alternative::Greater),
        Err(EvalError::NonFinitePair { index: 0 })
    ));
}

#[test]
fn wilcoxon_antisymmetric() {
    let pairs: Vec<(f64, f64)> = (1..=6).flat_map(|i| [(i as f64, 0.0), (0.0, i as f64)]).collect();
    let r = wilcoxon_signed_rank(&pairs, Alternative::Greater).unwrap();
    assert_eq!(r.rank_biserial, 0.0);
    assert!(r.p_value > 0.45 && r.p_value < 0.65, "p = {}", r.p_value);
    assert_eq!(r.median_difference, 0.0);
}

#[test]
fn wilcoxon_large_sample_normal() {
    // 72 positive differences with distinct magnitudes: W+ = 2628.
    let pairs: Vec<(f64, f64)> = (1..=72).map(|i| (0.5 + i as f64 * 1e-3, 0.5)).collect();
    let r = wilcoxon_signed_rank(&pairs, Alternative::Greater).unwrap();
    assert!(!r.exact);
    assert_eq!(r.statistic, 2628.0);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    assert!(rel(r.p_value, 8.470222251220048e-14) < 1e-9, "p = {:e}", r.p_value);

    let mut opts = WilcoxonOptions::new(Alternative::Greater);
    opts.continuity_correction = false;
    let r = wilcoxon_signed_rank_with(&pairs, opts).unwrap();
    assert!(rel(r.p_value, 8.293759011881989e-14) < 1e-9, "p = {:e}", r.p_value);
    assert!(r.p_value < 1e-10);
}

/// P-value by listing every sign assignment of the observed magnitudes.
fn brute_force_p(d: &[f64], alternative: Alternative) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    let n = nz.len();
    let mut mags: Vec<(f64, usize)> = nz.iter().enumerate().map(|(i, x)| (x.abs(), i)).collect();
    mags.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && mags[j + 1].0 == mags[i].0 {
            j += 1;
        }
        for k in i..=j {
            rank[mags[k].1] = (i + j + 2) as f64 / 2.0;
        }
        i = j + 1;
    }
    let observed: f64 = (0..n).filter(|&k| nz[k] > 0.0).map(|k| rank[k]).sum();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| rank[k]).sum();
        let hit = match alternative {
            Alternative::Greater => w >= observed - 1e-9,
            Alternative::Less => w <= observed + 1e-9,
        };
        hits += hit as u64;
    }
    hits as f64 / (1u64 << n) as f64
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = grammar(ORACLE);
    let jsd_report = per_nt_jsd(&oracle, &oracle, None, JsdOptions::default()).unwrap();
    let stages: Vec<StageMetrics> = (1..=3)
        .map(|k| StageMetrics {
            stage: k,
            name: format!("stage{k}"),
            f1: 1.0 / 3.0 + k as f64 * 0.1,
            mean_jsd: 0.1 / k as f64,
            mean_loglik: -6.182_3 + (k as f64).sqrt(),
            n_parsed: 100 * k,
            jsd: jsd_report.clone(),
        })
        .collect();
    write_report(dir.path(), &stages, false).unwrap();
    let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("stage,f1,mean_jsd,mean_loglik,N_parsed"));
    for (line, s) in lines.zip(&stages) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<usize>().unwrap(), s.stage);
        assert_eq!(f[1].parse::<f64>().unwrap(), s.f1);
        assert_eq!(f[2].parse::<f64>().unwrap(), s.mean_jsd);
        assert_eq!(f[3].parse::<f64>().unwrap(), s.mean_loglik);
        assert_eq!(f[4].parse::<usize>().unwrap(), s.n_parsed);
    }
    assert_eq!(text.lines().count(), 4);
    let per_nt = std::fs::read_to_string(dir.path().join("jsd_per_nt.csv")).unwrap();
    assert_eq!(per_nt.lines().count(), 1 + 3 * 7);
    for name in ["metrics.json", "jsd_per_nt.json", "summary.json"] {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        assert!(v.is_array());
    }
    assert!(matches!(write_report(dir.path(), &[], false), Err(EvalError::EmptyReport)));
}

fn small_grammar() -> impl Strategy<Value = Grammar> {
    let rhs = prop_oneof![
        (0..3usize, 0..3usize).prop_map(|(a, b)| vec![a + 10, b + 10]),
        (0..3usize).prop_map(|t| vec![t]),
    ];
    proptest::collection::vec((0..3usize, rhs, 0.05f64..1.0), 3..12).prop_map(|raw| {
        let nt = ["S", "A", "B"];
        let tm = ["x", "y", "z"];
        let name = |i: usize| if i >= 10 { nt[i - 10] } else { tm[i] };
        let mut specs: Vec<RuleSpec> = Vec::new();
        // Every category can reach a terminal.
        for (i, n) in nt.iter().enumerate() {
            specs.push(RuleSpec::new(n, &[tm[i]], 0.5, 0.1));
        }
        for (lhs, rhs, w) in raw {
            let rhs: Vec<&str> = rhs.iter().map(|&i| name(i)).collect();
            if !specs.iter().any(|s| s.lhs == nt[lhs] && s.rhs.iter().map(String::as_str).eq(rhs.iter().copied())) {
                specs.push(RuleSpec::new(nt[lhs], &rhs, w, 0.1));
            }
        }
        Grammar::from_specs(Some("S"), &specs, &[]).unwrap().normalize().unwrap()
    })
}

proptest! {
    #[test]
    fn jsd_symmetric_and_bounded(raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8)) {
        let sp: f64 = raw.iter().map(|r| r.0).sum();
        let sq: f64 = raw.iter().map(|r| r.1).sum();
        prop_assume!(sp > 0.0 && sq > 0.0);
        let p: Vec<f64> = raw.iter().map(|r| r.0 / sp).collect();
        let q: Vec<f64> = raw.iter().map(|r| r.1 / sq).collect();
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(jsd(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration(
        d in proptest::collection::vec(prop_oneof![(-4i32..=4).prop_map(f64::from), -3.0f64..3.0], 1..=12),
        greater in any::<bool>(),
    ) {
        prop_assume!(d.iter().any(|x| *x != 0.0));
        let alt = if greater { Alternative::Greater } else { Alternative::Less };
        let pairs: Vec<(f64, f64)> = d.iter().map(|&x| (x, 0.0)).collect();
        let r = wilcoxon_signed_rank(&pairs, alt).unwrap();
        prop_assert!(r.exact);
        prop_assert!((r.p_value - brute_force_p(&d, alt)).abs() < 1e-12);
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        prop_assert!(r.rank_biserial.abs() <= 1.0);
    }

    #[test]
    fn loglik_matches_enumeration(
        g in small_grammar(),
        tokens in proptest::collection::vec(prop_oneof![Just("x"), Just("y"), Just("z")], 1..=6),
    ) {
        let s: Sentence = tokens.iter().map(|t| t.to_string()).collect();
        let parses = enumerate_parses(&g, &tokens, DEFAULT_ENUMERATION_CAP);
        prop_assume!(parses.is_ok());
        let total: f64 = parses.unwrap().iter().map(|(_, p)| p).sum();
        let r = mean_sentence_loglik(&g, std::slice::from_ref(&s)).unwrap();
        if total > 0.0 {
            let l = r.sentences[0].log_marginal.unwrap();
            prop_assert!((l - total.ln()).abs() < 1e-9, "{} vs {}", l, total.ln());
            prop_assert!((r.mean - total.ln() / s.len() as f64).abs() < 1e-9);
        } else {
            prop_assert_eq!(r.skipped, 1);
        }
    }
}
