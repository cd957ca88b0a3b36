use super::*;
use crate::grammar::{parse_grammar_file, RuleSpec};
use proptest::prelude::*;

fn grammar(text: &str) -> Grammar {
    parse_grammar_file(text).unwrap()
}

fn corpus(lines: &[&str]) -> Vec<Sentence> {
    lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect()
}

const AB: &str = "0.1 0.5 S --> A\n0.1 0.5 S --> B\n0.1 1 A --> a\n0.1 1 B --> b";

fn em(iterations: usize) -> EstimatorConfig {
    EstimatorConfig {
        mode: EstimationMode::Em,
        iterations,
        ..EstimatorConfig::default()
    }
}

fn vb(iterations: usize) -> EstimatorConfig {
    EstimatorConfig {
        iterations,
        ..EstimatorConfig::default()
    }
}

#[test]
fn em_count_ratio() {
    let g = grammar(AB);
    let r = run_em(&g, &corpus(&["a", "a", "a", "b"]), &em(1)).unwrap();
    let w = r.grammar.weights();
    assert!((w[0] - 0.75).abs() <= 1e-12);
    assert!((w[1] - 0.25).abs() <= 1e-12);
    assert_eq!(r.parsed, 4);
    assert_eq!(r.trace.len(), 1);
    assert!((r.trace[0].log_likelihood - 4.0 * 0.5f64.ln()).abs() <= 1e-12);
}

#[test]
fn em_fixed_point() {
    let g = grammar("0.1 1 S --> A B\n0.1 1 A --> a\n0.1 1 B --> b");
    let r = run_em(&g, &corpus(&["a b", "a b"]), &em(7)).unwrap();
    assert_eq!(r.grammar, g);
}

#[test]
fn unparsed_sentences_are_skipped() {
    let g = grammar(AB);
    let r = run_em(&g, &corpus(&["a", "b", "a b", "zzz"]), &em(2)).unwrap();
    assert_eq!(r.parsed, 2);
    assert!(r.trace.iter().all(|t| t.parsed_sentences == 2));
    let s = run_vb(&g, &corpus(&["a", "b", "a b"]), &vb(2)).unwrap();
    assert_eq!(s.parsed, 2);
}

#[test]
fn corpus_errors() {
    let g = grammar(AB);
    assert_eq!(run_em(&g, &[], &em(1)).unwrap_err(), EstimateError::EmptyCorpus);
    assert_eq!(
        run_vb(&g, &corpus(&["c", "a a"]), &vb(1)).unwrap_err(),
        EstimateError::NoParses
    );
    assert_eq!(
        run_vb(&g, &corpus(&["a"]), &vb(0)).unwrap_err(),
        EstimateError::ZeroIterations
    );
}

#[test]
fn vb_posterior_mean_after_one_step() {
    let g = grammar(AB);
    let s = run_vb(&g, &corpus(&["a"; 10]), &vb(1)).unwrap();
    assert!((s.counts[0] - 10.0).abs() <= 1e-12);
    assert_eq!(s.counts[1], 0.0);
    assert!((s.means[0] - 10.1 / 10.2).abs() <= 1e-12);
    assert!((s.means[1] - 0.1 / 10.2).abs() <= 1e-12);
    // Single-rule categories are forced to 1.
    assert_eq!(s.means[2], 1.0);
    assert_eq!(s.weights[2], 1.0);
}

#[test]
fn symmetric_prior_without_data() {
    let g = grammar(AB);
    let w = variational_weights(&g, &[0.1, 0.1, 0.1, 0.1], &[0.0; 4]).unwrap();
    let want = (-5.134_715_043_818_888_5f64).exp();
    assert_eq!(w[0], w[1]);
    assert!((w[0] - want).abs() <= 1e-12 * want);
}

#[test]
fn posterior_mean_examples() {
    let g = grammar(AB);
    let p = posterior_mean(&g, &[0.1; 4], &[0.0; 4]).unwrap();
    assert_eq!(&p[..2], &[0.5, 0.5]);
    let p = posterior_mean(&g, &[0.1; 4], &[3.0, 1.0, 3.0, 1.0]).unwrap();
    assert_eq!(p[0], 3.1 / 4.2);
    assert_eq!(p[1], 1.1 / 4.2);
    assert_eq!(p[2], 1.0);
    assert!(matches!(
        posterior_mean(&g, &[0.1; 3], &[0.0; 4]),
        Err(EstimateError::LengthMismatch { .. })
    ));
    assert!(matches!(
        posterior_mean(&g, &[0.1, 0.0, 0.1, 0.1], &[0.0; 4]),
        Err(EstimateError::NonPositivePseudocount { .. })
    ));
}

#[test]
fn large_prior_dominates() {
    let g = grammar(AB).with_pseudocounts(&[3e8, 1e8, 1e8, 1e8]).unwrap();
    let s = run_vb(&g, &corpus(&["a", "a", "b", "a", "a"]), &vb(5)).unwrap();
    assert!((s.means[0] - 0.75).abs() <= 1e-6);
    assert!((s.means[1] - 0.25).abs() <= 1e-6);
}

// With α → 0, VB's posterior means approach EM's count ratios. The
// comparison runs 20 iterations on a grammar whose counts do not depend on
// the weights, and a single iteration on an ambiguous one.
#[test]
fn tiny_prior_matches_em() {
    let unambiguous = grammar(
        "0.1 0.5 S --> NP VP\n0.1 0.5 S --> VP\n0.1 0.5 NP --> a\n0.1 0.5 NP --> b\n0.1 1 VP --> c",
    )
    .with_constant_pseudocount(1e-8)
    .unwrap();
    let data = corpus(&["a c", "b c", "a c", "c", "a c", "c", "c"]);
    let e = run_em(&unambiguous, &data, &em(20)).unwrap();
    let v = run_vb(&unambiguous, &data, &vb(20)).unwrap();
    for (p, w) in v.means.iter().zip(e.grammar.weights()) {
        assert!((p - w).abs() <= 1e-5, "{p} vs {w}");
    }

    let ambiguous = grammar("0.1 0.5 S --> S S\n0.1 0.5 S --> a\n")
        .with_constant_pseudocount(1e-8)
        .unwrap();
    let data = corpus(&["a a a", "a", "a a", "a a a a"]);
    let e = run_em(&ambiguous, &data, &em(1)).unwrap();
    let v = run_vb(&ambiguous, &data, &vb(1)).unwrap();
    for (p, w) in v.means.iter().zip(e.grammar.weights()) {
        assert!((p - w).abs() <= 1e-5, "{p} vs {w}");
    }
}

#[test]
fn reproducible_runs_are_bit_identical() {
    let g = grammar("0.1 0.5 S --> S S\n0.1 0.3 S --> a\n0.1 0.2 S --> b");
    let mut data = Vec::new();
    for i in 0..200 {
        let len = 1 + i % 5;
        data.push((0..len).map(|k| if (i + k) % 3 == 0 { "b" } else { "a" }.to_owned()).collect());
    }
    let a = run_vb(&g, &data, &vb(5)).unwrap();
    let b = run_vb(&g, &data, &vb(5)).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| run_vb(&g, &data, &vb(5)).unwrap());
    assert_eq!(a, c);
    for (x, y) in a.means.iter().zip(&c.means) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn early_stop() {
    let g = grammar(AB);
    let cfg = EstimatorConfig {
        mode: EstimationMode::Em,
        iterations: 50,
        tolerance: 1e-9,
        reproducible: true,
    };
    let r = run_em(&g, &corpus(&["a", "a", "b"]), &cfg).unwrap();
    assert!(r.trace.len() < 50);
}

#[test]
fn trace_format() {
    let rows = [TraceRow {
        iteration: 1,
        log_likelihood: -0.5,
        parsed_sentences: 3,
    }];
    assert_eq!(trace_csv(&rows), "iteration,log_likelihood,parsed_sentences\n1,-0.5,3\n");
}

#[test]
fn jitter_is_seeded_and_normalized() {
    let g = grammar(AB);
    let a = jitter(&g, 7).unwrap();
    assert_eq!(a, jitter(&g, 7).unwrap());
    assert_ne!(a.weights(), g.weights());
    assert!((a.weights()[0] + a.weights()[1] - 1.0).abs() <= 1e-12);
    assert_eq!(a.weights()[2], 1.0);
}

fn arb_case() -> impl Strategy<Value = (Grammar, Vec<Sentence>)> {
    let weights = prop::collection::vec(0.05f64..1.0, 6);
    let sentences = prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b"]), 1..6), 1..12);
    (weights, sentences).prop_map(|(w, s)| {
        let specs = vec![
            RuleSpec::new("S", &["S", "S"], w[0], 0.1),
            RuleSpec::new("S", &["A", "S"], w[1], 0.1),
            RuleSpec::new("S", &["a"], w[2], 0.1),
            RuleSpec::new("S", &["b"], w[3], 0.1),
            RuleSpec::new("A", &["a"], w[4], 0.1),
            RuleSpec::new("A", &["S", "A"], w[5], 0.1),
        ];
        let g = Grammar::from_specs(None, &specs, &[]).unwrap().normalize().unwrap();
        let s = s.into_iter().map(|v| v.into_iter().map(str::to_owned).collect()).collect();
        (g, s)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn em_likelihood_never_decreases((g, data) in arb_case()) {
        let r = run_em(&g, &data, &em(6)).unwrap();
        for w in r.trace.windows(2) {
            prop_assert!(w[1].log_likelihood >= w[0].log_likelihood - 1e-6);
        }
    }

    #[test]
    fn vb_means_are_normalized((g, data) in arb_case()) {
        let s = run_vb(&g, &data, &vb(3)).unwrap();
        for lhs in g.lhs_symbols() {
            let total: f64 = g.rules_for(lhs).iter().map(|&r| s.means[r]).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }
        prop_assert!(s.parsed <= data.len());
        prop_assert!(s.counts.iter().all(|c| c.is_finite() && *c >= 0.0));
    }
}
