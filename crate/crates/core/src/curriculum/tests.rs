use super::*;
use crate::estimate::{posterior_mean, run_vb, EstimationMode, EstimatorConfig, PosteriorSummary};
use crate::grammar::{parse_grammar_file, write_grammar_file};
use crate::read_sentences;
use proptest::prelude::*;

const TOY: &str = "\
0.1 1 ROOT --> S
0.1 0.5 S --> NP VP
0.1 0.5 S --> VP
0.1 0.5 NP --> PRP
0.1 0.5 NP --> DT NN
0.1 0.5 VP --> VB
0.1 0.5 VP --> VB NP
0.1 1 PRP --> you
0.1 1 VB --> go
0.1 1 DT --> the
0.1 1 NN --> dog
";

const TOY_CORPUS: &str = "you go\ngo\ngo the dog\nyou go you\nthe dog go\n";

fn cfg(iterations: usize) -> EstimatorConfig {
    EstimatorConfig {
        iterations,
        ..EstimatorConfig::default()
    }
}

fn plan(stages: &[(&str, &[&str])]) -> CurriculumPlan {
    CurriculumPlan::new(
        stages
            .iter()
            .map(|(n, cs)| Stage {
                name: (*n).to_owned(),
                categories: cs.iter().map(|c| (*c).to_owned()).collect(),
            })
            .collect(),
        DEFAULT_S_P,
        DEFAULT_S_L,
        DEFAULT_ETA,
    )
    .unwrap()
}

#[test]
fn builtin_growing() {
    let p = CurriculumPlan::builtin("growing").unwrap();
    let names: Vec<&str> = p.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["baseGrowing", "VP", "TP", "CP", "INTJ"]);
    for c in ["ROOT", "S", "FRAG", "NP", "VP", "NN", "NNP", "PRP", "PRP$", "VB"] {
        assert!(p.stages[0].categories.iter().any(|x| x == c), "{c}");
    }
    assert_eq!((p.s_p, p.s_l, p.eta), (0.01, 0.1, 0.001));
}

#[test]
fn builtin_inward_and_continuity() {
    let inward = CurriculumPlan::builtin("inward").unwrap();
    let names: Vec<&str> = inward.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["baseInward", "baseGrowing", "CP", "TP", "VP"]);

    let cont = CurriculumPlan::builtin("continuity").unwrap();
    assert_eq!(cont.len(), 1);
    let growing = CurriculumPlan::builtin("growing").unwrap();
    let mut a = cont.all_categories();
    let mut b = growing.all_categories();
    let mut c = inward.all_categories();
    a.sort();
    b.sort();
    c.sort();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.len(), 55);
}

#[test]
fn config_files() {
    let p = load_stage_config("plan = \"growing\"\ns_p = 0.5\n").unwrap();
    assert_eq!(p.len(), 5);
    assert_eq!((p.s_p, p.s_l, p.eta), (0.5, 0.1, 0.001));

    let p = load_stage_config(
        "eta = 0.2\n[[stage]]\nname = \"one\"\ncategories = [\"S\", \"A\", \"A\"]\n\
         [[stage]]\nname = \"two\"\ncategories = [\"B\"]\n",
    )
    .unwrap();
    assert_eq!(p.stages[0].categories, vec!["S", "A"]);
    assert_eq!(p.eta, 0.2);
    assert_eq!(p.s_p, DEFAULT_S_P);
}

#[test]
fn config_errors() {
    let dup = "[[stage]]\nname = \"VP\"\ncategories = [\"A\"]\n[[stage]]\nname = \"VP\"\ncategories = [\"B\"]\n";
    assert!(matches!(load_stage_config(dup), Err(CurriculumError::DuplicateStage(n)) if n == "VP"));
    let empty = "[[stage]]\nname = \"x\"\ncategories = []\n";
    assert!(matches!(load_stage_config(empty), Err(CurriculumError::EmptyStage(_))));
    assert!(matches!(
        load_stage_config("plan = \"sideways\""),
        Err(CurriculumError::UnknownPlan(_))
    ));
    assert!(matches!(load_stage_config(""), Err(CurriculumError::NoStages)));
    assert!(matches!(
        load_stage_config("plan = \"growing\"\n[[stage]]\nname = \"x\"\ncategories = [\"A\"]\n"),
        Err(CurriculumError::PlanAndStages)
    ));
    assert!(matches!(
        load_stage_config("plan = \"growing\"\neta = -1.0\n"),
        Err(CurriculumError::BadParameter { name: "eta", .. })
    ));
    assert!(matches!(load_stage_config("plan = "), Err(CurriculumError::Config(_))));
    assert!(matches!(load_stage_config("colour = 1"), Err(CurriculumError::Config(_))));
}

#[test]
fn earliest_stage_assignment() {
    let g = parse_grammar_file(
        "0.1 1 S --> NP VP\n0.1 1 SBAR --> COMP S\n0.1 1 UH --> hi\n0.1 1 NP --> PRP\n0.1 1 VP --> VB\n\
         0.1 1 PRP --> you\n0.1 1 VB --> go\n0.1 1 COMP --> that",
    )
    .unwrap();
    let growing = assign_rules(&g, &CurriculumPlan::builtin("growing").unwrap()).unwrap();
    assert_eq!(growing.stage_of[0], 1);
    assert_eq!(growing.stage_of[1], 4);
    assert_eq!(growing.stage_of[2], 5);
    for k in 1..growing.num_stages() {
        assert!(growing.rules_at(k).iter().all(|r| growing.rules_at(k + 1).contains(r)));
    }
    assert_eq!(growing.rules_at(5).len(), g.len());
    assert_eq!(growing.new_at(4), vec![1, 7]);

    let inward = assign_rules(&g, &CurriculumPlan::builtin("inward").unwrap()).unwrap();
    assert_eq!(inward.stage_of[0], 2);
    assert_eq!(inward.stage_of[2], 1);
}

#[test]
fn unassignable_rules_are_named() {
    let g = parse_grammar_file("0.1 1 S --> XP\n0.1 1 XP --> x").unwrap();
    match assign_rules(&g, &CurriculumPlan::builtin("growing").unwrap()) {
        Err(CurriculumError::Unassignable { rules }) => {
            assert_eq!(rules, vec!["S --> XP", "XP --> x"]);
        }
        other => panic!("{other:?}"),
    }
}

// Stage one: S --> A, S --> A A, A --> a. Stage two adds five S rules
// and B --> b.
fn transfer_fixture() -> (Grammar, CurriculumPlan, StageAssignment) {
    let g = parse_grammar_file(
        "0.1 0.5 S --> A\n0.1 0.5 S --> A A\n0.1 1 A --> a\n\
         0.1 1 S --> B\n0.1 1 S --> B B\n0.1 1 S --> A B\n0.1 1 S --> B A\n0.1 1 S --> B B B\n0.1 1 B --> b",
    )
    .unwrap();
    let p = plan(&[("one", &["S", "A"]), ("two", &["B"])]);
    let a = assign_rules(&g, &p).unwrap();
    (g, p, a)
}

fn summary(parsed: usize, means: Vec<f64>) -> PosteriorSummary {
    let n = means.len();
    PosteriorSummary {
        counts: vec![0.0; n],
        alphas: vec![0.1; n],
        means,
        weights: vec![1.0; n],
        parsed,
        trace: Vec::new(),
    }
}

#[test]
fn transfer_examples() {
    let (g, p, a) = transfer_fixture();
    let p = p.with_parameters(0.01, 0.1, 0.05).unwrap();
    assert_eq!(a.rules_at(1), &[0, 1, 2]);
    let alphas = transfer_pseudocounts(&summary(100, vec![0.5, 0.5, 1.0]), &a, &g, 1, &p).unwrap();
    assert_eq!(alphas.len(), 9);
    assert_eq!(alphas[0], 0.6);
    assert_eq!(alphas[1], 0.6);
    assert_eq!(alphas[2], 100.0 * 0.1 * 1.0 + 0.1);
    for &alpha in &alphas[3..8] {
        assert_eq!(alpha, 0.11);
    }
    assert_eq!(alphas[8], 100.0 * 0.1 * 0.05 / 1.0 + 0.1);
}

#[test]
fn zero_scale_resets_prior() {
    let (g, p, a) = transfer_fixture();
    let p = p.with_parameters(0.0, 0.0, 0.7).unwrap();
    let alphas = transfer_pseudocounts(&summary(12345, vec![0.9, 0.1, 1.0]), &a, &g, 1, &p).unwrap();
    assert!(alphas.iter().all(|&x| x == 0.1));
}

#[test]
fn transfer_errors() {
    let (g, p, a) = transfer_fixture();
    assert!(matches!(
        transfer_pseudocounts(&summary(1, vec![0.5, 0.5]), &a, &g, 1, &p),
        Err(CurriculumError::MissingRules { .. })
    ));
    assert!(matches!(
        transfer_pseudocounts(&summary(1, vec![1.0; 9]), &a, &g, 2, &p),
        Err(CurriculumError::NoNextStage { index: 2 })
    ));
}

#[test]
fn large_scale_carries_means_forward() {
    let (g, p, a) = transfer_fixture();
    let p = p.with_parameters(1e6, 1e6, 0.0).unwrap();
    let prev = vec![0.7, 0.3, 1.0];
    let alphas = transfer_pseudocounts(&summary(1, prev.clone()), &a, &g, 1, &p).unwrap();
    let sub = g.subset(a.rules_at(2)).unwrap();
    let means = posterior_mean(&sub, &alphas, &vec![0.0; alphas.len()]).unwrap();
    for (m, want) in means.iter().zip(&prev) {
        assert!((m - want).abs() <= 1e-4, "{m} vs {want}");
    }
}

#[test]
fn continuity_is_plain_vb() {
    let g = parse_grammar_file(TOY).unwrap();
    let corpus = read_sentences(TOY_CORPUS);
    let results = run_curriculum(&g, &corpus, &CurriculumPlan::builtin("continuity").unwrap(), &cfg(5)).unwrap();
    assert_eq!(results.len(), 1);
    let direct = run_vb(&g.with_constant_pseudocount(0.1).unwrap(), &corpus, &cfg(5)).unwrap();
    assert_eq!(results[0].summary, direct);
    for (a, b) in results[0].summary.means.iter().zip(&direct.means) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn growing_on_toy_grammar() {
    let g = parse_grammar_file(TOY).unwrap();
    let corpus = read_sentences(TOY_CORPUS);
    let results = run_curriculum(&g, &corpus, &CurriculumPlan::builtin("growing").unwrap(), &cfg(4)).unwrap();
    assert_eq!(results.len(), 5);
    assert_eq!(results[0].rules.len(), 9);
    assert_eq!(results[0].parsed(), 3);
    assert_eq!(results[1].parsed(), 5);
    for w in results.windows(2) {
        assert!(w[0].rules.iter().all(|r| w[1].rules.contains(r)));
    }
    assert_eq!(results[4].rules.len(), g.len());
    for r in &results {
        assert_eq!(r.grammar.len(), r.rules.len());
        for lhs in r.grammar.lhs_symbols() {
            let total: f64 = r.grammar.rules_for(lhs).iter().map(|&i| r.grammar.rule(i).weight).sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
    }
    let csv = stages_csv(&results);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "stage,rules_available,N_parsed,final_loglik");
    assert!(lines[1].starts_with("1,9,3,"));
    assert!(lines[2].starts_with("2,11,5,"));

    let dir = tempfile::tempdir().unwrap();
    write_stage_outputs(dir.path(), &results).unwrap();
    let g2 = std::fs::read_to_string(dir.path().join("G_2.gr")).unwrap();
    let back = parse_grammar_file(&g2).unwrap();
    assert_eq!(write_grammar_file(&back).unwrap(), g2);
    assert_eq!(std::fs::read_to_string(dir.path().join("stages.csv")).unwrap(), csv);
    assert!(dir.path().join("trace_5.csv").exists());
}

#[test]
fn stage_without_parses_aborts() {
    let g = parse_grammar_file(TOY).unwrap();
    let corpus = read_sentences("the dog go\ngo the dog\n");
    let err = run_curriculum(&g, &corpus, &CurriculumPlan::builtin("growing").unwrap(), &cfg(2)).unwrap_err();
    assert!(matches!(err, CurriculumError::StageUnparsed { index: 1, ref stage } if stage == "baseGrowing"));

    let em = EstimatorConfig {
        mode: EstimationMode::Em,
        ..cfg(1)
    };
    assert!(matches!(
        run_curriculum(&g, &corpus, &CurriculumPlan::builtin("growing").unwrap(), &em),
        Err(CurriculumError::UnsupportedMode)
    ));
}

#[test]
fn stage_with_no_rules_aborts() {
    let g = parse_grammar_file(TOY).unwrap();
    let corpus = read_sentences(TOY_CORPUS);
    let p = plan(&[("tags", &["DT", "NN"]), ("rest", &["ROOT", "S", "NP", "VP", "PRP", "VB"])]);
    let results = run_curriculum(&g, &corpus, &p, &cfg(2));
    assert!(matches!(results, Err(CurriculumError::StageUnparsed { index: 1, .. })));
}

proptest! {
    #[test]
    fn transferred_priors_respect_the_floor(
        s_p in 0.0f64..1e3,
        s_l in 0.0f64..1e3,
        eta in 0.0f64..10.0,
        parsed in 0usize..100_000,
        m in prop::collection::vec(0.0f64..=1.0, 3),
    ) {
        let (g, p, a) = transfer_fixture();
        let p = p.with_parameters(s_p, s_l, eta).unwrap();
        let alphas = transfer_pseudocounts(&summary(parsed, m), &a, &g, 1, &p).unwrap();
        prop_assert!(alphas.iter().all(|&x| x >= 0.1));
    }
}
