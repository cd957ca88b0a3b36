use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{assign_rules, CurriculumError, CurriculumPlan, StageAssignment, PSEUDOCOUNT_FLOOR};
use crate::estimate::{posterior_mean, run_vb, trace_csv, EstimateError, EstimationMode, EstimatorConfig, PosteriorSummary};
use crate::format::g17;
use crate::grammar::{write_grammar_file, Grammar, GrammarError, RuleKind, DEFAULT_PSEUDOCOUNT};
use crate::Sentence;

/// Outcome of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    /// 1-based.
    pub index: usize,
    pub name: String,
    /// Indices into the full grammar of the rules available at this stage.
    pub rules: Vec<usize>,
    /// The stage grammar with posterior means as weights and the stage's
    /// priors as pseudocounts.
    pub grammar: Grammar,
    pub summary: PosteriorSummary,
}

impl StageResult {
    pub fn parsed(&self) -> usize {
        self.summary.parsed
    }

    /// Corpus log-likelihood of the last iteration.
    pub fn final_loglik(&self) -> f64 {
        self.summary.trace.last().map_or(f64::NAN, |t| t.log_likelihood)
    }
}

/// Priors for stage `k + 1` from the stage-`k` posterior.
///
/// A rule already available at stage `k` gets `N s p + 0.1`, where `N` is
/// the number of sentences parsed at stage `k`, `p` the rule's posterior
/// mean and `s` is `s_p` for productions and `s_l` for lexicalisations. A
/// rule new at stage `k + 1` gets `N s eta / m + 0.1`, with `m` the number
/// of new rules sharing its lhs. The result follows the order of
/// `assignment.rules_at(k + 1)`.
pub fn transfer_pseudocounts(
    prev: &PosteriorSummary,
    assignment: &StageAssignment,
    g: &Grammar,
    k: usize,
    plan: &CurriculumPlan,
) -> Result<Vec<f64>, CurriculumError> {
    if k == 0 || k >= assignment.num_stages() {
        return Err(CurriculumError::NoNextStage { index: k });
    }
    let old = assignment.rules_at(k);
    if prev.means.len() != old.len() {
        return Err(CurriculumError::MissingRules {
            index: k,
            expected: old.len(),
            found: prev.means.len(),
        });
    }
    let mean_of: HashMap<usize, f64> = old.iter().copied().zip(prev.means.iter().copied()).collect();
    let next = assignment.rules_at(k + 1);
    let mut new_per_lhs: HashMap<_, usize> = HashMap::new();
    for &r in next.iter().filter(|r| !mean_of.contains_key(r)) {
        *new_per_lhs.entry(g.rule(r).rule.lhs).or_insert(0) += 1;
    }
    let n = prev.parsed as f64;
    Ok(next
        .iter()
        .map(|&r| {
            let rule = &g.rule(r).rule;
            let s = match rule.kind {
                RuleKind::Production => plan.s_p,
                RuleKind::Lexicalisation => plan.s_l,
            };
            match mean_of.get(&r) {
                Some(&p) => n * s * p + PSEUDOCOUNT_FLOOR,
                None => n * s * plan.eta / new_per_lhs[&rule.lhs] as f64 + PSEUDOCOUNT_FLOOR,
            }
        })
        .collect())
}

fn unparsed(e: EstimateError, index: usize, plan: &CurriculumPlan) -> CurriculumError {
    match e {
        EstimateError::NoParses => CurriculumError::StageUnparsed {
            index,
            stage: plan.stages[index - 1].name.clone(),
        },
        e => e.into(),
    }
}

/// Train stage by stage. Stage 1 uses the constant prior 0.1 and starts
/// from `g`'s weights restricted to its rules; each later stage starts
/// from its prior mean.
pub fn run_curriculum(
    g: &Grammar,
    corpus: &[Sentence],
    plan: &CurriculumPlan,
    cfg: &EstimatorConfig,
) -> Result<Vec<StageResult>, CurriculumError> {
    if cfg.mode != EstimationMode::Vb {
        return Err(CurriculumError::UnsupportedMode);
    }
    let assignment = assign_rules(g, plan)?;
    let mut results: Vec<StageResult> = Vec::with_capacity(plan.len());
    for k in 1..=plan.len() {
        let rules = assignment.rules_at(k).to_vec();
        let sub = match g.subset(&rules) {
            Ok(sub) => sub,
            Err(GrammarError::NoRules) => {
                return Err(CurriculumError::StageUnparsed {
                    index: k,
                    stage: plan.stages[k - 1].name.clone(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let start = match results.last() {
            None => sub.with_constant_pseudocount(DEFAULT_PSEUDOCOUNT)?.normalize()?,
            Some(prev) => {
                let alphas = transfer_pseudocounts(&prev.summary, &assignment, g, k - 1, plan)?;
                let means = posterior_mean(&sub, &alphas, &vec![0.0; alphas.len()])?;
                sub.with_pseudocounts(&alphas)?.with_weights(&means)?
            }
        };
        let summary = run_vb(&start, corpus, cfg).map_err(|e| unparsed(e, k, plan))?;
        let grammar = summary.mean_grammar(&start)?;
        results.push(StageResult {
            index: k,
            name: plan.stages[k - 1].name.clone(),
            rules,
            grammar,
            summary,
        });
    }
    Ok(results)
}

/// `stage,rules_available,N_parsed,final_loglik`
pub fn stages_csv(results: &[StageResult]) -> String {
    let mut out = String::from("stage,rules_available,N_parsed,final_loglik\n");
    for r in results {
        writeln!(
            out,
            "{},{},{},{}",
            r.index,
            r.rules.len(),
            r.parsed(),
            g17(r.final_loglik())
        )
        .unwrap();
    }
    out
}

/// Write `G_<k>.gr` and `trace_<k>.csv` per stage and `stages.csv`.
pub fn write_stage_outputs(dir: &Path, results: &[StageResult]) -> Result<(), CurriculumError> {
    std::fs::create_dir_all(dir)?;
    for r in results {
        std::fs::write(dir.join(format!("G_{}.gr", r.index)), write_grammar_file(&r.grammar)?)?;
        std::fs::write(dir.join(format!("trace_{}.csv", r.index)), trace_csv(&r.summary.trace))?;
    }
    std::fs::write(dir.join("stages.csv"), stages_csv(results))?;
    Ok(())
}
