//! Staged category availability, cross-stage priors and the multi-stage
//! training loop.

mod run;

use std::collections::{HashMap, HashSet};

use serde::Deserialize;
use thiserror::Error;

use crate::estimate::EstimateError;
use crate::grammar::{Grammar, GrammarError, RuleKind};

pub use run::{run_curriculum, stages_csv, transfer_pseudocounts, write_stage_outputs, StageResult};

pub const DEFAULT_S_P: f64 = 0.01;
pub const DEFAULT_S_L: f64 = 0.1;
pub const DEFAULT_ETA: f64 = 0.001;

/// Added to every transferred pseudocount so that none reaches zero.
pub const PSEUDOCOUNT_FLOOR: f64 = 0.1;

const GROWING: &str = include_str!("../../data/growing.toml");
const INWARD: &str = include_str!("../../data/inward.toml");
const CONTINUITY: &str = include_str!("../../data/continuity.toml");

pub const BUILTIN_PLANS: [&str; 3] = ["growing", "inward", "continuity"];

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("stage config: {0}")]
    Config(String),
    #[error("unknown curriculum {0:?}; built-in plans are growing, inward and continuity")]
    UnknownPlan(String),
    #[error("a config may name a built-in plan or list stages, not both")]
    PlanAndStages,
    #[error("curriculum has no stages")]
    NoStages,
    #[error("stage name {0:?} is used twice")]
    DuplicateStage(String),
    #[error("stage {0:?} has no categories")]
    EmptyStage(String),
    #[error("{name} must be finite and nonnegative, got {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("rules use categories that no stage makes available: {}", .rules.join("; "))]
    Unassignable { rules: Vec<String> },
    #[error("stage {index} ({stage}) cannot parse any sentence")]
    StageUnparsed { index: usize, stage: String },
    #[error("stage {index} has no previous stage to transfer from")]
    NoNextStage { index: usize },
    #[error("posterior has {found} rules, stage {index} has {expected}")]
    MissingRules {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("curricula are trained with variational Bayes only")]
    UnsupportedMode,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Categories newly available at one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub name: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumPlan {
    pub stages: Vec<Stage>,
    /// Prior scale carried over for productions.
    pub s_p: f64,
    /// Prior scale carried over for lexicalisations.
    pub s_l: f64,
    /// Share of mass given to newly available rules.
    pub eta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plan: Option<String>,
    s_p: Option<f64>,
    s_l: Option<f64>,
    eta: Option<f64>,
    #[serde(default)]
    stage: Vec<RawStage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    name: String,
    categories: Vec<String>,
}

impl CurriculumPlan {
    /// Validate stages and parameters. Repeated categories within a stage
    /// are collapsed.
    pub fn new(stages: Vec<Stage>, s_p: f64, s_l: f64, eta: f64) -> Result<CurriculumPlan, CurriculumError> {
        if stages.is_empty() {
            return Err(CurriculumError::NoStages);
        }
        let mut names = HashSet::new();
        let mut clean = Vec::with_capacity(stages.len());
        for st in stages {
            if !names.insert(st.name.clone()) {
                return Err(CurriculumError::DuplicateStage(st.name));
            }
            if st.categories.is_empty() {
                return Err(CurriculumError::EmptyStage(st.name));
            }
            let mut seen = HashSet::new();
            let categories = st.categories.into_iter().filter(|c| seen.insert(c.clone())).collect();
            clean.push(Stage {
                name: st.name,
                categories,
            });
        }
        let plan = CurriculumPlan {
            stages: clean,
            s_p,
            s_l,
            eta,
        };
        plan.check_parameters()?;
        Ok(plan)
    }

    fn check_parameters(&self) -> Result<(), CurriculumError> {
        for (name, value) in [("s_p", self.s_p), ("s_l", self.s_l), ("eta", self.eta)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(CurriculumError::BadParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn builtin(name: &str) -> Result<CurriculumPlan, CurriculumError> {
        let text = match name {
            "growing" => GROWING,
            "inward" => INWARD,
            "continuity" => CONTINUITY,
            _ => return Err(CurriculumError::UnknownPlan(name.to_owned())),
        };
        load_stage_config(text)
    }

    /// Replace the transfer parameters.
    pub fn with_parameters(mut self, s_p: f64, s_l: f64, eta: f64) -> Result<CurriculumPlan, CurriculumError> {
        self.s_p = s_p;
        self.s_l = s_l;
        self.eta = eta;
        self.check_parameters()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Every category of every stage, in order of first appearance.
    pub fn all_categories(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.stages
            .iter()
            .flat_map(|s| s.categories.iter())
            .filter(|c| seen.insert(c.as_str()))
            .cloned()
            .collect()
    }
}

/// Parse a TOML stage config: either `plan = "<built-in>"` or a list of
/// `[[stage]]` tables with `name` and `categories`, plus optional `s_p`,
/// `s_l` and `eta`.
pub fn load_stage_config(text: &str) -> Result<CurriculumPlan, CurriculumError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CurriculumError::Config(e.to_string()))?;
    let base = match (&raw.plan, raw.stage.is_empty()) {
        (Some(_), false) => return Err(CurriculumError::PlanAndStages),
        (Some(name), true) => CurriculumPlan::builtin(name)?,
        (None, _) => {
            let stages = raw
                .stage
                .into_iter()
                .map(|s| Stage {
                    name: s.name,
                    categories: s.categories,
                })
                .collect();
            CurriculumPlan::new(stages, DEFAULT_S_P, DEFAULT_S_L, DEFAULT_ETA)?
        }
    };
    let (s_p, s_l, eta) = (
        raw.s_p.unwrap_or(base.s_p),
        raw.s_l.unwrap_or(base.s_l),
        raw.eta.unwrap_or(base.eta),
    );
    base.with_parameters(s_p, s_l, eta)
}

/// A built-in plan name or the path of a stage config file.
pub fn resolve_plan(name_or_path: &str) -> Result<CurriculumPlan, CurriculumError> {
    if BUILTIN_PLANS.contains(&name_or_path) {
        return CurriculumPlan::builtin(name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    load_stage_config(&text)
}

/// The stage at which each rule of a grammar becomes available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageAssignment {
    /// 1-based stage per rule.
    pub stage_of: Vec<usize>,
    /// Rules available at stages 1..=k, ascending, for each k.
    pub cumulative: Vec<Vec<usize>>,
}

impl StageAssignment {
    pub fn num_stages(&self) -> usize {
        self.cumulative.len()
    }

    /// Rules available at stage `k` (1-based).
    pub fn rules_at(&self, k: usize) -> &[usize] {
        &self.cumulative[k - 1]
    }

    /// Rules first available at stage `k`.
    pub fn new_at(&self, k: usize) -> Vec<usize> {
        (0..self.stage_of.len()).filter(|&r| self.stage_of[r] == k).collect()
    }
}

/// A rule belongs to the earliest stage at which its lhs and all of its
/// nonterminal rhs symbols are available; terminals impose no constraint.
pub fn assign_rules(g: &Grammar, plan: &CurriculumPlan) -> Result<StageAssignment, CurriculumError> {
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (k, st) in plan.stages.iter().enumerate() {
        for c in &st.categories {
            first.entry(c.as_str()).or_insert(k + 1);
        }
    }
    let mut stage_of = Vec::with_capacity(g.len());
    let mut unassignable = Vec::new();
    for (i, wr) in g.rules().iter().enumerate() {
        let mut symbols = vec![wr.rule.lhs];
        if wr.rule.kind == RuleKind::Production {
            symbols.extend(&wr.rule.rhs);
        }
        let stage = symbols
            .iter()
            .map(|&s| first.get(g.name(s)).copied())
            .try_fold(1, |acc, k| k.map(|k| acc.max(k)));
        match stage {
            Some(k) => stage_of.push(k),
            None => {
                unassignable.push(g.rule_string(i));
                stage_of.push(0);
            }
        }
    }
    if !unassignable.is_empty() {
        return Err(CurriculumError::Unassignable { rules: unassignable });
    }
    let cumulative = (1..=plan.len())
        .map(|k| (0..g.len()).filter(|&r| stage_of[r] <= k).collect())
        .collect();
    Ok(StageAssignment { stage_of, cumulative })
}

#[cfg(test)]
mod tests;
