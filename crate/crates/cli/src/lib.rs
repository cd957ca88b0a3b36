//! Command-line pipeline: oracle extraction, staged training, parsing,
//! evaluation and parameter sweeps.

pub mod args;
pub mod fixture;
pub mod pipeline;
pub mod sweep;

use std::path::{Path, PathBuf};

use stagegram_core::curriculum::CurriculumError;
use stagegram_core::estimate::EstimateError;
use stagegram_core::eval::EvalError;
use stagegram_core::grammar::{parse_grammar_file, Grammar, GrammarError};
use stagegram_core::treebank::{parse_trees, Tree, TreebankError};
use thiserror::Error;

pub use args::{Cli, Command, Init, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    GrammarFile { path: PathBuf, source: GrammarError },
    #[error("{}: {source}", path.display())]
    TreebankFile { path: PathBuf, source: TreebankError },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    /// 1 for usage and input problems, 2 when the pipeline itself aborts.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::GrammarFile { .. } | CliError::TreebankFile { .. } => 1,
            CliError::Curriculum(e) => match e {
                CurriculumError::Config(_)
                | CurriculumError::UnknownPlan(_)
                | CurriculumError::PlanAndStages
                | CurriculumError::NoStages
                | CurriculumError::DuplicateStage(_)
                | CurriculumError::EmptyStage(_)
                | CurriculumError::BadParameter { .. }
                | CurriculumError::Io(_) => 1,
                _ => 2,
            },
            CliError::Eval(EvalError::Io(_)) => 1,
            CliError::Grammar(_)
            | CliError::Treebank(_)
            | CliError::Estimate(_)
            | CliError::Eval(_)
            | CliError::Pipeline(_) => 2,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_grammar(path: &Path) -> Result<Grammar, CliError> {
    parse_grammar_file(&read_text(path)?).map_err(|source| CliError::GrammarFile {
        path: path.to_owned(),
        source,
    })
}

pub fn read_treebank(path: &Path) -> Result<Vec<Tree>, CliError> {
    parse_trees(&read_text(path)?).map_err(|source| CliError::TreebankFile {
        path: path.to_owned(),
        source,
    })
}

/// Create `dir`, refusing to reuse a non-empty directory unless `force`.
pub fn prepare_out(dir: &Path, force: bool) -> Result<(), CliError> {
    if !force {
        if let Ok(mut entries) = std::fs::read_dir(dir) {
            if entries.next().is_some() {
                return Err(CliError::Usage(format!(
                    "output directory {} is not empty; pass --force to write into it",
                    dir.display()
                )));
            }
        }
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(a) => pipeline::cmd_extract(&a.resolve()?).map(|_| ()),
        Command::Train(a) => pipeline::cmd_train(&a.resolve()?).map(|_| ()),
        Command::Parse(a) => pipeline::cmd_parse(&a.grammar, &a.sentences, a.out.as_deref()),
        Command::Eval(a) => pipeline::cmd_eval(&a.run.resolve()?, a.oracle.as_deref()),
        Command::Sweep(a) => sweep::cmd_sweep(&a.run.resolve()?, &a.grid, a.parallel).map(|_| ()),
        Command::Synth(a) => {
            let trees = fixture::synthetic_treebank(a.count, a.seed);
            write_text(&a.out, &fixture::treebank_text(&trees))
        }
    }
}
