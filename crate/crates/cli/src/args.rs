use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "stagegram", version, about = "Staged PCFG induction from treebanks and raw sentences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the oracle grammar from a treebank and write a coverage table.
    Extract(RunArgs),
    /// Train stage grammars under a curriculum and evaluate each stage.
    Train(RunArgs),
    /// Viterbi-parse sentences with a grammar.
    Parse(ParseArgs),
    /// Evaluate one grammar against a treebank, an oracle and child speech.
    Eval(EvalArgs),
    /// Train over a grid of transfer parameters and compare curricula.
    Sweep(SweepArgs),
    /// Write the bundled synthetic treebank.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Uniform weights per left-hand side.
    Uniform,
    /// The oracle's relative frequencies.
    Oracle,
}

/// Options shared by the pipeline commands. Anything left unset falls back
/// to `--config`, then to the built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with the same keys as these flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bracketed treebank, one tree per line.
    #[arg(long)]
    pub treebank: Option<PathBuf>,
    /// Training sentences, one per line; defaults to the treebank yields.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Sentences scored for mean log-likelihood.
    #[arg(long)]
    pub child_speech: Option<PathBuf>,
    /// Oracle grammar file; extracted from the treebank when absent.
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Built-in plan (growing, inward, continuity) or a stage config file.
    #[arg(long)]
    pub curriculum: Option<String>,
    /// Transfer strength for productions.
    #[arg(long)]
    pub s_p: Option<f64>,
    /// Transfer strength for lexical rules.
    #[arg(long)]
    pub s_l: Option<f64>,
    /// Prior mass shared by rules new at a stage.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Production frequency threshold; chosen by coverage when absent.
    #[arg(long)]
    pub f_m: Option<usize>,
    /// VB iterations per stage [default: 20].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Treebank sentences scored for F1 [default: 1000].
    #[arg(long)]
    pub eval_sample: Option<usize>,
    /// Seed for the evaluation sample.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fold expected counts in a fixed order (bit-identical across thread counts).
    #[arg(long, action = ArgAction::SetTrue)]
    pub reproducible: bool,
    /// Count the root bracket in F1.
    #[arg(long, action = ArgAction::Set, num_args = 1)]
    pub include_root: Option<bool>,
    /// Logarithm base of the divergence [default: 2].
    #[arg(long)]
    pub jsd_base: Option<f64>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Initial weights of the first stage.
    #[arg(long, value_enum)]
    pub init: Option<Init>,
    /// Perturb the initial weights with this seed.
    #[arg(long)]
    pub jitter: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub grammar: PathBuf,
    #[arg(long)]
    pub sentences: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Reference grammar for per-category JSD.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// TOML grid: `curricula`, `s_l`, `s_p` and `eta` lists.
    #[arg(long)]
    pub grid: PathBuf,
    /// Run grid cells concurrently.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    treebank: Option<PathBuf>,
    sentences: Option<PathBuf>,
    child_speech: Option<PathBuf>,
    grammar: Option<PathBuf>,
    curriculum: Option<String>,
    s_p: Option<f64>,
    s_l: Option<f64>,
    eta: Option<f64>,
    f_m: Option<usize>,
    iterations: Option<usize>,
    eval_sample: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    reproducible: Option<bool>,
    include_root: Option<bool>,
    jsd_base: Option<f64>,
    init: Option<Init>,
    jitter: Option<u64>,
}

pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_EVAL_SAMPLE: usize = 1000;

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub treebank: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    pub child_speech: Option<PathBuf>,
    pub grammar: Option<PathBuf>,
    pub curriculum: String,
    /// `None` keeps the plan's own value.
    pub s_p: Option<f64>,
    pub s_l: Option<f64>,
    pub eta: Option<f64>,
    pub f_m: Option<usize>,
    pub iterations: usize,
    pub eval_sample: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reproducible: bool,
    pub include_root: bool,
    pub jsd_base: f64,
    #[serde(skip)]
    pub force: bool,
    pub init: Init,
    pub jitter: Option<u64>,
}

fn relative_to(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_absolute() { p } else { base.join(p) })
}

impl RunArgs {
    /// Merge flags over the config file over defaults. Relative paths in
    /// the config file are taken relative to the file.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = crate::read_text(path)?;
                let raw: FileConfig =
                    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("."));
                FileConfig {
                    treebank: relative_to(base, raw.treebank),
                    sentences: relative_to(base, raw.sentences),
                    child_speech: relative_to(base, raw.child_speech),
                    grammar: relative_to(base, raw.grammar),
                    out: relative_to(base, raw.out),
                    ..raw
                }
            }
        };
        let cfg = RunConfig {
            treebank: self.treebank.clone().or(file.treebank),
            sentences: self.sentences.clone().or(file.sentences),
            child_speech: self.child_speech.clone().or(file.child_speech),
            grammar: self.grammar.clone().or(file.grammar),
            curriculum: self
                .curriculum
                .clone()
                .or(file.curriculum)
                .unwrap_or_else(|| "continuity".to_owned()),
            s_p: self.s_p.or(file.s_p),
            s_l: self.s_l.or(file.s_l),
            eta: self.eta.or(file.eta),
            f_m: self.f_m.or(file.f_m),
            iterations: self.iterations.or(file.iterations).unwrap_or(DEFAULT_ITERATIONS),
            eval_sample: self.eval_sample.or(file.eval_sample).unwrap_or(DEFAULT_EVAL_SAMPLE),
            seed: self.seed.or(file.seed),
            out: self.out.clone().or(file.out),
            reproducible: self.reproducible || file.reproducible.unwrap_or(false),
            include_root: self.include_root.or(file.include_root).unwrap_or(true),
            jsd_base: self.jsd_base.or(file.jsd_base).unwrap_or(2.0),
            force: self.force,
            init: self.init.or(file.init).unwrap_or(Init::Uniform),
            jitter: self.jitter.or(file.jitter),
        };
        if cfg.iterations == 0 {
            return Err(CliError::Usage("--iterations must be at least 1".into()));
        }
        if cfg.f_m == Some(0) {
            return Err(CliError::Usage("--f-m must be at least 1".into()));
        }
        if cfg.eval_sample == 0 {
            return Err(CliError::Usage("--eval-sample must be at least 1".into()));
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
    }

    pub fn treebank_path(&self) -> Result<&Path, CliError> {
        self.treebank
            .as_deref()
            .ok_or_else(|| CliError::Usage("--treebank is required".into()))
    }
}
