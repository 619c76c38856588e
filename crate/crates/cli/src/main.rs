mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bloomlo::agreement::GroupMapping;
use clap::{Parser, Subcommand, ValueEnum};

use commands::{AnalyzeArgs, GenerateArgs, Warnings};
use config::FileConfig;

/// Generate course learning objectives with a chat model and analyze them
/// against Bloom's taxonomy.
#[derive(Parser)]
#[command(name = "bloomlo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML file with [provider], [generation] and [lint] tables
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Verb lexicon replacing the bundled one
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,

    /// Serve completions from this replay store
    #[arg(long, global = true, value_name = "STORE")]
    replay: Option<PathBuf>,

    /// Call the live endpoint; the credential comes from the environment
    #[arg(long, global = true)]
    live: bool,

    /// Model name for generation
    #[arg(long, global = true)]
    model: Option<String>,

    /// Concurrent module requests during generation
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,

    /// Split multi-level assignments as 1/k per level in contingency tables
    #[arg(long, global = true)]
    fractional: bool,

    /// Reduction of multi-level automatic assignments to Lower/Higher
    #[arg(long, global = true, value_enum, default_value_t = Mapping::Highest)]
    mapping: Mapping,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mapping {
    Highest,
    AnyHigher,
    Majority,
}

impl From<Mapping> for GroupMapping {
    fn from(m: Mapping) -> Self {
        match m {
            Mapping::Highest => GroupMapping::Highest,
            Mapping::AnyHigher => GroupMapping::AnyHigher,
            Mapping::Majority => GroupMapping::Majority,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Request one completion per course module
    Generate {
        #[arg(long)]
        course: PathBuf,
        #[arg(long, default_value = "completions.json")]
        out: PathBuf,
        /// Also record live completions into this replay store
        #[arg(long, value_name = "STORE")]
        record: Option<PathBuf>,
        /// System prompt file replacing the bundled prompt
        #[arg(long)]
        system_prompt: Option<PathBuf>,
        /// User message template replacing the bundled one
        #[arg(long)]
        user_template: Option<PathBuf>,
        /// On a replay miss, continue with an empty completion
        #[arg(long)]
        lenient_replay: bool,
    },
    /// Extract learning objectives from recorded completions
    Parse {
        #[arg(long, default_value = "completions.json")]
        completions: PathBuf,
        #[arg(long, default_value = "corpus.jsonl")]
        out: PathBuf,
        #[arg(long, default_value = "parse_report.json")]
        report: PathBuf,
    },
    /// Verb extraction, classification, alignment, lint and tables
    Analyze {
        #[arg(long)]
        course: PathBuf,
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        /// Classifier output rows `lo_id,Level[|Level...]`
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long, default_value = "bundle.json")]
        out: PathBuf,
    },
    /// Inter-rater and human-vs-automatic agreement
    Agree {
        /// Rows `lo_id,annotator_id,Level`
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value = "bundle.json")]
        bundle: PathBuf,
        #[arg(long, default_value = "agreement.json")]
        out: PathBuf,
    },
    /// Plot-ready CSV tables
    Report {
        #[arg(long, default_value = "bundle.json")]
        bundle: PathBuf,
        #[arg(long)]
        agreement: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Warnings> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate {
            course,
            out,
            record,
            system_prompt,
            user_template,
            lenient_replay,
        } => {
            let provider = config::resolve_provider(
                file.provider.as_ref(),
                cli.replay.as_ref(),
                cli.live,
                lenient_replay,
                cli.model.as_deref(),
            )?;
            let params = config::resolve_params(&file.generation, &provider, cli.model.as_deref())?;
            commands::generate(GenerateArgs {
                course: &course,
                out: &out,
                provider,
                params,
                parallel: cli.parallel,
                record_store: record.as_deref(),
                system_prompt: system_prompt.as_ref(),
                user_template: user_template.as_ref(),
            })
        }
        Command::Parse {
            completions,
            out,
            report,
        } => commands::parse(&completions, &out, &report),
        Command::Analyze {
            course,
            corpus,
            external,
            out,
        } => commands::analyze(AnalyzeArgs {
            course: &course,
            corpus: &corpus,
            external: external.as_deref(),
            lexicon: cli.lexicon.as_deref(),
            lint: &file.lint,
            fractional: cli.fractional,
            out: &out,
        }),
        Command::Agree {
            annotations,
            bundle,
            out,
        } => commands::agree(&annotations, &bundle, cli.mapping.into(), &out),
        Command::Report {
            bundle,
            agreement,
            out_dir,
        } => commands::report(&bundle, agreement.as_deref(), &out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(warnings) if warnings.is_empty() => ExitCode::SUCCESS,
        Ok(warnings) => {
            for warning in warnings {
                eprintln!("warning: {warning}");
            }
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
