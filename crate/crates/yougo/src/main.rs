use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use yougo::cli::{
    cmd_coverage, cmd_evaluate, cmd_extract, cmd_grammar_dump, CliError, GrammarSource,
    OutputFormat, RunConfig,
};

/// Multiword term extraction from POS-tagged Japanese text.
#[derive(Parser)]
#[command(name = "yougo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum FormatArg {
    #[default]
    Tsv,
    Structured,
}

#[derive(Args)]
struct CommonOpts {
    /// Grammar source: `builtin` or a grammar file path.
    #[arg(long, default_value = "builtin")]
    grammar: String,
    /// Tag-map file; without it the corpus must carry canonical tags.
    #[arg(long)]
    tagmap: Option<PathBuf>,
    /// Drop entries scoring below this log-likelihood threshold.
    #[arg(long)]
    min_llr: Option<f64>,
    /// Clamp every pattern's maximum span (at least 2).
    #[arg(long)]
    max_len: Option<usize>,
    /// Report format.
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    /// Fail on raw tags missing from the tag map instead of mapping to OTHER.
    #[arg(long)]
    strict_tags: bool,
    /// Worker threads for sentence scanning; output is identical at any count.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl CommonOpts {
    fn into_config(self) -> RunConfig {
        RunConfig {
            grammar: if self.grammar == "builtin" {
                GrammarSource::Builtin
            } else {
                GrammarSource::File(PathBuf::from(self.grammar))
            },
            tagmap: self.tagmap,
            min_llr: self.min_llr,
            max_len: self.max_len,
            format: match self.format {
                FormatArg::Tsv => OutputFormat::Tsv,
                FormatArg::Structured => OutputFormat::Structured,
            },
            strict_tags: self.strict_tags,
            threads: self.threads.max(1),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract and rank term candidates from a tagged corpus (`-` for stdin).
    Extract {
        #[command(flatten)]
        opts: CommonOpts,
        corpus: String,
    },
    /// Measure grammar coverage over a gold term file.
    Coverage {
        #[command(flatten)]
        opts: CommonOpts,
        gold: String,
    },
    /// Extract from a corpus and score the result against a gold term file.
    Evaluate {
        #[command(flatten)]
        opts: CommonOpts,
        corpus: String,
        gold: String,
    },
    /// Print the grammar in the loadable grammar-file syntax.
    GrammarDump {
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Extract { opts, corpus } => cmd_extract(&opts.into_config(), &corpus, out),
        Command::Coverage { opts, gold } => cmd_coverage(&opts.into_config(), &gold, out),
        Command::Evaluate { opts, corpus, gold } => {
            cmd_evaluate(&opts.into_config(), &corpus, &gold, out)
        }
        Command::GrammarDump { opts } => cmd_grammar_dump(&opts.into_config(), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("yougo: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
