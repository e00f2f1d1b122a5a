//! Command-line front end.
//!
//! Each pipeline stage is a subcommand that reads from and writes to a
//! snapshot store, so stages can be rerun independently:
//!
//! ```text
//! ingest → phrases → train → tfidf → analyze → export-vectors / report
//! ```

mod commands;
mod config;
mod ledger;
mod reports;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{AnalysisSection, PhraseSection, PipelineConfig};
pub use ledger::{read_ledger, LedgerEntry, RunLedger, Staging, StoreLock, LEDGER_FILE, LOCK_FILE};
pub use reports::{ANALYSIS_DIR, CANDIDATES_HEADER, TIMESERIES_HEADER};

use crate::corpus::InputFormat;

#[derive(Debug, Parser)]
#[command(
    name = "driftscope",
    version,
    about = "Track candidate terms across dated corpus snapshots"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Snapshot store directory.
    #[arg(long, global = true, env = "DRIFTSCOPE_STORE")]
    pub store: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// One thread and a fixed seed; reruns give byte-identical outputs.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Directory,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => InputFormat::Jsonl,
            FormatArg::Directory => InputFormat::TextDirectory,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add a dated snapshot to the store.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        date: String,
        #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
        format: FormatArg,
        /// Add the input to the latest earlier snapshot instead of replacing it.
        #[arg(long)]
        incremental: bool,
        /// Snapshot id; defaults to the date.
        #[arg(long)]
        label: Option<String>,
    },
    /// Build the phrase dictionary from all snapshots.
    Phrases {
        /// Seed phrase list; overrides the config.
        #[arg(long)]
        seeds: Option<PathBuf>,
    },
    /// Train the compass and one slice model per snapshot.
    Train {
        #[arg(long, conflicts_with = "slices_only")]
        compass_only: bool,
        /// Reuse the stored compass.
        #[arg(long)]
        slices_only: bool,
    },
    /// Write per-snapshot TF-IDF tables.
    Tfidf,
    /// Correlate frequency and drift for a candidate list.
    Analyze {
        candidates: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Write per-slice text vectors for one term or the whole vocabulary.
    ExportVectors {
        #[arg(required_unless_present = "all", conflicts_with = "all")]
        term: Option<String>,
        #[arg(long)]
        all: bool,
        /// Output directory; defaults to the store's exports directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the corpus growth table.
    Report,
}

/// Parses `args` and runs the command.
pub fn run_from<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::Ingest {
            input,
            date,
            format,
            incremental,
            label,
        } => ctx.ingest(&input, &date, format.into(), incremental, label),
        Command::Phrases { seeds } => ctx.phrases(seeds),
        Command::Train {
            compass_only,
            slices_only,
        } => ctx.train(compass_only, slices_only),
        Command::Tfidf => ctx.tfidf(),
        Command::Analyze { candidates, k } => ctx.analyze(&candidates, k),
        Command::ExportVectors { term, all, out } => {
            ctx.export_vectors(if all { None } else { term }, out)
        }
        Command::Report => ctx.report(),
    }
}
