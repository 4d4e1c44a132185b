//! `clozekit`: contamination audits, cloze construction, evaluation and
//! statistics from the command line.

mod commands;
mod providers;
mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::settings::{CliError, CliResult, Settings};

#[derive(Parser, Debug)]
#[command(name = "clozekit", version, about = "Corpus contamination audits and narrative-cloze evaluation")]
struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sentence-level string search of archive documents in a training corpus.
    AuditStrings(commands::audit::StringsArgs),
    /// Name candidate extraction and multi-pattern name audit.
    AuditNames(commands::audit::NamesArgs),
    /// Build cloze instances from timeline CSVs.
    MakeCloze(commands::cloze::MakeArgs),
    /// Generate, score and tabulate reconstructions.
    RunEval(commands::cloze::EvalArgs),
    /// Pick the similarity threshold that maximizes macro-F1.
    TuneThreshold(commands::analysis::TuneArgs),
    /// Continuation probe over SEEN and UNSEEN documents.
    Probe(commands::analysis::ProbeArgs),
    /// Significance tests and effect sizes for probe and paired results.
    StatsReport(commands::analysis::StatsArgs),
}

/// Settings shared by every command.
pub struct Common {
    pub settings: Settings,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct HttpArgs {
    /// Directory of cached provider responses.
    #[arg(long)]
    cache_dir: Option<String>,
    /// read_write | replay | off
    #[arg(long)]
    cache_mode: Option<String>,
    /// Maximum concurrent provider requests.
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    retries: Option<u32>,
}

impl HttpArgs {
    pub fn resolve(self, s: &mut Settings) -> CliResult<providers::HttpOptions> {
        let cache_mode: String = s.value("cache_mode", self.cache_mode, "read_write".into())?;
        Ok(providers::HttpOptions {
            cache_dir: s.optional("cache_dir", self.cache_dir)?.map(PathBuf::from),
            cache_mode: cache_mode.parse().map_err(CliError::Usage)?,
            max_in_flight: s.value("max_in_flight", self.max_in_flight, 4)?,
            timeout_secs: s.value("timeout_secs", self.timeout_secs, 120)?,
            retries: s.value("retries", self.retries, 3)?,
        })
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.value("seed", cli.seed, 0u64)?;
    let out = PathBuf::from(settings.value("out", cli.out, "clozekit-out".to_string())?);
    if let Some(n) = settings.optional("workers", cli.workers)? {
        if n == 0 {
            return Err(CliError::Usage("workers must be >= 1".into()));
        }
        // fails only if a pool already exists, which is harmless here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut common = Common { settings, seed, out };
    match cli.command {
        Command::AuditStrings(a) => commands::audit::audit_strings(&mut common, a),
        Command::AuditNames(a) => commands::audit::audit_names(&mut common, a),
        Command::MakeCloze(a) => commands::cloze::make_cloze(&mut common, a),
        Command::RunEval(a) => commands::cloze::run_eval(&mut common, a),
        Command::TuneThreshold(a) => commands::analysis::tune_threshold(&mut common, a),
        Command::Probe(a) => commands::analysis::probe(&mut common, a),
        Command::StatsReport(a) => commands::analysis::stats_report(&mut common, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clozekit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
