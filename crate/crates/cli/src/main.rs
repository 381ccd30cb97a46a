use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use veat_core::{Error, Result, StdDivisor, TieRule};

mod commands;

/// Video embedding association tests (VEAT / SC-VEAT).
#[derive(Debug, Parser)]
#[command(name = "veat", version, about)]
struct Cli {
    #[command(flatten)]
    options: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON file of option defaults; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed for Monte Carlo permutations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo draws.
    #[arg(long, global = true)]
    iterations: Option<u64>,
    /// Largest partition count enumerated exactly.
    #[arg(long, global = true)]
    exact_threshold: Option<u64>,
    #[arg(long, global = true, value_enum)]
    tie_rule: Option<TieArg>,
    #[arg(long, global = true, value_enum)]
    std_divisor: Option<DivisorArg>,
    /// Normalize each frame before mean-pooling.
    #[arg(long, global = true)]
    normalize_frames: bool,
    /// Directory for result files.
    #[arg(long, global = true, env = "VEAT_OUTPUT_DIR", value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum TieArg {
    Strict,
    PlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum DivisorArg {
    Sample,
    Population,
}

impl From<TieArg> for TieRule {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Strict => TieRule::Strict,
            TieArg::PlusOne => TieRule::PlusOne,
        }
    }
}

impl From<DivisorArg> for StdDivisor {
    fn from(d: DivisorArg) -> Self {
        match d {
            DivisorArg::Sample => StdDivisor::Sample,
            DivisorArg::Population => StdDivisor::Population,
        }
    }
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlagsFile {
    seed: Option<u64>,
    iterations: Option<u64>,
    exact_threshold: Option<u64>,
    tie_rule: Option<TieArg>,
    std_divisor: Option<DivisorArg>,
    normalize_frames: Option<bool>,
    output_dir: Option<PathBuf>,
    threads: Option<usize>,
}

/// Global options after merging the flags file under the command line.
#[derive(Debug, Default)]
pub(crate) struct Options {
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    pub exact_threshold: Option<u64>,
    pub tie_rule: Option<TieRule>,
    pub std_divisor: Option<StdDivisor>,
    pub normalize_frames: bool,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Options {
    fn resolve(args: GlobalArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    context: path.display().to_string(),
                    source,
                })?
            }
            None => FlagsFile::default(),
        };
        Ok(Self {
            seed: args.seed.or(file.seed),
            iterations: args.iterations.or(file.iterations),
            exact_threshold: args.exact_threshold.or(file.exact_threshold),
            tie_rule: args.tie_rule.or(file.tie_rule).map(Into::into),
            std_divisor: args.std_divisor.or(file.std_divisor).map(Into::into),
            normalize_frames: args.normalize_frames || file.normalize_frames.unwrap_or(false),
            output_dir: args.output_dir.or(file.output_dir),
            threads: file.threads,
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean-pool frame embeddings (JSON Lines) into a video embedding archive.
    Pool {
        #[arg(long, value_name = "FILE")]
        frames: PathBuf,
        #[arg(long, short, value_name = "FILE")]
        output: PathBuf,
    },
    /// Check an archive against the record contract, listing every violation.
    Verify { archive: PathBuf },
    /// Two-target test: do X and Y differ in association with A vs B?
    Veat {
        #[command(flatten)]
        archives: ArchiveArgs,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Single-category test: does X associate more with A than with B?
    Scveat {
        #[command(flatten)]
        archives: ArchiveArgs,
        #[arg(long)]
        x: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Run a battery config and write the full report.
    Battery {
        /// Battery config (JSON).
        battery: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the standard battery config, optionally with a synthetic archive to run it on.
    Catalog {
        /// Archive paths to list in the config.
        #[arg(long = "archive", value_name = "FILE")]
        archives: Vec<PathBuf>,
        /// Write the config here instead of stdout.
        #[arg(long, short, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Also write a synthetic archive covering every concept.
        #[arg(long, value_name = "FILE")]
        synthetic: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        per_concept: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
    },
    /// Correlate effect sizes (CSV: label,effect_size) with a reference table column.
    Correlate {
        #[arg(long, value_name = "FILE")]
        effects: PathBuf,
        #[arg(long, value_enum)]
        reference: ReferenceArg,
        #[arg(long, value_enum)]
        axis: AxisArg,
    },
    /// Compare debias conditions with control (CSV: scenario,condition,d).
    Compare {
        #[arg(long, value_name = "FILE")]
        effects: PathBuf,
        #[arg(long, default_value = "comparison")]
        group: String,
    },
    /// Fleiss' kappa and majority votes (CSV: video_id,annotator_id,category).
    Agreement {
        #[arg(long, value_name = "FILE")]
        annotations: PathBuf,
        /// Print the majority label of every video.
        #[arg(long)]
        votes: bool,
    },
    /// Cross-check the engine against the brute-force reference on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Show per-test differences between two results.json files.
    Diff { left: PathBuf, right: PathBuf },
}

#[derive(Debug, Args)]
struct ArchiveArgs {
    /// Embedding archive (JSON Lines); repeat for several.
    #[arg(long = "archive", value_name = "FILE", required = true)]
    archives: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReferenceArg {
    Occupations,
    Awards,
    Oasis,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    PctMale,
    PctWomen,
    PctWhite,
    PctBlack,
    PctNonBlack,
    ValenceMean,
}

fn dispatch(cli: Cli) -> Result<()> {
    let opts = Options::resolve(cli.options)?;
    match cli.command {
        Command::Pool { frames, output } => commands::pool(&opts, &frames, &output),
        Command::Verify { archive } => commands::verify(&archive),
        Command::Veat {
            archives,
            x,
            y,
            a,
            b,
        } => commands::single(
            &opts,
            &archives.archives,
            commands::Single::Veat { x, y, a, b },
        ),
        Command::Scveat { archives, x, a, b } => commands::single(
            &opts,
            &archives.archives,
            commands::Single::Scveat { x, a, b },
        ),
        Command::Battery { battery, threads } => {
            commands::battery(&opts, &battery, threads.or(opts.threads))
        }
        Command::Catalog {
            archives,
            output,
            synthetic,
            per_concept,
            dim,
        } => commands::catalog(
            &opts,
            archives,
            output.as_deref(),
            synthetic.as_deref(),
            per_concept,
            dim,
        ),
        Command::Correlate {
            effects,
            reference,
            axis,
        } => commands::correlate(&opts, &effects, reference.into(), axis.into()),
        Command::Compare { effects, group } => commands::compare(&opts, &effects, &group),
        Command::Agreement { annotations, votes } => commands::agreement(&annotations, votes),
        Command::OracleCheck { trials } => commands::oracle_check(&opts, trials),
        Command::Diff { left, right } => commands::diff(&left, &right),
    }
}

impl From<ReferenceArg> for veat_core::study::ReferenceTable {
    fn from(r: ReferenceArg) -> Self {
        use veat_core::study::ReferenceTable as T;
        match r {
            ReferenceArg::Occupations => T::Occupations,
            ReferenceArg::Awards => T::Awards,
            ReferenceArg::Oasis => T::Oasis,
        }
    }
}

impl From<AxisArg> for veat_core::study::ReferenceAxis {
    fn from(a: AxisArg) -> Self {
        use veat_core::study::ReferenceAxis as X;
        match a {
            AxisArg::PctMale => X::PctMale,
            AxisArg::PctWomen => X::PctWomen,
            AxisArg::PctWhite => X::PctWhite,
            AxisArg::PctBlack => X::PctBlack,
            AxisArg::PctNonBlack => X::PctNonBlack,
            AxisArg::ValenceMean => X::ValenceMean,
        }
    }
}

/// 0 on success, 1 for usage and validation errors, 2 for I/O errors.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_io() => report(e, 2),
        Err(e) => report(e, 1),
    }
}

fn report(e: Error, code: u8) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}
