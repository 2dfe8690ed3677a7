//! `msgnn`: prepare data, train spectrum predictors and rank candidates.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 runtime error.

mod commands;
mod pubchem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "msgnn", version, about = "Tandem mass spectrum prediction and candidate ranking")]
struct Cli {
    /// Seed for splitting, initialization, shuffling and subsampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `key = value` settings file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set layers=3`. Repeatable; applied
    /// after `--config`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select one spectrum per molecule from an MSP library into a manifest.
    Prepare {
        library: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Split a manifest into train, validation and optional test molecules.
    Split {
        manifest: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Molecules held out as a test set before the 4:1 split.
        #[arg(long, default_value_t = 0)]
        test_size: usize,
    },
    /// Train a model on the train and validation molecules of a split.
    Train {
        manifest: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Checkpoint to write.
        #[arg(short, long)]
        output: PathBuf,
        /// Per-epoch loss CSV; defaults to the checkpoint path with `.log.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Predict spectra for molecules.
    Predict {
        checkpoint: PathBuf,
        /// SMILES to predict. Repeatable.
        #[arg(long)]
        smiles: Vec<String>,
        /// File with one `SMILES` or `id<TAB>SMILES` per line.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Output format; `.msp` outputs default to msp.
        #[arg(long, value_parser = ["csv", "msp"])]
        format: Option<String>,
    },
    /// Rank candidates for each spectrum of an MSP file.
    Rank {
        #[command(flatten)]
        predictor: PredictorArgs,
        /// MSP file of query spectra; records need a SMILES to mark the target.
        #[arg(long)]
        query: PathBuf,
        /// Candidate TSV used for every query, or a cache directory
        /// searched by formula.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compute recall@k over a test manifest.
    Evaluate {
        #[command(flatten)]
        predictor: PredictorArgs,
        manifest: PathBuf,
        /// Restrict to one subset of this split file.
        #[arg(long, requires = "subset")]
        split: Option<PathBuf>,
        #[arg(long, value_parser = ["train", "validation", "test"])]
        subset: Option<String>,
        /// Candidate cache directory (default: $MSGNN_CACHE_DIR or ./candidate_cache).
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Look up formulas missing from the cache online.
        #[arg(long)]
        fetch: bool,
        /// Subsample candidate sets to these average sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        avg_size: Vec<f64>,
        /// Population average set size for subsampling (default: the mean
        /// over the evaluated queries).
        #[arg(long)]
        population_avg: Option<f64>,
        /// Keep only the most or least similar candidates.
        #[arg(long, value_parser = ["most", "least", "both"], requires = "stratum_size")]
        stratify: Option<String>,
        /// Candidates per stratified set, target included.
        #[arg(long)]
        stratum_size: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
        ks: Vec<usize>,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write one ranking CSV per setting into this directory.
        #[arg(long)]
        rankings: Option<PathBuf>,
    },
    /// Look up candidate structures by molecular formula and cache them.
    FetchCandidates {
        /// Hill-order formulas such as C6H6.
        formulas: Vec<String>,
        /// Also fetch every formula occurring in this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Use the cache only.
        #[arg(long)]
        offline: bool,
    },
    /// Check analytic gradients of every architecture against finite differences.
    Gradcheck {
        /// Coordinates sampled per parameter tensor.
        #[arg(long, default_value_t = 8)]
        coords: usize,
    },
    /// Merge recall, ranking and training CSVs into plot-ready tables.
    Report {
        inputs: Vec<PathBuf>,
        /// Directory for the merged tables.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct PredictorArgs {
    /// Trained model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// MSP library whose spectra serve as exact predictions.
    #[arg(long)]
    reference: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
