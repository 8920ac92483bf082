mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fusebeam_core::config::{AlphaSpec, LmWeightSpec};
use fusebeam_core::frontend::Frontend;
use fusebeam_core::metrics::ScoreUnit;

#[derive(Parser)]
#[command(
    name = "fusebeam",
    version,
    about = "Ensemble joint CTC/attention decoding over diverse audio frontends"
)]
struct Cli {
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, env = "FUSEBEAM_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features for every manifest entry into FEAT1 files.
    Features(FeaturesArgs),
    /// Decode a manifest with an ensemble of toy models.
    Decode(RunArgs),
    /// Decode with the first 1, 2, ..., M models and tabulate error rates.
    Ablation(RunArgs),
    /// Teacher-forced token outcomes, difficulty histogram and gains.
    Diversity(DiversityArgs),
    /// Score hypotheses against references.
    Score(ScoreArgs),
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub frontend: Frontend,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Frontend parameter JSON; omitted fields keep their defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Normalize with these statistics before writing.
    #[arg(long)]
    pub normalize: Option<PathBuf>,
    /// Fit global normalization statistics and write them here.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    /// Time masks as COUNTxWIDTH.
    #[arg(long, value_parser = commands::parse_mask)]
    pub mask_time: Option<fusebeam_core::frontend::MaskSpec>,
    /// Frequency masks as COUNTxWIDTH.
    #[arg(long, value_parser = commands::parse_mask)]
    pub mask_freq: Option<fusebeam_core::frontend::MaskSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Flags override the matching fields of `--config`.
#[derive(Args, Clone, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// uniform, validation_weighted or a JSON matrix such as [[0.7,0.3]].
    #[arg(long)]
    pub alpha: Option<AlphaSpec>,
    /// auto or a number.
    #[arg(long)]
    pub lm_weight: Option<LmWeightSpec>,
    #[arg(long)]
    pub lm: Option<PathBuf>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub pre_beam_size: Option<usize>,
    #[arg(long)]
    pub maxlen_ratio: Option<f64>,
    #[arg(long)]
    pub subsample_factor: Option<usize>,
    #[arg(long)]
    pub minlen: Option<usize>,
    #[arg(long)]
    pub nbest: Option<usize>,
    #[arg(long)]
    pub score_unit: Option<ScoreUnit>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct DiversityArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model order for incremental gains, e.g. 0,2,1.
    #[arg(long, value_delimiter = ',')]
    pub model_order: Option<Vec<usize>>,
    #[arg(long)]
    pub ctc_weight: Option<f64>,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Reference file, one `id text` per line.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Hypothesis file, one `id text` per line.
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long, default_value = "word")]
    pub unit: ScoreUnit,
    /// Also write the JSON report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("fusebeam: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    };
    let outcome = pool.install(|| match cli.command {
        Command::Features(a) => commands::features(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Ablation(a) => commands::ablation(&a),
        Command::Diversity(a) => commands::diversity(&a),
        Command::Score(a) => commands::score(&a),
    });
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("fusebeam: {failures} item(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("fusebeam: {e}");
            ExitCode::from(2)
        }
    }
}
