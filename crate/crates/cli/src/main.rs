mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

/// Train, run and evaluate shifting-buffer speech synthesis models.
///
/// Settings resolve from built-in defaults, then the `--config` TOML file,
/// then flags. Exit status: 0 success, 1 usage error, 2 data or format
/// error, 3 numerical error.
#[derive(Debug, Parser)]
#[command(name = "shiftbuf", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Model weights (VLW1) to read.
    #[arg(long, global = true, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    /// Output path; its meaning depends on the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for training.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Phoneme inventory, one symbol per line. Defaults to ARPAbet plus filler and pauses.
    #[arg(long, global = true, value_name = "FILE")]
    pub inventory: Option<PathBuf>,
    /// Pronouncing dictionary ("WORD PH1 PH2 ..." lines).
    #[arg(long, global = true, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    /// Corpus manifest (TSV).
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-speaker corpus into the --out directory.
    GenCorpus(GenCorpusArgs),
    /// Train a model on the --manifest corpus and write weights to --out.
    Train(TrainArgs),
    /// Synthesize one sentence to a feature file at --out.
    Synth(SynthArgs),
    /// Fit a new speaker vector to the --manifest utterances; writes it to --out.
    FitSpeaker(FitArgs),
    /// Synthesize a sentence after priming the buffer with another one.
    PrimeSynth(PrimeArgs),
    /// MCD (with DTW alignment by default) between two feature files.
    EvalMcd(McdArgs),
    /// Nearest-centroid speaker identification against the --manifest corpus.
    EvalId(IdArgs),
    /// Compare analytic and finite-difference gradients on a small model.
    Gradcheck(GradcheckArgs),
    /// Per-column weight significance of the buffer for the three networks.
    Significance,
    /// Time single-core inference of the configured (default full-size) model.
    Bench(BenchArgs),
    /// Print parameter count and tensor shapes.
    Inspect,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub d_o: Option<usize>,
    #[arg(long)]
    pub n_phonemes: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// sgd, momentum or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Teacher-forcing noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Per-epoch log (TSV).
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Checkpoint written every `checkpoint_every` epochs and at the end.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint instead of fresh or --weights parameters.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("sentence").required(true).args(["phonemes", "text"])))]
pub struct SentenceArgs {
    /// Phoneme ids separated by spaces or commas.
    #[arg(long)]
    pub phonemes: Option<String>,
    /// Text converted with --dict and --inventory.
    #[arg(long)]
    pub text: Option<String>,
}

#[derive(Debug, Args)]
pub struct VoiceArgs {
    /// Speaker id in the model's table.
    #[arg(long, conflicts_with = "speaker_file")]
    pub speaker: Option<usize>,
    /// Speaker vector written by fit-speaker.
    #[arg(long, value_name = "FILE")]
    pub speaker_file: Option<PathBuf>,
    /// Export the attention weights (frames x phonemes) as a matrix file.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub sentence: SentenceArgs,
    #[command(flatten)]
    pub voice: VoiceArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("prime").required(true).args(["prime_phonemes", "prime_text"])))]
pub struct PrimeArgs {
    #[command(flatten)]
    pub sentence: SentenceArgs,
    #[command(flatten)]
    pub voice: VoiceArgs,
    #[arg(long)]
    pub prime_phonemes: Option<String>,
    #[arg(long)]
    pub prime_text: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Use only manifest rows with this speaker id.
    #[arg(long)]
    pub speaker: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Teacher-forcing noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct McdArgs {
    pub reference: PathBuf,
    pub candidate: PathBuf,
    /// Coefficient range `start..end`; defaults to every coefficient.
    #[arg(long)]
    pub range: Option<String>,
    /// Frame-by-frame distance over equal-length inputs, no alignment.
    #[arg(long)]
    pub no_dtw: bool,
}

#[derive(Debug, Args)]
pub struct IdArgs {
    /// Feature files to classify.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Report accuracy against this speaker id.
    #[arg(long)]
    pub expect: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Check at most this many coordinates per tensor instead of all.
    #[arg(long)]
    pub per_tensor: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub phonemes: usize,
    #[arg(long, default_value_t = 400)]
    pub frames: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
