//! Command-line surface. Optimizer flags mirror `OptimizeConfig` one to one.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use stylesteer::optimizer::{
    DEFAULT_BATCH_SIZE, DEFAULT_EXCLUDE_TOP_BLOCKS, DEFAULT_ITERATIONS, DEFAULT_LAMBDA_C, DEFAULT_LAMBDA_ID,
    DEFAULT_OPT_RESOLUTION, DEFAULT_STEP_SIZE,
};

#[derive(Debug, Parser)]
#[command(name = "stylesteer", version, about = "Text-driven global edit directions in generator style space")]
pub struct Cli {
    /// Backend: `toy` or a path to a backend manifest JSON.
    #[arg(long, global = true, default_value = "toy", env = "STYLESTEER_BACKEND")]
    pub backend: String,

    /// Direction store root.
    #[arg(long, global = true, env = "STYLESTEER_STORE", default_value = "stylesteer-store")]
    pub store: PathBuf,

    /// Log level for stderr: off, error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn", env = "STYLESTEER_LOG")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search a direction for a prompt and store or export it.
    Find(FindArgs),
    /// Apply a direction at one strength and write a PNG.
    Apply(ApplyArgs),
    /// Apply a direction at several strengths; writes one PNG per alpha and a strip.
    Sweep(SweepArgs),
    /// Invert a PNG to a style vector file.
    Invert(InvertArgs),
    /// Run scaled ablations and write CSV, SVG and JSON reports.
    Bench(BenchArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// List stored directions, newest first.
    List(ListArgs),
}

/// Search hyperparameters. Precedence: defaults < `--config` file < flags.
/// Defaults that do not exist in the backend layout (resolution, excluded
/// blocks) are adapted to it unless set explicitly.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the search hyperparameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weight of the text alignment loss.
    #[arg(long, default_value_t = DEFAULT_LAMBDA_C)]
    pub lambda_c: f64,
    /// Weight of the identity loss, in [0, 10].
    #[arg(long, default_value_t = DEFAULT_LAMBDA_ID)]
    pub lambda_id: f64,
    /// Images in the fixed optimization batch.
    #[arg(long = "batch", default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Truncation resolution used during the search.
    #[arg(long = "res", default_value_t = DEFAULT_OPT_RESOLUTION)]
    pub opt_resolution: u32,
    /// Optimizer iterations.
    #[arg(long = "iters", default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Optimizer step size.
    #[arg(long, default_value_t = DEFAULT_STEP_SIZE)]
    pub step_size: f64,
    /// Seed of the optimization batch.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of highest-resolution blocks left untouched.
    #[arg(long, default_value_t = DEFAULT_EXCLUDE_TOP_BLOCKS)]
    pub exclude_top_blocks: usize,
    /// Let directions move tRGB channels.
    #[arg(long)]
    pub include_trgb: bool,
    /// Adam first-moment decay.
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    /// Adam second-moment decay.
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Adam epsilon.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Single-channel mode: normalize the prompt embedding difference.
    #[arg(long)]
    pub normalized_difference: bool,
}

impl ConfigArgs {
    /// Config-file fields overlaid by the flags given on the command line.
    pub fn overrides(&self, matches: &ArgMatches) -> anyhow::Result<Value> {
        let mut fields = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| crate::usage(format!("cannot read config {}: {e}", path.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(crate::usage(format!("{}: expected a JSON object", path.display()))),
                    Err(e) => return Err(crate::usage(format!("{}: {e}", path.display()))),
                }
            }
            None => Map::new(),
        };
        let explicit = |id: &str| matches.value_source(id) == Some(ValueSource::CommandLine);
        let flags = [
            ("lambda_c", json!(self.lambda_c)),
            ("lambda_id", json!(self.lambda_id)),
            ("batch_size", json!(self.batch_size)),
            ("opt_resolution", json!(self.opt_resolution)),
            ("iterations", json!(self.iterations)),
            ("step_size", json!(self.step_size)),
            ("seed", json!(self.seed)),
            ("exclude_top_blocks", json!(self.exclude_top_blocks)),
            ("beta1", json!(self.beta1)),
            ("beta2", json!(self.beta2)),
            ("epsilon", json!(self.epsilon)),
        ];
        for (id, value) in flags {
            if explicit(id) {
                fields.insert(id.to_string(), value);
            }
        }
        if self.include_trgb {
            fields.insert("exclude_trgb".into(), json!(false));
        }
        if self.normalized_difference {
            fields.insert("normalized_difference".into(), json!(true));
        }
        Ok(Value::Object(fields))
    }
}

#[derive(Debug, Args)]
pub struct FindArgs {
    /// Target prompt.
    #[arg(long)]
    pub prompt: String,
    /// Neutral prompt; switches to single-channel search.
    #[arg(long)]
    pub prompt_neg: Option<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write a reproducible `.dir` export here instead of saving to the store.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the optimization report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write the loss trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

/// Where the unedited image comes from. Defaults to `--seed 0`.
#[derive(Debug, Clone, Args)]
#[group(multiple = false)]
pub struct SourceArgs {
    /// Seeded generated image.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Style vector file written by `invert`.
    #[arg(long)]
    pub style_file: Option<PathBuf>,
    /// PNG to invert and edit.
    #[arg(long)]
    pub image: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Stored direction id, or a path to a `.dir` file.
    #[arg(long)]
    pub direction: String,
    /// Edit strength.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Output resolution; defaults to the full generator resolution.
    #[arg(long)]
    pub res: Option<u32>,
    /// PNG sample depth, 8 or 16.
    #[arg(long, default_value_t = 8)]
    pub bits: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Stored direction id, or a path to a `.dir` file.
    #[arg(long)]
    pub direction: String,
    /// Comma-separated strengths.
    #[arg(long, default_value = "-2,-1,0,1,2", allow_hyphen_values = true, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub res: Option<u32>,
    #[arg(long, default_value_t = 8)]
    pub bits: u8,
    /// Directory for `alpha_<k>.png` files and `strip.png`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Style vector output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the reconstruction as PNG.
    #[arg(long)]
    pub recon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchKind {
    Resolution,
    Batch,
    Identity,
    Modes,
    All,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Which ablation to run.
    #[arg(value_enum, default_value_t = BenchKind::All)]
    pub kind: BenchKind,
    #[arg(long, default_value = "beard")]
    pub prompt: String,
    /// Truncation resolutions for the resolution ablation.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub resolutions: Vec<u32>,
    /// Batch sizes for the batch ablation.
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    pub batches: Vec<usize>,
    /// Identity weights for the identity ablation.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,2,10")]
    pub lambdas: Vec<f64>,
    /// Positive prompt of the single-channel comparison.
    #[arg(long, default_value = "smile")]
    pub positive: String,
    /// Neutral prompt of the single-channel comparison.
    #[arg(long, default_value = "a face")]
    pub negative: String,
    /// Timed runs per configuration.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Discarded warm-up runs per configuration.
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Run configurations concurrently (timings become unreliable).
    #[arg(long)]
    pub parallel: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "bench-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Concurrent search jobs.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Waiting jobs beyond this are refused.
    #[arg(long, default_value_t = stylesteer_service::DEFAULT_QUEUE_CAPACITY)]
    pub queue: usize,
    /// Upload cap in bytes.
    #[arg(long, default_value_t = stylesteer_service::DEFAULT_MAX_UPLOAD_BYTES)]
    pub max_upload_bytes: usize,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    /// Case-insensitive prompt substring.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Only directions for this backend fingerprint.
    #[arg(long)]
    pub fingerprint: Option<String>,
    /// One JSON object per line instead of a table.
    #[arg(long)]
    pub json: bool,
}
