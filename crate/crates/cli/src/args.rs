use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Radar pulse deinterleaving: simulation, classical baselines and a
/// learned soft min-cost-flow model.
///
/// Every flag can also be set through a `PULSEFLOW_<FLAG>` environment
/// variable or a TOML file passed with `--config`; flags beat the
/// environment, which beats the file.
#[derive(Debug, Parser, Serialize)]
#[command(name = "pulseflow", version)]
pub struct Cli {
    /// TOML file with one table per subcommand, keys named like the flags.
    #[arg(long, global = true, env = "PULSEFLOW_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long, global = true, env = "PULSEFLOW_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate a labeled dataset.
    Gen(GenArgs),
    /// Train the attention model.
    Train(TrainArgs),
    /// Score methods on a labeled dataset and write a comparison table.
    Eval(EvalArgs),
    /// Deinterleave one sequence of arrival times.
    Infer(InferArgs),
    /// PRI scatter plots and difference histograms.
    Plot(PlotArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Case weights, e.g. `1:1,2:1`.
    #[arg(long, env = "PULSEFLOW_CASE_MIX", default_value = "1:1,2:1,3:1,4:1,5:1")]
    pub case_mix: String,

    /// Number of sequences.
    #[arg(long, env = "PULSEFLOW_COUNT", default_value_t = 1000)]
    pub count: usize,

    #[arg(long, env = "PULSEFLOW_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output dataset (JSON lines).
    #[arg(long, env = "PULSEFLOW_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Model shape: `desk` or `paper`.
    #[arg(long, env = "PULSEFLOW_MODEL_PRESET", default_value = "desk")]
    pub model_preset: String,

    /// Optimiser settings preset [default: same as --model-preset].
    #[arg(long, env = "PULSEFLOW_TRAIN_PRESET")]
    pub train_preset: Option<String>,

    /// Training dataset.
    #[arg(long, env = "PULSEFLOW_DATA")]
    pub data: PathBuf,

    /// Held-out dataset for early stopping.
    #[arg(long, env = "PULSEFLOW_VAL")]
    pub val: Option<PathBuf>,

    /// Checkpoint path; metrics go next to it.
    #[arg(long, env = "PULSEFLOW_OUT")]
    pub out: PathBuf,

    #[arg(long, env = "PULSEFLOW_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Cross-entropy only (all penalty weights zero).
    #[arg(long, env = "PULSEFLOW_BASELINE")]
    pub baseline: bool,

    /// Learning rate [default: from preset].
    #[arg(long, env = "PULSEFLOW_LR")]
    pub lr: Option<f64>,

    /// Steps of linear learning-rate warm-up [default: from preset].
    #[arg(long, env = "PULSEFLOW_WARMUP_STEPS")]
    pub warmup_steps: Option<u64>,

    /// [default: from preset]
    #[arg(long, env = "PULSEFLOW_BATCH_SIZE")]
    pub batch_size: Option<usize>,

    /// [default: from preset]
    #[arg(long, env = "PULSEFLOW_EPOCHS")]
    pub epochs: Option<usize>,

    /// Optimizer step budget [default: none].
    #[arg(long, env = "PULSEFLOW_MAX_STEPS")]
    pub max_steps: Option<u64>,

    /// Column-hinge weight [default: 10].
    #[arg(long, env = "PULSEFLOW_LAMBDA2")]
    pub lambda2: Option<f64>,

    /// Flow-balance weight [default: 1].
    #[arg(long, env = "PULSEFLOW_LAMBDA3")]
    pub lambda3: Option<f64>,

    /// One-hot weight [default: 5].
    #[arg(long, env = "PULSEFLOW_LAMBDA4")]
    pub lambda4: Option<f64>,

    /// Steps between held-out evaluations, 0 = once per epoch [default: from preset].
    #[arg(long, env = "PULSEFLOW_VAL_EVERY")]
    pub val_every: Option<u64>,

    /// Steps over which the penalty weights ramp up from zero [default: from preset].
    #[arg(long, env = "PULSEFLOW_PENALTY_RAMP_STEPS")]
    pub penalty_ramp_steps: Option<u64>,

    /// Evaluations without improvement before stopping, 0 = never [default: from preset].
    #[arg(long, env = "PULSEFLOW_PATIENCE")]
    pub patience: Option<usize>,

    /// Steps between rolling checkpoints [default: from preset].
    #[arg(long, env = "PULSEFLOW_CHECKPOINT_EVERY")]
    pub checkpoint_every: Option<u64>,

    /// Decode used for held-out scoring: greedy or lp.
    #[arg(long, env = "PULSEFLOW_VAL_DECODE", default_value = "lp")]
    pub val_decode: String,

    /// Print a loss line every this many steps.
    #[arg(long, env = "PULSEFLOW_LOG_EVERY", default_value_t = 100)]
    pub log_every: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Labeled dataset.
    #[arg(long, env = "PULSEFLOW_DATA")]
    pub data: PathBuf,

    /// Comma-separated: oracle, cdif, sdif, prit, baseline, smcf.
    #[arg(long, env = "PULSEFLOW_METHODS", default_value = "cdif,sdif,prit")]
    pub methods: String,

    /// Comma-separated decodes for learned methods: greedy, lp.
    #[arg(long, env = "PULSEFLOW_DECODE", default_value = "greedy,lp")]
    pub decode: String,

    /// Checkpoint of the flow-loss model (method `smcf`).
    #[arg(long, env = "PULSEFLOW_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,

    /// Checkpoint of the cross-entropy model (method `baseline`).
    #[arg(long, env = "PULSEFLOW_BASELINE_CHECKPOINT")]
    pub baseline_checkpoint: Option<PathBuf>,

    /// Inference window [default: model capacity].
    #[arg(long, env = "PULSEFLOW_WINDOW")]
    pub window: Option<usize>,

    /// Window stride [default: half the window].
    #[arg(long, env = "PULSEFLOW_STRIDE")]
    pub stride: Option<usize>,

    /// Report CSV.
    #[arg(long, env = "PULSEFLOW_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    #[arg(long, env = "PULSEFLOW_CHECKPOINT")]
    pub checkpoint: PathBuf,

    /// Plain text, one arrival time (us) per line.
    #[arg(long, env = "PULSEFLOW_INPUT")]
    pub input: PathBuf,

    /// greedy or lp.
    #[arg(long, env = "PULSEFLOW_DECODE", default_value = "lp")]
    pub decode: String,

    /// Inference window [default: model capacity].
    #[arg(long, env = "PULSEFLOW_WINDOW")]
    pub window: Option<usize>,

    /// Window stride [default: half the window].
    #[arg(long, env = "PULSEFLOW_STRIDE")]
    pub stride: Option<usize>,

    /// Also write `chain,index,toa` rows here.
    #[arg(long, env = "PULSEFLOW_CSV")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    /// Pattern such as `constant:500`, `jitter:500:0.1`,
    /// `stagger:500,400,600`, `random-stagger:400,500,600:0.02` or
    /// `dwell:600,400,500:5,7,3`.
    #[arg(long, env = "PULSEFLOW_PATTERN", conflicts_with_all = ["data", "figure"])]
    pub pattern: Option<String>,

    /// Plot a dataset record instead of a pattern.
    #[arg(long, env = "PULSEFLOW_DATA", conflicts_with = "figure")]
    pub data: Option<PathBuf>,

    /// Record index within --data.
    #[arg(long, env = "PULSEFLOW_RECORD", default_value_t = 0)]
    pub record: usize,

    /// Write the five reference panels (constant, jitter, constant
    /// stagger, random stagger, switch & dwell).
    #[arg(long, env = "PULSEFLOW_FIGURE")]
    pub figure: bool,

    /// Pulses per pattern.
    #[arg(long, env = "PULSEFLOW_COUNT", default_value_t = 60)]
    pub count: usize,

    #[arg(long, env = "PULSEFLOW_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, env = "PULSEFLOW_OUT")]
    pub out: PathBuf,
}
