use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntityFlag {
    Mc,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RelationshipFlag {
    Alignment,
    Interaction,
}

/// Banzhaf interaction engine.
///
/// Exit codes: 0 success, 1 runtime failure, 2 malformed input or usage,
/// 3 exact enumeration cap exceeded, 4 embedding dimension mismatch,
/// 5 axiom check failed.
#[derive(Debug, Parser)]
#[command(name = "banzhaf", version, args_override_self = true)]
pub struct RunConfig {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// key=value file supplying defaults for any long flag; flags given on
    /// the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Render heatmaps: a file for exact/estimate, a directory for pipeline.
    #[arg(long, global = true, value_name = "PATH")]
    pub svg: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact Banzhaf interactions by full enumeration.
    #[command(args_override_self = true)]
    Exact(ExactArgs),
    /// Monte-Carlo or surrogate interaction estimates.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// DPC-KNN clustering of one token set, or the full level stack of a pair.
    #[command(args_override_self = true)]
    Cluster(ClusterArgs),
    /// Level stack, per-level interactions and the loss stack over a batch.
    #[command(args_override_self = true)]
    Pipeline(PipelineArgs),
    /// Randomized checks of the interaction axioms.
    #[command(args_override_self = true)]
    Axioms(AxiomArgs),
    /// Fit the surrogate estimator to exact interaction maps.
    #[command(name = "train-surrogate", args_override_self = true)]
    TrainSurrogate(TrainArgs),
}

/// Game input: a payoff table, a token pair or an alignment matrix.
#[derive(Debug, Clone, Args)]
pub struct GameInput {
    /// Payoff table CSV with columns coalition_mask,value.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["video", "text", "alignment"])]
    pub payoff: Option<PathBuf>,

    /// Visual token JSON.
    #[arg(long, value_name = "JSON", requires = "text")]
    pub video: Option<PathBuf>,

    /// Textual token JSON.
    #[arg(long, value_name = "JSON", requires = "video")]
    pub text: Option<PathBuf>,

    /// Alignment matrix CSV; frames and words get uniform weights.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["video", "text"])]
    pub alignment: Option<PathBuf>,

    /// Single pair `i,j` in player indices.
    #[arg(long, value_name = "I,J")]
    pub pair: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub input: GameInput,

    /// Also report the all-player pairwise matrix for cross-modal inputs.
    #[arg(long)]
    pub full: bool,

    /// Largest number of active players enumerated exactly.
    #[arg(long, default_value_t = banzhaf_core::DEFAULT_EXACT_CAP)]
    pub cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: GameInput,

    #[arg(long, default_value_t = 1024)]
    pub samples: usize,

    /// Pair each sampled coalition with its complement.
    #[arg(long)]
    pub antithetic: bool,

    /// Surrogate model JSON; predicts the frame-word map instead of sampling.
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// Token JSON to cluster once.
    #[arg(long, value_name = "JSON", conflicts_with_all = ["video", "text"])]
    pub tokens: Option<PathBuf>,

    /// Number of clusters for --tokens.
    #[arg(long, requires = "tokens")]
    pub clusters: Option<usize>,

    /// Visual token JSON for a level stack.
    #[arg(long, value_name = "JSON", requires = "text")]
    pub video: Option<PathBuf>,

    /// Textual token JSON for a level stack.
    #[arg(long, value_name = "JSON", requires = "video")]
    pub text: Option<PathBuf>,

    #[command(flatten)]
    pub levels: LevelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LevelArgs {
    /// Visual action,event token counts.
    #[arg(long, value_name = "A,E", default_value = "3,2")]
    pub visual_counts: String,

    /// Textual action,event token counts.
    #[arg(long, value_name = "A,E", default_value = "6,3")]
    pub textual_counts: String,

    /// KNN size; defaults to min(5, tokens - 1) at every level.
    #[arg(long)]
    pub neighbors: Option<usize>,

    /// Skip temporal smoothing of the entity level.
    #[arg(long)]
    pub no_smoothing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Visual token JSON, repeat once per batch item.
    #[arg(long, value_name = "JSON")]
    pub video: Vec<PathBuf>,

    /// Textual token JSON, paired with --video in order.
    #[arg(long, value_name = "JSON")]
    pub text: Vec<PathBuf>,

    /// Generate this many synthetic 12-frame/24-word pairs instead of reading files.
    #[arg(long, value_name = "B", conflicts_with_all = ["video", "text"])]
    pub synthetic: Option<usize>,

    /// Embedding dimension of synthetic tokens.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,

    #[command(flatten)]
    pub levels: LevelArgs,

    #[arg(long, default_value_t = banzhaf_core::objectives::DEFAULT_TAU)]
    pub tau: f64,

    #[arg(long, default_value_t = banzhaf_core::objectives::DEFAULT_ALPHA)]
    pub alpha: f64,

    #[arg(long, default_value_t = banzhaf_core::objectives::DEFAULT_BETA)]
    pub beta: f64,

    /// Entity-level estimator.
    #[arg(long, value_enum, default_value_t = EntityFlag::Mc)]
    pub entity: EntityFlag,

    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,

    #[arg(long, default_value_t = 1024)]
    pub samples: usize,

    #[arg(long, value_enum, default_value_t = RelationshipFlag::Alignment)]
    pub relationship: RelationshipFlag,
}

#[derive(Debug, Clone, Args)]
pub struct AxiomArgs {
    /// Comma-separated game families.
    #[arg(long, default_value = "additive,unanimity,quadratic_size,random_table")]
    pub families: String,

    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    #[arg(long, default_value_t = 3)]
    pub min_players: usize,

    #[arg(long, default_value_t = 12)]
    pub max_players: usize,

    #[arg(long, default_value_t = banzhaf_core::axioms::DEFAULT_TOLERANCE)]
    pub tolerance: f64,

    /// Spread trials over all cores.
    #[arg(long)]
    pub parallel: bool,

    #[arg(long, hide = true)]
    pub inject_broken_phi: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Directory of alignment_XXXX.csv / target_XXXX.csv pairs.
    #[arg(long, value_name = "DIR", conflicts_with = "synthetic")]
    pub dataset: Option<PathBuf>,

    /// Generate this many random alignments with exact targets.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,

    /// Frames per synthetic alignment.
    #[arg(long, default_value_t = 3)]
    pub frames: usize,

    /// Words per synthetic alignment.
    #[arg(long, default_value_t = 4)]
    pub words: usize,

    #[arg(long, default_value_t = 16)]
    pub dim: usize,

    /// Write the synthetic dataset here as CSV pairs.
    #[arg(long, value_name = "DIR")]
    pub save_dataset: Option<PathBuf>,

    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,

    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,

    #[arg(long, default_value_t = banzhaf_core::estimators::DEFAULT_HIDDEN)]
    pub hidden: usize,
}
