use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "skillgraph", version, about = "Occupation-skill knowledge graph toolkit")]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, env = "SKILLGRAPH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Directory that receives the outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for parallel stages; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON object of flag values, keyed by long flag name. Flags given on
    /// the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build the base graph from taxonomy files.
    Build(BuildArgs),
    /// Add posting co-occurrence edges and weights to a graph.
    Enrich(EnrichArgs),
    /// Write a synthetic taxonomy and posting dataset.
    GenFixture(FixtureArgs),
    /// Print node, edge and degree counts of a graph.
    Stats(GraphArg),
    /// Link prediction.
    #[command(subcommand)]
    Linkpred(LinkpredCommand),
    /// Shortest career transition between two occupations.
    Path(PathArgs),
    /// Jaccard distances between same-kind nodes.
    Distances(DistancesArgs),
    /// Occupations closest to a given one.
    Nearest(NearestArgs),
    /// TF-IDF skill relevance per ISCO group.
    Relevance(RelevanceArgs),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Build(_) => "build".into(),
            Command::Enrich(_) => "enrich".into(),
            Command::GenFixture(_) => "gen-fixture".into(),
            Command::Stats(_) => "stats".into(),
            Command::Linkpred(c) => format!("linkpred-{}", c.name()),
            Command::Path(_) => "path".into(),
            Command::Distances(_) => "distances".into(),
            Command::Nearest(_) => "nearest".into(),
            Command::Relevance(r) if r.tree.is_some() => "relevance-tree".into(),
            Command::Relevance(_) => "relevance".into(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TaxonomyArgs {
    /// Directory holding isco_groups.csv, skills.csv, esco_occupations.csv
    /// and occupation_skill_links.csv.
    #[arg(long)]
    pub taxonomy_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub taxonomy: TaxonomyArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArg {
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MatchArgs {
    /// Skill catalog CSV (skill_id,label).
    #[arg(long)]
    pub skills: PathBuf,
    #[arg(long)]
    pub postings: PathBuf,
    #[arg(long, default_value_t = skillgraph_core::enrichment::DEFAULT_MIN_CONFIDENCE)]
    pub min_confidence: f64,
    #[arg(long, default_value_t = skillgraph_core::matcher::DEFAULT_NGRAM_N)]
    pub ngram_n: usize,
    #[arg(long, default_value_t = skillgraph_core::matcher::DEFAULT_MATCH_THRESHOLD)]
    pub match_threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EnrichArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub matching: MatchArgs,
    #[arg(long, default_value_t = skillgraph_core::enrichment::DEFAULT_MIN_COUNT)]
    pub min_count: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 30)]
    pub n_occupations: usize,
    #[arg(long, default_value_t = 120)]
    pub n_skills: usize,
    #[arg(long, default_value_t = 8)]
    pub links_per_occupation: usize,
    #[arg(long, default_value_t = 600)]
    pub n_postings: usize,
    #[arg(long, default_value_t = 4)]
    pub mentions_per_posting: usize,
    #[arg(long, default_value_t = 0.1)]
    pub mention_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pa,
    N2v,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkpredCommand {
    /// Split edges into train/validation/test positives with sampled negatives.
    Split(SplitArgs),
    /// Train Node2Vec embeddings and the edge classifier.
    Train(TrainArgs),
    /// Evaluate scorers on the test split.
    Eval(EvalArgs),
    /// Class-1 F1 as the negative-to-positive ratio grows.
    Sweep(SweepArgs),
    /// Rank candidate skills for one occupation.
    Suggest(SuggestArgs),
}

impl LinkpredCommand {
    fn name(&self) -> &'static str {
        match self {
            LinkpredCommand::Split(_) => "split",
            LinkpredCommand::Train(_) => "train",
            LinkpredCommand::Eval(_) => "eval",
            LinkpredCommand::Sweep(_) => "sweep",
            LinkpredCommand::Suggest(_) => "suggest",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.55, 0.15, 0.30])]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub neg_ratio: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct Node2VecArgs {
    #[arg(long, default_value_t = 64)]
    pub dimensions: usize,
    #[arg(long, default_value_t = 4)]
    pub walk_length: usize,
    #[arg(long, default_value_t = 10)]
    pub walks_per_node: usize,
    /// Total walk budget spread round-robin over nodes; replaces
    /// --walks-per-node.
    #[arg(long)]
    pub total_walks: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub negative_samples: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifierArgs {
    #[arg(long, default_value_t = 0.1)]
    pub clf_learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub node2vec: Node2VecArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub classifier: ClassifierArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Embeddings written by `linkpred train`; required for n2v.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Classifier written by `linkpred train`; required for n2v.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Scorers to evaluate; defaults to pa, plus n2v when a model is given.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<Method>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Method::N2v)]
    pub method: Method,
    /// Negative-to-positive ratios, as a list (1,2,4) or a range (1..7).
    #[arg(long, default_value = "1..7")]
    pub ratios: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SuggestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Method::N2v)]
    pub method: Method,
    /// Level-4 ISCO code of the occupation.
    #[arg(long)]
    pub occupation: String,
    #[arg(short = 'k', long = "top-k", default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PathArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long, default_value_t = skillgraph_core::pathfinder::DEFAULT_MAX_DISTANCE)]
    pub max_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Occupation,
    Skill,
}

#[derive(Debug, Args, Serialize)]
pub struct DistancesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long, value_enum, default_value_t = Kind::Occupation)]
    pub kind: Kind,
}

#[derive(Debug, Args, Serialize)]
pub struct NearestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long)]
    pub occupation: String,
    #[arg(short = 'k', long = "top-k", default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
pub struct RelevanceArgs {
    #[command(subcommand)]
    pub tree: Option<RelevanceCommand>,
    #[command(flatten)]
    #[serde(flatten)]
    pub matching: Option<MatchArgs>,
    /// Aggregation level, 1 to 4.
    #[arg(long, required = true)]
    pub level: Option<u8>,
    #[arg(long, required = true)]
    pub group: Option<String>,
    #[arg(short = 'k', long = "top-k", default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelevanceCommand {
    /// Top skills for a major group and every descendant group in the data.
    Tree(TreeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TreeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub matching: MatchArgs,
    /// Major group digit.
    #[arg(long)]
    pub major: String,
    #[arg(short = 'k', long = "top-k", default_value_t = 3)]
    pub k: usize,
}
