use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use attitudes::attitude::{score_posts, write_scored_csv, KindFilter, TermMultiplicity, TweetScorer};
use attitudes::corpus::{DocumentOptions, DocumentTermMatrix, Stopwords};
use attitudes::factorizer::{fit, FactorModel, Init};
use attitudes::lexicon::{monthly_group_zscores, write_associations_csv, CategoryLexicon};
use attitudes::network::{write_edge_list_csv, EdgeWeighting, GraphKind, InteractionGraph};
use attitudes::pipeline::{
    self, build_document_matrix, lexical_tweets, load_corpus, load_scored, network_report, supervise,
    term_association_rows, trend_records, user_score_rows, write_csv, write_json, AtStage, PipelineConfig, Stage,
    StageError, MENTION_EDGES_FILE, NETWORK_FILE, RETWEET_EDGES_FILE, SCORED_TWEETS_FILE, TERM_ASSOCIATIONS_FILE,
    USER_SCORES_FILE,
};
use attitudes::seeding::SeedLexicon;
use attitudes::synth::{default_seed_file, generate_synthetic, write_truth_csv, SyntheticSpec};
use attitudes::trends::{write_trends_csv, LowessParams};
use attitudes::Error;

type CliResult = Result<(), StageError>;

/// Attitude spectrum analysis of social posts.
///
/// Exit codes: 0 success, 2 usage or config error, 10 ingest, 11 matrix,
/// 12 seeding, 13 fit, 14 score, 15 lexicon, 16 network, 17 trends,
/// 18 writing reports.
#[derive(Parser)]
#[command(name = "attitudes", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the user document-term matrix from a JSONL corpus.
    Ingest(IngestArgs),
    /// Fit the two-attitude model on a saved matrix.
    Fit(FitArgs),
    /// Score tweets, users and terms with a fitted model.
    Score(ScoreArgs),
    /// Monthly lexicon category z-scores per attitude group.
    Liwc(LiwcArgs),
    /// Mention and retweet network metrics.
    Network(NetworkArgs),
    /// Weekly volume and smoothed tendency/polarity curves.
    Trends(TrendsArgs),
    /// Run every stage and write the full report bundle.
    Run(RunArgs),
    /// Generate a synthetic corpus with planted attitudes.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    stopwords: PathBuf,
    #[arg(long, default_value_t = attitudes::corpus::DEFAULT_MIN_DF)]
    min_df: u32,
    /// Leave retweet text out of user documents.
    #[arg(long)]
    no_retweets: bool,
    /// Output matrix JSON.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Nndsvd,
}

#[derive(Args)]
struct FitArgs {
    /// Matrix JSON written by `ingest`.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value_t = attitudes::seeding::DEFAULT_SEED_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    #[arg(long, env = pipeline::ENV_SEED, default_value_t = 0)]
    seed: u64,
    /// Output model JSON.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MultiplicityArg {
    Occurrences,
    Distinct,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindsArg {
    All,
    NoRetweets,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    stopwords: PathBuf,
    #[arg(long, value_enum, default_value_t = MultiplicityArg::Occurrences)]
    multiplicity: MultiplicityArg,
    #[arg(long, value_enum, default_value_t = KindsArg::All)]
    kinds: KindsArg,
    #[arg(long, env = pipeline::ENV_OUT_DIR)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LiwcArgs {
    /// Scored tweet CSV written by `score`.
    #[arg(long)]
    scored: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    stopwords: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Unweighted,
    Weighted,
}

#[derive(Args)]
struct NetworkArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = WeightingArg::Unweighted)]
    weighting: WeightingArg,
    #[arg(long, env = pipeline::ENV_OUT_DIR)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LowessArgs {
    /// Share of points in each local window.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    robust_iterations: Option<usize>,
    /// Interpolate between fits closer than this many days.
    #[arg(long)]
    delta: Option<f64>,
}

impl LowessArgs {
    fn apply(&self, params: &mut LowessParams) {
        if let Some(b) = self.bandwidth {
            params.bandwidth = b;
        }
        if let Some(r) = self.robust_iterations {
            params.robust_iterations = r;
        }
        if let Some(d) = self.delta {
            params.delta = d;
        }
    }
}

#[derive(Args)]
struct TrendsArgs {
    #[arg(long)]
    scored: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    lowess: LowessArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, env = pipeline::ENV_OUT_DIR)]
    out_dir: Option<PathBuf>,
    #[arg(long, env = pipeline::ENV_SEED)]
    seed: Option<u64>,
    #[arg(long)]
    min_df: Option<u32>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    no_retweets: bool,
    #[arg(long, value_enum)]
    multiplicity: Option<MultiplicityArg>,
    #[arg(long, value_enum)]
    kinds: Option<KindsArg>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[command(flatten)]
    lowess: LowessArgs,
    /// Print the merged config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with synthetic spec fields; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    users_per_attitude: Option<usize>,
    #[arg(long)]
    posts_per_user: Option<usize>,
    #[arg(long)]
    seeded_fraction: Option<f64>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    intra_group_preference: Option<f64>,
    #[arg(long, env = pipeline::ENV_SEED)]
    seed: Option<u64>,
    /// Writes corpus.jsonl, truth.csv and seeds.txt here.
    #[arg(long, env = pipeline::ENV_OUT_DIR)]
    out_dir: PathBuf,
}

impl From<InitArg> for Init {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Random => Init::RandomUniform,
            InitArg::Nndsvd => Init::Nndsvd,
        }
    }
}

impl From<MultiplicityArg> for TermMultiplicity {
    fn from(a: MultiplicityArg) -> Self {
        match a {
            MultiplicityArg::Occurrences => TermMultiplicity::Occurrences,
            MultiplicityArg::Distinct => TermMultiplicity::Distinct,
        }
    }
}

impl From<KindsArg> for KindFilter {
    fn from(a: KindsArg) -> Self {
        match a {
            KindsArg::All => KindFilter::All,
            KindsArg::NoRetweets => KindFilter::NoRetweets,
        }
    }
}

impl From<WeightingArg> for EdgeWeighting {
    fn from(a: WeightingArg) -> Self {
        match a {
            WeightingArg::Unweighted => EdgeWeighting::Unweighted,
            WeightingArg::Weighted => EdgeWeighting::Weighted,
        }
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).at(Stage::Report)
}

fn load_stopwords(path: &Path) -> Result<Stopwords, StageError> {
    Stopwords::from_file(path).at(Stage::Ingest)
}

fn load_model(path: &Path) -> Result<FactorModel, StageError> {
    FactorModel::read_json(path).at(Stage::Fit)
}

fn ingest(args: IngestArgs) -> CliResult {
    let posts = load_corpus(&args.corpus).at(Stage::Ingest)?;
    let stopwords = load_stopwords(&args.stopwords)?;
    let options = DocumentOptions {
        include_retweets: !args.no_retweets,
    };
    let matrix = build_document_matrix(&posts, &stopwords, args.min_df, options).at(Stage::Matrix)?;
    matrix.write_json(&args.out).at(Stage::Report)?;
    println!(
        "{} posts, {} users, {} terms, {} non-zeros",
        posts.len(),
        matrix.n_rows(),
        matrix.n_cols(),
        matrix.values.nnz()
    );
    Ok(())
}

fn fit_cmd(args: FitArgs) -> CliResult {
    let matrix = DocumentTermMatrix::read_json(&args.matrix).at(Stage::Matrix)?;
    let seeds = SeedLexicon::from_file(&args.seeds).at(Stage::Seeding)?;
    let supervision = supervise(&matrix, &seeds, args.threshold).at(Stage::Seeding)?;
    let config = attitudes::factorizer::FactorizationConfig {
        max_iterations: args.max_iterations,
        relative_tolerance: args.tolerance,
        init: args.init.into(),
        rng_seed: args.seed,
        ..Default::default()
    };
    let model = fit(&matrix, &supervision, &config).at(Stage::Fit)?;
    model.write_json(&args.out).at(Stage::Report)?;
    println!(
        "labeled {:.3} of users, {} iterations, converged: {}, objective {:.6}",
        supervision.labeled_fraction(),
        model.iterations_run,
        model.converged,
        model.objective_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn score(args: ScoreArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let posts = load_corpus(&args.corpus).at(Stage::Ingest)?;
    let stopwords = load_stopwords(&args.stopwords)?;
    let scorer = TweetScorer::new(&model, stopwords, args.multiplicity.into()).at(Stage::Score)?;
    let scored = score_posts(&posts, &scorer, args.kinds.into());
    create_dir(&args.out_dir)?;
    write_scored_csv(&args.out_dir.join(SCORED_TWEETS_FILE), &scored).at(Stage::Report)?;
    write_csv(&args.out_dir.join(USER_SCORES_FILE), &user_score_rows(&model, None)).at(Stage::Report)?;
    write_csv(&args.out_dir.join(TERM_ASSOCIATIONS_FILE), &term_association_rows(&model)).at(Stage::Report)?;
    println!("scored {} tweets", scored.len());
    Ok(())
}

fn liwc(args: LiwcArgs) -> CliResult {
    let scored = load_scored(&args.scored)?;
    let posts = load_corpus(&args.corpus).at(Stage::Ingest)?;
    let stopwords = load_stopwords(&args.stopwords)?;
    let lexicon = CategoryLexicon::from_file(&args.lexicon).at(Stage::Lexicon)?;
    let rows = monthly_group_zscores(&lexical_tweets(&posts, &scored, &stopwords), &lexicon);
    write_associations_csv(&args.out, &rows).at(Stage::Report)?;
    println!("{} category/month/group rows", rows.len());
    Ok(())
}

fn network(args: NetworkArgs) -> CliResult {
    let posts = load_corpus(&args.corpus).at(Stage::Ingest)?;
    let model = load_model(&args.model)?;
    let (report, mention_scc, retweet_scc) = network_report(&posts, &model, args.weighting.into());
    create_dir(&args.out_dir)?;
    write_json(&args.out_dir.join(NETWORK_FILE), &report).at(Stage::Report)?;
    for (file, scc, kind) in [
        (MENTION_EDGES_FILE, mention_scc, GraphKind::Mention),
        (RETWEET_EDGES_FILE, retweet_scc, GraphKind::Retweet),
    ] {
        let graph = scc.unwrap_or_else(|| InteractionGraph::from_edges(kind, Vec::<String>::new(), &[]));
        write_edge_list_csv(&args.out_dir.join(file), &graph).at(Stage::Report)?;
    }
    for s in [&report.mention, &report.retweet] {
        println!(
            "{:?}: {} nodes, {} edges; largest SCC {} nodes, {} edges",
            s.kind, s.nodes, s.edges, s.scc_nodes, s.scc_edges
        );
    }
    Ok(())
}

fn trends(args: TrendsArgs) -> CliResult {
    let scored = load_scored(&args.scored)?;
    let posts = load_corpus(&args.corpus).at(Stage::Ingest)?;
    let mut params = LowessParams::default();
    args.lowess.apply(&mut params);
    let records = trend_records(&posts, &scored, params).at(Stage::Trends)?;
    write_trends_csv(&args.out, &records).at(Stage::Report)?;
    println!("{} trend rows", records.len());
    Ok(())
}

fn merged_config(args: &RunArgs) -> Result<PipelineConfig, StageError> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::from_toml_file(path).at(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    // clap already resolved env values into out_dir and seed, below the flags
    let set = |target: &mut PathBuf, value: &Option<PathBuf>| {
        if let Some(v) = value {
            *target = v.clone();
        }
    };
    set(&mut config.corpus, &args.corpus);
    set(&mut config.stopwords, &args.stopwords);
    set(&mut config.seeds, &args.seeds);
    set(&mut config.lexicon, &args.lexicon);
    set(&mut config.output_dir, &args.out_dir);
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(v) = args.min_df {
        config.min_df = v;
    }
    if let Some(v) = args.threshold {
        config.seed_threshold = v;
    }
    if let Some(v) = args.max_iterations {
        config.factorization.max_iterations = v;
    }
    if let Some(v) = args.tolerance {
        config.factorization.relative_tolerance = v;
    }
    if let Some(v) = args.init {
        config.factorization.init = v.into();
    }
    if args.no_retweets {
        config.include_retweets = false;
    }
    if let Some(v) = args.multiplicity {
        config.term_multiplicity = v.into();
    }
    if let Some(v) = args.kinds {
        config.score_kinds = v.into();
    }
    if let Some(v) = args.weighting {
        config.edge_weighting = v.into();
    }
    args.lowess.apply(&mut config.lowess);
    Ok(config)
}

fn run(args: RunArgs) -> CliResult {
    let config = merged_config(&args)?;
    if args.print_config {
        print!("{}", config.to_toml_string().at(Stage::Config)?);
        return Ok(());
    }
    let manifest = pipeline::run(&config)?;
    let s = &manifest.stats;
    println!(
        "{} posts, {} users, {} terms; labeled {:.3}; {} iterations (converged: {}); {} empathy / {} threat tweets",
        s.posts, s.users, s.terms, s.labeled_fraction, s.iterations_run, s.converged, s.empathy_tweets, s.threat_tweets
    );
    println!("reports in {}", config.output_dir.display());
    Ok(())
}

fn synth(args: SynthArgs) -> CliResult {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e)).at(Stage::Config)?;
            SyntheticSpec::from_toml_str(&text).at(Stage::Config)?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(v) = args.users_per_attitude {
        spec.users_per_attitude = v;
    }
    if let Some(v) = args.posts_per_user {
        spec.posts_per_user = v;
    }
    if let Some(v) = args.seeded_fraction {
        spec.seeded_fraction = v;
    }
    if let Some(v) = args.noise_rate {
        spec.noise_rate = v;
    }
    if let Some(v) = args.intra_group_preference {
        spec.intra_group_preference = v;
    }
    if let Some(v) = args.seed {
        spec.rng_seed = v;
    }
    let corpus = generate_synthetic(&spec).at(Stage::Config)?;
    create_dir(&args.out_dir)?;
    attitudes::corpus::write_posts_jsonl(&args.out_dir.join("corpus.jsonl"), &corpus.posts).at(Stage::Report)?;
    write_truth_csv(&args.out_dir.join("truth.csv"), &corpus.truth).at(Stage::Report)?;
    let seeds = default_seed_file();
    let seeds_path = args.out_dir.join("seeds.txt");
    fs::write(&seeds_path, seeds).map_err(|e| Error::io(&seeds_path, e)).at(Stage::Report)?;
    println!("{} posts by {} users", corpus.posts.len(), corpus.truth.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Score(a) => score(a),
        Command::Liwc(a) => liwc(a),
        Command::Network(a) => network(a),
        Command::Trends(a) => trends(a),
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
