//! End-to-end run: ingest, matrix, seeding, fit, scoring, lexicon,
//! networks and trends, with a hashed manifest of every artifact.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attitude::{
    group_tweets, read_scored_csv, score_posts, write_scored_csv, Group, KindFilter, ScoredTweet, TermMultiplicity,
    TweetScorer, YearMonth,
};
use crate::corpus::{
    build_matrix, build_user_terms, read_posts_jsonl, tokenize, validate_posts, DocumentOptions, DocumentTermMatrix,
    RawPost, Stopwords, DEFAULT_MIN_DF,
};
use crate::error::{Error, Result};
use crate::factorizer::{fit, FactorModel, FactorizationConfig};
use crate::lexicon::{monthly_group_zscores, write_associations_csv, CategoryAssociation, CategoryLexicon, LexicalTweet};
use crate::network::{
    build_mention_graph, build_retweet_graph, summarize, write_edge_list_csv, EdgeWeighting, InteractionGraph,
    NetworkSummary,
};
use crate::seeding::{build_supervision, score_all, SeedLabel, SeedLexicon, SupervisionMatrix, DEFAULT_SEED_THRESHOLD};
use crate::trends::{tweet_trends, weekly_trend, write_trends_csv, LowessParams, TrendRecord};

pub const ENV_OUT_DIR: &str = "ATTITUDES_OUT_DIR";
pub const ENV_SEED: &str = "ATTITUDES_SEED";

pub const MODEL_FILE: &str = "model.json";
pub const USER_SCORES_FILE: &str = "user_scores.csv";
pub const TERM_ASSOCIATIONS_FILE: &str = "term_associations.csv";
pub const SCORED_TWEETS_FILE: &str = "scored_tweets.csv";
pub const ZSCORES_FILE: &str = "liwc_zscores.csv";
pub const NETWORK_FILE: &str = "network_metrics.json";
pub const MENTION_EDGES_FILE: &str = "edges_mention.csv";
pub const RETWEET_EDGES_FILE: &str = "edges_retweet.csv";
pub const TRENDS_FILE: &str = "trends.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Pipeline stages; each maps to its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Matrix,
    Seeding,
    Fit,
    Score,
    Lexicon,
    Network,
    Trends,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Config,
        Stage::Ingest,
        Stage::Matrix,
        Stage::Seeding,
        Stage::Fit,
        Stage::Score,
        Stage::Lexicon,
        Stage::Network,
        Stage::Trends,
        Stage::Report,
    ];

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 10,
            Stage::Matrix => 11,
            Stage::Seeding => 12,
            Stage::Fit => 13,
            Stage::Score => 14,
            Stage::Lexicon => 15,
            Stage::Network => 16,
            Stage::Trends => 17,
            Stage::Report => 18,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Matrix => "matrix",
            Stage::Seeding => "seeding",
            Stage::Fit => "fit",
            Stage::Score => "score",
            Stage::Lexicon => "lexicon",
            Stage::Network => "network",
            Stage::Trends => "trends",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub stopwords: PathBuf,
    pub seeds: PathBuf,
    pub lexicon: PathBuf,
    pub output_dir: PathBuf,
    pub min_df: u32,
    pub seed_threshold: f64,
    /// Put retweet text into the retweeter's document.
    pub include_retweets: bool,
    pub term_multiplicity: TermMultiplicity,
    pub score_kinds: KindFilter,
    pub edge_weighting: EdgeWeighting,
    /// Seeds every stochastic stage; overrides `factorization.rng_seed`.
    pub rng_seed: u64,
    pub factorization: FactorizationConfig,
    pub lowess: LowessParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            stopwords: PathBuf::from("stopwords.txt"),
            seeds: PathBuf::from("seeds.txt"),
            lexicon: PathBuf::from("lexicon.dic"),
            output_dir: PathBuf::from("out"),
            min_df: DEFAULT_MIN_DF,
            seed_threshold: DEFAULT_SEED_THRESHOLD,
            include_retweets: true,
            term_multiplicity: TermMultiplicity::Occurrences,
            score_kinds: KindFilter::All,
            edge_weighting: EdgeWeighting::Unweighted,
            rng_seed: 0,
            factorization: FactorizationConfig::default(),
            lowess: LowessParams::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.stopwords,
            &mut self.seeds,
            &mut self.lexicon,
            &mut self.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Applies `ATTITUDES_OUT_DIR` and `ATTITUDES_SEED` from `lookup`.
    pub fn apply_env<F>(&mut self, lookup: F) -> Result<()>
    where
        F: Fn(&str) -> Option<String>,
    {
        if let Some(dir) = lookup(ENV_OUT_DIR) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Some(seed) = lookup(ENV_SEED) {
            self.rng_seed = seed
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{ENV_SEED}=`{seed}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("corpus", &self.corpus),
            ("stopwords", &self.stopwords),
            ("seeds", &self.seeds),
            ("lexicon", &self.lexicon),
        ] {
            if !path.is_file() {
                return Err(Error::InvalidConfig(format!("{name} file `{}` does not exist", path.display())));
            }
        }
        if self.min_df < 1 {
            return Err(Error::InvalidConfig("min_df must be at least 1".into()));
        }
        if !(self.seed_threshold > 0.0) {
            return Err(Error::InvalidConfig("seed_threshold must be positive".into()));
        }
        if self.factorization.k != 2 {
            return Err(Error::InvalidConfig("the attitude pipeline needs k = 2".into()));
        }
        self.factorization.validate()?;
        if !(self.lowess.bandwidth > 0.0 && self.lowess.bandwidth <= 1.0) {
            return Err(Error::InvalidConfig("lowess.bandwidth must be in (0, 1]".into()));
        }
        if !(self.lowess.delta >= 0.0) {
            return Err(Error::InvalidConfig("lowess.delta must be non-negative".into()));
        }
        Ok(())
    }

    /// Factorization settings with the pipeline seed applied.
    pub fn effective_factorization(&self) -> FactorizationConfig {
        FactorizationConfig {
            rng_seed: self.rng_seed,
            ..self.factorization.clone()
        }
    }

    pub fn document_options(&self) -> DocumentOptions {
        DocumentOptions {
            include_retweets: self.include_retweets,
        }
    }
}

pub fn load_corpus(path: &Path) -> Result<Vec<RawPost>> {
    let posts = read_posts_jsonl(path)?;
    validate_posts(&posts)?;
    Ok(posts)
}

pub fn build_document_matrix(
    posts: &[RawPost],
    stopwords: &Stopwords,
    min_df: u32,
    options: DocumentOptions,
) -> Result<DocumentTermMatrix> {
    build_matrix(&build_user_terms(posts, stopwords, options), min_df)
}

pub fn supervise(matrix: &DocumentTermMatrix, seeds: &SeedLexicon, threshold: f64) -> Result<SupervisionMatrix> {
    build_supervision(&score_all(matrix, seeds), threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScoreRow {
    pub user_id: String,
    pub empathy: f64,
    pub threat: f64,
    pub tendency: f64,
    pub polarity: f64,
    pub group: Group,
    pub seed_label: Option<SeedLabel>,
}

pub fn user_score_rows(model: &FactorModel, supervision: Option<&SupervisionMatrix>) -> Vec<UserScoreRow> {
    model
        .rows
        .iter()
        .enumerate()
        .map(|(i, user)| {
            let s = model.user_score(i);
            UserScoreRow {
                user_id: user.clone(),
                empathy: s.empathy,
                threat: s.threat,
                tendency: s.tendency(),
                polarity: s.polarity(),
                group: Group::from_tendency(s.tendency()),
                seed_label: supervision.map(|l| l.labels()[i]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermAssociationRow {
    pub term: String,
    pub empathy: f64,
    pub threat: f64,
    pub tendency: f64,
    pub polarity: f64,
    pub document_frequency: u32,
}

/// One row per vocabulary term, in vocabulary order.
pub fn term_association_rows(model: &FactorModel) -> Vec<TermAssociationRow> {
    (0..model.vocabulary.len())
        .map(|c| {
            let s = model.term_score_at(c);
            TermAssociationRow {
                term: model.vocabulary.term(c).to_string(),
                empathy: s.empathy,
                threat: s.threat,
                tendency: s.tendency(),
                polarity: s.polarity(),
                document_frequency: model.vocabulary.document_frequency(c),
            }
        })
        .collect()
}

/// Pairs scored tweets with their tokens. Tweets whose post is missing from
/// `posts` are skipped.
pub fn lexical_tweets(posts: &[RawPost], scored: &[ScoredTweet], stopwords: &Stopwords) -> Vec<LexicalTweet> {
    let by_id: BTreeMap<&str, &RawPost> = posts.iter().map(|p| (p.id.as_str(), p)).collect();
    scored
        .iter()
        .filter_map(|t| {
            by_id.get(t.post_id.as_str()).map(|p| LexicalTweet {
                month: YearMonth::of(&t.timestamp),
                group: t.group,
                tokens: tokenize(&p.text, stopwords),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub mention: NetworkSummary,
    pub retweet: NetworkSummary,
}

/// Builds both interaction graphs, attaches user attitudes and returns the
/// report together with each graph's largest SCC.
pub fn network_report(
    posts: &[RawPost],
    model: &FactorModel,
    weighting: EdgeWeighting,
) -> (NetworkReport, Option<InteractionGraph>, Option<InteractionGraph>) {
    let mut mention = build_mention_graph(posts);
    mention.attach_attitudes(model);
    let mut retweet = build_retweet_graph(posts);
    retweet.attach_attitudes(model);
    let (mention_summary, mention_scc) = summarize(&mention, weighting);
    let (retweet_summary, retweet_scc) = summarize(&retweet, weighting);
    (
        NetworkReport {
            mention: mention_summary,
            retweet: retweet_summary,
        },
        mention_scc,
        retweet_scc,
    )
}

/// Tweet tendency and polarity curves followed by the weekly volume curve.
pub fn trend_records(posts: &[RawPost], scored: &[ScoredTweet], params: LowessParams) -> Result<Vec<TrendRecord>> {
    let mut records = tweet_trends(scored, params)?;
    records.extend(weekly_trend(posts, params)?);
    Ok(records)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = csv::Writer::from_writer(file);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub posts: usize,
    pub users: usize,
    pub terms: usize,
    pub labeled_fraction: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub empathy_tweets: usize,
    pub threat_tweets: usize,
}

/// Run record. Holds no wall-clock data, so identical runs produce
/// identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub rng_seed: u64,
    pub config: PipelineConfig,
    /// SHA-256 of each input file, keyed by config field.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each artifact, keyed by file name.
    pub artifacts: BTreeMap<String, String>,
    pub stats: RunStats,
}

/// Runs every stage and writes the report bundle into `config.output_dir`.
pub fn run(config: &PipelineConfig) -> std::result::Result<Manifest, StageError> {
    config.validate().at(Stage::Config)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e)).at(Stage::Report)?;

    let posts = load_corpus(&config.corpus).at(Stage::Ingest)?;
    let stopwords = Stopwords::from_file(&config.stopwords).at(Stage::Ingest)?;

    let matrix =
        build_document_matrix(&posts, &stopwords, config.min_df, config.document_options()).at(Stage::Matrix)?;

    let seeds = SeedLexicon::from_file(&config.seeds).at(Stage::Seeding)?;
    let supervision = supervise(&matrix, &seeds, config.seed_threshold).at(Stage::Seeding)?;

    let model = fit(&matrix, &supervision, &config.effective_factorization()).at(Stage::Fit)?;
    model.write_json(&out.join(MODEL_FILE)).at(Stage::Report)?;

    let scorer = TweetScorer::new(&model, stopwords.clone(), config.term_multiplicity).at(Stage::Score)?;
    let scored = score_posts(&posts, &scorer, config.score_kinds);
    write_scored_csv(&out.join(SCORED_TWEETS_FILE), &scored).at(Stage::Report)?;
    write_csv(&out.join(USER_SCORES_FILE), &user_score_rows(&model, Some(&supervision))).at(Stage::Report)?;
    write_csv(&out.join(TERM_ASSOCIATIONS_FILE), &term_association_rows(&model)).at(Stage::Report)?;

    let lexicon = CategoryLexicon::from_file(&config.lexicon).at(Stage::Lexicon)?;
    let associations: Vec<CategoryAssociation> =
        monthly_group_zscores(&lexical_tweets(&posts, &scored, &stopwords), &lexicon);
    write_associations_csv(&out.join(ZSCORES_FILE), &associations).at(Stage::Report)?;

    let (report, mention_scc, retweet_scc) = network_report(&posts, &model, config.edge_weighting);
    write_json(&out.join(NETWORK_FILE), &report).at(Stage::Report)?;
    for (file, scc, kind) in [
        (MENTION_EDGES_FILE, mention_scc, report.mention.kind),
        (RETWEET_EDGES_FILE, retweet_scc, report.retweet.kind),
    ] {
        let graph = scc.unwrap_or_else(|| InteractionGraph::from_edges(kind, Vec::<String>::new(), &[]));
        write_edge_list_csv(&out.join(file), &graph).at(Stage::Report)?;
    }

    let trends = trend_records(&posts, &scored, config.lowess).at(Stage::Trends)?;
    write_trends_csv(&out.join(TRENDS_FILE), &trends).at(Stage::Report)?;

    let mut inputs = BTreeMap::new();
    for (name, path) in [
        ("corpus", &config.corpus),
        ("stopwords", &config.stopwords),
        ("seeds", &config.seeds),
        ("lexicon", &config.lexicon),
    ] {
        inputs.insert(name.to_string(), sha256_file(path).at(Stage::Report)?);
    }
    let mut artifacts = BTreeMap::new();
    for file in [
        MODEL_FILE,
        SCORED_TWEETS_FILE,
        USER_SCORES_FILE,
        TERM_ASSOCIATIONS_FILE,
        ZSCORES_FILE,
        NETWORK_FILE,
        MENTION_EDGES_FILE,
        RETWEET_EDGES_FILE,
        TRENDS_FILE,
    ] {
        artifacts.insert(file.to_string(), sha256_file(&out.join(file)).at(Stage::Report)?);
    }
    let groups = group_tweets(&scored);
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng_seed: config.rng_seed,
        config: config.clone(),
        inputs,
        artifacts,
        stats: RunStats {
            posts: posts.len(),
            users: matrix.n_rows(),
            terms: matrix.n_cols(),
            labeled_fraction: supervision.labeled_fraction(),
            iterations_run: model.iterations_run,
            converged: model.converged,
            final_objective: model.objective_trace.last().copied().unwrap_or(f64::NAN),
            empathy_tweets: groups.empathy.len(),
            threat_tweets: groups.threat.len(),
        },
    };
    write_json(&out.join(MANIFEST_FILE), &manifest).at(Stage::Report)?;
    Ok(manifest)
}

/// Reads a scored-tweet CSV, mapping failures to the score stage.
pub fn load_scored(path: &Path) -> std::result::Result<Vec<ScoredTweet>, StageError> {
    read_scored_csv(path).at(Stage::Score)
}
