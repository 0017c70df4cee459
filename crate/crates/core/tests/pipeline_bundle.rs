use std::fs;
use std::path::{Path, PathBuf};

use attitudes::attitude::ScoredTweet;
use attitudes::lexicon::CategoryAssociation;
use attitudes::network::EdgeRecord;
use attitudes::pipeline::{
    read_csv, run, write_csv, Manifest, NetworkReport, PipelineConfig, Stage, TermAssociationRow, UserScoreRow,
    MANIFEST_FILE, MENTION_EDGES_FILE, MODEL_FILE, NETWORK_FILE, RETWEET_EDGES_FILE, SCORED_TWEETS_FILE,
    TERM_ASSOCIATIONS_FILE, TRENDS_FILE, USER_SCORES_FILE, ZSCORES_FILE,
};
use attitudes::trends::TrendRecord;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixtures")
}

fn fixture_config(out: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::from_toml_file(&fixtures().join("pipeline.toml")).unwrap();
    config.output_dir = out.to_path_buf();
    config
}

#[test]
fn fixture_run_writes_full_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&fixture_config(dir.path())).unwrap();
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
        MANIFEST_FILE,
    ] {
        assert!(dir.path().join(file).is_file(), "{file} missing");
    }
    assert_eq!(manifest.stats.posts, 60);
    assert_eq!(manifest.rng_seed, 7);
    assert_eq!(manifest.config.effective_factorization().rng_seed, 7);
    let on_disk: Manifest = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    let report: NetworkReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join(NETWORK_FILE)).unwrap()).unwrap();
    assert_eq!(report.mention.nodes, 12);

    // fixture users are named after their side
    let users: Vec<UserScoreRow> = read_csv(&dir.path().join(USER_SCORES_FILE)).unwrap();
    for u in &users {
        assert_eq!(u.user_id.starts_with("emp_"), u.tendency > 0.0, "{}", u.user_id);
    }
}

#[test]
fn identical_runs_hash_identically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(&fixture_config(a.path())).unwrap();
    let second = run(&fixture_config(b.path())).unwrap();
    assert_eq!(first.artifacts, second.artifacts);
    assert_eq!(first.inputs, second.inputs);
    assert_eq!(first.stats, second.stats);

    let mut other_seed = fixture_config(b.path());
    other_seed.rng_seed = 8;
    let third = run(&other_seed).unwrap();
    assert_ne!(first.artifacts[MODEL_FILE], third.artifacts[MODEL_FILE]);
}

fn assert_round_trip<T: Serialize + DeserializeOwned>(path: &Path) {
    let original = fs::read(path).unwrap();
    let rows: Vec<T> = read_csv(path).unwrap();
    let copy = path.with_extension("copy.csv");
    write_csv(&copy, &rows).unwrap();
    assert_eq!(fs::read(&copy).unwrap(), original, "{}", path.display());
}

#[test]
fn every_csv_round_trips_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    run(&fixture_config(dir.path())).unwrap();
    let p = |f: &str| dir.path().join(f);
    assert_round_trip::<ScoredTweet>(&p(SCORED_TWEETS_FILE));
    assert_round_trip::<UserScoreRow>(&p(USER_SCORES_FILE));
    assert_round_trip::<TermAssociationRow>(&p(TERM_ASSOCIATIONS_FILE));
    assert_round_trip::<CategoryAssociation>(&p(ZSCORES_FILE));
    assert_round_trip::<EdgeRecord>(&p(MENTION_EDGES_FILE));
    assert_round_trip::<EdgeRecord>(&p(RETWEET_EDGES_FILE));
    assert_round_trip::<TrendRecord>(&p(TRENDS_FILE));
}

#[test]
fn stage_failures_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let bad_corpus = dir.path().join("bad.jsonl");
    fs::write(&bad_corpus, "{\"id\": \"1\", \"author_id\": \"a\"}\n").unwrap();
    let mut config = fixture_config(&dir.path().join("out"));
    config.corpus = bad_corpus;
    assert_eq!(run(&config).unwrap_err().stage, Stage::Ingest);

    let mut config = fixture_config(&dir.path().join("out"));
    config.min_df = 1000;
    assert_eq!(run(&config).unwrap_err().stage, Stage::Matrix);

    let overlapping = dir.path().join("seeds.txt");
    fs::write(&overlapping, "[empathy]\n#x\n[threat]\n#x\n").unwrap();
    let mut config = fixture_config(&dir.path().join("out"));
    config.seeds = overlapping;
    assert_eq!(run(&config).unwrap_err().stage, Stage::Seeding);

    let broken = dir.path().join("lexicon.dic");
    fs::write(&broken, "%\n1\ta\t1\n%\n").unwrap();
    let mut config = fixture_config(&dir.path().join("out"));
    config.lexicon = broken;
    assert_eq!(run(&config).unwrap_err().stage, Stage::Lexicon);

    let mut config = fixture_config(&dir.path().join("out"));
    config.seed_threshold = 0.0;
    assert_eq!(run(&config).unwrap_err().stage, Stage::Config);
}
