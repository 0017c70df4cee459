use std::collections::BTreeSet;

use attitudes::attitude::{Group, TermMultiplicity, TweetScorer};
use attitudes::corpus::{
    build_matrix, build_user_terms, extract_terms, tokenize, CsrMatrix, DocumentOptions, Stopwords, Vocabulary,
};
use attitudes::factorizer::{factorize, fit, normalize_model, objective, FactorModel, FactorizationConfig};
use attitudes::seeding::{build_supervision, score_all, score_seeds, SeedLexicon};
use attitudes::synth::{default_seed_lexicon, generate_synthetic, SyntheticSpec};
use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mask(rng: &mut ChaCha8Rng, n: usize, k: usize, zero_share: f64) -> Array2<f64> {
    let mut mask = Array2::from_shape_fn((n, k), |_| if rng.random_bool(zero_share) { 0.0 } else { 1.0 });
    for mut row in mask.rows_mut() {
        if row.sum() == 0.0 {
            row[rng.random_range(0..k)] = 1.0;
        }
    }
    mask
}

#[test]
fn planted_masked_factors_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, m, k) = (200, 50, 2);
    let mask = random_mask(&mut rng, n, k, 0.3);
    let w_star = Array2::from_shape_fn((n, k), |(i, j)| mask[[i, j]] * rng.random_range(0.1..1.0));
    let h_star = Array2::from_shape_fn((k, m), |_| rng.random_range(0.0..1.0));
    let v = CsrMatrix::from_dense(&w_star.dot(&h_star));
    let config = FactorizationConfig {
        rng_seed: 3,
        ..FactorizationConfig::default()
    };
    let f = factorize(&v, mask.view(), &config).unwrap();
    let last = *f.objective_trace.last().unwrap();
    assert!(last < 1e-3 * v.squared_frobenius(), "{last} vs {}", v.squared_frobenius());
    let direct = objective(&v, f.w.view(), f.h.view(), mask.view()).unwrap();
    assert!((direct - last).abs() <= 1e-9 * v.squared_frobenius());
}

#[test]
fn normalization_changes_reconstruction_by_one_scalar() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (n, m) = (30, 12);
        let mask = random_mask(&mut rng, n, 2, 0.4);
        let dense = Array2::from_shape_fn((n, m), |_| if rng.random_bool(0.5) { rng.random_range(0.0..3.0) } else { 0.0 });
        let v = CsrMatrix::from_dense(&dense);
        let f = factorize(&v, mask.view(), &FactorizationConfig::default()).unwrap();
        let before = (&f.w * &mask).dot(&f.h);
        let model = FactorModel {
            rows: (0..n).map(|i| format!("u{i}")).collect(),
            vocabulary: Vocabulary::new((0..m).map(|j| format!("t{j:02}")).collect(), vec![1; m]),
            user_factors: f.w.clone(),
            term_factors: f.h.clone(),
            objective_trace: f.objective_trace.clone(),
            converged: f.converged,
            iterations_run: f.iterations_run,
            clip_factor: 1.0,
            config: FactorizationConfig::default(),
        };
        let Ok(norm) = normalize_model(model) else { continue };
        let after = (&norm.user_factors * &mask).dot(&norm.term_factors);
        for ((a, b), _) in before.iter().zip(after.iter()).zip(0..) {
            if a.abs() > 1e-9 {
                assert!((a / b - norm.clip_factor).abs() < 1e-10 * norm.clip_factor, "{a} {b} {}", norm.clip_factor);
            }
        }
        for row in norm.term_factors.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert!(norm.user_factors.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

#[test]
fn seed_scores_match_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let terms: Vec<String> = (0..40).map(|j| format!("w{j:02}")).collect();
    for _ in 0..50 {
        let docs = (0..6)
            .map(|d| {
                let mut row = std::collections::BTreeMap::new();
                for t in &terms {
                    if rng.random_bool(0.3) {
                        row.insert(t.clone(), rng.random_range(1..4u32));
                    }
                }
                (format!("d{d}"), row)
            })
            .collect();
        let Ok(m) = build_matrix(&docs, 1) else { continue };
        let picked: Vec<&String> = terms.choose_multiple(&mut rng, 5).collect();
        let lex = SeedLexicon::new(picked[..2].iter().map(|s| s.as_str()), picked[2..].iter().map(|s| s.as_str())).unwrap();
        for i in 0..m.n_rows() {
            let s = score_seeds(m.row(i), &m.vocabulary, &lex);
            let (mut e, mut t) = (0.0, 0.0);
            for j in 0..m.n_cols() {
                let term = m.vocabulary.term(j);
                if lex.empathy_terms().contains(term) {
                    e += m.row(i).get(j);
                }
                if lex.threat_terms().contains(term) {
                    t += m.row(i).get(j);
                }
            }
            assert_eq!((s.empathy, s.threat), (e, t));
        }
    }
}

fn synthetic_model(spec: &SyntheticSpec) -> (attitudes::synth::SyntheticCorpus, FactorModel, Stopwords) {
    let corpus = generate_synthetic(spec).unwrap();
    let stop = Stopwords::new(["a"]);
    let m = build_matrix(&build_user_terms(&corpus.posts, &stop, DocumentOptions::default()), 2).unwrap();
    let sup = build_supervision(&score_all(&m, &default_seed_lexicon()), 0.25).unwrap();
    let model = fit(&m, &sup, &FactorizationConfig::default()).unwrap();
    (corpus, model, stop)
}

#[test]
fn tweet_scores_match_loop_oracle() {
    let spec = SyntheticSpec {
        users_per_attitude: 30,
        ..SyntheticSpec::default()
    };
    let (corpus, model, stop) = synthetic_model(&spec);
    let scorer = TweetScorer::new(&model, stop.clone(), TermMultiplicity::Occurrences).unwrap();
    for post in corpus.posts.iter().take(200) {
        let (mut tendency, mut polarity) = (0.0, 0.0);
        for term in extract_terms(&tokenize(&post.text, &stop)) {
            if let Some(col) = model.vocabulary.column(&term) {
                let (e, t) = (model.term_factors[[0, col]], model.term_factors[[1, col]]);
                tendency += e - t;
                polarity += e + t;
            }
        }
        let got = scorer.score_text(&post.text);
        assert!((got.tendency() - tendency).abs() < 1e-12);
        assert!((got.polarity() - polarity).abs() < 1e-12);
    }
}

#[test]
fn top_tendency_terms_recover_planted_empathy_vocabulary() {
    let (corpus, model, _) = synthetic_model(&SyntheticSpec::default());
    let planted: BTreeSet<&str> = corpus.vocabulary.empathy.iter().map(String::as_str).collect();
    let mut words: Vec<(f64, &str)> = (0..model.vocabulary.len())
        .map(|c| (model.term_score_at(c).tendency(), model.vocabulary.term(c)))
        .filter(|(_, t)| t.chars().all(|ch| ch.is_alphabetic()))
        .collect();
    words.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    let top: BTreeSet<&str> = words.iter().take(planted.len()).map(|w| w.1).collect();
    let overlap = top.intersection(&planted).count() as f64 / planted.len() as f64;
    assert!(overlap >= 0.8, "overlap {overlap}");
}

#[test]
fn planted_groups_have_opposite_mean_tendency() {
    let (corpus, model, _) = synthetic_model(&SyntheticSpec {
        rng_seed: 9,
        ..SyntheticSpec::default()
    });
    let mean = |g: Group| {
        let v: Vec<f64> = corpus
            .truth
            .iter()
            .filter(|t| t.attitude == g)
            .filter_map(|t| model.user_score_by_id(&t.user_id))
            .map(|s| s.tendency())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(Group::Empathy) > 0.0 && 0.0 > mean(Group::Threat));
}
