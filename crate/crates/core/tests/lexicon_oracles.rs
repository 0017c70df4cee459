use std::collections::BTreeSet;

use attitudes::corpus::{tokenize, Stopwords};
use attitudes::lexicon::{tweet_category_fraction, CategoryLexicon};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIC: &str = "%\n1\taffect\n2\tnegemo\t1\n3\tanger\t2\n4\tsocial\n5\tmoney\n%\nodio\t3\nrabia\t3\ntriste\t2\nfeliz\t1\namig*\t4\nvecinos\t4\ndinero\t5\npag*\t5\n%\n";

// words of each category, hierarchy included, written out by hand
fn expected_members(category: u32) -> Box<dyn Fn(&str) -> bool> {
    match category {
        1 => Box::new(|w| ["odio", "rabia", "triste", "feliz"].contains(&w)),
        2 => Box::new(|w| ["odio", "rabia", "triste"].contains(&w)),
        3 => Box::new(|w| ["odio", "rabia"].contains(&w)),
        4 => Box::new(|w| w.starts_with("amig") || w == "vecinos"),
        5 => Box::new(|w| w == "dinero" || w.starts_with("pag")),
        _ => unreachable!(),
    }
}

#[test]
fn random_twenty_word_tweets_match_count_oracle() {
    let lex = CategoryLexicon::parse(DIC).unwrap();
    let stop = Stopwords::new(["de", "la"]);
    let pool = [
        "odio", "rabia", "triste", "feliz", "amigos", "amiga", "vecinos", "vecino", "dinero", "pagar", "pago", "de",
        "la", "casa", "#odio", "@amigo", "perro", "pag",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let text: Vec<&str> = (0..20).map(|_| *pool.choose(&mut rng).unwrap()).collect();
        let tokens = tokenize(&text.join(" "), &stop);
        let words: Vec<&str> = text.iter().copied().filter(|w| !w.starts_with(['#', '@'])).collect();
        for category in 1..=5 {
            let member = expected_members(category);
            let hits = words.iter().filter(|w| member(w)).count();
            let expected = hits as f64 / words.len() as f64;
            assert_eq!(tweet_category_fraction(&tokens, category, &lex).unwrap(), expected);
        }
    }
}

#[test]
fn anger_words_count_for_every_ancestor() {
    let lex = CategoryLexicon::parse(DIC).unwrap();
    assert_eq!(lex.categories_of("odio"), BTreeSet::from([1, 2, 3]));
    assert_eq!(lex.categories_of("triste"), BTreeSet::from([1, 2]));
    assert_eq!(lex.categories_of("perro"), BTreeSet::new());
}

#[test]
fn bundled_fixture_lexicon_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/fixtures/lexicon.dic");
    let lex = CategoryLexicon::from_file(std::path::Path::new(path)).unwrap();
    let social = lex.resolve("social").unwrap();
    let money = lex.resolve("money").unwrap();
    for w in attitudes::synth::SOCIAL_WORDS {
        assert!(lex.word_in(w, social) && !lex.word_in(w, money), "{w}");
    }
    for w in attitudes::synth::MONEY_WORDS {
        assert!(lex.word_in(w, money) && !lex.word_in(w, social), "{w}");
    }
    let family = lex.resolve("family").unwrap();
    assert!(lex.word_in("familia", family) && lex.word_in("familia", social));
}
