use std::collections::BTreeMap;

use super::post::{PostKind, RawPost};
use super::tokenize::{tokenize, Stopwords, Token, TokenKind};

/// Longest word n-gram emitted as a term.
pub const MAX_NGRAM: usize = 4;

/// Term multiset: term string to occurrence count.
pub type TermCounts = BTreeMap<String, u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocumentOptions {
    /// Whether a retweet's text counts toward the retweeter's document.
    pub include_retweets: bool,
}

impl Default for DocumentOptions {
    fn default() -> Self {
        DocumentOptions {
            include_retweets: true,
        }
    }
}

/// Emits every term occurrence of one token stream.
///
/// Hashtags, mentions and URLs are standalone terms. Word n-grams for
/// n = 1..=4 are built over the word tokens in order, keeping stopwords
/// inside n-grams; unigrams that are stopwords are skipped.
pub fn extract_terms(tokens: &[Token]) -> Vec<String> {
    let mut terms = Vec::new();
    let mut words: Vec<&Token> = Vec::new();
    for token in tokens {
        match token.kind {
            TokenKind::Word => words.push(token),
            TokenKind::Hashtag | TokenKind::Mention | TokenKind::Url => {
                terms.push(token.surface.clone())
            }
        }
    }
    for start in 0..words.len() {
        if !words[start].is_stopword {
            terms.push(words[start].surface.clone());
        }
        let mut gram = words[start].surface.clone();
        for word in words.iter().skip(start + 1).take(MAX_NGRAM - 1) {
            gram.push(' ');
            gram.push_str(&word.surface);
            terms.push(gram.clone());
        }
    }
    terms
}

pub fn count_terms<I, S>(terms: I) -> TermCounts
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut counts = TermCounts::new();
    for term in terms {
        *counts.entry(term.into()).or_insert(0) += 1;
    }
    counts
}

fn included(post: &RawPost, options: DocumentOptions) -> bool {
    options.include_retweets || post.kind != PostKind::Retweet
}

fn by_author_chronological(
    posts: &[RawPost],
    options: DocumentOptions,
) -> BTreeMap<&str, Vec<&RawPost>> {
    let mut grouped: BTreeMap<&str, Vec<&RawPost>> = BTreeMap::new();
    for post in posts {
        let entry = grouped.entry(post.author_id.as_str()).or_default();
        if included(post, options) {
            entry.push(post);
        }
    }
    for list in grouped.values_mut() {
        list.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    }
    grouped
}

/// Concatenates each author's posts, in chronological order, into one
/// token stream. Authors whose posts are all excluded or empty still get
/// an (empty) entry.
pub fn build_user_documents(
    posts: &[RawPost],
    stopwords: &Stopwords,
    options: DocumentOptions,
) -> BTreeMap<String, Vec<Token>> {
    by_author_chronological(posts, options)
        .into_iter()
        .map(|(author, list)| {
            let tokens = list
                .into_iter()
                .flat_map(|p| tokenize(&p.text, stopwords))
                .collect();
            (author.to_string(), tokens)
        })
        .collect()
}

/// Per-author term multisets. Terms are extracted post by post so that
/// n-grams never straddle two posts.
pub fn build_user_terms(
    posts: &[RawPost],
    stopwords: &Stopwords,
    options: DocumentOptions,
) -> BTreeMap<String, TermCounts> {
    by_author_chronological(posts, options)
        .into_iter()
        .map(|(author, list)| {
            let mut counts = TermCounts::new();
            for post in list {
                for term in extract_terms(&tokenize(&post.text, stopwords)) {
                    *counts.entry(term).or_insert(0) += 1;
                }
            }
            (author.to_string(), counts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn post(id: &str, author: &str, minute: u32, text: &str) -> RawPost {
        RawPost::original(
            id,
            author,
            Utc.with_ymd_and_hms(2017, 3, 1, 10, minute, 0).unwrap(),
            text,
        )
    }

    #[test]
    fn seed_phrase_is_reachable() {
        let stop = Stopwords::new(["a"]);
        let terms = count_terms(extract_terms(&tokenize("bienvenidos a chile", &stop)));
        let expected = count_terms([
            "bienvenidos",
            "chile",
            "bienvenidos a",
            "a chile",
            "bienvenidos a chile",
        ]);
        assert_eq!(terms, expected);
    }

    #[test]
    fn single_word() {
        assert_eq!(extract_terms(&[Token::word("hola")]), vec!["hola".to_string()]);
    }

    #[test]
    fn ngram_count_formula() {
        for w in 4..20usize {
            let tokens: Vec<_> = (0..w).map(|i| Token::word(format!("w{i}"))).collect();
            let expected = w + (w - 1) + (w - 2) + (w - 3);
            assert_eq!(extract_terms(&tokens).len(), expected, "w = {w}");
        }
        // short streams: every contiguous window
        for w in 0..4usize {
            let tokens: Vec<_> = (0..w).map(|i| Token::word(format!("w{i}"))).collect();
            assert_eq!(extract_terms(&tokens).len(), w * (w + 1) / 2);
        }
    }

    #[test]
    fn tags_are_standalone_and_break_nothing() {
        let stop = Stopwords::default();
        let terms = extract_terms(&tokenize("hola #tag mundo @yo http://x.cl", &stop));
        assert_eq!(terms, vec!["#tag", "@yo", "http://x.cl", "hola", "hola mundo", "mundo"]);
    }

    #[test]
    fn documents_follow_chronology() {
        let posts = vec![
            post("3", "a", 30, "tercero"),
            post("1", "a", 10, "primero"),
            post("2", "b", 20, "otro"),
        ];
        let docs = build_user_documents(&posts, &Stopwords::default(), DocumentOptions::default());
        assert_eq!(docs.len(), 2);
        assert_eq!(docs["a"], vec![Token::word("primero"), Token::word("tercero")]);
    }

    #[test]
    fn empty_posts_still_yield_key() {
        let posts = vec![post("1", "a", 0, ""), post("2", "a", 1, "!!!")];
        let docs = build_user_documents(&posts, &Stopwords::default(), DocumentOptions::default());
        assert_eq!(docs["a"], Vec::<Token>::new());
    }

    #[test]
    fn token_counts_sum_over_posts() {
        let stop = Stopwords::new(["de", "la"]);
        let mut posts = Vec::new();
        let mut expected = BTreeMap::new();
        for u in 0..10 {
            for p in 0..5u32 {
                let text = (0..(u + p as usize) % 7)
                    .map(|k| if k % 3 == 0 { "de".to_string() } else { format!("t{k} #h{k}") })
                    .collect::<Vec<_>>()
                    .join(" ");
                *expected.entry(format!("u{u}")).or_insert(0usize) += tokenize(&text, &stop).len();
                posts.push(post(&format!("{u}-{p}"), &format!("u{u}"), p, &text));
            }
        }
        let docs = build_user_documents(&posts, &stop, DocumentOptions::default());
        assert_eq!(docs.len(), 10);
        for (user, tokens) in &docs {
            assert_eq!(tokens.len(), expected[user]);
        }
    }

    #[test]
    fn retweets_can_be_excluded() {
        let mut rt = post("2", "a", 5, "compartido");
        rt.kind = PostKind::Retweet;
        rt.retweeted_author_id = Some("b".into());
        let posts = vec![post("1", "a", 0, "propio"), rt];
        let stop = Stopwords::default();
        let with = build_user_terms(&posts, &stop, DocumentOptions::default());
        let without = build_user_terms(
            &posts,
            &stop,
            DocumentOptions {
                include_retweets: false,
            },
        );
        assert!(with["a"].contains_key("compartido"));
        assert!(!without["a"].contains_key("compartido"));
        assert!(without["a"].contains_key("propio"));
    }

    #[test]
    fn ngrams_do_not_cross_posts() {
        let posts = vec![post("1", "a", 0, "uno dos"), post("2", "a", 1, "tres")];
        let terms = build_user_terms(&posts, &Stopwords::default(), DocumentOptions::default());
        assert!(terms["a"].contains_key("uno dos"));
        assert!(!terms["a"].contains_key("dos tres"));
    }
}
