use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Hashtag,
    Mention,
    Url,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    /// Only ever set on `Word` tokens.
    pub is_stopword: bool,
}

impl Token {
    pub fn word(surface: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            kind: TokenKind::Word,
            is_stopword: false,
        }
    }

    pub fn stopword(surface: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            kind: TokenKind::Word,
            is_stopword: true,
        }
    }

    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

/// Lowercases and strips diacritics: NFD decomposition, then combining
/// marks are dropped. `"Haití"` and `"HAITÍ"` both become `"haiti"`.
pub fn fold(text: &str) -> String {
    text.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// A set of stopwords stored in folded form.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stopwords(
            words
                .into_iter()
                .map(|w| fold(w.as_ref().trim()))
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line, UTF-8. Blank lines are ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn contains(&self, folded: &str) -> bool {
        self.0.contains(folded)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

const URL_TRAILING: &[char] = &[
    '.', ',', ';', ':', '!', '?', ')', ']', '}', '"', '\'', '…', '»', '”', '’',
];
const URL_LEADING: &[char] = &['(', '[', '{', '"', '\'', '¿', '¡', '«', '“', '‘'];

fn is_url(chunk: &str) -> bool {
    let lower = chunk.get(..8).unwrap_or(chunk).to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits a post into word, hashtag, mention and URL tokens.
///
/// URLs are kept verbatim (case included) since shortener paths are case
/// sensitive; every other surface is folded with [`fold`]. Punctuation is
/// dropped except as part of a URL or as the `#`/`@` sigil.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let trimmed = chunk.trim_start_matches(URL_LEADING);
        if is_url(trimmed) {
            let url = trimmed.trim_end_matches(URL_TRAILING);
            tokens.push(Token {
                surface: url.to_string(),
                kind: TokenKind::Url,
                is_stopword: false,
            });
            continue;
        }
        scan_chunk(&fold(chunk), stopwords, &mut tokens);
    }
    tokens
}

fn scan_chunk(chunk: &str, stopwords: &Stopwords, out: &mut Vec<Token>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if (c == '#' || c == '@') && chars.get(i + 1).is_some_and(|&n| is_tag_char(n)) {
            let start = i;
            i += 1;
            while i < chars.len() && is_tag_char(chars[i]) {
                i += 1;
            }
            out.push(Token {
                surface: chars[start..i].iter().collect(),
                kind: if c == '#' {
                    TokenKind::Hashtag
                } else {
                    TokenKind::Mention
                },
                is_stopword: false,
            });
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            let surface: String = chars[start..i].iter().collect();
            let is_stopword = stopwords.contains(&surface);
            out.push(Token {
                surface,
                kind: TokenKind::Word,
                is_stopword,
            });
        } else {
            i += 1;
        }
    }
}
