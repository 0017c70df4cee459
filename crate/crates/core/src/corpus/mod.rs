//! Ingestion: posts, tokens, terms and the TF-IDF document-term matrix.

mod matrix;
mod post;
mod terms;
mod tokenize;

pub use matrix::{
    build_matrix, smooth_idf, CsrMatrix, DocumentTermMatrix, RowView, Vocabulary, DEFAULT_MIN_DF,
};
pub use post::{parse_posts_jsonl, read_posts_jsonl, validate_posts, write_posts_jsonl, PostKind, RawPost};
pub use terms::{
    build_user_documents, build_user_terms, count_terms, extract_terms, DocumentOptions,
    TermCounts, MAX_NGRAM,
};
pub use tokenize::{fold, tokenize, Stopwords, Token, TokenKind};
