use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Original,
    Retweet,
    Reply,
    Quote,
}

/// One social post, the ingestion unit of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub author_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub text: String,
    pub kind: PostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_author_id: Option<String>,
    #[serde(default, rename = "mentions")]
    pub mentioned_author_ids: Vec<String>,
}

impl RawPost {
    pub fn original(
        id: impl Into<String>,
        author_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        text: impl Into<String>,
    ) -> Self {
        RawPost {
            id: id.into(),
            author_id: author_id.into(),
            timestamp,
            text: text.into(),
            kind: PostKind::Original,
            retweeted_author_id: None,
            mentioned_author_ids: Vec::new(),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.author_id.is_empty() {
            return Err("empty author_id".into());
        }
        match (self.kind, &self.retweeted_author_id) {
            (PostKind::Retweet, None) => Err("retweet without retweeted_author_id".into()),
            _ => Ok(()),
        }
    }
}

/// Checks the corpus-level invariants: unique ids and per-post consistency.
pub fn validate_posts(posts: &[RawPost]) -> Result<()> {
    let mut seen = HashSet::with_capacity(posts.len());
    for (i, post) in posts.iter().enumerate() {
        post.validate()
            .map_err(|reason| Error::InvalidPost { line: i + 1, reason })?;
        if !seen.insert(post.id.as_str()) {
            return Err(Error::DuplicatePostId(post.id.clone()));
        }
    }
    Ok(())
}

/// Reads a JSON Lines corpus. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_posts_jsonl(path: &Path) -> Result<Vec<RawPost>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_posts_jsonl(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_posts_jsonl(reader: impl BufRead) -> Result<Vec<RawPost>> {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let post: RawPost = serde_json::from_str(&line).map_err(|e| Error::InvalidPost {
            line: i + 1,
            reason: e.to_string(),
        })?;
        post.validate()
            .map_err(|reason| Error::InvalidPost { line: i + 1, reason })?;
        if !seen.insert(post.id.clone()) {
            return Err(Error::DuplicatePostId(post.id));
        }
        posts.push(post);
    }
    Ok(posts)
}

pub fn write_posts_jsonl(path: &Path, posts: &[RawPost]) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for post in posts {
        serde_json::to_writer(&mut out, post)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
