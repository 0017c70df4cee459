//! Weak supervision from hand-curated seed terms.
//!
//! Each user row of the document-term matrix gets a preliminary score per
//! attitude (the sum of its cells over that attitude's seed terms). Users
//! whose score reaches the threshold for exactly one attitude are pinned to
//! it in the supervision mask; everyone else is left unconstrained.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_terms, tokenize, DocumentTermMatrix, RowView, Stopwords, Vocabulary};
use crate::error::{Error, Result};

/// Labeling threshold on the preliminary seed score.
pub const DEFAULT_SEED_THRESHOLD: f64 = 0.25;

/// Column of the empathy pole in every two-column matrix of the crate.
pub const EMPATHY: usize = 0;
/// Column of the threat pole.
pub const THREAT: usize = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedLexicon {
    empathy: BTreeSet<String>,
    threat: BTreeSet<String>,
}

/// Normalizes a seed entry into the term form produced by the tokenizer:
/// a lone hashtag, mention or URL keeps its surface; words are joined into
/// the space-separated n-gram string.
pub fn normalize_seed_term(raw: &str) -> Option<String> {
    let tokens = tokenize(raw, &Stopwords::default());
    match tokens.as_slice() {
        [] => None,
        [single] if !single.is_word() => Some(single.surface.clone()),
        _ if tokens.iter().all(|t| t.is_word()) => Some(
            tokens
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        ),
        // mixed tags and words: longest emitted term is the whole phrase
        _ => extract_terms(&tokens).into_iter().max_by_key(|t| t.len()),
    }
}

impl SeedLexicon {
    pub fn new<E, T, S>(empathy: E, threat: T) -> Result<Self>
    where
        E: IntoIterator<Item = S>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let empathy: BTreeSet<String> = empathy
            .into_iter()
            .filter_map(|s| normalize_seed_term(s.as_ref()))
            .collect();
        let threat: BTreeSet<String> = threat
            .into_iter()
            .filter_map(|s| normalize_seed_term(s.as_ref()))
            .collect();
        if let Some(shared) = empathy.intersection(&threat).next() {
            return Err(Error::OverlappingSeedTerm(shared.clone()));
        }
        Ok(SeedLexicon { empathy, threat })
    }

    /// Parses the two-section text format:
    ///
    /// ```text
    /// [empathy]
    /// #todossomosmigrantes
    /// bienvenidos a chile
    /// [threat]
    /// #nomasinmigrantes
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut empathy = Vec::new();
        let mut threat = Vec::new();
        let mut current: Option<&mut Vec<String>> = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line.to_ascii_lowercase().as_str() {
                "[empathy]" => current = Some(&mut empathy),
                "[threat]" => current = Some(&mut threat),
                _ => match current.as_deref_mut() {
                    Some(list) => list.push(line.to_string()),
                    None => {
                        return Err(Error::Parse {
                            line: i + 1,
                            reason: "term before any [empathy]/[threat] header".into(),
                        })
                    }
                },
            }
        }
        Self::new(empathy, threat)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn empathy_terms(&self) -> &BTreeSet<String> {
        &self.empathy
    }

    pub fn threat_terms(&self) -> &BTreeSet<String> {
        &self.threat
    }

    /// Maps seed terms onto vocabulary columns; terms missing from the
    /// vocabulary are dropped.
    pub fn resolve(&self, vocabulary: &Vocabulary) -> ResolvedSeeds {
        let columns = |set: &BTreeSet<String>| -> Vec<usize> {
            let mut cols: Vec<usize> = set.iter().filter_map(|t| vocabulary.column(t)).collect();
            cols.sort_unstable();
            cols
        };
        ResolvedSeeds {
            empathy: columns(&self.empathy),
            threat: columns(&self.threat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedSeeds {
    pub empathy: Vec<usize>,
    pub threat: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedScores {
    pub empathy: f64,
    pub threat: f64,
}

impl ResolvedSeeds {
    pub fn score(&self, row: RowView<'_>) -> SeedScores {
        let sum = |cols: &[usize]| -> f64 {
            row.iter()
                .filter(|(c, _)| cols.binary_search(c).is_ok())
                .map(|(_, v)| v)
                .sum()
        };
        SeedScores {
            empathy: sum(&self.empathy),
            threat: sum(&self.threat),
        }
    }
}

pub fn score_seeds(row: RowView<'_>, vocabulary: &Vocabulary, lexicon: &SeedLexicon) -> SeedScores {
    lexicon.resolve(vocabulary).score(row)
}

/// Seed scores for every row of the matrix, in row order.
pub fn score_all(matrix: &DocumentTermMatrix, lexicon: &SeedLexicon) -> Vec<SeedScores> {
    let seeds = lexicon.resolve(&matrix.vocabulary);
    (0..matrix.n_rows()).map(|i| seeds.score(matrix.row(i))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedLabel {
    Empathy,
    Threat,
    /// Both scores reached the threshold.
    Both,
    Unlabeled,
}

impl SeedLabel {
    pub fn mask_row(self) -> [f64; 2] {
        match self {
            SeedLabel::Empathy => [1.0, 0.0],
            SeedLabel::Threat => [0.0, 1.0],
            SeedLabel::Both | SeedLabel::Unlabeled => [1.0, 1.0],
        }
    }
}

/// Binary user × 2 mask (columns: empathy, threat). Rows are never all
/// zero: unlabeled and doubly-labeled users get `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionMatrix {
    labels: Vec<SeedLabel>,
    mask: Array2<f64>,
}

impl SupervisionMatrix {
    pub fn from_labels(labels: Vec<SeedLabel>) -> Self {
        let mut mask = Array2::zeros((labels.len(), 2));
        for (i, label) in labels.iter().enumerate() {
            let [e, t] = label.mask_row();
            mask[[i, EMPATHY]] = e;
            mask[[i, THREAT]] = t;
        }
        SupervisionMatrix { labels, mask }
    }

    /// All-ones mask of `n` rows: plain NMF.
    pub fn unconstrained(n: usize) -> Self {
        Self::from_labels(vec![SeedLabel::Unlabeled; n])
    }

    pub fn mask(&self) -> &Array2<f64> {
        &self.mask
    }

    pub fn labels(&self) -> &[SeedLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fraction of rows where at least one score reached the threshold.
    pub fn labeled_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        let n = self.labels.iter().filter(|l| **l != SeedLabel::Unlabeled).count();
        n as f64 / self.labels.len() as f64
    }

    /// Rows pinned to a single attitude.
    pub fn pinned_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| matches!(l, SeedLabel::Empathy | SeedLabel::Threat))
            .count()
    }
}

pub fn label_for(scores: SeedScores, threshold: f64) -> SeedLabel {
    match (scores.empathy >= threshold, scores.threat >= threshold) {
        (true, false) => SeedLabel::Empathy,
        (false, true) => SeedLabel::Threat,
        (true, true) => SeedLabel::Both,
        (false, false) => SeedLabel::Unlabeled,
    }
}

/// Thresholds each attitude independently.
pub fn build_supervision(scores: &[SeedScores], threshold: f64) -> Result<SupervisionMatrix> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "seed threshold must be positive, got {threshold}"
        )));
    }
    Ok(SupervisionMatrix::from_labels(
        scores.iter().map(|&s| label_for(s, threshold)).collect(),
    ))
}
