use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::terms::TermCounts;
use crate::error::{Error, Result};

/// Default minimum document frequency; bounds the vocabulary growth that
/// 4-grams would otherwise cause.
pub const DEFAULT_MIN_DF: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<u32>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    document_frequency: Vec<u32>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(repr: VocabularyRepr) -> Self {
        Vocabulary::new(repr.terms, repr.document_frequency)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            document_frequency: v.document_frequency,
        }
    }
}

impl Vocabulary {
    pub fn new(terms: Vec<String>, document_frequency: Vec<u32>) -> Self {
        assert_eq!(terms.len(), document_frequency.len());
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect::<HashMap<_, _>>();
        assert_eq!(index.len(), terms.len(), "vocabulary terms must be unique");
        Vocabulary {
            terms,
            document_frequency,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, column: usize) -> u32 {
        self.document_frequency[column]
    }
}

/// Compressed sparse row storage of a non-negative real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns inside a row are
    /// sorted; explicit zeros are dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let n_rows = rows.len();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < n_cols, "column {c} out of bounds ({n_cols})");
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_dense(dense: &ndarray::Array2<f64>) -> Self {
        let rows = dense
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        Self::from_rows(dense.ncols(), rows)
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut out = ndarray::Array2::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i).iter() {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        let span = self.indptr[i]..self.indptr[i + 1];
        RowView {
            indices: &self.indices[span.clone()],
            values: &self.data[span],
        }
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).iter().map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).get(j)
    }

    pub fn squared_frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> RowView<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, column: usize) -> f64 {
        match self.indices.binary_search(&column) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// User × term TF-IDF matrix with unit-L2 rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentTermMatrix {
    pub rows: Vec<String>,
    pub vocabulary: Vocabulary,
    pub values: CsrMatrix,
}

impl DocumentTermMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        self.values.row(i)
    }

    pub fn row_index(&self, user: &str) -> Option<usize> {
        self.rows.binary_search_by(|r| r.as_str().cmp(user)).ok()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Smooth inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
/// Strictly positive for every `df <= N`.
pub fn smooth_idf(n_documents: usize, df: u32) -> f64 {
    ((1.0 + n_documents as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Builds the TF-IDF document-term matrix. Rows follow the map's (sorted)
/// key order and the vocabulary is sorted lexicographically; terms with
/// document frequency below `min_df` are dropped before weighting.
pub fn build_matrix(docs: &BTreeMap<String, TermCounts>, min_df: u32) -> Result<DocumentTermMatrix> {
    if min_df == 0 {
        return Err(Error::InvalidConfig("min_df must be at least 1".into()));
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for counts in docs.values() {
        for (term, &count) in counts {
            if count > 0 {
                *df.entry(term.as_str()).or_insert(0) += 1;
            }
        }
    }
    let (terms, freqs): (Vec<String>, Vec<u32>) = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df)
        .map(|(t, d)| (t.to_string(), d))
        .unzip();
    if terms.is_empty() {
        return Err(Error::AllDocumentsEmpty);
    }
    let vocabulary = Vocabulary::new(terms, freqs);
    let n_docs = docs.len();
    let idf: Vec<f64> = (0..vocabulary.len())
        .map(|c| smooth_idf(n_docs, vocabulary.document_frequency(c)))
        .collect();

    let rows = docs
        .values()
        .map(|counts| {
            let mut row: Vec<(usize, f64)> = counts
                .iter()
                .filter_map(|(term, &tf)| {
                    let c = vocabulary.column(term)?;
                    (tf > 0).then(|| (c, tf as f64 * idf[c]))
                })
                .collect();
            let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|(_, v)| *v /= norm);
            }
            row
        })
        .collect();

    Ok(DocumentTermMatrix {
        rows: docs.keys().cloned().collect(),
        values: CsrMatrix::from_rows(vocabulary.len(), rows),
        vocabulary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_terms;

    #[test]
    fn single_document_ratio() {
        let mut docs = BTreeMap::new();
        docs.insert("a".to_string(), count_terms(["x", "x", "y"]));
        let m = build_matrix(&docs, 1).unwrap();
        let x = m.vocabulary.column("x").unwrap();
        let y = m.vocabulary.column("y").unwrap();
        let row = m.row(0);
        assert!((row.l2_norm() - 1.0).abs() < 1e-12);
        assert!((row.get(x) / row.get(y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn min_df_filters_terms() {
        let mut docs = BTreeMap::new();
        docs.insert("a".to_string(), count_terms(["comun", "raro"]));
        docs.insert("b".to_string(), count_terms(["comun"]));
        let m = build_matrix(&docs, 2).unwrap();
        assert_eq!(m.vocabulary.terms(), ["comun".to_string()]);
        assert!(m.vocabulary.column("raro").is_none());
    }

    #[test]
    fn everything_filtered_is_an_error() {
        let mut docs = BTreeMap::new();
        docs.insert("a".to_string(), count_terms(["x"]));
        docs.insert("b".to_string(), TermCounts::new());
        assert!(matches!(build_matrix(&docs, 2), Err(Error::AllDocumentsEmpty)));
        assert!(matches!(build_matrix(&docs, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn empty_rows_stay_zero() {
        let mut docs = BTreeMap::new();
        docs.insert("a".to_string(), count_terms(["x"]));
        docs.insert("b".to_string(), TermCounts::new());
        let m = build_matrix(&docs, 1).unwrap();
        assert!(m.row(1).is_empty());
        assert_eq!(m.row_index("b"), Some(1));
    }

    #[test]
    fn json_round_trip_rebuilds_index() {
        let mut docs = BTreeMap::new();
        docs.insert("a".to_string(), count_terms(["x", "y"]));
        docs.insert("b".to_string(), count_terms(["y", "z"]));
        let m = build_matrix(&docs, 1).unwrap();
        let back: DocumentTermMatrix = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.vocabulary.column("z"), Some(2));
    }

    #[test]
    fn idf_is_positive() {
        for n in 1..50 {
            for df in 1..=n as u32 {
                assert!(smooth_idf(n, df) >= 1.0);
            }
        }
    }
}
