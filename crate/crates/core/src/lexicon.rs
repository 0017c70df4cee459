//! Hierarchical word-category lexicon and per-group category z-scores.
//!
//! The file format follows the LIWC `.dic` layout, extended with an
//! optional parent column in the header:
//!
//! ```text
//! %
//! 1	affect
//! 2	negemo	1
//! 3	anger	2
//! %
//! odio	3
//! trabaj*	1
//! %
//! ```
//!
//! A word matched by `anger` also counts for `negemo` and `affect`.
//! Fields are tab-separated, hence the lint below.
#![allow(clippy::tabs_in_doc_comments)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::{Group, YearMonth};
use crate::corpus::{fold, Token};
use crate::error::{Error, Result};

pub type CategoryId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
    pub parent: Option<CategoryId>,
}

#[derive(Debug, Clone, Default)]
pub struct CategoryLexicon {
    categories: BTreeMap<CategoryId, Category>,
    /// Category itself plus all ancestors.
    closure: HashMap<CategoryId, Vec<CategoryId>>,
    exact: HashMap<String, Vec<CategoryId>>,
    prefixes: HashMap<String, Vec<CategoryId>>,
    longest_prefix: usize,
}

fn fields(line: &str) -> Vec<&str> {
    let tabbed: Vec<&str> = line.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect();
    if tabbed.len() > 1 {
        tabbed
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_id(raw: &str, line: usize) -> Result<CategoryId> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("`{raw}` is not a category id"),
    })
}

impl CategoryLexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut categories = BTreeMap::new();
        let mut entries: Vec<(String, Vec<CategoryId>, usize)> = Vec::new();
        let mut section = 0;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line == "%" {
                section += 1;
                continue;
            }
            match section {
                0 => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: "expected `%` before the category header".into(),
                    })
                }
                1 => {
                    let f = fields(raw);
                    if !(2..=3).contains(&f.len()) {
                        return Err(Error::Parse {
                            line: line_no,
                            reason: "header lines are `id<TAB>name[<TAB>parent_id]`".into(),
                        });
                    }
                    let id = parse_id(f[0], line_no)?;
                    let parent = f.get(2).map(|p| parse_id(p, line_no)).transpose()?;
                    let category = Category {
                        id,
                        name: f[1].to_string(),
                        parent,
                    };
                    if categories.insert(id, category).is_some() {
                        return Err(Error::Parse {
                            line: line_no,
                            reason: format!("duplicate category id {id}"),
                        });
                    }
                }
                _ => {
                    let f: Vec<&str> = raw.split('\t').map(str::trim).filter(|f| !f.is_empty()).collect();
                    let f = if f.len() > 1 { f } else { fields(raw) };
                    if f.len() < 2 {
                        return Err(Error::Parse {
                            line: line_no,
                            reason: "entry lines are `pattern<TAB>id[<TAB>id...]`".into(),
                        });
                    }
                    let ids = f[1..]
                        .iter()
                        .map(|r| parse_id(r, line_no))
                        .collect::<Result<Vec<_>>>()?;
                    entries.push((f[0].to_string(), ids, line_no));
                }
            }
        }
        Self::build(categories, entries)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn build(
        categories: BTreeMap<CategoryId, Category>,
        entries: Vec<(String, Vec<CategoryId>, usize)>,
    ) -> Result<Self> {
        for c in categories.values() {
            if let Some(p) = c.parent {
                if !categories.contains_key(&p) {
                    return Err(Error::UnknownCategory(p.to_string()));
                }
            }
        }
        let mut closure = HashMap::new();
        for &id in categories.keys() {
            let mut chain = vec![id];
            let mut cur = categories[&id].parent;
            while let Some(p) = cur {
                if chain.contains(&p) {
                    return Err(Error::Cycle(p));
                }
                chain.push(p);
                cur = categories[&p].parent;
            }
            closure.insert(id, chain);
        }

        let mut lexicon = CategoryLexicon {
            categories,
            closure,
            ..Default::default()
        };
        for (pattern, ids, line) in entries {
            for id in &ids {
                if !lexicon.categories.contains_key(id) {
                    return Err(Error::Parse {
                        line,
                        reason: format!("entry references unknown category {id}"),
                    });
                }
            }
            // multiword entries are not matched against single tokens
            if pattern.contains(' ') {
                continue;
            }
            let (key, table) = match pattern.strip_suffix('*') {
                Some(stem) => (fold(stem), &mut lexicon.prefixes),
                None => (fold(&pattern), &mut lexicon.exact),
            };
            let slot = table.entry(key).or_default();
            slot.extend(ids);
            slot.sort_unstable();
            slot.dedup();
        }
        lexicon.longest_prefix = lexicon.prefixes.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Ok(lexicon)
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.categories.values()
    }

    pub fn category(&self, id: CategoryId) -> Result<&Category> {
        self.categories
            .get(&id)
            .ok_or_else(|| Error::UnknownCategory(id.to_string()))
    }

    /// Looks a category up by name, falling back to a numeric id.
    pub fn resolve(&self, name_or_id: &str) -> Result<CategoryId> {
        self.categories
            .values()
            .find(|c| c.name == name_or_id)
            .map(|c| c.id)
            .or_else(|| name_or_id.parse().ok().filter(|id| self.categories.contains_key(id)))
            .ok_or_else(|| Error::UnknownCategory(name_or_id.to_string()))
    }

    /// Ancestors of `id`, the category itself first.
    pub fn ancestors(&self, id: CategoryId) -> &[CategoryId] {
        self.closure.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every category a folded word belongs to, hierarchy included.
    pub fn categories_of(&self, word: &str) -> BTreeSet<CategoryId> {
        let mut direct: Vec<CategoryId> = Vec::new();
        if let Some(ids) = self.exact.get(word) {
            direct.extend(ids);
        }
        if !self.prefixes.is_empty() {
            for (n, (end, _)) in word.char_indices().skip(1).chain([(word.len(), ' ')]).enumerate() {
                if n + 1 > self.longest_prefix {
                    break;
                }
                if let Some(ids) = self.prefixes.get(&word[..end]) {
                    direct.extend(ids);
                }
            }
        }
        direct.iter().flat_map(|&id| self.ancestors(id).iter().copied()).collect()
    }

    pub fn word_in(&self, word: &str, category: CategoryId) -> bool {
        self.categories_of(word).contains(&category)
    }
}

/// Share of a tweet's word tokens that fall into `category` (or any of its
/// descendants). Hashtags, mentions and URLs are not counted; an empty
/// tweet has fraction 0.
pub fn tweet_category_fraction(tokens: &[Token], category: CategoryId, lexicon: &CategoryLexicon) -> Result<f64> {
    lexicon.category(category)?;
    let words: Vec<&Token> = tokens.iter().filter(|t| t.is_word()).collect();
    if words.is_empty() {
        return Ok(0.0);
    }
    let hits = words.iter().filter(|t| lexicon.word_in(&t.surface, category)).count();
    Ok(hits as f64 / words.len() as f64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `(mean(group) − μ) / σ` with μ, σ the mean and population standard
/// deviation of the population fractions. `None` when σ is zero.
pub fn zscore_from_fractions(group: &[f64], population: &[f64]) -> Result<Option<f64>> {
    if group.is_empty() || population.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mu = mean(population);
    let var = population.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / population.len() as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Ok(None);
    }
    Ok(Some((mean(group) - mu) / sigma))
}

/// Category z-score of a group of tweets against a population of tweets.
pub fn zscore(
    category: CategoryId,
    group: &[&[Token]],
    population: &[&[Token]],
    lexicon: &CategoryLexicon,
) -> Result<Option<f64>> {
    let fractions = |tweets: &[&[Token]]| -> Result<Vec<f64>> {
        tweets
            .iter()
            .map(|t| tweet_category_fraction(t, category, lexicon))
            .collect()
    };
    zscore_from_fractions(&fractions(group)?, &fractions(population)?)
}

/// A tweet prepared for lexical analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalTweet {
    pub month: YearMonth,
    pub group: Group,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAssociation {
    pub category_id: CategoryId,
    pub category: String,
    pub month: YearMonth,
    pub group: Group,
    /// Empty when the month's population has zero variance.
    pub z: Option<f64>,
    pub n_tweets: usize,
}

/// Per-category fractions for every tweet, computed in one pass over the
/// words. Row `i` holds the fractions of tweet `i`, indexed like `ids`.
fn fraction_table(tweets: &[LexicalTweet], ids: &[CategoryId], lexicon: &CategoryLexicon) -> Vec<Vec<f64>> {
    let position: HashMap<CategoryId, usize> = ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    tweets
        .iter()
        .map(|tweet| {
            let mut counts = vec![0usize; ids.len()];
            let mut n_words = 0usize;
            for token in tweet.tokens.iter().filter(|t| t.is_word()) {
                n_words += 1;
                for c in lexicon.categories_of(&token.surface) {
                    counts[position[&c]] += 1;
                }
            }
            counts
                .into_iter()
                .map(|c| if n_words == 0 { 0.0 } else { c as f64 / n_words as f64 })
                .collect()
        })
        .collect()
}

/// For every category, month and group with at least one tweet, the z-score
/// of the group's mean fraction against that month's tweets.
pub fn monthly_group_zscores(tweets: &[LexicalTweet], lexicon: &CategoryLexicon) -> Vec<CategoryAssociation> {
    let ids: Vec<CategoryId> = lexicon.categories.keys().copied().collect();
    let table = fraction_table(tweets, &ids, lexicon);

    let mut by_month: BTreeMap<YearMonth, Vec<usize>> = BTreeMap::new();
    for (i, t) in tweets.iter().enumerate() {
        by_month.entry(t.month).or_default().push(i);
    }

    let mut out = Vec::new();
    for (ci, &cid) in ids.iter().enumerate() {
        let name = &lexicon.categories[&cid].name;
        for (&month, members) in &by_month {
            let population: Vec<f64> = members.iter().map(|&i| table[i][ci]).collect();
            for group in [Group::Empathy, Group::Threat] {
                let in_group: Vec<f64> = members
                    .iter()
                    .filter(|&&i| tweets[i].group == group)
                    .map(|&i| table[i][ci])
                    .collect();
                if in_group.is_empty() {
                    continue;
                }
                let z = zscore_from_fractions(&in_group, &population).expect("both sides non-empty");
                out.push(CategoryAssociation {
                    category_id: cid,
                    category: name.clone(),
                    month,
                    group,
                    z,
                    n_tweets: in_group.len(),
                });
            }
        }
    }
    out
}

pub fn write_associations(writer: impl std::io::Write, rows: &[CategoryAssociation]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<zscore csv>", e))?;
    Ok(())
}

pub fn write_associations_csv(path: &Path, rows: &[CategoryAssociation]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_associations(file, rows)
}

pub fn read_associations(reader: impl std::io::Read) -> Result<Vec<CategoryAssociation>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
