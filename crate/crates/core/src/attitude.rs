//! Tendency and polarity of users, terms and tweets.
//!
//! For a user or term with associations `(e, t)` to the empathy and threat
//! poles, tendency is `e − t` and polarity is `e + t`. A tweet's tendency
//! (polarity) is the sum of the tendencies (polarities) of the vocabulary
//! terms it contains.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{extract_terms, tokenize, PostKind, RawPost, Stopwords};
use crate::error::{Error, Result};
use crate::factorizer::FactorModel;
use crate::seeding::{EMPATHY, THREAT};

/// Associations of one user or term with the two poles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttitudeScore {
    pub empathy: f64,
    pub threat: f64,
}

impl AttitudeScore {
    pub fn new(empathy: f64, threat: f64) -> Self {
        AttitudeScore { empathy, threat }
    }

    pub fn tendency(&self) -> f64 {
        self.empathy - self.threat
    }

    pub fn polarity(&self) -> f64 {
        self.empathy + self.threat
    }

    /// Exchanges the poles.
    pub fn swapped(&self) -> Self {
        AttitudeScore::new(self.threat, self.empathy)
    }
}

pub fn user_tendency(score: AttitudeScore) -> f64 {
    score.tendency()
}

pub fn user_polarity(score: AttitudeScore) -> f64 {
    score.polarity()
}

pub fn term_tendency(score: AttitudeScore) -> f64 {
    score.tendency()
}

pub fn term_polarity(score: AttitudeScore) -> f64 {
    score.polarity()
}

fn require_two_poles(model: &FactorModel) -> Result<()> {
    if model.k() != 2 {
        return Err(Error::InvalidConfig(format!(
            "attitude scoring needs k = 2, model has k = {}",
            model.k()
        )));
    }
    Ok(())
}

impl FactorModel {
    pub fn user_score(&self, row: usize) -> AttitudeScore {
        AttitudeScore::new(self.user_factors[[row, EMPATHY]], self.user_factors[[row, THREAT]])
    }

    pub fn user_score_by_id(&self, user: &str) -> Option<AttitudeScore> {
        self.user_index(user).map(|i| self.user_score(i))
    }

    pub fn term_score_at(&self, column: usize) -> AttitudeScore {
        AttitudeScore::new(
            self.term_factors[[EMPATHY, column]],
            self.term_factors[[THREAT, column]],
        )
    }

    pub fn term_score(&self, term: &str) -> Result<AttitudeScore> {
        self.vocabulary
            .column(term)
            .map(|c| self.term_score_at(c))
            .ok_or_else(|| Error::UnknownTerm(term.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermMultiplicity {
    /// Every occurrence of a term in the tweet counts.
    #[default]
    Occurrences,
    /// Each distinct term counts once.
    Distinct,
}

/// Scores free text against a fitted model's term associations.
#[derive(Debug, Clone)]
pub struct TweetScorer {
    terms: HashMap<String, AttitudeScore>,
    stopwords: Stopwords,
    multiplicity: TermMultiplicity,
}

impl TweetScorer {
    pub fn new(model: &FactorModel, stopwords: Stopwords, multiplicity: TermMultiplicity) -> Result<Self> {
        require_two_poles(model)?;
        let terms = model
            .vocabulary
            .terms()
            .iter()
            .enumerate()
            .map(|(c, t)| (t.clone(), model.term_score_at(c)))
            .collect();
        Ok(TweetScorer {
            terms,
            stopwords,
            multiplicity,
        })
    }

    /// Sum of term scores over the text's in-vocabulary terms. Terms outside
    /// the vocabulary contribute nothing.
    pub fn score_text(&self, text: &str) -> AttitudeScore {
        let mut terms = extract_terms(&tokenize(text, &self.stopwords));
        if self.multiplicity == TermMultiplicity::Distinct {
            terms.sort_unstable();
            terms.dedup();
        }
        let mut total = AttitudeScore::default();
        for term in &terms {
            if let Some(s) = self.terms.get(term) {
                total.empathy += s.empathy;
                total.threat += s.threat;
            }
        }
        total
    }

    pub fn tendency(&self, post: &RawPost) -> f64 {
        self.score_text(&post.text).tendency()
    }

    pub fn polarity(&self, post: &RawPost) -> f64 {
        self.score_text(&post.text).polarity()
    }
}

pub fn tweet_tendency(post: &RawPost, model: &FactorModel, stopwords: &Stopwords) -> Result<f64> {
    Ok(TweetScorer::new(model, stopwords.clone(), TermMultiplicity::Occurrences)?.tendency(post))
}

pub fn tweet_polarity(post: &RawPost, model: &FactorModel, stopwords: &Stopwords) -> Result<f64> {
    Ok(TweetScorer::new(model, stopwords.clone(), TermMultiplicity::Occurrences)?.polarity(post))
}

/// Calendar month bucket, rendered `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        YearMonth { year, month }
    }

    pub fn of(timestamp: &DateTime<Utc>) -> Self {
        YearMonth::new(timestamp.year(), timestamp.month())
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 0,
            reason: format!("invalid year-month `{s}`"),
        };
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(YearMonth { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Empathy,
    Threat,
}

impl Group {
    /// Zero tendency belongs to the empathy group.
    pub fn from_tendency(tendency: f64) -> Self {
        if tendency >= 0.0 {
            Group::Empathy
        } else {
            Group::Threat
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Empathy => "empathy",
            Group::Threat => "threat",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTweet {
    pub post_id: String,
    pub author_id: String,
    pub timestamp: DateTime<Utc>,
    pub tendency: f64,
    pub polarity: f64,
    pub group: Group,
}

impl ScoredTweet {
    pub fn new(
        post_id: impl Into<String>,
        author_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        tendency: f64,
        polarity: f64,
    ) -> Self {
        ScoredTweet {
            post_id: post_id.into(),
            author_id: author_id.into(),
            timestamp,
            tendency,
            polarity,
            group: Group::from_tendency(tendency),
        }
    }

    pub fn month(&self) -> YearMonth {
        YearMonth::of(&self.timestamp)
    }
}

/// Which post kinds to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindFilter {
    All,
    /// Everything except retweets.
    NoRetweets,
}

impl KindFilter {
    pub fn accepts(&self, kind: PostKind) -> bool {
        match self {
            KindFilter::All => true,
            KindFilter::NoRetweets => kind != PostKind::Retweet,
        }
    }
}

/// Scores every accepted post, keeping corpus order.
pub fn score_posts(posts: &[RawPost], scorer: &TweetScorer, filter: KindFilter) -> Vec<ScoredTweet> {
    posts
        .iter()
        .filter(|p| filter.accepts(p.kind))
        .map(|p| {
            let s = scorer.score_text(&p.text);
            ScoredTweet::new(&p.id, &p.author_id, p.timestamp, s.tendency(), s.polarity())
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TweetGroups<'a> {
    pub empathy: Vec<&'a ScoredTweet>,
    pub threat: Vec<&'a ScoredTweet>,
}

/// Partitions by the sign of tendency (`≥ 0` is empathy).
pub fn group_tweets(scored: &[ScoredTweet]) -> TweetGroups<'_> {
    let (empathy, threat) = scored
        .iter()
        .partition(|t| Group::from_tendency(t.tendency) == Group::Empathy);
    TweetGroups { empathy, threat }
}

pub fn write_scored_csv(path: &Path, scored: &[ScoredTweet]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_scored(file, scored)
}

pub fn write_scored(writer: impl std::io::Write, scored: &[ScoredTweet]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for t in scored {
        out.serialize(t)?;
    }
    out.flush().map_err(|e| Error::io("<scored csv>", e))?;
    Ok(())
}

pub fn read_scored_csv(path: &Path) -> Result<Vec<ScoredTweet>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scored(file)
}

pub fn read_scored(reader: impl std::io::Read) -> Result<Vec<ScoredTweet>> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let t: ScoredTweet = row?;
        rows.push(t);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::factorizer::FactorizationConfig;
    use chrono::TimeZone;
    use ndarray::array;

    #[test]
    fn user_metrics() {
        let s = AttitudeScore::new(0.7, 0.2);
        assert!((user_tendency(s) - 0.5).abs() < 1e-15);
        assert!((user_polarity(s) - 0.9).abs() < 1e-15);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(user_tendency(AttitudeScore::new(x, x)), 0.0);
        }
        assert_eq!(user_tendency(AttitudeScore::new(0.0, 1.0)), -1.0);
        assert_eq!(user_polarity(AttitudeScore::new(0.0, 0.0)), 0.0);
        let balanced = AttitudeScore::new(0.5, 0.5);
        assert_eq!((balanced.tendency(), balanced.polarity()), (0.0, 1.0));
    }

    pub(crate) fn model() -> FactorModel {
        FactorModel {
            rows: vec!["a".into(), "b".into()],
            vocabulary: Vocabulary::new(
                vec!["chile".into(), "delincuentes".into(), "integracion".into()],
                vec![2, 2, 2],
            ),
            user_factors: array![[0.8, 0.1], [0.2, 0.6]],
            term_factors: array![[0.4, 0.1, 0.5], [0.1, 0.8, 0.1]],
            objective_trace: vec![],
            converged: true,
            iterations_run: 1,
            clip_factor: 1.0,
            config: FactorizationConfig::default(),
        }
    }

    #[test]
    fn term_lookup() {
        let m = model();
        let s = m.term_score("chile").unwrap();
        assert!((term_tendency(s) - 0.3).abs() < 1e-15);
        assert!((term_polarity(s) - 0.5).abs() < 1e-15);
        assert!(matches!(m.term_score("peru"), Err(Error::UnknownTerm(t)) if t == "peru"));
    }

    fn post(text: &str) -> RawPost {
        RawPost::original("p", "a", Utc.with_ymd_and_hms(2017, 7, 31, 0, 0, 0).unwrap(), text)
    }

    #[test]
    fn tweet_sums() {
        let m = model();
        let stop = Stopwords::default();
        let one = post("Chile!");
        assert!((tweet_tendency(&one, &m, &stop).unwrap() - 0.3).abs() < 1e-15);
        assert!((tweet_polarity(&one, &m, &stop).unwrap() - 0.5).abs() < 1e-15);
        let none = post("nada que ver");
        assert_eq!(tweet_tendency(&none, &m, &stop).unwrap(), 0.0);
        assert_eq!(tweet_polarity(&none, &m, &stop).unwrap(), 0.0);
    }

    #[test]
    fn multiplicity_modes() {
        let m = model();
        let occ = TweetScorer::new(&m, Stopwords::default(), TermMultiplicity::Occurrences).unwrap();
        let distinct = TweetScorer::new(&m, Stopwords::default(), TermMultiplicity::Distinct).unwrap();
        let p = post("chile chile");
        assert!((occ.tendency(&p) - 0.6).abs() < 1e-15);
        assert!((distinct.tendency(&p) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn groups_by_sign() {
        let ts = Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap();
        let scored: Vec<_> = [0.1, 0.0, -0.1]
            .iter()
            .enumerate()
            .map(|(i, &t)| ScoredTweet::new(i.to_string(), "a", ts, t, t.abs()))
            .collect();
        let groups = group_tweets(&scored);
        let e: Vec<f64> = groups.empathy.iter().map(|t| t.tendency).collect();
        let t: Vec<f64> = groups.threat.iter().map(|t| t.tendency).collect();
        assert_eq!(e, vec![0.1, 0.0]);
        assert_eq!(t, vec![-0.1]);

        let positive: Vec<_> = (0..5)
            .map(|i| ScoredTweet::new(i.to_string(), "a", ts, 0.5, 0.5))
            .collect();
        assert!(group_tweets(&positive).threat.is_empty());
    }

    #[test]
    fn year_month_format() {
        let ym: YearMonth = "2017-07".parse().unwrap();
        assert_eq!(ym, YearMonth::new(2017, 7));
        assert_eq!(ym.to_string(), "2017-07");
        assert!("2017-13".parse::<YearMonth>().is_err());
        assert!("july".parse::<YearMonth>().is_err());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let ts = Utc.with_ymd_and_hms(2017, 10, 6, 13, 5, 0).unwrap();
        let scored = vec![
            ScoredTweet::new("1", "a", ts, 0.123456789012345, 0.9),
            ScoredTweet::new("2", "b", ts, -1e-17, 3.0),
        ];
        let mut first = Vec::new();
        write_scored(&mut first, &scored).unwrap();
        let back = read_scored(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_scored(&mut second, &back).unwrap();
        assert_eq!(first, second);
        assert_eq!(back[1].group, Group::Threat);
        assert_eq!(back[0].month(), YearMonth::new(2017, 10));
        let header = String::from_utf8(first).unwrap();
        assert!(header.starts_with("post_id,author_id,timestamp,tendency,polarity,group\n"));
    }

    #[test]
    fn kind_filter() {
        let m = model();
        let scorer = TweetScorer::new(&m, Stopwords::default(), TermMultiplicity::Occurrences).unwrap();
        let mut rt = post("chile");
        rt.id = "rt".into();
        rt.kind = PostKind::Retweet;
        rt.retweeted_author_id = Some("b".into());
        let posts = vec![post("chile"), rt];
        assert_eq!(score_posts(&posts, &scorer, KindFilter::All).len(), 2);
        assert_eq!(score_posts(&posts, &scorer, KindFilter::NoRetweets).len(), 1);
    }
}
