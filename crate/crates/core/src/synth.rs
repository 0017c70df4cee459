//! Synthetic two-population corpora with planted attitudes, used for
//! end-to-end checks at desk scale.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attitude::Group;
use crate::corpus::{PostKind, RawPost};
use crate::error::{Error, Result};
use crate::seeding::SeedLexicon;

pub const EMPATHY_SEEDS: &[&str] = &[
    "#todossomosmigrantes",
    "#stopxenophobia",
    "#chilesinbarreras",
    "#chileterecibe",
    "#bienvenidosmigrantes",
    "@oimchile",
    "bienvenidos a chile",
    "#derribandomuros",
    "@sjmchile",
];

pub const THREAT_SEEDS: &[&str] = &[
    "#vendepatria",
    "#nomasinmigrantes",
    "#nomasilegales",
    "#inmigrantesilegales",
    "inmigrantes delincuentes",
    "inmigracion descontrolada",
    "indeseables",
];

/// Words of the bundled lexicon's `social` category used for planted
/// category frequencies.
pub const SOCIAL_WORDS: &[&str] = &[
    "amigos", "comunidad", "vecinos", "juntos", "hermanos", "compartir", "ayudar", "conversar",
];

/// Words of the bundled lexicon's `money` category.
pub const MONEY_WORDS: &[&str] = &[
    "dinero", "pagar", "impuestos", "sueldo", "costo", "precio", "deuda", "gastos",
];

/// Seed lexicon built from [`EMPATHY_SEEDS`] and [`THREAT_SEEDS`].
pub fn default_seed_lexicon() -> SeedLexicon {
    SeedLexicon::new(EMPATHY_SEEDS.iter().copied(), THREAT_SEEDS.iter().copied())
        .expect("built-in seed lists are disjoint")
}

/// Seed file text in the `[empathy]` / `[threat]` layout read by
/// [`SeedLexicon::parse`].
pub fn default_seed_file() -> String {
    let mut out = String::from("[empathy]\n");
    for s in EMPATHY_SEEDS {
        out.push_str(s);
        out.push('\n');
    }
    out.push_str("\n[threat]\n");
    for s in THREAT_SEEDS {
        out.push_str(s);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub users_per_attitude: usize,
    pub posts_per_user: usize,
    pub words_per_post: usize,
    /// Pseudo-words planted for each attitude; the two sets are disjoint.
    pub planted_vocabulary_size: usize,
    pub noise_vocabulary_size: usize,
    /// Fraction of each population that writes seed terms.
    pub seeded_fraction: f64,
    /// Chance that a post of a seeded user carries a seed term.
    pub seed_usage_probability: f64,
    /// Chance that a word slot draws from the shared noise vocabulary.
    pub noise_rate: f64,
    /// Chance that a word slot draws a social or money word.
    pub category_rate: f64,
    /// How much more often a group draws its favoured category (social for
    /// empathy, money for threat) than the other one.
    pub category_bias: f64,
    pub mention_probability: f64,
    pub retweet_probability: f64,
    /// Chance that a mention or retweet targets the author's own group.
    pub intra_group_preference: f64,
    pub start: DateTime<Utc>,
    pub months: u32,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users_per_attitude: 100,
            posts_per_user: 8,
            words_per_post: 12,
            planted_vocabulary_size: 60,
            noise_vocabulary_size: 80,
            seeded_fraction: 0.2,
            seed_usage_probability: 1.0,
            noise_rate: 0.3,
            category_rate: 0.15,
            category_bias: 3.0,
            mention_probability: 0.3,
            retweet_probability: 0.2,
            intra_group_preference: 0.8,
            start: Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap(),
            months: 6,
            rng_seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("users_per_attitude", self.users_per_attitude),
            ("posts_per_user", self.posts_per_user),
            ("words_per_post", self.words_per_post),
            ("planted_vocabulary_size", self.planted_vocabulary_size),
            ("noise_vocabulary_size", self.noise_vocabulary_size),
            ("months", self.months as usize),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        let probabilities = [
            ("seeded_fraction", self.seeded_fraction),
            ("seed_usage_probability", self.seed_usage_probability),
            ("noise_rate", self.noise_rate),
            ("category_rate", self.category_rate),
            ("mention_probability", self.mention_probability),
            ("retweet_probability", self.retweet_probability),
            ("intra_group_preference", self.intra_group_preference),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.category_bias > 0.0 && self.category_bias.is_finite()) {
            return Err(Error::InvalidConfig("category_bias must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub user_id: String,
    pub attitude: Group,
    pub seeded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedVocabulary {
    pub empathy: Vec<String>,
    pub threat: Vec<String>,
    pub noise: Vec<String>,
}

impl PlantedVocabulary {
    pub fn planted(&self, group: Group) -> &[String] {
        match group {
            Group::Empathy => &self.empathy,
            Group::Threat => &self.threat,
        }
    }

    /// Every word a member of `group` can write when the noise rate is 0:
    /// planted words, category words and the words of its seed terms.
    pub fn group_words(&self, group: Group) -> BTreeSet<String> {
        let seeds = match group {
            Group::Empathy => EMPATHY_SEEDS,
            Group::Threat => THREAT_SEEDS,
        };
        self.planted(group)
            .iter()
            .cloned()
            .chain(SOCIAL_WORDS.iter().chain(MONEY_WORDS).map(|w| w.to_string()))
            .chain(seeds.iter().flat_map(|s| s.split_whitespace()).map(str::to_string))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Posts sorted by timestamp, then id.
    pub posts: Vec<RawPost>,
    pub truth: Vec<GroundTruth>,
    pub vocabulary: PlantedVocabulary,
}

impl SyntheticCorpus {
    pub fn attitude_of(&self, user: &str) -> Option<Group> {
        self.truth.iter().find(|t| t.user_id == user).map(|t| t.attitude)
    }
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "j", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "br", "tr", "pl",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u"];

fn pseudo_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(3..=4);
        let mut word = String::new();
        for _ in 0..syllables {
            word.push_str(ONSETS.choose(rng).unwrap());
            word.push_str(NUCLEI.choose(rng).unwrap());
        }
        if taken.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

fn pick_target(
    rng: &mut ChaCha8Rng,
    author: usize,
    group_of: &[Group],
    members: &[Vec<usize>; 2],
    preference: f64,
) -> Option<usize> {
    let own = group_of[author];
    let side = if rng.random_bool(preference) { own } else { other(own) };
    let pool: Vec<usize> = members[side as usize].iter().copied().filter(|&u| u != author).collect();
    pool.choose(rng).copied()
}

fn other(group: Group) -> Group {
    match group {
        Group::Empathy => Group::Threat,
        Group::Threat => Group::Empathy,
    }
}

fn user_id(i: usize) -> String {
    format!("u{i:04}")
}

/// Generates a corpus of `2 × users_per_attitude` users. Empathy users come
/// first. Mention targets are recorded in the structured mention list only,
/// so user ids never appear as terms.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let mut taken: BTreeSet<String> = SOCIAL_WORDS.iter().chain(MONEY_WORDS).map(|w| w.to_string()).collect();
    for seed in EMPATHY_SEEDS.iter().chain(THREAT_SEEDS) {
        taken.extend(seed.split_whitespace().map(str::to_string));
    }
    let vocabulary = PlantedVocabulary {
        empathy: pseudo_words(&mut rng, spec.planted_vocabulary_size, &mut taken),
        threat: pseudo_words(&mut rng, spec.planted_vocabulary_size, &mut taken),
        noise: pseudo_words(&mut rng, spec.noise_vocabulary_size, &mut taken),
    };

    let n = spec.users_per_attitude;
    let group_of: Vec<Group> = (0..2 * n).map(|i| if i < n { Group::Empathy } else { Group::Threat }).collect();
    let members = [(0..n).collect::<Vec<_>>(), (n..2 * n).collect::<Vec<_>>()];
    let n_seeded = (spec.seeded_fraction * n as f64).round() as usize;
    let truth: Vec<GroundTruth> = (0..2 * n)
        .map(|i| GroundTruth {
            user_id: user_id(i),
            attitude: group_of[i],
            seeded: i % n < n_seeded,
        })
        .collect();

    let span_seconds = {
        let end = spec
            .start
            .checked_add_months(chrono::Months::new(spec.months))
            .ok_or_else(|| Error::InvalidConfig("time span out of range".into()))?;
        (end - spec.start).num_seconds()
    };
    let favoured = 1.0 / (1.0 + 1.0 / spec.category_bias);

    let mut posts: Vec<RawPost> = Vec::new();
    let mut originals: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
    let mut retweet_slots: Vec<(usize, DateTime<Utc>)> = Vec::new();
    for author in 0..2 * n {
        let group = group_of[author];
        let planted = vocabulary.planted(group);
        let (own_category, other_category) = match group {
            Group::Empathy => (SOCIAL_WORDS, MONEY_WORDS),
            Group::Threat => (MONEY_WORDS, SOCIAL_WORDS),
        };
        let seeds = match group {
            Group::Empathy => EMPATHY_SEEDS,
            Group::Threat => THREAT_SEEDS,
        };
        // seeded users stick to a couple of favourite seed terms
        let favourites: Vec<&str> = seeds.choose_multiple(&mut rng, 2).copied().collect();
        for _ in 0..spec.posts_per_user {
            let timestamp = spec.start + Duration::seconds(rng.random_range(0..span_seconds));
            if rng.random_bool(spec.retweet_probability) {
                retweet_slots.push((author, timestamp));
                continue;
            }
            let mut words: Vec<String> = (0..spec.words_per_post)
                .map(|_| {
                    if rng.random_bool(spec.noise_rate) {
                        vocabulary.noise.choose(&mut rng).unwrap().clone()
                    } else if rng.random_bool(spec.category_rate) {
                        let list = if rng.random_bool(favoured) { own_category } else { other_category };
                        list.choose(&mut rng).unwrap().to_string()
                    } else {
                        planted.choose(&mut rng).unwrap().clone()
                    }
                })
                .collect();
            if truth[author].seeded && rng.random_bool(spec.seed_usage_probability) {
                let at = rng.random_range(0..=words.len());
                words.insert(at, favourites.choose(&mut rng).unwrap().to_string());
            }
            let mut post = RawPost::original(format!("p{:06}", posts.len()), user_id(author), timestamp, words.join(" "));
            if rng.random_bool(spec.mention_probability) {
                if let Some(target) = pick_target(&mut rng, author, &group_of, &members, spec.intra_group_preference) {
                    post.mentioned_author_ids.push(user_id(target));
                }
            }
            originals[author].push(posts.len());
            posts.push(post);
        }
    }

    for (author, timestamp) in retweet_slots {
        let Some(target) = pick_target(&mut rng, author, &group_of, &members, spec.intra_group_preference) else {
            continue;
        };
        let Some(&source) = originals[target].choose(&mut rng) else {
            continue;
        };
        let text = posts[source].text.clone();
        posts.push(RawPost {
            id: format!("p{:06}", posts.len()),
            author_id: user_id(author),
            timestamp,
            text,
            kind: PostKind::Retweet,
            retweeted_author_id: Some(user_id(target)),
            mentioned_author_ids: Vec::new(),
        });
    }

    posts.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    Ok(SyntheticCorpus { posts, truth, vocabulary })
}

pub fn write_truth(writer: impl std::io::Write, truth: &[GroundTruth]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for t in truth {
        out.serialize(t)?;
    }
    out.flush().map_err(|e| Error::io("<ground truth csv>", e))?;
    Ok(())
}

pub fn write_truth_csv(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_truth(file, truth)
}

pub fn read_truth(reader: impl std::io::Read) -> Result<Vec<GroundTruth>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruth>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_truth(file)
}
