//! Word lists used by segmentation, tagging and the list-lookup features.
//!
//! The bundled lists live in `data/` and are compiled into the binary. A
//! directory with files of the same names can override any of them at
//! runtime. Every list is content-hashed so reports can record exactly which
//! lexicon produced a feature value.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pos::PosTag;
use super::segment::tokenize_span;
use crate::error::{Error, Result};

pub const STOP_WORDS_FILE: &str = "stop_words.txt";
pub const DISCOURSE_MARKERS_FILE: &str = "discourse_markers.txt";
pub const PERSONAL_PRONOUNS_FILE: &str = "personal_pronouns.txt";
pub const SENTIMENT_FILE: &str = "sentiment.tsv";
pub const NEGATORS_FILE: &str = "negators.txt";
pub const POS_LEXICON_FILE: &str = "pos_lexicon.tsv";
pub const SPELLING_FILE: &str = "spelling_dictionary.txt";
pub const ABBREVIATIONS_FILE: &str = "abbreviations.txt";

const BUNDLED: [(&str, &str); 8] = [
    (STOP_WORDS_FILE, include_str!("../../data/stop_words.txt")),
    (
        DISCOURSE_MARKERS_FILE,
        include_str!("../../data/discourse_markers.txt"),
    ),
    (
        PERSONAL_PRONOUNS_FILE,
        include_str!("../../data/personal_pronouns.txt"),
    ),
    (SENTIMENT_FILE, include_str!("../../data/sentiment.tsv")),
    (NEGATORS_FILE, include_str!("../../data/negators.txt")),
    (POS_LEXICON_FILE, include_str!("../../data/pos_lexicon.tsv")),
    (SPELLING_FILE, include_str!("../../data/spelling_dictionary.txt")),
    (ABBREVIATIONS_FILE, include_str!("../../data/abbreviations.txt")),
];

static BUNDLED_SET: LazyLock<LexiconSet> = LazyLock::new(|| {
    let sources: Vec<(&str, String)> = BUNDLED
        .iter()
        .map(|(name, text)| (*name, (*text).to_string()))
        .collect();
    LexiconSet::parse(&sources).expect("bundled lexicons are well-formed")
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentEntry {
    pub polarity: f64,
    pub subjectivity: f64,
}

#[derive(Debug, Clone)]
pub struct LexiconSet {
    pub stop_words: HashSet<String>,
    /// Marker phrases as casefolded token sequences, longest first.
    pub discourse_markers: Vec<Vec<String>>,
    pub personal_pronouns: HashSet<String>,
    pub sentiment: HashMap<String, SentimentEntry>,
    pub negators: HashSet<String>,
    pub pos_lexicon: HashMap<String, PosTag>,
    pub spelling_dictionary: HashSet<String>,
    /// Casefolded abbreviations including their trailing period (`"dr."`).
    pub abbreviations: HashSet<String>,
    hashes: BTreeMap<String, String>,
}

impl LexiconSet {
    /// The lexicons compiled into the crate.
    pub fn bundled() -> &'static LexiconSet {
        &BUNDLED_SET
    }

    /// Load lexicons from `dir`; files missing from the directory fall back
    /// to the bundled copy.
    pub fn from_dir(dir: &Path) -> Result<LexiconSet> {
        let mut sources = Vec::with_capacity(BUNDLED.len());
        for (name, bundled) in BUNDLED {
            let path = dir.join(name);
            let text = if path.exists() {
                std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?
            } else {
                bundled.to_string()
            };
            sources.push((name, text));
        }
        LexiconSet::parse(&sources)
    }

    fn parse(sources: &[(&str, String)]) -> Result<LexiconSet> {
        let mut set = LexiconSet {
            stop_words: HashSet::new(),
            discourse_markers: Vec::new(),
            personal_pronouns: HashSet::new(),
            sentiment: HashMap::new(),
            negators: HashSet::new(),
            pos_lexicon: HashMap::new(),
            spelling_dictionary: HashSet::new(),
            abbreviations: HashSet::new(),
            hashes: BTreeMap::new(),
        };
        for (name, text) in sources {
            set.hashes
                .insert((*name).to_string(), hex::encode(Sha256::digest(text.as_bytes())));
            match *name {
                STOP_WORDS_FILE => set.stop_words = word_set(text),
                PERSONAL_PRONOUNS_FILE => set.personal_pronouns = word_set(text),
                NEGATORS_FILE => set.negators = word_set(text),
                SPELLING_FILE => set.spelling_dictionary = word_set(text),
                ABBREVIATIONS_FILE => set.abbreviations = word_set(text),
                DISCOURSE_MARKERS_FILE => {
                    let mut markers: Vec<Vec<String>> = entries(text)
                        .map(|(_, line)| {
                            tokenize_span(line, 0)
                                .into_iter()
                                .map(|t| t.lower)
                                .collect::<Vec<_>>()
                        })
                        .filter(|m| !m.is_empty())
                        .collect();
                    markers.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
                    markers.dedup();
                    set.discourse_markers = markers;
                }
                SENTIMENT_FILE => {
                    for (line_no, line) in entries(text) {
                        let cols: Vec<&str> = line.split('\t').collect();
                        let bad = |message: &str| Error::Record {
                            file: SENTIMENT_FILE.to_string(),
                            line: line_no,
                            field: "sentiment".to_string(),
                            message: message.to_string(),
                        };
                        if cols.len() != 3 {
                            return Err(bad("expected word<TAB>polarity<TAB>subjectivity"));
                        }
                        let polarity: f64 = cols[1].trim().parse().map_err(|_| bad("polarity"))?;
                        let subjectivity: f64 =
                            cols[2].trim().parse().map_err(|_| bad("subjectivity"))?;
                        if !(-1.0..=1.0).contains(&polarity) || !(0.0..=1.0).contains(&subjectivity)
                        {
                            return Err(bad("value out of range"));
                        }
                        set.sentiment.insert(
                            cols[0].trim().to_lowercase(),
                            SentimentEntry {
                                polarity,
                                subjectivity,
                            },
                        );
                    }
                }
                POS_LEXICON_FILE => {
                    for (line_no, line) in entries(text) {
                        let (word, tag) = line.split_once('\t').ok_or_else(|| Error::Record {
                            file: POS_LEXICON_FILE.to_string(),
                            line: line_no,
                            field: "tag".to_string(),
                            message: "expected word<TAB>tag".to_string(),
                        })?;
                        let tag: PosTag = tag.trim().parse().map_err(|_| Error::Record {
                            file: POS_LEXICON_FILE.to_string(),
                            line: line_no,
                            field: "tag".to_string(),
                            message: format!("unknown tag `{}`", tag.trim()),
                        })?;
                        set.pos_lexicon
                            .entry(word.trim().to_lowercase())
                            .or_insert(tag);
                    }
                }
                other => {
                    return Err(Error::InvalidArgument(format!("unknown lexicon file {other}")))
                }
            }
        }
        Ok(set)
    }

    /// SHA-256 of every lexicon file, keyed by file name.
    pub fn hashes(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }

    pub fn is_stop_word(&self, lower: &str) -> bool {
        self.stop_words.contains(lower)
    }
}

fn entries(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn word_set(text: &str) -> HashSet<String> {
    entries(text).map(|(_, l)| l.trim().to_lowercase()).collect()
}
