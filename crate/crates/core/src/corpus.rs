//! Corpus ingestion, validation, statistics and detection-task assembly.
//!
//! Canonical form is JSONL with one object per line and the fields
//! `id, category, topic_title, class, variant, body`. A directory laid out
//! as `<class>/<variant>/<category>/<topic>.txt` is accepted as well, and any
//! `*.jsonl` file directly inside the directory is read too.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::textproc::structure;

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "`{}` is not one of {}",
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

string_enum!(Category {
    Biology => "biology",
    Chemistry => "chemistry",
    Geography => "geography",
    History => "history",
    It => "it",
    Music => "music",
    Politics => "politics",
    Religion => "religion",
    Sports => "sports",
    VisualArts => "visual_arts",
});

string_enum!(Klass {
    Human => "human",
    AiGenerated => "ai_generated",
    AiRephrased => "ai_rephrased",
});

string_enum!(Variant {
    Basic => "basic",
    Advanced => "advanced",
    None => "none",
});

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub category: Category,
    pub topic_title: String,
    #[serde(rename = "class")]
    pub klass: Klass,
    pub variant: Variant,
    pub body: String,
}

impl TextSample {
    pub fn key(&self) -> (Category, &str, Klass, Variant) {
        (self.category, &self.topic_title, self.klass, self.variant)
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.id.trim().is_empty() {
            return Err(("id", "must not be empty".into()));
        }
        if self.topic_title.trim().is_empty() {
            return Err(("topic_title", "must not be empty".into()));
        }
        if self.body.trim().is_empty() {
            return Err(("body", "must not be empty after trimming".into()));
        }
        if (self.klass == Klass::Human) != (self.variant == Variant::None) {
            return Err((
                "variant",
                format!(
                    "class `{}` cannot have variant `{}`",
                    self.klass, self.variant
                ),
            ));
        }
        Ok(())
    }
}

/// NFC, CRLF to LF, trailing whitespace stripped from every line.
pub fn normalize_text(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let unix = nfc.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = String::with_capacity(unix.len());
    for (i, line) in unix.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(line.trim_end());
    }
    out
}

fn record_error(file: &Path, line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Record {
        file: file.display().to_string(),
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_record(file: &Path, line_no: usize, line: &str) -> Result<TextSample> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| record_error(file, line_no, "<record>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| record_error(file, line_no, "<record>", "expected a JSON object"))?;
    let field = |name: &str| -> Result<&str> {
        obj.get(name)
            .ok_or_else(|| record_error(file, line_no, name, "missing"))?
            .as_str()
            .ok_or_else(|| record_error(file, line_no, name, "expected a string"))
    };
    let parse_enum = |name: &str| -> Result<String> { Ok(field(name)?.to_string()) };
    let category = parse_enum("category")?
        .parse::<Category>()
        .map_err(|m| record_error(file, line_no, "category", m))?;
    let klass = parse_enum("class")?
        .parse::<Klass>()
        .map_err(|m| record_error(file, line_no, "class", m))?;
    let variant = parse_enum("variant")?
        .parse::<Variant>()
        .map_err(|m| record_error(file, line_no, "variant", m))?;
    let sample = TextSample {
        id: field("id")?.to_string(),
        category,
        topic_title: normalize_text(field("topic_title")?).trim().to_string(),
        klass,
        variant,
        body: normalize_text(field("body")?),
    };
    sample
        .validate()
        .map_err(|(f, m)| record_error(file, line_no, f, m))?;
    Ok(sample)
}

fn read_jsonl(path: &Path) -> Result<Vec<TextSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(path, i + 1, l))
        .collect()
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    Ok(entries)
}

fn read_layout_file(root: &Path, path: &Path) -> Result<TextSample> {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<String> = rel
        .iter()
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    let bad = |field: &str, msg: String| record_error(path, 0, field, msg);
    if parts.len() != 4 {
        return Err(bad(
            "<path>",
            "expected <class>/<variant>/<category>/<topic>.txt".into(),
        ));
    }
    let klass = parts[0].parse::<Klass>().map_err(|m| bad("class", m))?;
    let variant = parts[1].parse::<Variant>().map_err(|m| bad("variant", m))?;
    let category = parts[2].parse::<Category>().map_err(|m| bad("category", m))?;
    let topic = Path::new(&parts[3])
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sample = TextSample {
        id: format!("{klass}/{variant}/{category}/{topic}"),
        category,
        topic_title: normalize_text(&topic).trim().to_string(),
        klass,
        variant,
        body: normalize_text(&raw),
    };
    sample.validate().map_err(|(f, m)| bad(f, m))?;
    Ok(sample)
}

fn read_directory(root: &Path) -> Result<Vec<TextSample>> {
    let mut samples = Vec::new();
    let mut text_files = Vec::new();
    for entry in sorted_entries(root)? {
        if entry.is_file() && entry.extension().is_some_and(|e| e == "jsonl") {
            samples.extend(read_jsonl(&entry)?);
        } else if entry.is_dir() {
            collect_txt(&entry, &mut text_files)?;
        }
    }
    let from_files: Vec<TextSample> = text_files
        .par_iter()
        .map(|p| read_layout_file(root, p))
        .collect::<Result<_>>()?;
    samples.extend(from_files);
    Ok(samples)
}

fn collect_txt(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in sorted_entries(dir)? {
        if entry.is_dir() {
            collect_txt(&entry, out)?;
        } else if entry.extension().is_some_and(|e| e == "txt") {
            out.push(entry);
        }
    }
    Ok(())
}

fn check_unique(samples: &[TextSample]) -> Result<()> {
    let mut ids = HashSet::new();
    let mut keys = HashSet::new();
    for s in samples {
        if !ids.insert(s.id.as_str()) {
            return Err(Error::DuplicateKey(format!("id `{}`", s.id)));
        }
        if !keys.insert(s.key()) {
            return Err(Error::DuplicateKey(format!(
                "({}, {}, {}, {})",
                s.category, s.topic_title, s.klass, s.variant
            )));
        }
    }
    Ok(())
}

/// Load every sample from a JSONL file or a corpus directory.
pub fn load_corpus(path: &Path) -> Result<Vec<TextSample>> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus path does not exist"),
        ));
    }
    let samples = if path.is_dir() {
        read_directory(path)?
    } else {
        read_jsonl(path)?
    };
    check_unique(&samples)?;
    Ok(samples)
}

/// Write samples as canonical JSONL.
pub fn save_corpus(samples: &[TextSample], path: &Path) -> Result<()> {
    let mut file =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for s in samples {
        serde_json::to_writer(&mut file, s)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    file.flush().map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 over the canonical JSONL of `samples` sorted by id.
pub fn corpus_hash(samples: &[TextSample]) -> String {
    use sha2::{Digest, Sha256};
    let mut sorted: Vec<&TextSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut hasher = Sha256::new();
    for s in sorted {
        hasher.update(serde_json::to_vec(s).expect("sample serializes"));
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatCounts {
    pub paragraphs: usize,
    pub sentences: usize,
    pub words: usize,
}

/// Paragraph/sentence/word totals per (category, class, variant).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub cells: BTreeMap<(Category, Klass, Variant), StatCounts>,
}

impl CorpusStats {
    pub fn get(&self, category: Category, klass: Klass, variant: Variant) -> Option<StatCounts> {
        self.cells.get(&(category, klass, variant)).copied()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "class", "variant", "paragraphs", "sentences", "words"])?;
        for ((c, k, v), n) in &self.cells {
            w.write_record([
                c.as_str(),
                k.as_str(),
                v.as_str(),
                &n.paragraphs.to_string(),
                &n.sentences.to_string(),
                &n.words.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

pub fn corpus_stats(samples: &[TextSample]) -> Result<CorpusStats> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let per_sample: Vec<((Category, Klass, Variant), StatCounts)> = samples
        .par_iter()
        .map(|s| {
            let doc = structure(&s.body)?;
            Ok((
                (s.category, s.klass, s.variant),
                StatCounts {
                    paragraphs: doc.paragraph_count(),
                    sentences: doc.sentence_count(),
                    words: doc.word_count(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut stats = CorpusStats::default();
    for (key, n) in per_sample {
        let cell = stats.cells.entry(key).or_default();
        cell.paragraphs += n.paragraphs;
        cell.sentences += n.sentences;
        cell.words += n.words;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    BasicGeneration,
    BasicRephrase,
    AdvancedGeneration,
    AdvancedRephrase,
}

impl TaskName {
    pub const ALL: [TaskName; 4] = [
        TaskName::BasicGeneration,
        TaskName::BasicRephrase,
        TaskName::AdvancedGeneration,
        TaskName::AdvancedRephrase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::BasicGeneration => "basic_generation",
            TaskName::BasicRephrase => "basic_rephrase",
            TaskName::AdvancedGeneration => "advanced_generation",
            TaskName::AdvancedRephrase => "advanced_rephrase",
        }
    }

    /// The (class, variant) of the positive (AI) side.
    pub fn positive_class(self) -> (Klass, Variant) {
        match self {
            TaskName::BasicGeneration => (Klass::AiGenerated, Variant::Basic),
            TaskName::BasicRephrase => (Klass::AiRephrased, Variant::Basic),
            TaskName::AdvancedGeneration => (Klass::AiGenerated, Variant::Advanced),
            TaskName::AdvancedRephrase => (Klass::AiRephrased, Variant::Advanced),
        }
    }

    pub fn is_rephrase(self) -> bool {
        self.positive_class().0 == Klass::AiRephrased
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        TaskName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

/// One binary detection problem: AI (label 1) against human (label 0).
#[derive(Debug, Clone)]
pub struct DetectionTask {
    pub name: TaskName,
    pub positives: Vec<TextSample>,
    pub negatives: Vec<TextSample>,
}

impl DetectionTask {
    /// All samples with labels, sorted by id.
    pub fn labeled(&self) -> Vec<(&TextSample, u8)> {
        let mut all: Vec<(&TextSample, u8)> = self
            .positives
            .iter()
            .map(|s| (s, 1))
            .chain(self.negatives.iter().map(|s| (s, 0)))
            .collect();
        all.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        all
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_task(samples: &[TextSample], name: TaskName) -> Result<DetectionTask> {
    let (klass, variant) = name.positive_class();
    let mut positives: Vec<TextSample> = samples
        .iter()
        .filter(|s| s.klass == klass && s.variant == variant)
        .cloned()
        .collect();
    let mut negatives: Vec<TextSample> = samples
        .iter()
        .filter(|s| s.klass == Klass::Human)
        .cloned()
        .collect();
    if positives.is_empty() {
        return Err(Error::MissingClass {
            task: name.to_string(),
            klass: klass.to_string(),
            variant: variant.to_string(),
        });
    }
    if negatives.is_empty() {
        return Err(Error::MissingClass {
            task: name.to_string(),
            klass: Klass::Human.to_string(),
            variant: Variant::None.to_string(),
        });
    }
    positives.sort_by(|a, b| a.id.cmp(&b.id));
    negatives.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(DetectionTask {
        name,
        positives,
        negatives,
    })
}
