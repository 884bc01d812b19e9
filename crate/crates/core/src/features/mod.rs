//! Feature schema, selections and per-document feature assembly.

pub mod grammar;
pub mod scalar;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TextSample;
use crate::error::{Error, Result};
use crate::lm::{perplexity_features, SentenceScorer};
use crate::textproc::{LexiconSet, StructuredText};
use crate::vectorize::{embed_sentences, SentenceEmbedder, TfidfModel};

pub use grammar::{GrammarChecker, GrammarMatch, GrammarRule, RuleGrammarChecker};
pub use scalar::{
    ai_feedback_feature, ai_feedback_prompt, classify_feedback, document_features,
    error_features, list_lookup_features, readability_features, semantic_features,
    FeedbackSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Perplexity,
    Semantic,
    ListLookup,
    Document,
    ErrorBased,
    Readability,
    AiFeedback,
    TextVector,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Perplexity,
        Category::Semantic,
        Category::ListLookup,
        Category::Document,
        Category::ErrorBased,
        Category::Readability,
        Category::AiFeedback,
        Category::TextVector,
    ];

    /// Name used in selection labels such as `ErrorBased_new`.
    pub fn label(self) -> &'static str {
        match self {
            Category::Perplexity => "Perplexity",
            Category::Semantic => "Semantic",
            Category::ListLookup => "ListLookup",
            Category::Document => "Document",
            Category::ErrorBased => "ErrorBased",
            Category::Readability => "Readability",
            Category::AiFeedback => "AIFeedback",
            Category::TextVector => "TextVector",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Traditional,
    New,
}

use Category as C;
use Tag::{New as N, Traditional as T};

/// Every scalar feature, in schema order.
pub const SCALAR_FEATURES: [(&str, Category, Tag); 34] = [
    ("PPL_mean", C::Perplexity, T),
    ("PPL_max", C::Perplexity, T),
    ("sentiment_polarity", C::Semantic, T),
    ("sentiment_subjectivity", C::Semantic, N),
    ("stopWord_count", C::ListLookup, T),
    ("specialChar_count", C::ListLookup, T),
    ("discourseMarker_count", C::ListLookup, N),
    ("titleRepetition_count", C::ListLookup, N),
    ("titleRepetition_relative", C::ListLookup, N),
    ("wordsPerParagraph_mean", C::Document, T),
    ("wordsPerParagraph_stdev", C::Document, T),
    ("sentencesPerParagraph_mean", C::Document, T),
    ("sentencesPerParagraph_stdev", C::Document, T),
    ("wordsPerSentence_mean", C::Document, T),
    ("wordsPerSentence_stdev", C::Document, T),
    ("uniqWordsPerSentence_mean", C::Document, T),
    ("uniqWordsPerSentence_stdev", C::Document, N),
    ("words_count", C::Document, T),
    ("uniqWords_count", C::Document, T),
    ("uniqWords_relative", C::Document, T),
    ("paragraph_count", C::Document, T),
    ("sentence_count", C::Document, T),
    ("punctuation_count", C::Document, T),
    ("quotation_count", C::Document, N),
    ("character_count", C::Document, T),
    ("uppercaseWords_relative", C::Document, T),
    ("personalPronoun_count", C::Document, T),
    ("personalPronoun_relative", C::Document, T),
    ("POSPerSentence_mean", C::Document, T),
    ("grammarError_count", C::ErrorBased, N),
    ("multiBlank_count", C::ErrorBased, N),
    ("fleschReadingEase", C::Readability, T),
    ("fleschKincaidGradeLevel", C::Readability, T),
    ("AIFeedback", C::AiFeedback, N),
];

pub const TFIDF_NAME: &str = "TF-IDF";
pub const EMBEDDING_NAME: &str = "Sentence-BERT";
pub const DISTANCE_NAME: &str = "Sentence-BERT-dist";

/// The 14 selections evaluated in the ablation matrix.
pub const SELECTION_PRESETS: [&str; 14] = [
    "Perplexity_traditional",
    "Semantic_traditional",
    "Semantic_traditional+new",
    "ListLookup_traditional",
    "ListLookup_traditional+new",
    "Document_traditional",
    "Document_traditional+new",
    "ErrorBased_new",
    "Readability_traditional",
    "AIFeedback_new",
    "TextVector_traditional",
    "TextVector_traditional+new",
    "All_traditional",
    "All_traditional+new",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub category: Category,
    pub tag: Tag,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn new(tfidf_dim: usize, embedding_dim: usize) -> FeatureSchema {
        let mut features: Vec<FeatureDescriptor> = SCALAR_FEATURES
            .iter()
            .map(|&(name, category, tag)| FeatureDescriptor {
                name: name.to_string(),
                category,
                tag,
                arity: 1,
            })
            .collect();
        for (name, tag, arity) in [
            (TFIDF_NAME, T, tfidf_dim),
            (EMBEDDING_NAME, T, embedding_dim),
            (DISTANCE_NAME, N, 1),
        ] {
            features.push(FeatureDescriptor {
                name: name.to_string(),
                category: C::TextVector,
                tag,
                arity,
            });
        }
        FeatureSchema { features }
    }

    /// Total number of dense columns.
    pub fn width(&self) -> usize {
        self.features.iter().map(|f| f.arity).sum()
    }

    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Column names; blocks expand to `NAME_i`.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for f in &self.features {
            if f.arity == 1 && f.category != C::TextVector || f.name == DISTANCE_NAME {
                out.push(f.name.clone());
            } else {
                out.extend((0..f.arity).map(|i| format!("{}_{i}", f.name)));
            }
        }
        out
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.features
            .iter()
            .map(|f| {
                let o = acc;
                acc += f.arity;
                o
            })
            .collect()
    }

    pub fn selected(&self, selection: &Selection) -> impl Iterator<Item = &FeatureDescriptor> {
        let selection = selection.clone();
        self.features.iter().filter(move |f| selection.includes(f))
    }

    /// Dense column indices of the selected features, in schema order.
    pub fn columns_for(&self, selection: &Selection) -> Vec<usize> {
        let offsets = self.offsets();
        let mut out = Vec::new();
        for (f, o) in self.features.iter().zip(offsets) {
            if selection.includes(f) {
                out.extend(o..o + f.arity);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A set of categories crossed with a set of tags, e.g. `Document_traditional+new`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub name: String,
    pub categories: BTreeSet<Category>,
    pub tags: BTreeSet<Tag>,
}

impl Selection {
    pub fn includes(&self, f: &FeatureDescriptor) -> bool {
        self.categories.contains(&f.category) && self.tags.contains(&f.tag)
    }

    pub fn presets() -> Vec<Selection> {
        SELECTION_PRESETS
            .iter()
            .map(|s| s.parse().expect("preset parses"))
            .collect()
    }

    pub fn all() -> Selection {
        "All_traditional+new".parse().expect("preset parses")
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownSelection(s.to_string());
        let (cat, tags) = s.split_once('_').ok_or_else(unknown)?;
        let categories: BTreeSet<Category> = if cat == "All" {
            Category::ALL.into_iter().collect()
        } else {
            let c = Category::ALL
                .into_iter()
                .find(|c| c.label() == cat)
                .ok_or_else(unknown)?;
            [c].into_iter().collect()
        };
        let tags: BTreeSet<Tag> = match tags {
            "traditional" => [T].into(),
            "new" => [N].into(),
            "traditional+new" => [T, N].into(),
            _ => return Err(unknown()),
        };
        let sel = Selection {
            name: s.to_string(),
            categories,
            tags,
        };
        if !SCALAR_FEATURES
            .iter()
            .map(|&(_, c, t)| (c, t))
            .chain([(C::TextVector, T), (C::TextVector, N)])
            .any(|(c, t)| sel.categories.contains(&c) && sel.tags.contains(&t))
        {
            return Err(unknown());
        }
        Ok(sel)
    }
}

/// Dense values for one document under one selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub selection: String,
    pub values: Vec<f64>,
    /// feature block → provider id
    pub provenance: BTreeMap<String, String>,
}

fn check_range(name: &str, v: f64) -> std::result::Result<(), String> {
    if !v.is_finite() {
        return Err(format!("{name} is not finite ({v})"));
    }
    let bad = if name == "sentiment_polarity" {
        !(-1.0..=1.0).contains(&v)
    } else if name == "sentiment_subjectivity" || name.ends_with("_relative") {
        !(0.0..=1.0).contains(&v)
    } else if name == "AIFeedback" {
        ![0.0, 1.0, 2.0].contains(&v)
    } else if name.ends_with("_count") {
        v < 0.0 || v.fract() != 0.0
    } else if name.starts_with("PPL_") {
        v <= 0.0
    } else if name == DISTANCE_NAME || name.ends_with("_stdev") || name.ends_with("_mean") {
        v < 0.0
    } else {
        false
    };
    if bad {
        Err(format!("{name} out of range ({v})"))
    } else {
        Ok(())
    }
}

impl FeatureVector {
    /// Length, finiteness and per-feature range checks.
    pub fn validate(&self, schema: &FeatureSchema, selection: &Selection) -> Result<()> {
        let expected: usize = schema.selected(selection).map(|f| f.arity).sum();
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.values.len(),
            });
        }
        let mut i = 0;
        for f in schema.selected(selection) {
            for &v in &self.values[i..i + f.arity] {
                check_range(&f.name, v).map_err(Error::InvalidArgument)?;
            }
            i += f.arity;
        }
        Ok(())
    }

    /// Project a full (`All_traditional+new`) vector onto `selection`.
    pub fn project(&self, schema: &FeatureSchema, selection: &Selection) -> FeatureVector {
        FeatureVector {
            schema_id: self.schema_id.clone(),
            selection: selection.name.clone(),
            values: schema
                .columns_for(selection)
                .into_iter()
                .map(|c| self.values[c])
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Providers and fitted models needed to compute features.
pub struct Providers<'a> {
    pub lexicons: &'a LexiconSet,
    pub scorer: Option<&'a dyn SentenceScorer>,
    pub grammar: &'a dyn GrammarChecker,
    pub feedback: Option<&'a dyn FeedbackSource>,
    pub impute_ai_feedback: bool,
    pub tfidf: Option<&'a TfidfModel>,
    pub embedder: &'a dyn SentenceEmbedder,
}

fn missing(what: &str) -> Error {
    Error::InvalidArgument(format!("selection needs {what}, which is not configured"))
}

/// Compute the selected features of one document, in schema order.
pub fn assemble(
    sample: &TextSample,
    doc: &StructuredText,
    providers: &Providers<'_>,
    schema: &FeatureSchema,
    selection: &Selection,
) -> Result<FeatureVector> {
    let needed: BTreeSet<Category> = schema.selected(selection).map(|f| f.category).collect();
    let mut values: HashMap<String, Vec<f64>> = HashMap::new();
    let mut provenance = BTreeMap::new();
    let lex = providers.lexicons;
    let ctx = |e: Error| e.with_context(format!("document {}", sample.id));
    for cat in needed {
        match cat {
            C::Perplexity => {
                let scorer = providers.scorer.ok_or_else(|| missing("a perplexity scorer"))?;
                let p = perplexity_features(scorer, doc).map_err(ctx)?;
                values.insert("PPL_mean".into(), vec![p.ppl_mean]);
                values.insert("PPL_max".into(), vec![p.ppl_max]);
                provenance.insert("perplexity".into(), scorer.id());
            }
            C::Semantic => {
                let (p, s) = semantic_features(doc, lex);
                values.insert("sentiment_polarity".into(), vec![p]);
                values.insert("sentiment_subjectivity".into(), vec![s]);
            }
            C::ListLookup => {
                for (k, v) in list_lookup_features(doc, &sample.topic_title, lex).map_err(ctx)? {
                    values.insert(k.into(), vec![v]);
                }
            }
            C::Document => {
                for (k, v) in document_features(doc, lex) {
                    values.insert(k.into(), vec![v]);
                }
            }
            C::ErrorBased => {
                let (g, m) = error_features(&sample.id, &doc.text, providers.grammar)?;
                values.insert("grammarError_count".into(), vec![g]);
                values.insert("multiBlank_count".into(), vec![m]);
                provenance.insert("grammar".into(), providers.grammar.id());
            }
            C::Readability => {
                let (fre, fkgl) = readability_features(doc).map_err(ctx)?;
                values.insert("fleschReadingEase".into(), vec![fre]);
                values.insert("fleschKincaidGradeLevel".into(), vec![fkgl]);
            }
            C::AiFeedback => {
                let v = ai_feedback_feature(
                    providers.feedback,
                    &sample.id,
                    &sample.body,
                    providers.impute_ai_feedback,
                )?;
                values.insert("AIFeedback".into(), vec![f64::from(v)]);
                provenance.insert(
                    "ai_feedback".into(),
                    providers
                        .feedback
                        .map_or_else(|| "imputed".to_string(), |f| f.id()),
                );
            }
            C::TextVector => {
                let tfidf_needed = schema
                    .selected(selection)
                    .any(|f| f.name == TFIDF_NAME && f.arity > 0);
                if tfidf_needed {
                    let model = providers.tfidf.ok_or_else(|| missing("a fitted TF-IDF model"))?;
                    values.insert(TFIDF_NAME.into(), model.transform(doc));
                    provenance.insert("tfidf".into(), model.fitted_on.clone());
                }
                let block = embed_sentences(providers.embedder, doc).map_err(ctx)?;
                values.insert(EMBEDDING_NAME.into(), block.doc_mean);
                values.insert(DISTANCE_NAME.into(), vec![block.mean_distance]);
                provenance.insert("embedding".into(), providers.embedder.id());
            }
        }
    }
    let mut out = Vec::with_capacity(schema.width());
    for f in schema.selected(selection) {
        let v = values.remove(&f.name).unwrap_or_default();
        if v.len() != f.arity {
            return Err(ctx(Error::DimensionMismatch {
                expected: f.arity,
                actual: v.len(),
            }));
        }
        out.extend(v);
    }
    let fv = FeatureVector {
        schema_id: schema.id(),
        selection: selection.name.clone(),
        values: out,
        provenance,
    };
    fv.validate(schema, selection).map_err(ctx)?;
    Ok(fv)
}

/// One row of an exported feature matrix.
pub struct FeatureRow<'a> {
    pub id: &'a str,
    pub label: u8,
    pub values: &'a [f64],
}

/// CSV with `id,label` followed by the selected column names.
pub fn write_feature_csv(
    path: &Path,
    schema: &FeatureSchema,
    selection: &Selection,
    rows: &[FeatureRow<'_>],
) -> Result<()> {
    let names = schema.column_names();
    let cols = schema.columns_for(selection);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(cols.iter().map(|&c| names[c].clone()));
    w.write_record(&header)?;
    for row in rows {
        if row.values.len() != cols.len() {
            return Err(Error::DimensionMismatch {
                expected: cols.len(),
                actual: row.values.len(),
            });
        }
        let mut rec = vec![row.id.to_string(), row.label.to_string()];
        rec.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a matrix written by [`write_feature_csv`]: `(ids, labels, header, rows)`.
pub fn read_feature_csv(path: &Path) -> Result<(Vec<String>, Vec<u8>, Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let header: Vec<String> = r.headers()?.iter().skip(2).map(str::to_string).collect();
    let (mut ids, mut labels, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |field: &str, message: String| Error::Record {
            file: path.display().to_string(),
            line: line + 2,
            field: field.to_string(),
            message,
        };
        ids.push(rec.get(0).unwrap_or_default().to_string());
        labels.push(
            rec.get(1)
                .unwrap_or_default()
                .parse()
                .map_err(|e| bad("label", format!("{e}")))?,
        );
        let vals = rec
            .iter()
            .skip(2)
            .zip(&header)
            .map(|(v, h)| v.parse::<f64>().map_err(|e| bad(h, format!("{e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    Ok((ids, labels, header, rows))
}
