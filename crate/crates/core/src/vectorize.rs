//! Text vectors: TF-IDF over word 1-/2-grams and sentence embeddings with
//! a document mean and mean cosine distance.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textproc::{segment::tokenize_span, StructuredText};

pub const TFIDF_DIM: usize = 500;
pub const HASH_EMBED_DIM: usize = 256;

/// Casefolded word 1- and 2-grams of a document, per sentence.
pub fn document_ngrams(doc: &StructuredText) -> Vec<String> {
    let mut out = Vec::new();
    for s in doc.sentences() {
        let words: Vec<&str> = s.words().map(|t| t.lower.as_str()).collect();
        out.extend(words.iter().map(|w| w.to_string()));
        out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub fitted_on: String,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

pub fn fit_tfidf(train_docs: &[&StructuredText]) -> Result<TfidfModel> {
    fit_tfidf_dim(train_docs, TFIDF_DIM)
}

pub fn fit_tfidf_dim(train_docs: &[&StructuredText], max_terms: usize) -> Result<TfidfModel> {
    if train_docs.is_empty() {
        return Err(Error::EmptyInput("TF-IDF training set"));
    }
    if train_docs.len() < 2 {
        return Err(Error::InvalidArgument(
            "TF-IDF needs at least 2 training documents".into(),
        ));
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    let mut hasher = Sha256::new();
    for doc in train_docs {
        hasher.update(doc.text.as_bytes());
        hasher.update([0u8]);
        let unique: HashSet<String> = document_ngrams(doc).into_iter().collect();
        for g in unique {
            *df.entry(g).or_default() += 1;
        }
    }
    let mut terms: Vec<(String, usize)> = df.into_iter().collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.truncate(max_terms);
    let n = train_docs.len() as f64;
    let (vocabulary, idf) = terms
        .into_iter()
        .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
        .unzip();
    let mut model = TfidfModel {
        vocabulary,
        idf,
        fitted_on: hex::encode(hasher.finalize()),
        index: HashMap::new(),
    };
    model.reindex();
    Ok(model)
}

impl TfidfModel {
    fn reindex(&mut self) {
        self.index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    /// L2-normalized tf·idf vector; zero when no term is in the vocabulary.
    pub fn transform(&self, doc: &StructuredText) -> Vec<f64> {
        let mut v = vec![0.0; self.vocabulary.len()];
        for g in document_ngrams(doc) {
            if let Some(&i) = self.index.get(&g) {
                v[i] += 1.0;
            }
        }
        for (x, idf) in v.iter_mut().zip(&self.idf) {
            *x *= idf;
        }
        normalize(&mut v);
        v
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<TfidfModel> {
        let mut m: TfidfModel = serde_json::from_str(text)?;
        if m.vocabulary.len() != m.idf.len() {
            return Err(Error::DimensionMismatch {
                expected: m.vocabulary.len(),
                actual: m.idf.len(),
            });
        }
        m.reindex();
        Ok(m)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale to unit length in place; the zero vector is left alone.
pub fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// `1 - cos(a, b)`. Two zero vectors are at distance 0, a zero and a
/// non-zero vector at distance 1.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    match (na > 0.0, nb > 0.0) {
        (false, false) => 0.0,
        (true, true) => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (1.0 - dot / (na * nb)).max(0.0)
        }
        _ => 1.0,
    }
}

/// Produces one vector per sentence.
pub trait SentenceEmbedder: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Signed feature hashing of casefolded word 1-/2-grams.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder {
            dim: HASH_EMBED_DIM,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl HashingEmbedder {
    pub fn embed_one(&self, sentence: &str) -> Vec<f64> {
        let words: Vec<String> = tokenize_span(sentence, 0)
            .into_iter()
            .filter(|t| t.is_word)
            .map(|t| t.lower)
            .collect();
        let mut v = vec![0.0; self.dim];
        let bigrams = words.windows(2).map(|w| format!("{} {}", w[0], w[1]));
        for g in words.iter().cloned().chain(bigrams) {
            let h = fnv1a(g.as_bytes());
            let slot = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[slot] += sign;
        }
        normalize(&mut v);
        v
    }
}

impl SentenceEmbedder for HashingEmbedder {
    fn id(&self) -> String {
        format!("hashing-fnv1a-signed-d{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(sentences.iter().map(|s| self.embed_one(s)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBlock {
    pub sentences: Vec<Vec<f64>>,
    pub doc_mean: Vec<f64>,
    pub mean_distance: f64,
}

/// Build the block from per-sentence vectors (re-normalized here).
pub fn embedding_block(mut vectors: Vec<Vec<f64>>) -> Result<EmbeddingBlock> {
    let Some(first) = vectors.first() else {
        return Err(Error::EmptyInput("no sentence vectors"));
    };
    let d = first.len();
    for (i, v) in vectors.iter_mut().enumerate() {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite embedding for sentence {i}"
            )));
        }
        normalize(v);
    }
    let s = vectors.len() as f64;
    let mut doc_mean = vec![0.0; d];
    for v in &vectors {
        for (m, x) in doc_mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    doc_mean.iter_mut().for_each(|m| *m /= s);
    let mean_distance = if vectors.len() == 1 {
        0.0
    } else {
        vectors
            .iter()
            .map(|v| cosine_distance(v, &doc_mean))
            .sum::<f64>()
            / s
    };
    Ok(EmbeddingBlock {
        sentences: vectors,
        doc_mean,
        mean_distance,
    })
}

pub fn embed_sentences(provider: &dyn SentenceEmbedder, doc: &StructuredText) -> Result<EmbeddingBlock> {
    let texts: Vec<String> = doc
        .sentences()
        .map(|s| doc.sentence_text(s).to_string())
        .collect();
    if texts.is_empty() {
        return Err(Error::EmptyInput("document has no sentences"));
    }
    let vectors = provider.embed(&texts)?;
    if vectors.len() != texts.len() {
        return Err(Error::provider(
            provider.id(),
            format!("returned {} vectors for {} sentences", vectors.len(), texts.len()),
        ));
    }
    if let Some(i) = vectors.iter().position(|v| v.len() != provider.dim()) {
        return Err(Error::provider(provider.id(), "wrong embedding dimension")
            .with_context(format!("sentence {i}")));
    }
    embedding_block(vectors)
}

/// Document-frequency table, exposed for inspection.
pub fn document_frequencies(docs: &[&StructuredText]) -> BTreeMap<String, usize> {
    let mut df = BTreeMap::new();
    for doc in docs {
        let unique: HashSet<String> = document_ngrams(doc).into_iter().collect();
        for g in unique {
            *df.entry(g).or_default() += 1;
        }
    }
    df
}
