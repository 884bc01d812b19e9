//! N-gram language model and sentence perplexity.
//!
//! The built-in model is an order-1..3 word model over casefolded tokens
//! (punctuation included) with `<s>` padding and a `</s>` end symbol. Words
//! seen fewer than `unk_threshold` times map to `<unk>`. Smoothing is either
//! interpolated Kneser-Ney (raw counts at the top order, continuation counts
//! below, interpolated down to a uniform distribution) or add-k.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::StructuredText;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    InterpolatedKneserNey { discount: f64 },
    AddK { k: f64 },
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::InterpolatedKneserNey { discount: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub order: usize,
    pub smoothing: Smoothing,
    pub unk_threshold: usize,
    /// Minimum number of training tokens (end symbols excluded).
    pub min_tokens: usize,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 3,
            smoothing: Smoothing::default(),
            unk_threshold: 2,
            min_tokens: 1000,
        }
    }
}

/// Something that can turn a tokenized sentence into a perplexity.
pub trait SentenceScorer: Send + Sync {
    /// Identifier recorded in provenance.
    fn id(&self) -> String;

    fn perplexities(&self, sentences: &[Vec<String>]) -> Result<Vec<f64>>;
}

/// `exp(-(1/n) * sum(ln p))` over the per-token probabilities.
pub fn perplexity_from_probs(probs: impl IntoIterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut nll = 0.0;
    for p in probs {
        n += 1;
        nll -= p.ln();
    }
    if n == 0 {
        return 1.0;
    }
    (nll / n as f64).exp()
}

type Context = u64;

fn pack(ctx: &[u32]) -> Context {
    ctx.iter().fold(0u64, |acc, &id| (acc << 32) | u64::from(id))
}

#[derive(Debug, Clone, Default)]
struct Level {
    counts: HashMap<(Context, u32), f64>,
    /// context -> (sum of counts, number of distinct followers)
    contexts: HashMap<Context, (f64, f64)>,
}

impl Level {
    fn from_counts(counts: HashMap<(Context, u32), f64>) -> Level {
        let mut contexts: HashMap<Context, (f64, f64)> = HashMap::new();
        for (&(ctx, _), &c) in &counts {
            let e = contexts.entry(ctx).or_default();
            e.0 += c;
            e.1 += 1.0;
        }
        Level { counts, contexts }
    }
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    config: NGramConfig,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    bos: u32,
    unk: u32,
    /// `levels[k]` holds k-gram statistics (k = 1..=order); index 0 unused.
    levels: Vec<Level>,
    /// Raw top-order counts as trained, kept for serialization.
    raw: Vec<(Vec<u32>, u64)>,
}

#[derive(Serialize, Deserialize)]
struct SerializedModel {
    version: u32,
    config: NGramConfig,
    vocab: Vec<String>,
    ngrams: Vec<(Vec<u32>, u64)>,
}

/// Casefolded token lists, one per sentence.
pub fn sentence_tokens(doc: &StructuredText) -> Vec<Vec<String>> {
    doc.sentences()
        .map(|s| s.tokens.iter().map(|t| t.lower.clone()).collect())
        .collect()
}

pub fn train_ngram(sentences: &[Vec<String>], config: NGramConfig) -> Result<NGramModel> {
    if !(1..=3).contains(&config.order) {
        return Err(Error::LanguageModel(format!(
            "order must be 1, 2 or 3, got {}",
            config.order
        )));
    }
    match config.smoothing {
        Smoothing::InterpolatedKneserNey { discount } if !(discount > 0.0 && discount < 1.0) => {
            return Err(Error::LanguageModel(format!(
                "Kneser-Ney discount must lie in (0, 1), got {discount}"
            )))
        }
        Smoothing::AddK { k } if !(k > 0.0 && k.is_finite()) => {
            return Err(Error::LanguageModel(format!("add-k needs k > 0, got {k}")))
        }
        _ => {}
    }
    let n_tokens: usize = sentences.iter().map(Vec::len).sum();
    if n_tokens < config.min_tokens {
        return Err(Error::LanguageModel(format!(
            "reference corpus too small: {n_tokens} tokens < {}",
            config.min_tokens
        )));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in s {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<String> = freq
        .into_iter()
        .filter(|&(w, c)| c >= config.unk_threshold && w != BOS && w != EOS && w != UNK)
        .map(|(w, _)| w.to_string())
        .collect();
    vocab.extend([UNK.to_string(), EOS.to_string(), BOS.to_string()]);
    vocab.sort();
    let index: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();
    let mut raw_counts: HashMap<Vec<u32>, u64> = HashMap::new();
    let bos = index[BOS];
    let unk = index[UNK];
    let eos = index[EOS];
    for s in sentences {
        let mut ids = vec![bos; config.order - 1];
        ids.extend(s.iter().map(|t| index.get(t.as_str()).copied().unwrap_or(unk)));
        ids.push(eos);
        for gram in ids.windows(config.order) {
            *raw_counts.entry(gram.to_vec()).or_default() += 1;
        }
    }
    let mut raw: Vec<(Vec<u32>, u64)> = raw_counts.into_iter().collect();
    raw.sort();
    Ok(NGramModel::from_parts(config, vocab, raw))
}

impl NGramModel {
    fn from_parts(config: NGramConfig, vocab: Vec<String>, raw: Vec<(Vec<u32>, u64)>) -> Self {
        let index: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let n = config.order;
        let mut levels = vec![Level::default(); n + 1];
        let top: HashMap<(Context, u32), f64> = raw
            .iter()
            .map(|(g, c)| ((pack(&g[..n - 1]), g[n - 1]), *c as f64))
            .collect();
        if matches!(config.smoothing, Smoothing::InterpolatedKneserNey { .. }) {
            // continuation counts: number of distinct left extensions
            let mut types: Vec<Vec<u32>> = raw.iter().map(|(g, _)| g.clone()).collect();
            for k in (1..n).rev() {
                let mut cont: HashMap<(Context, u32), f64> = HashMap::new();
                let mut lower_types: Vec<Vec<u32>> = Vec::new();
                for g in &types {
                    let tail = &g[1..];
                    let e = cont.entry((pack(&tail[..k - 1]), tail[k - 1])).or_default();
                    if *e == 0.0 {
                        lower_types.push(tail.to_vec());
                    }
                    *e += 1.0;
                }
                levels[k] = Level::from_counts(cont);
                types = lower_types;
            }
        }
        levels[n] = Level::from_counts(top);
        NGramModel {
            bos: index[BOS],
            unk: index[UNK],
            config,
            vocab,
            index,
            levels,
            raw,
        }
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Size of the predicted vocabulary (every symbol except `<s>`).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    /// Predictable symbols, in id order.
    pub fn predicted_vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab
            .iter()
            .map(String::as_str)
            .filter(|w| *w != BOS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Raw count of an n-gram of the model's order (words mapped to `<unk>`).
    pub fn ngram_count(&self, gram: &[&str]) -> u64 {
        let ids: Vec<u32> = gram.iter().map(|w| self.id(w)).collect();
        self.raw
            .binary_search_by(|(g, _)| g.as_slice().cmp(&ids))
            .map(|i| self.raw[i].1)
            .unwrap_or(0)
    }

    /// Total number of counted n-gram occurrences.
    pub fn total_count(&self) -> u64 {
        self.raw.iter().map(|(_, c)| c).sum()
    }

    fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(self.unk)
    }

    fn prob_ids(&self, context: &[u32], w: u32) -> f64 {
        let v = self.vocab_size() as f64;
        match self.config.smoothing {
            Smoothing::AddK { k } => {
                let n = self.config.order;
                let level = &self.levels[n];
                let ctx = pack(context);
                let c = level.counts.get(&(ctx, w)).copied().unwrap_or(0.0);
                let total = level.contexts.get(&ctx).map_or(0.0, |s| s.0);
                (c + k) / (total + k * v)
            }
            Smoothing::InterpolatedKneserNey { discount } => {
                let mut p = 1.0 / v;
                for k in 1..=self.config.order {
                    let ctx_ids = &context[context.len() - (k - 1)..];
                    let level = &self.levels[k];
                    let ctx = pack(ctx_ids);
                    if let Some(&(total, types)) = level.contexts.get(&ctx) {
                        let c = level.counts.get(&(ctx, w)).copied().unwrap_or(0.0);
                        p = ((c - discount).max(0.0) + discount * types * p) / total;
                    }
                }
                p
            }
        }
    }

    /// `p(word | context)`; only the last `order - 1` context words matter.
    /// Unknown words are looked up as `<unk>`; `<s>` pads short contexts.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let ctx = self.context_ids(context);
        self.prob_ids(&ctx, self.id(word))
    }

    fn context_ids(&self, context: &[&str]) -> Vec<u32> {
        let need = self.config.order - 1;
        let mut ids = vec![self.bos; need.saturating_sub(context.len())];
        let start = context.len().saturating_sub(need);
        ids.extend(context[start..].iter().map(|w| self.id(w)));
        ids
    }

    /// Per-token probabilities of a sentence, including the end symbol.
    pub fn token_probs(&self, sentence: &[String]) -> Vec<f64> {
        let n = self.config.order;
        let mut ids = vec![self.bos; n - 1];
        ids.extend(sentence.iter().map(|t| self.id(t)));
        ids.push(self.id(EOS));
        ids.windows(n)
            .map(|g| self.prob_ids(&g[..n - 1], g[n - 1]))
            .collect()
    }

    pub fn sentence_perplexity(&self, sentence: &[String]) -> f64 {
        perplexity_from_probs(self.token_probs(sentence))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SerializedModel {
            version: MODEL_VERSION,
            config: self.config,
            vocab: self.vocab.clone(),
            ngrams: self.raw.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<NGramModel> {
        let m: SerializedModel = serde_json::from_str(text)?;
        if m.version != MODEL_VERSION {
            return Err(Error::LanguageModel(format!(
                "unsupported model version {}",
                m.version
            )));
        }
        Ok(NGramModel::from_parts(m.config, m.vocab, m.ngrams))
    }
}

impl SentenceScorer for NGramModel {
    fn id(&self) -> String {
        let smoothing = match self.config.smoothing {
            Smoothing::InterpolatedKneserNey { discount } => format!("kn{discount}"),
            Smoothing::AddK { k } => format!("addk{k}"),
        };
        format!(
            "ngram-o{}-{}-unk{}-v{}",
            self.config.order,
            smoothing,
            self.config.unk_threshold,
            self.vocab_size()
        )
    }

    fn perplexities(&self, sentences: &[Vec<String>]) -> Result<Vec<f64>> {
        Ok(sentences.iter().map(|s| self.sentence_perplexity(s)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerplexityFeatures {
    pub ppl_mean: f64,
    pub ppl_max: f64,
}

/// Mean and maximum of the per-sentence perplexities of `doc`.
pub fn perplexity_features(
    scorer: &dyn SentenceScorer,
    doc: &StructuredText,
) -> Result<PerplexityFeatures> {
    let sentences = sentence_tokens(doc);
    if sentences.is_empty() {
        return Err(Error::EmptyInput("document has no sentences"));
    }
    let ppls = scorer.perplexities(&sentences)?;
    if ppls.len() != sentences.len() {
        return Err(Error::provider(
            scorer.id(),
            format!(
                "returned {} perplexities for {} sentences",
                ppls.len(),
                sentences.len()
            ),
        ));
    }
    if let Some(i) = ppls.iter().position(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::provider(scorer.id(), "non-positive or non-finite perplexity")
            .with_context(format!("sentence {i}")));
    }
    Ok(summarize_perplexities(&ppls))
}

pub fn summarize_perplexities(ppls: &[f64]) -> PerplexityFeatures {
    let ppl_mean = ppls.iter().sum::<f64>() / ppls.len() as f64;
    let ppl_max = ppls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PerplexityFeatures { ppl_mean, ppl_max }
}

/// A family of models trained on disjoint-complement chunks of a reference
/// set, so that no reference document is ever scored by a model that saw it.
///
/// Reference documents are dealt round-robin into `k` chunks; model `i` is
/// trained on every chunk but `i`. A reference document is scored by the
/// model of its own chunk; any other document by model `slot % k`.
#[derive(Debug, Clone)]
pub struct CrossFitLm {
    models: Vec<NGramModel>,
    assignment: HashMap<String, usize>,
}

impl CrossFitLm {
    pub fn train(
        reference: &[(&str, Vec<Vec<String>>)],
        k: usize,
        config: NGramConfig,
    ) -> Result<CrossFitLm> {
        use rayon::prelude::*;
        if k < 2 || reference.len() < k {
            return Err(Error::LanguageModel(format!(
                "cross-fitting needs k >= 2 and at least k reference documents (k = {k}, docs = {})",
                reference.len()
            )));
        }
        let mut order: Vec<usize> = (0..reference.len()).collect();
        order.sort_by(|&a, &b| reference[a].0.cmp(reference[b].0));
        let mut assignment = HashMap::new();
        for (pos, &i) in order.iter().enumerate() {
            assignment.insert(reference[i].0.to_string(), pos % k);
        }
        let models = (0..k)
            .into_par_iter()
            .map(|chunk| {
                let sentences: Vec<Vec<String>> = reference
                    .iter()
                    .filter(|(id, _)| assignment[*id] != chunk)
                    .flat_map(|(_, s)| s.iter().cloned())
                    .collect();
                train_ngram(&sentences, config)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CrossFitLm { models, assignment })
    }

    pub fn models(&self) -> &[NGramModel] {
        &self.models
    }

    /// The model that scores `doc_id`; `slot` is a stable index used for
    /// documents outside the reference set.
    pub fn model_for(&self, doc_id: &str, slot: usize) -> &NGramModel {
        let i = self
            .assignment
            .get(doc_id)
            .copied()
            .unwrap_or(slot % self.models.len());
        &self.models[i]
    }
}
