//! Fold-local featurization of text tasks.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use super::split::Fold;
use super::{Featurizer, FoldTable};
use crate::corpus::{DetectionTask, Klass, TextSample};
use crate::error::{Error, Result};
use crate::features::{
    assemble, Category, FeatureSchema, FeatureVector, FeedbackSource, GrammarChecker, Providers,
    Selection, Tag, TFIDF_NAME,
};
use crate::lm::{sentence_tokens, CrossFitLm, NGramConfig, NGramModel, SentenceScorer};
use crate::ml::Matrix;
use crate::textproc::{structure_with, LexiconSet, StructuredText};
use crate::vectorize::{fit_tfidf_dim, SentenceEmbedder, TfidfModel, TFIDF_DIM};

/// Default number of cross-fitting chunks for the built-in language model.
pub const LM_FOLDS: usize = 5;

/// Providers and settings shared by every fold.
#[derive(Clone, Copy)]
pub struct TextProviders<'a> {
    pub lexicons: &'a LexiconSet,
    pub grammar: &'a dyn GrammarChecker,
    pub feedback: Option<&'a dyn FeedbackSource>,
    pub impute_ai_feedback: bool,
    pub embedder: &'a dyn SentenceEmbedder,
    /// External perplexity scorer; without one a fold-local n-gram model
    /// is trained on the human training documents.
    pub scorer: Option<&'a dyn SentenceScorer>,
    pub lm_config: NGramConfig,
    pub lm_folds: usize,
    pub tfidf_dim: usize,
}

impl<'a> TextProviders<'a> {
    pub fn new(
        lexicons: &'a LexiconSet,
        grammar: &'a dyn GrammarChecker,
        embedder: &'a dyn SentenceEmbedder,
    ) -> TextProviders<'a> {
        TextProviders {
            lexicons,
            grammar,
            feedback: None,
            impute_ai_feedback: false,
            embedder,
            scorer: None,
            lm_config: NGramConfig::default(),
            lm_folds: LM_FOLDS,
            tfidf_dim: TFIDF_DIM,
        }
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::new(self.tfidf_dim, self.embedder.dim())
    }
}

/// Smallest selection covering every selection in `sels`.
pub fn union_selection(sels: &[Selection]) -> Selection {
    let mut out = Selection {
        name: "union".into(),
        categories: Default::default(),
        tags: Default::default(),
    };
    for s in sels {
        out.categories.extend(s.categories.iter().copied());
        out.tags.extend(s.tags.iter().copied());
    }
    if sels.len() == 1 {
        out.name = sels[0].name.clone();
    }
    out
}

/// The text fitted models that a fold (or a trained pipeline) carries.
#[derive(Debug, Clone, Default)]
pub struct FittedText {
    pub tfidf: Option<TfidfModel>,
    pub lm: Option<CrossFitLm>,
}

pub struct TextTask<'a> {
    name: String,
    samples: Vec<TextSample>,
    ids: Vec<String>,
    labels: Vec<u8>,
    docs: Vec<StructuredText>,
    providers: TextProviders<'a>,
    schema: FeatureSchema,
    needed: Selection,
    needed_cols: Vec<usize>,
}

impl<'a> TextTask<'a> {
    /// Samples with labels (1 = AI); `needed` limits what gets computed.
    pub fn new(
        name: &str,
        labeled: Vec<(TextSample, u8)>,
        providers: TextProviders<'a>,
        needed: Selection,
    ) -> Result<TextTask<'a>> {
        let mut labeled = labeled;
        labeled.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        let docs = labeled
            .par_iter()
            .map(|(s, _)| structure_with(&s.body, providers.lexicons))
            .collect::<Result<Vec<_>>>()?;
        let schema = providers.schema();
        let needed_cols = schema.columns_for(&needed);
        let (samples, labels): (Vec<_>, Vec<_>) = labeled.into_iter().unzip();
        Ok(TextTask {
            name: name.to_string(),
            ids: samples.iter().map(|s: &TextSample| s.id.clone()).collect(),
            samples,
            labels,
            docs,
            providers,
            schema,
            needed,
            needed_cols,
        })
    }

    pub fn from_task(
        task: &DetectionTask,
        providers: TextProviders<'a>,
        needed: Selection,
    ) -> Result<TextTask<'a>> {
        let labeled = task.labeled().into_iter().map(|(s, l)| (s.clone(), l)).collect();
        TextTask::new(task.name.as_str(), labeled, providers, needed)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn samples(&self) -> &[TextSample] {
        &self.samples
    }

    pub fn docs(&self) -> &[StructuredText] {
        &self.docs
    }

    pub fn needed(&self) -> &Selection {
        &self.needed
    }

    /// Fit the fold-local models on the documents in `train`.
    pub fn fit(&self, train: &[String]) -> Result<FittedText> {
        let train: HashSet<&str> = train.iter().map(String::as_str).collect();
        let in_train: Vec<usize> = (0..self.ids.len())
            .filter(|&i| train.contains(self.ids[i].as_str()))
            .collect();
        let tfidf = if self
            .schema
            .selected(&self.needed)
            .any(|f| f.name == TFIDF_NAME && f.arity > 0)
        {
            let docs: Vec<&StructuredText> = in_train.iter().map(|&i| &self.docs[i]).collect();
            Some(fit_tfidf_dim(&docs, self.providers.tfidf_dim)?)
        } else {
            None
        };
        let lm = if self.needed.categories.contains(&Category::Perplexity)
            && self.needed.tags.contains(&Tag::Traditional)
            && self.providers.scorer.is_none()
        {
            let reference: Vec<(&str, Vec<Vec<String>>)> = in_train
                .iter()
                .filter(|&&i| self.samples[i].klass == Klass::Human)
                .map(|&i| (self.ids[i].as_str(), sentence_tokens(&self.docs[i])))
                .collect();
            Some(CrossFitLm::train(&reference, self.providers.lm_folds, self.providers.lm_config)?)
        } else {
            None
        };
        Ok(FittedText { tfidf, lm })
    }

    /// Feature vectors (over `needed`) for every document under `fitted`.
    pub fn vectors(&self, fitted: &FittedText) -> Result<Vec<FeatureVector>> {
        (0..self.ids.len())
            .into_par_iter()
            .map(|i| {
                let scorer: Option<&dyn SentenceScorer> = match (&self.providers.scorer, &fitted.lm) {
                    (Some(s), _) => Some(*s),
                    (None, Some(lm)) => Some(lm.model_for(&self.ids[i], i) as &NGramModel),
                    (None, None) => None,
                };
                let p = Providers {
                    lexicons: self.providers.lexicons,
                    scorer,
                    grammar: self.providers.grammar,
                    feedback: self.providers.feedback,
                    impute_ai_feedback: self.providers.impute_ai_feedback,
                    tfidf: fitted.tfidf.as_ref(),
                    embedder: self.providers.embedder,
                };
                assemble(&self.samples[i], &self.docs[i], &p, &self.schema, &self.needed)
            })
            .collect()
    }
}

impl Featurizer for TextTask<'_> {
    fn task(&self) -> &str {
        &self.name
    }

    fn ids(&self) -> &[String] {
        &self.ids
    }

    fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn fold_table(&self, fold: &Fold) -> Result<FoldTable> {
        let ctx = |e: Error| e.with_context(format!("split seed {}", fold.seed));
        let fitted = self.fit(&fold.train).map_err(ctx)?;
        let vectors = self.vectors(&fitted).map_err(ctx)?;
        let mut provenance = BTreeMap::new();
        for v in &vectors {
            for (k, p) in &v.provenance {
                provenance.entry(k.clone()).or_insert_with(|| p.clone());
            }
        }
        let cols = self.needed_cols.len();
        let data: Vec<f64> = vectors.into_iter().flat_map(|v| v.values).collect();
        Ok(FoldTable {
            x: Matrix::new(self.ids.len(), cols, data)?,
            fitted,
            provenance,
        })
    }

    fn columns(&self, selection: &Selection) -> Result<Vec<usize>> {
        let pos: HashMap<usize, usize> = self
            .needed_cols
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect();
        self.schema
            .columns_for(selection)
            .into_iter()
            .map(|c| {
                pos.get(&c).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "selection {selection} was not featurized for this run"
                    ))
                })
            })
            .collect()
    }

    fn column_names(&self, selection: &Selection) -> Vec<String> {
        let names = self.schema.column_names();
        self.schema
            .columns_for(selection)
            .into_iter()
            .map(|c| names[c].clone())
            .collect()
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        p.insert("schema".into(), self.schema.id());
        for (name, hash) in self.providers.lexicons.hashes() {
            p.insert(format!("lexicon:{name}"), hash.clone());
        }
        p.insert("grammar".into(), self.providers.grammar.id());
        p.insert("embedding".into(), self.providers.embedder.id());
        if let Some(f) = self.providers.feedback {
            p.insert("ai_feedback".into(), f.id());
        }
        if let Some(s) = self.providers.scorer {
            p.insert("perplexity".into(), s.id());
        }
        p
    }
}
