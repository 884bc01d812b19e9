//! Builds the configured external services once per run.

use std::collections::BTreeMap;

use stylodetect::clients::{
    AnnotationFeedback, ChatClient, EmbeddingClient, FeedbackChain, GrammarClient, LmClient, Mode,
    ProviderKind, ServiceClient,
};
use stylodetect::eval::TextProviders;
use stylodetect::features::{FeedbackSource, GrammarChecker};
use stylodetect::lm::SentenceScorer;
use stylodetect::textproc::LexiconSet;
use stylodetect::vectorize::SentenceEmbedder;

use crate::config::Settings;
use crate::UsageError;

pub struct Services {
    pub lexicons: LexiconSet,
    pub grammar: GrammarClient,
    pub embedder: EmbeddingClient,
    pub feedback: FeedbackChain,
    /// External perplexity scorer; `None` means the built-in n-gram model.
    pub scorer: Option<LmClient>,
    pub impute_ai_feedback: bool,
}

fn client(settings: &Settings, kind: ProviderKind) -> anyhow::Result<ServiceClient> {
    let cfg = settings.provider(kind).clone();
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(ServiceClient::http(cfg)?)
}

impl Services {
    pub fn build(settings: &Settings) -> anyhow::Result<Services> {
        let lexicons = match &settings.lexicons {
            Some(dir) => LexiconSet::from_dir(dir)?,
            None => LexiconSet::bundled().clone(),
        };
        let grammar = GrammarClient::new(client(settings, ProviderKind::Grammar)?)?;
        let embedder = EmbeddingClient::new(client(settings, ProviderKind::Embedding)?)
            .map_err(|e| UsageError(e.to_string()))?;
        let mut chain: Vec<Box<dyn FeedbackSource>> = Vec::new();
        if let Some(path) = &settings.annotations {
            chain.push(Box::new(AnnotationFeedback::load(path)?));
        }
        chain.push(Box::new(ChatClient::new(client(settings, ProviderKind::Chat)?)?));
        let scorer = match settings.provider(ProviderKind::Lm).mode {
            Mode::Fallback => None,
            _ => Some(LmClient::new(client(settings, ProviderKind::Lm)?)?),
        };
        Ok(Services {
            lexicons,
            grammar,
            embedder,
            feedback: FeedbackChain(chain),
            scorer,
            impute_ai_feedback: settings.impute_ai_feedback,
        })
    }

    pub fn text_providers(&self) -> TextProviders<'_> {
        TextProviders {
            feedback: Some(&self.feedback),
            impute_ai_feedback: self.impute_ai_feedback,
            scorer: self.scorer.as_ref().map(|s| s as &dyn SentenceScorer),
            ..TextProviders::new(&self.lexicons, &self.grammar, &self.embedder)
        }
    }

    /// Provider identifiers as recorded in run provenance.
    pub fn ids(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("grammar".to_string(), self.grammar.id()),
            ("embedding".to_string(), self.embedder.id()),
            ("ai_feedback".to_string(), self.feedback.id()),
            (
                "perplexity".to_string(),
                self.scorer
                    .as_ref()
                    .map_or_else(|| "builtin-ngram".to_string(), |s| s.id()),
            ),
        ])
    }
}
