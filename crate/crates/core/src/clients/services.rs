//! Concrete service clients.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{parse_json, Body, HttpRequest, Mode, ProviderConfig, ProviderKind, ServiceClient};
use crate::error::{Error, Result};
use crate::features::{ai_feedback_prompt, FeedbackSource, GrammarChecker, RuleGrammarChecker};
use crate::lm::SentenceScorer;
use crate::vectorize::{normalize, HashingEmbedder, SentenceEmbedder};

fn expect_kind(svc: &ServiceClient, kind: ProviderKind) -> Result<()> {
    if svc.config.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "expected a {kind} provider config, got {}",
            svc.config.kind
        )));
    }
    Ok(())
}

fn endpoint(cfg: &ProviderConfig) -> &str {
    cfg.endpoint.as_deref().unwrap_or_default().trim_end_matches('/')
}

fn http(cfg: &ProviderConfig, url: String, body: Body) -> HttpRequest {
    HttpRequest {
        url,
        body,
        bearer: cfg.api_key.clone(),
        timeout: Duration::from_secs_f64(cfg.timeout_secs),
    }
}

/// LanguageTool-compatible checker with the built-in rules as fallback.
pub struct GrammarClient {
    svc: ServiceClient,
    rules: RuleGrammarChecker<'static>,
}

impl GrammarClient {
    pub fn new(svc: ServiceClient) -> Result<Self> {
        expect_kind(&svc, ProviderKind::Grammar)?;
        Ok(GrammarClient {
            svc,
            rules: RuleGrammarChecker::default(),
        })
    }

    /// The service's match list.
    pub fn matches(&self, text: &str) -> Result<Vec<Value>> {
        let request = json!({"text": text, "language": "en-US"});
        let value = self.svc.resolve(
            &request,
            |cfg| {
                http(
                    cfg,
                    format!("{}/v2/check", endpoint(cfg)),
                    Body::Form(vec![
                        ("text".into(), text.to_string()),
                        ("language".into(), "en-US".into()),
                    ]),
                )
            },
            |body| {
                let v = parse_json(body)?;
                if !v.get("matches").is_some_and(Value::is_array) {
                    return Err(Error::InvalidArgument("missing `matches` array".into()));
                }
                Ok(v)
            },
        )?;
        let value = value.ok_or(Error::CacheMiss {
            kind: "grammar".into(),
        })?;
        Ok(value["matches"].as_array().cloned().unwrap_or_default())
    }
}

impl GrammarChecker for GrammarClient {
    fn id(&self) -> String {
        match self.svc.mode() {
            Mode::Fallback => self.rules.id(),
            _ => self.svc.config.version(),
        }
    }

    fn count_errors(&self, text: &str) -> Result<usize> {
        match self.svc.mode() {
            Mode::Fallback => self.rules.count_errors(text),
            _ => Ok(self.matches(text)?.len()),
        }
    }
}

/// Asks a chat model whether it wrote the text.
pub struct ChatClient {
    svc: ServiceClient,
}

impl ChatClient {
    pub fn new(svc: ServiceClient) -> Result<Self> {
        expect_kind(&svc, ProviderKind::Chat)?;
        Ok(ChatClient { svc })
    }

    /// Raw model answer to `prompt`.
    pub fn ask(&self, prompt: &str) -> Result<String> {
        let request = json!({ "prompt": prompt });
        let value = self
            .svc
            .resolve(
                &request,
                |cfg| http(cfg, endpoint(cfg).to_string(), Body::Json(request.clone())),
                |body| {
                    let v = parse_json(body)?;
                    if !v.get("response").is_some_and(Value::is_string) {
                        return Err(Error::InvalidArgument("missing `response` string".into()));
                    }
                    Ok(v)
                },
            )?
            .ok_or(Error::CacheMiss {
                kind: "chat".into(),
            })?;
        Ok(value["response"].as_str().unwrap_or_default().to_string())
    }
}

impl FeedbackSource for ChatClient {
    fn id(&self) -> String {
        self.svc.config.version()
    }

    fn feedback(&self, _doc_id: &str, body: &str) -> Result<String> {
        self.ask(&ai_feedback_prompt(body))
    }
}

/// Pre-collected chat answers keyed by document id (JSONL `{id, response}`).
pub struct AnnotationFeedback {
    responses: HashMap<String, String>,
    source: String,
}

#[derive(Deserialize)]
struct Annotation {
    id: String,
    response: String,
}

impl AnnotationFeedback {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut responses = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let a: Annotation = serde_json::from_str(line).map_err(|e| Error::Record {
                file: path.display().to_string(),
                line: i + 1,
                field: "annotation".into(),
                message: e.to_string(),
            })?;
            if responses.insert(a.id.clone(), a.response).is_some() {
                return Err(Error::DuplicateKey(a.id));
            }
        }
        Ok(AnnotationFeedback {
            responses,
            source: path.display().to_string(),
        })
    }

    pub fn from_map(responses: HashMap<String, String>) -> Self {
        AnnotationFeedback {
            responses,
            source: "in-memory".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl FeedbackSource for AnnotationFeedback {
    fn id(&self) -> String {
        format!("annotations:{}", self.source)
    }

    fn feedback(&self, doc_id: &str, _body: &str) -> Result<String> {
        self.responses.get(doc_id).cloned().ok_or(Error::CacheMiss {
            kind: "chat annotation".into(),
        })
    }
}

/// Tries each source in order, moving on after a cache miss.
pub struct FeedbackChain(pub Vec<Box<dyn FeedbackSource>>);

impl FeedbackSource for FeedbackChain {
    fn id(&self) -> String {
        self.0.iter().map(|s| s.id()).collect::<Vec<_>>().join("+")
    }

    fn feedback(&self, doc_id: &str, body: &str) -> Result<String> {
        for s in &self.0 {
            match s.feedback(doc_id, body) {
                Err(Error::CacheMiss { .. }) => continue,
                other => return other,
            }
        }
        Err(Error::CacheMiss {
            kind: "chat".into(),
        })
    }
}

/// Resolve per-item requests, sending the cache misses as one batch.
fn batch_resolve(
    svc: &ServiceClient,
    items: &[String],
    item_request: impl Fn(&str) -> Value,
    batch: impl Fn(&ProviderConfig, &[&str]) -> HttpRequest,
    split: impl Fn(&Value, usize) -> Result<Vec<Value>>,
) -> Result<Vec<Value>> {
    let kind = svc.config.kind.as_str();
    let mut out: Vec<Option<Value>> = Vec::with_capacity(items.len());
    let mut missing: Vec<&str> = Vec::new();
    for item in items {
        let v = svc.cached(&item_request(item))?;
        if v.is_none() && !missing.contains(&item.as_str()) {
            missing.push(item);
        }
        out.push(v);
    }
    if !missing.is_empty() {
        if svc.mode() != Mode::Live {
            return Err(Error::CacheMiss {
                kind: kind.to_string(),
            });
        }
        let body = svc.send_with_retries(&batch(&svc.config, &missing))?;
        let parsed = parse_json(&body)
            .and_then(|v| split(&v, missing.len()))
            .map_err(|e| Error::provider(svc.config.version(), format!("malformed response: {e}")))?;
        let fresh: HashMap<&str, Value> = missing.iter().copied().zip(parsed).collect();
        for (slot, item) in out.iter_mut().zip(items) {
            if slot.is_none() {
                let v = fresh[item.as_str()].clone();
                if let Some(c) = svc.cache() {
                    let req = item_request(item);
                    c.put(kind, &super::cache_key(kind, &req), &v, &svc.config.version())?;
                }
                *slot = Some(v);
            }
        }
    }
    Ok(out.into_iter().map(|v| v.expect("resolved")).collect())
}

/// Sentence embedding service; the hashing embedder in fallback mode.
pub struct EmbeddingClient {
    svc: ServiceClient,
    fallback: HashingEmbedder,
}

impl EmbeddingClient {
    pub fn new(svc: ServiceClient) -> Result<Self> {
        expect_kind(&svc, ProviderKind::Embedding)?;
        if svc.mode() != Mode::Fallback && svc.config.dim.is_none() {
            return Err(Error::InvalidArgument(
                "embedding provider needs its vector dimension (`dim`)".into(),
            ));
        }
        Ok(EmbeddingClient {
            svc,
            fallback: HashingEmbedder::default(),
        })
    }
}

impl SentenceEmbedder for EmbeddingClient {
    fn id(&self) -> String {
        match self.svc.mode() {
            Mode::Fallback => self.fallback.id(),
            _ => self.svc.config.version(),
        }
    }

    fn dim(&self) -> usize {
        match self.svc.mode() {
            Mode::Fallback => self.fallback.dim,
            _ => self.svc.config.dim.unwrap_or_default(),
        }
    }

    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>> {
        if self.svc.mode() == Mode::Fallback {
            return self.fallback.embed(sentences);
        }
        let dim = self.dim();
        let values = batch_resolve(
            &self.svc,
            sentences,
            |s| json!({ "text": s }),
            |cfg, batch| http(cfg, endpoint(cfg).to_string(), Body::Json(json!({ "texts": batch }))),
            |v, n| {
                let vectors = v
                    .get("vectors")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::InvalidArgument("missing `vectors` array".into()))?;
                if vectors.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: vectors.len(),
                    });
                }
                Ok(vectors.iter().map(|x| json!({ "vector": x })).collect())
            },
        )?;
        values
            .into_iter()
            .map(|v| {
                let mut vec: Vec<f64> = v["vector"]
                    .as_array()
                    .map(|a| a.iter().filter_map(Value::as_f64).collect())
                    .unwrap_or_default();
                if vec.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: vec.len(),
                    });
                }
                normalize(&mut vec);
                Ok(vec)
            })
            .collect()
    }
}

/// Neural LM scoring service: `{"sentences"}` → `{"perplexities"}`.
pub struct LmClient {
    svc: ServiceClient,
}

impl LmClient {
    pub fn new(svc: ServiceClient) -> Result<Self> {
        expect_kind(&svc, ProviderKind::Lm)?;
        Ok(LmClient { svc })
    }
}

impl SentenceScorer for LmClient {
    fn id(&self) -> String {
        self.svc.config.version()
    }

    fn perplexities(&self, sentences: &[Vec<String>]) -> Result<Vec<f64>> {
        let joined: Vec<String> = sentences.iter().map(|s| s.join(" ")).collect();
        let values = batch_resolve(
            &self.svc,
            &joined,
            |s| json!({ "sentence": s }),
            |cfg, batch| {
                http(cfg, endpoint(cfg).to_string(), Body::Json(json!({ "sentences": batch })))
            },
            |v, n| {
                let p = v
                    .get("perplexities")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::InvalidArgument("missing `perplexities` array".into()))?;
                if p.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: p.len(),
                    });
                }
                Ok(p.iter().map(|x| json!({ "perplexity": x })).collect())
            },
        )?;
        values
            .into_iter()
            .map(|v| {
                v["perplexity"]
                    .as_f64()
                    .filter(|p| p.is_finite() && *p > 0.0)
                    .ok_or_else(|| Error::provider(self.id(), "invalid perplexity value"))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::{HttpResponse, MockTransport, VirtualClock};
    use super::*;

    fn client(kind: ProviderKind, mode: Mode, cache: Option<&Path>, t: Arc<MockTransport>) -> ServiceClient {
        let mut cfg = ProviderConfig::new(kind, mode);
        cfg.endpoint = Some("http://svc.test/".into());
        cfg.cache_path = cache.map(Path::to_path_buf);
        cfg.dim = Some(3);
        ServiceClient::new(cfg, t, Arc::new(VirtualClock::default())).unwrap()
    }

    fn ok(body: &str) -> Result<HttpResponse> {
        Ok(HttpResponse {
            status: 200,
            body: body.into(),
        })
    }

    #[test]
    fn grammar_counts_matches_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("g.jsonl");
        let t = Arc::new(MockTransport::new(|r| {
            let Body::Form(f) = &r.body else { panic!() };
            assert_eq!(r.url, "http://svc.test/v2/check");
            assert!(f.contains(&("language".to_string(), "en-US".to_string())));
            if f[0].1 == "clean" {
                ok(r#"{"matches":[]}"#)
            } else {
                ok(r#"{"matches":[{"offset":0},{"offset":1},{"offset":2}]}"#)
            }
        }));
        let g = GrammarClient::new(client(ProviderKind::Grammar, Mode::Live, Some(&cache), t.clone())).unwrap();
        assert_eq!(g.count_errors("clean").unwrap(), 0);
        assert_eq!(g.count_errors("dirty").unwrap(), 3);
        assert_eq!(g.count_errors("dirty").unwrap(), 3);
        assert_eq!(t.calls(), 2);
        // a new client over the same cache needs no network at all
        let offline = Arc::new(MockTransport::offline());
        let g2 = GrammarClient::new(client(ProviderKind::Grammar, Mode::CachedOnly, Some(&cache), offline.clone()))
            .unwrap();
        assert_eq!(g2.count_errors("dirty").unwrap(), 3);
        assert!(matches!(g2.count_errors("unseen"), Err(Error::CacheMiss { .. })));
        assert_eq!(offline.calls(), 0);
    }

    #[test]
    fn retries_server_errors_then_gives_up() {
        let t = Arc::new(MockTransport::new(|_| {
            Ok(HttpResponse {
                status: 503,
                body: String::new(),
            })
        }));
        let g = GrammarClient::new(client(ProviderKind::Grammar, Mode::Live, None, t.clone())).unwrap();
        let err = g.count_errors("x").unwrap_err();
        assert_eq!(t.calls(), 4);
        assert!(err.to_string().contains("503"));
        let t = Arc::new(MockTransport::new(|_| {
            Ok(HttpResponse {
                status: 400,
                body: "bad".into(),
            })
        }));
        let g = GrammarClient::new(client(ProviderKind::Grammar, Mode::Live, None, t.clone())).unwrap();
        assert!(g.count_errors("x").is_err());
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn fallback_grammar_uses_rules_without_network() {
        let t = Arc::new(MockTransport::offline());
        let g = GrammarClient::new(client(ProviderKind::Grammar, Mode::Fallback, None, t.clone())).unwrap();
        assert_eq!(g.count_errors("the the cat").unwrap(), 1);
        assert_eq!(t.calls(), 0);
    }

    #[test]
    fn chat_prompt_and_modes() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("c.jsonl");
        let t = Arc::new(MockTransport::new(|r| {
            let Body::Json(v) = &r.body else { panic!() };
            let p = v["prompt"].as_str().unwrap();
            assert!(p.starts_with("Did you generate the following text? Answer yes or no.\n\n"));
            ok(r#"{"response":"Yes, I generated it."}"#)
        }));
        let c = ChatClient::new(client(ProviderKind::Chat, Mode::Live, Some(&cache), t.clone())).unwrap();
        assert!(c.feedback("d1", "Some body.").unwrap().starts_with("Yes"));
        let cold = dir.path().join("cold.jsonl");
        std::fs::write(&cold, "").unwrap();
        let c2 = ChatClient::new(client(ProviderKind::Chat, Mode::CachedOnly, Some(&cold), t.clone())).unwrap();
        assert!(matches!(c2.feedback("d1", "Some body."), Err(Error::CacheMiss { .. })));
        let c3 = ChatClient::new(client(ProviderKind::Chat, Mode::Fallback, Some(&cache), t.clone())).unwrap();
        assert!(c3.feedback("d1", "Some body.").unwrap().starts_with("Yes"));
        assert!(matches!(c3.feedback("d1", "Other."), Err(Error::CacheMiss { .. })));
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn annotations_then_chat() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        std::fs::write(&path, "{\"id\":\"d1\",\"response\":\"No.\"}\n").unwrap();
        let a = AnnotationFeedback::load(&path).unwrap();
        assert_eq!(a.feedback("d1", "").unwrap(), "No.");
        let chain = FeedbackChain(vec![
            Box::new(a),
            Box::new(AnnotationFeedback::from_map([("d2".to_string(), "Yes".to_string())].into())),
        ]);
        assert_eq!(chain.feedback("d2", "").unwrap(), "Yes");
        assert!(matches!(chain.feedback("d3", ""), Err(Error::CacheMiss { .. })));
        std::fs::write(&path, "{\"id\":\"d1\",\"response\":\"No.\"}\n{\"id\":\"d1\",\"response\":\"No.\"}\n").unwrap();
        assert!(AnnotationFeedback::load(&path).is_err());
    }

    #[test]
    fn embeddings_batch_normalize_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("e.jsonl");
        let t = Arc::new(MockTransport::new(|r| {
            let Body::Json(v) = &r.body else { panic!() };
            let n = v["texts"].as_array().unwrap().len();
            let vectors: Vec<Value> = (0..n).map(|i| json!([3.0, 4.0, i as f64 * 0.0])).collect();
            ok(&json!({ "vectors": vectors }).to_string())
        }));
        let e = EmbeddingClient::new(client(ProviderKind::Embedding, Mode::Live, Some(&cache), t.clone())).unwrap();
        assert!(e.embed(&[]).unwrap().is_empty());
        let s = vec!["a".to_string(), "b".to_string(), "a".to_string()];
        let v = e.embed(&s).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[0], [0.6, 0.8, 0.0]);
        assert_eq!(v[0], v[2]);
        assert_eq!(t.requests()[0].body, Body::Json(json!({"texts": ["a", "b"]})));
        e.embed(&s).unwrap();
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn embedding_dimension_mismatch_is_an_error() {
        let t = Arc::new(MockTransport::fixed(r#"{"vectors":[[1.0,0.0,0.0],[1.0,0.0]]}"#));
        let e = EmbeddingClient::new(client(ProviderKind::Embedding, Mode::Live, None, t)).unwrap();
        assert!(e.embed(&["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn lm_client_scores_batches() {
        let t = Arc::new(MockTransport::new(|r| {
            let Body::Json(v) = &r.body else { panic!() };
            let n = v["sentences"].as_array().unwrap().len();
            ok(&json!({ "perplexities": vec![12.5; n] }).to_string())
        }));
        let lm = LmClient::new(client(ProviderKind::Lm, Mode::Live, None, t)).unwrap();
        let p = lm.perplexities(&[vec!["a".into(), "b".into()], vec!["c".into()]]).unwrap();
        assert_eq!(p, [12.5, 12.5]);
    }

    #[test]
    fn config_validation() {
        let cfg = ProviderConfig::new(ProviderKind::Chat, Mode::Live);
        assert!(cfg.validate().is_err());
        let mut cfg = ProviderConfig::new(ProviderKind::Chat, Mode::CachedOnly);
        cfg.cache_path = Some("/nonexistent/cache.jsonl".into());
        assert!(cfg.validate().is_err());
        assert!(ProviderConfig::new(ProviderKind::Grammar, Mode::Fallback).validate().is_ok());
        let t = Arc::new(MockTransport::offline());
        let svc = client(ProviderKind::Chat, Mode::Fallback, None, t);
        assert!(GrammarClient::new(svc).is_err());
    }
}
