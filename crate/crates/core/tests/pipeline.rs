//! End-to-end checks over the synthetic corpora: fold-local fitting,
//! cache replay, report determinism and learnability.

use std::sync::Arc;

use serde_json::{json, Value};
use stylodetect::clients::{
    Body, ChatClient, EmbeddingClient, GrammarClient, HttpResponse, MockTransport, Mode, ProviderConfig,
    ProviderKind, ServiceClient, VirtualClock,
};
use stylodetect::corpus::{build_task, TaskName, TextSample};
use stylodetect::eval::{
    ablation_matrix, fold_tables, make_splits, oracle_task, run_cell, text_corpus, write_report_csv,
    write_summary_csv, Featurizer, SplitPlan, TextProviders, TextTask,
};
use stylodetect::features::{FeedbackSource, GrammarChecker, RuleGrammarChecker, Selection};
use stylodetect::ml::{
    self, default_grid, BoostParams, ForestParams, HyperParams, Matrix, MlpParams, Model, ModelKind,
};
use stylodetect::textproc::LexiconSet;
use stylodetect::vectorize::{HashingEmbedder, SentenceEmbedder};

const SENTINEL: &str = "zqxsentinel";

fn labeled(samples: &[TextSample], task: TaskName) -> Vec<(TextSample, u8)> {
    build_task(samples, task)
        .unwrap()
        .labeled()
        .into_iter()
        .map(|(s, l)| (s.clone(), l))
        .collect()
}

fn small_grid(kind: ModelKind) -> Vec<HyperParams> {
    match kind {
        ModelKind::Rf => vec![HyperParams::Rf(ForestParams { n_trees: 30, ..Default::default() })],
        ModelKind::Gbt => vec![HyperParams::Gbt(BoostParams { rounds: 40, max_depth: 3, ..Default::default() })],
        ModelKind::Mlp => vec![HyperParams::Mlp(MlpParams { max_epochs: 60, ..Default::default() })],
    }
}

struct FoldSnapshot {
    tfidf: String,
    lm: Vec<String>,
    train_rows: Matrix,
    mlp: String,
}

fn imputing<'a>(grammar: &'a dyn GrammarChecker, embedder: &'a dyn SentenceEmbedder) -> TextProviders<'a> {
    TextProviders {
        impute_ai_feedback: true,
        ..TextProviders::new(LexiconSet::bundled(), grammar, embedder)
    }
}

fn snapshot(samples: Vec<(TextSample, u8)>, plan: &SplitPlan, grammar: &dyn GrammarChecker) -> FoldSnapshot {
    let embedder = HashingEmbedder::default();
    let providers = imputing(grammar, &embedder);
    let task = TextTask::new("leak", samples, providers, Selection::all()).unwrap();
    let fold = &plan.folds[0];
    let table = task.fold_table(fold).unwrap();
    let index: Vec<usize> = fold
        .train
        .iter()
        .map(|id| task.ids().iter().position(|x| x == id).unwrap())
        .collect();
    let train_rows = table.x.select_rows(&index);
    let y: Vec<u8> = index.iter().map(|&i| task.labels()[i]).collect();
    let model = ml::train(&HyperParams::Mlp(MlpParams { max_epochs: 5, ..Default::default() }), &train_rows, &y, None, 1)
        .unwrap();
    let Model::Mlp(mlp) = model else { panic!("expected an MLP") };
    FoldSnapshot {
        tfidf: table.fitted.tfidf.as_ref().unwrap().to_json().unwrap(),
        lm: table.fitted.lm.as_ref().unwrap().models().iter().map(|m| m.to_json().unwrap()).collect(),
        train_rows,
        mlp: serde_json::to_string(&mlp.scaler).unwrap(),
    }
}

fn with_sentinel(samples: &[(TextSample, u8)], id: &str) -> Vec<(TextSample, u8)> {
    samples
        .iter()
        .map(|(s, l)| {
            let mut s = s.clone();
            if s.id == id {
                s.body = format!("{SENTINEL} {SENTINEL} {SENTINEL}. {}", s.body);
            }
            (s, *l)
        })
        .collect()
}

#[test]
fn sentinel_in_test_document_changes_no_fitted_state() {
    let samples = labeled(&text_corpus(2, 11), TaskName::BasicGeneration);
    let ids: Vec<(String, u8)> = samples.iter().map(|(s, l)| (s.id.clone(), *l)).collect();
    let plan = make_splits(&ids, 3).unwrap();
    let grammar = RuleGrammarChecker::default();
    let base = snapshot(samples.clone(), &plan, &grammar);
    assert!(!base.tfidf.contains(SENTINEL));

    let test = &plan.folds[0].test;
    let human_test = test.iter().find(|id| ids.iter().any(|(i, l)| i == *id && *l == 0)).unwrap();
    let ai_test = test.iter().find(|id| ids.iter().any(|(i, l)| i == *id && *l == 1)).unwrap();
    for id in [human_test, ai_test] {
        let leaked = snapshot(with_sentinel(&samples, id), &plan, &grammar);
        assert_eq!(leaked.tfidf, base.tfidf, "TF-IDF changed by test doc {id}");
        assert_eq!(leaked.lm, base.lm, "LM changed by test doc {id}");
        assert_eq!(leaked.train_rows, base.train_rows, "training rows changed by test doc {id}");
        assert_eq!(leaked.mlp, base.mlp, "scaler changed by test doc {id}");
    }

    // Positive control: the same edit on a human training document is seen.
    let human_train = plan.folds[0]
        .train
        .iter()
        .find(|id| ids.iter().any(|(i, l)| i == *id && *l == 0))
        .unwrap();
    let seen = snapshot(with_sentinel(&samples, human_train), &plan, &grammar);
    assert!(seen.lm.iter().any(|m| m.contains(SENTINEL)));
    assert_ne!(seen.train_rows, base.train_rows);
}

fn grammar_reply(body: &Body) -> String {
    let Body::Form(fields) = body else { panic!("grammar expects a form body") };
    let text = &fields.iter().find(|(k, _)| k == "text").unwrap().1;
    let n = text.matches(" i ").count() + text.matches("  ").count();
    let matches: Vec<Value> = (0..n).map(|i| json!({ "offset": i })).collect();
    json!({ "matches": matches }).to_string()
}

fn json_reply(body: &Body) -> String {
    let Body::Json(v) = body else { panic!("expected a JSON body") };
    if let Some(prompt) = v["prompt"].as_str() {
        let answer = if prompt.contains('"') { "No, a person wrote this." } else { "Yes, I wrote this." };
        return json!({ "response": answer }).to_string();
    }
    let vectors: Vec<Value> = v["texts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let t = t.as_str().unwrap();
            json!([t.len() as f64, t.split_whitespace().count() as f64, 1.0])
        })
        .collect();
    json!({ "vectors": vectors }).to_string()
}

fn service(kind: ProviderKind, mode: Mode, cache: &std::path::Path, t: Arc<MockTransport>) -> ServiceClient {
    let mut cfg = ProviderConfig::new(kind, mode);
    cfg.endpoint = Some("http://svc.test".into());
    cfg.cache_path = Some(cache.to_path_buf());
    cfg.dim = Some(3);
    cfg.rate_limit = 0.0;
    ServiceClient::new(cfg, t, Arc::new(VirtualClock::default())).unwrap()
}

fn featurize_with(
    grammar: &dyn GrammarChecker,
    embedder: &dyn SentenceEmbedder,
    chat: &dyn FeedbackSource,
    samples: Vec<(TextSample, u8)>,
) -> Matrix {
    let providers = TextProviders {
        feedback: Some(chat),
        ..TextProviders::new(LexiconSet::bundled(), grammar, embedder)
    };
    let task = TextTask::new("cache", samples, providers, Selection::all()).unwrap();
    let plan = make_splits(&task.labeled_ids(), 5).unwrap();
    task.fold_table(&plan.folds[0]).unwrap().x
}

#[test]
fn warm_cache_replays_without_network() {
    let dir = tempfile::tempdir().unwrap();
    let gcache = dir.path().join("grammar.jsonl");
    let ecache = dir.path().join("embed.jsonl");
    let ccache = dir.path().join("chat.jsonl");
    let samples = labeled(&text_corpus(2, 5), TaskName::BasicRephrase);

    let live = Arc::new(MockTransport::new(|req| {
        let body = if req.url.ends_with("/v2/check") { grammar_reply(&req.body) } else { json_reply(&req.body) };
        Ok(HttpResponse { status: 200, body })
    }));
    let grammar = GrammarClient::new(service(ProviderKind::Grammar, Mode::Live, &gcache, live.clone())).unwrap();
    let embedder = EmbeddingClient::new(service(ProviderKind::Embedding, Mode::Live, &ecache, live.clone())).unwrap();
    let chat = ChatClient::new(service(ProviderKind::Chat, Mode::Live, &ccache, live.clone())).unwrap();
    let first = featurize_with(&grammar, &embedder, &chat, samples.clone());
    assert!(live.calls() > 0);

    let offline = Arc::new(MockTransport::offline());
    let grammar = GrammarClient::new(service(ProviderKind::Grammar, Mode::CachedOnly, &gcache, offline.clone())).unwrap();
    let embedder =
        EmbeddingClient::new(service(ProviderKind::Embedding, Mode::CachedOnly, &ecache, offline.clone())).unwrap();
    let chat = ChatClient::new(service(ProviderKind::Chat, Mode::CachedOnly, &ccache, offline.clone())).unwrap();
    let second = featurize_with(&grammar, &embedder, &chat, samples);
    assert_eq!(offline.calls(), 0);
    assert_eq!(first, second);
}

fn ablation_csv(threads: usize) -> (Vec<u8>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let grammar = RuleGrammarChecker::default();
        let embedder = HashingEmbedder::default();
        let providers = imputing(&grammar, &embedder);
        let samples = labeled(&text_corpus(2, 8), TaskName::AdvancedGeneration);
        let sels: Vec<Selection> = ["Readability_traditional", "ErrorBased_new", "All_traditional+new"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let task = TextTask::new("advanced_generation", samples, providers, Selection::all()).unwrap();
        let plan = make_splits(&task.labeled_ids(), 21).unwrap();
        let tables = fold_tables(&task, &plan).unwrap();
        let reports = ablation_matrix(&task, &plan, &tables, &sels, &ModelKind::ALL, &small_grid).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_report_csv(&mut a, &reports).unwrap();
        write_summary_csv(&mut b, &reports).unwrap();
        (a, b)
    })
}

#[test]
fn ablation_reports_are_byte_identical() {
    let one = ablation_csv(1);
    assert_eq!(one, ablation_csv(1));
    assert_eq!(one, ablation_csv(2));
    let text = String::from_utf8(one.0).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 3 * 5);
}

#[test]
fn synthetic_oracle_with_default_grids() {
    let set = oracle_task(2024);
    let plan = make_splits(&set.labeled_ids(), 2024).unwrap();
    let tables = fold_tables(&set, &plan).unwrap();
    for kind in ModelKind::ALL {
        let r = run_cell(&set, &plan, &tables, &Selection::all(), kind, &default_grid(kind)).unwrap();
        assert!(r.mean_f1 >= 0.99, "{kind}: mean F1 {}", r.mean_f1);
    }
}

#[test]
fn synthetic_text_tasks_are_learnable() {
    let corpus = text_corpus(3, 17);
    let grammar = RuleGrammarChecker::default();
    let embedder = HashingEmbedder::default();
    let providers = imputing(&grammar, &embedder);
    for name in [TaskName::BasicGeneration, TaskName::AdvancedRephrase] {
        let task = TextTask::new(name.as_str(), labeled(&corpus, name), providers, Selection::all()).unwrap();
        let plan = make_splits(&task.labeled_ids(), 4).unwrap();
        let tables = fold_tables(&task, &plan).unwrap();
        let r = run_cell(&task, &plan, &tables, &Selection::all(), ModelKind::Rf, &small_grid(ModelKind::Rf)).unwrap();
        assert!(r.mean_f1 >= 0.8, "{}: mean F1 {}", name.as_str(), r.mean_f1);
        assert!(r.provenance.contains_key("schema"));
    }
}
