//! Scalar feature blocks: semantic, list lookup, document, error based,
//! readability and AI feedback.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::textproc::{count_syllables, LexiconSet, StructuredText};

use super::grammar::GrammarChecker;

/// Ordered `(name, value)` pairs.
pub type Named = Vec<(&'static str, f64)>;

pub const SPECIAL_CHARS: &[char] = &[
    '#', '$', '%', '&', '*', '+', '/', '<', '=', '>', '@', '[', '\\', ']', '^', '_', '{', '|',
    '}', '~',
];
pub const PUNCTUATION_CHARS: &[char] = &['.', ',', ';', ':', '!', '?'];
pub const QUOTATION_CHARS: &[char] = &['"', '“', '”', '«', '»'];

const NEGATION_WINDOW: usize = 3;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation; 0 for fewer than two values.
pub fn stdev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn count_chars(text: &str, set: &[char]) -> f64 {
    text.chars().filter(|c| set.contains(c)).count() as f64
}

fn is_negator(lower: &str, lex: &LexiconSet) -> bool {
    lex.negators.contains(lower) || lower.ends_with("n't") || lower.ends_with("n’t")
}

/// `(sentiment_polarity, sentiment_subjectivity)`.
pub fn semantic_features(doc: &StructuredText, lex: &LexiconSet) -> (f64, f64) {
    let mut pol = Vec::new();
    let mut subj = Vec::new();
    for s in doc.sentences() {
        for (i, t) in s.tokens.iter().enumerate() {
            if !t.is_word {
                continue;
            }
            let Some(entry) = lex.sentiment.get(&t.lower) else {
                continue;
            };
            let negated = s.tokens[i.saturating_sub(NEGATION_WINDOW)..i]
                .iter()
                .any(|p| is_negator(&p.lower, lex));
            pol.push(if negated { -entry.polarity } else { entry.polarity });
            subj.push(entry.subjectivity);
        }
    }
    (mean(&pol), mean(&subj))
}

fn title_keywords(title: &str, lex: &LexiconSet) -> HashSet<String> {
    crate::textproc::segment::tokenize_span(title, 0)
        .into_iter()
        .filter(|t| t.is_word && !lex.is_stop_word(&t.lower))
        .map(|t| t.lower)
        .collect()
}

fn discourse_markers(doc: &StructuredText, lex: &LexiconSet) -> usize {
    let mut count = 0;
    for s in doc.sentences() {
        let words: Vec<&str> = s.words().map(|t| t.lower.as_str()).collect();
        let mut i = 0;
        while i < words.len() {
            // markers are ordered longest first
            let hit = lex.discourse_markers.iter().find(|m| {
                m.len() <= words.len() - i && m.iter().zip(&words[i..]).all(|(a, b)| a == b)
            });
            match hit {
                Some(m) => {
                    count += 1;
                    i += m.len();
                }
                None => i += 1,
            }
        }
    }
    count
}

pub fn list_lookup_features(doc: &StructuredText, title: &str, lex: &LexiconSet) -> Result<Named> {
    if title.trim().is_empty() {
        return Err(Error::InvalidArgument("title must not be empty".into()));
    }
    let words = doc.word_count();
    let stop = doc.words().filter(|t| lex.is_stop_word(&t.lower)).count();
    let keywords = title_keywords(title, lex);
    let repetitions = doc.words().filter(|t| keywords.contains(&t.lower)).count() as f64;
    Ok(vec![
        ("stopWord_count", stop as f64),
        ("specialChar_count", count_chars(&doc.text, SPECIAL_CHARS)),
        ("discourseMarker_count", discourse_markers(doc, lex) as f64),
        ("titleRepetition_count", repetitions),
        (
            "titleRepetition_relative",
            if words == 0 { 0.0 } else { repetitions / words as f64 },
        ),
    ])
}

fn is_uppercase_word(surface: &str) -> bool {
    surface.chars().count() >= 2
        && surface.chars().all(char::is_alphabetic)
        && surface.chars().all(char::is_uppercase)
}

pub fn document_features(doc: &StructuredText, lex: &LexiconSet) -> Named {
    let words_per_par: Vec<f64> = doc
        .paragraphs
        .iter()
        .map(|p| p.sentences.iter().map(|s| s.word_count()).sum::<usize>() as f64)
        .collect();
    let sents_per_par: Vec<f64> = doc
        .paragraphs
        .iter()
        .map(|p| p.sentences.len() as f64)
        .collect();
    let words_per_sent: Vec<f64> = doc.sentences().map(|s| s.word_count() as f64).collect();
    let uniq_per_sent: Vec<f64> = doc
        .sentences()
        .map(|s| s.words().map(|t| t.lower.as_str()).collect::<HashSet<_>>().len() as f64)
        .collect();
    let pos_per_sent: Vec<f64> = doc
        .sentences()
        .map(|s| s.tokens.iter().map(|t| t.pos).collect::<HashSet<_>>().len() as f64)
        .collect();
    let words = doc.word_count() as f64;
    let uniq = doc.words().map(|t| t.lower.as_str()).collect::<HashSet<_>>().len() as f64;
    let rel = |x: f64| if words == 0.0 { 0.0 } else { x / words };
    let upper = doc.words().filter(|t| is_uppercase_word(&t.surface)).count() as f64;
    let pronouns = doc
        .words()
        .filter(|t| lex.personal_pronouns.contains(&t.lower))
        .count() as f64;
    vec![
        ("wordsPerParagraph_mean", mean(&words_per_par)),
        ("wordsPerParagraph_stdev", stdev(&words_per_par)),
        ("sentencesPerParagraph_mean", mean(&sents_per_par)),
        ("sentencesPerParagraph_stdev", stdev(&sents_per_par)),
        ("wordsPerSentence_mean", mean(&words_per_sent)),
        ("wordsPerSentence_stdev", stdev(&words_per_sent)),
        ("uniqWordsPerSentence_mean", mean(&uniq_per_sent)),
        ("uniqWordsPerSentence_stdev", stdev(&uniq_per_sent)),
        ("words_count", words),
        ("uniqWords_count", uniq),
        ("uniqWords_relative", rel(uniq)),
        ("paragraph_count", doc.paragraph_count() as f64),
        ("sentence_count", doc.sentence_count() as f64),
        ("punctuation_count", count_chars(&doc.text, PUNCTUATION_CHARS)),
        ("quotation_count", count_chars(&doc.text, QUOTATION_CHARS)),
        ("character_count", doc.text.chars().count() as f64),
        ("uppercaseWords_relative", rel(upper)),
        ("personalPronoun_count", pronouns),
        ("personalPronoun_relative", rel(pronouns)),
        ("POSPerSentence_mean", mean(&pos_per_sent)),
    ]
}

/// Maximal runs of two or more space characters.
pub fn multi_blank_count(body: &str) -> usize {
    let mut runs = 0;
    let mut len = 0;
    for c in body.chars().chain(std::iter::once('\0')) {
        if c == ' ' {
            len += 1;
        } else {
            if len >= 2 {
                runs += 1;
            }
            len = 0;
        }
    }
    runs
}

/// `(grammarError_count, multiBlank_count)`.
pub fn error_features(doc_id: &str, body: &str, grammar: &dyn GrammarChecker) -> Result<(f64, f64)> {
    let errors = grammar
        .count_errors(body)
        .map_err(|e| e.with_context(format!("document {doc_id}")))?;
    Ok((errors as f64, multi_blank_count(body) as f64))
}

/// `(fleschReadingEase, fleschKincaidGradeLevel)`, unclamped.
pub fn readability_features(doc: &StructuredText) -> Result<(f64, f64)> {
    let words = doc.word_count();
    let sentences = doc.sentence_count();
    if words == 0 || sentences == 0 {
        return Err(Error::EmptyInput("readability needs at least one word and sentence"));
    }
    let mut syllables = 0usize;
    for t in doc.words() {
        syllables += if t.surface.chars().any(char::is_alphabetic) {
            count_syllables(&t.surface)?
        } else {
            1
        };
    }
    let wps = words as f64 / sentences as f64;
    let spw = syllables as f64 / words as f64;
    Ok((
        206.835 - 1.015 * wps - 84.6 * spw,
        0.39 * wps + 11.8 * spw - 15.59,
    ))
}

pub const AI_FEEDBACK_PROMPT: &str = "Did you generate the following text? Answer yes or no.\n\n";

pub fn ai_feedback_prompt(body: &str) -> String {
    format!("{AI_FEEDBACK_PROMPT}{body}")
}

/// Leading word of the response: `yes` → 2, `no` → 0, anything else → 1.
pub fn classify_feedback(response: &str) -> u8 {
    let lower = response.trim().to_lowercase();
    let lead: String = lower.chars().take_while(|c| c.is_alphabetic()).collect();
    match lead.as_str() {
        "yes" => 2,
        "no" => 0,
        _ => 1,
    }
}

pub const IMPUTED_FEEDBACK: u8 = 1;

/// Source of the chat model's answer for a document.
pub trait FeedbackSource: Send + Sync {
    fn id(&self) -> String;
    fn feedback(&self, doc_id: &str, body: &str) -> Result<String>;
}

/// The AI-feedback value; a missing answer is imputed as neutral only when
/// `impute` is set.
pub fn ai_feedback_feature(
    source: Option<&dyn FeedbackSource>,
    doc_id: &str,
    body: &str,
    impute: bool,
) -> Result<u8> {
    let Some(source) = source else {
        return if impute {
            Ok(IMPUTED_FEEDBACK)
        } else {
            Err(Error::CacheMiss {
                kind: format!("chat (no provider configured for {doc_id})"),
            })
        };
    };
    match source.feedback(doc_id, body) {
        Ok(r) => Ok(classify_feedback(&r)),
        Err(Error::CacheMiss { .. }) if impute => Ok(IMPUTED_FEEDBACK),
        Err(e) => Err(e.with_context(format!("document {doc_id}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::grammar::RuleGrammarChecker;
    use crate::textproc::structure;

    fn lex() -> &'static LexiconSet {
        LexiconSet::bundled()
    }

    fn get(named: &Named, key: &str) -> f64 {
        named.iter().find(|(k, _)| *k == key).unwrap().1
    }

    #[test]
    fn semantic_examples() {
        let doc = structure("Rocks exist.").unwrap();
        assert_eq!(semantic_features(&doc, lex()), (0.0, 0.0));
        let good = lex().sentiment["good"];
        assert_eq!((good.polarity, good.subjectivity), (0.7, 0.6));
        assert_eq!(semantic_features(&structure("good").unwrap(), lex()), (0.7, 0.6));
        assert_eq!(semantic_features(&structure("not good").unwrap(), lex()), (-0.7, 0.6));
        // negation does not cross sentences
        assert_eq!(semantic_features(&structure("Not me. Good.").unwrap(), lex()).0, 0.7);
    }

    #[test]
    fn list_lookup_examples() {
        let doc = structure("Vienna is big. Vienna is old.").unwrap();
        let f = list_lookup_features(&doc, "Vienna", lex()).unwrap();
        assert_eq!(get(&f, "titleRepetition_count"), 2.0);
        assert!((get(&f, "titleRepetition_relative") - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(get(&f, "stopWord_count"), 2.0);
        let doc = structure("However, it grew; moreover, it thrived.").unwrap();
        let f = list_lookup_features(&doc, "Growth", lex()).unwrap();
        assert_eq!(get(&f, "discourseMarker_count"), 2.0);
        let doc = structure("a @ b # c").unwrap();
        let f = list_lookup_features(&doc, "x", lex()).unwrap();
        assert_eq!(get(&f, "specialChar_count"), 2.0);
        assert!(list_lookup_features(&doc, "  ", lex()).is_err());
    }

    #[test]
    fn multiword_markers_match_longest() {
        let doc = structure("On the other hand, it failed. As a result we left.").unwrap();
        let f = list_lookup_features(&doc, "x", lex()).unwrap();
        assert_eq!(get(&f, "discourseMarker_count"), 2.0);
    }

    #[test]
    fn title_keywords_skip_stop_words() {
        let doc = structure("The history of art is the art of history.").unwrap();
        let f = list_lookup_features(&doc, "The History of Art", lex()).unwrap();
        assert_eq!(get(&f, "titleRepetition_count"), 4.0);
    }

    #[test]
    fn document_examples() {
        let f = document_features(&structure("Hello world.").unwrap(), lex());
        assert_eq!(f.len(), 20);
        assert_eq!(get(&f, "words_count"), 2.0);
        assert_eq!(get(&f, "sentence_count"), 1.0);
        assert_eq!(get(&f, "wordsPerSentence_stdev"), 0.0);
        assert_eq!(get(&f, "punctuation_count"), 1.0);
        assert_eq!(get(&f, "character_count"), 12.0);
        let f = document_features(&structure("Two words. Then four more words.").unwrap(), lex());
        assert_eq!(get(&f, "wordsPerSentence_mean"), 3.0);
        assert_eq!(get(&f, "wordsPerSentence_stdev"), 1.0);
        let f = document_features(&structure("He said \"hi\" and \"bye\".").unwrap(), lex());
        assert_eq!(get(&f, "quotation_count"), 4.0);
        assert_eq!(get(&f, "personalPronoun_count"), 1.0);
    }

    #[test]
    fn document_paragraph_stats() {
        let doc = structure("One two three. Four.\n\nFive six.").unwrap();
        let f = document_features(&doc, lex());
        assert_eq!(get(&f, "paragraph_count"), 2.0);
        assert_eq!(get(&f, "wordsPerParagraph_mean"), 3.0);
        assert_eq!(get(&f, "wordsPerParagraph_stdev"), 1.0);
        assert_eq!(get(&f, "sentencesPerParagraph_mean"), 1.5);
        assert_eq!(get(&f, "sentencesPerParagraph_stdev"), 0.5);
        let f = document_features(&structure("NASA and the UN met. I agreed.").unwrap(), lex());
        assert!((get(&f, "uppercaseWords_relative") - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(get(&f, "uniqWords_relative"), 1.0);
    }

    #[test]
    fn multi_blank_runs() {
        assert_eq!(multi_blank_count("a  b   c"), 2);
        assert_eq!(multi_blank_count("a b c"), 0);
        assert_eq!(multi_blank_count("  lead and trail  "), 2);
    }

    #[test]
    fn error_feature_examples() {
        let g = RuleGrammarChecker::default();
        assert!(error_features("d", "the the cat", &g).unwrap().0 >= 1.0);
        assert_eq!(error_features("d", "The cat sat.", &g).unwrap(), (0.0, 0.0));
        struct Broken;
        impl GrammarChecker for Broken {
            fn id(&self) -> String {
                "broken".into()
            }
            fn count_errors(&self, _: &str) -> Result<usize> {
                Err(Error::provider("broken", "down"))
            }
        }
        let err = error_features("doc-7", "x", &Broken).unwrap_err();
        assert!(err.to_string().contains("doc-7"));
    }

    #[test]
    fn readability_by_hand() {
        let (fre, fkgl) = readability_features(&structure("The cat sat.").unwrap()).unwrap();
        assert!((fre - 119.19).abs() < 1e-9);
        assert!((fkgl - (-2.62)).abs() < 1e-9);
        let once = "The old dog slept. A beautiful table stood there quietly.";
        let twice = format!("{once} {once}");
        assert_eq!(
            readability_features(&structure(once).unwrap()).unwrap(),
            readability_features(&structure(&twice).unwrap()).unwrap()
        );
    }

    #[test]
    fn feedback_classification() {
        assert_eq!(classify_feedback("Yes, I generated this text."), 2);
        assert_eq!(classify_feedback("No."), 0);
        assert_eq!(classify_feedback("  no"), 0);
        assert_eq!(classify_feedback("I cannot be certain whether I wrote it."), 1);
        assert_eq!(classify_feedback("Nobody knows"), 1);
        assert_eq!(classify_feedback(""), 1);
    }

    #[test]
    fn feedback_imputation_is_explicit() {
        assert!(ai_feedback_feature(None, "d", "text", false).is_err());
        assert_eq!(ai_feedback_feature(None, "d", "text", true).unwrap(), 1);
        assert!(ai_feedback_prompt("Body").ends_with("\n\nBody"));
    }
}
