//! Built-in spelling and grammar rules used when no checker service is
//! configured.
//!
//! Rules, applied per sentence:
//! - `SPELLING`: a word missing from the spelling dictionary. Tokens with
//!   digits or inner periods, all-caps tokens and capitalised tokens that
//!   do not start the sentence are never flagged.
//! - `DOUBLED_WORD`: the same word twice in a row.
//! - `A_AN`: `a` before a vowel sound or `an` before a consonant sound.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::textproc::{LexiconSet, StructuredText, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrammarRule {
    Spelling,
    DoubledWord,
    AAn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarMatch {
    pub rule: GrammarRule,
    /// Byte offset and length in the checked text.
    pub offset: usize,
    pub length: usize,
}

/// Counts spelling and grammar problems in a text.
pub trait GrammarChecker: Send + Sync {
    fn id(&self) -> String;
    fn count_errors(&self, text: &str) -> Result<usize>;
}

pub struct RuleGrammarChecker<'a> {
    lex: &'a LexiconSet,
}

impl Default for RuleGrammarChecker<'static> {
    fn default() -> Self {
        RuleGrammarChecker {
            lex: LexiconSet::bundled(),
        }
    }
}

fn is_all_caps(surface: &str) -> bool {
    let letters: Vec<char> = surface.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

fn starts_upper(surface: &str) -> bool {
    surface.chars().next().is_some_and(char::is_uppercase)
}

// letters whose English name starts with a vowel sound
const VOWEL_NAMED_LETTERS: &str = "aefhilmnorsx";

/// Heuristic: does the word start with a vowel sound?
fn vowel_sound(token: &Token) -> Option<bool> {
    let first = token.surface.chars().next()?;
    if !first.is_alphabetic() {
        return None;
    }
    let lower = &token.lower;
    if is_all_caps(&token.surface) {
        let c = lower.chars().next()?;
        return Some(VOWEL_NAMED_LETTERS.contains(c));
    }
    const SILENT_H: [&str; 4] = ["hour", "honest", "honor", "heir"];
    if SILENT_H.iter().any(|p| lower.starts_with(p)) {
        return Some(true);
    }
    const YOU_OR_W: [&str; 8] = ["uni", "use", "usu", "uti", "eu", "one", "once", "ewe"];
    if YOU_OR_W.iter().any(|p| lower.starts_with(p)) {
        return Some(false);
    }
    Some(lower.starts_with(['a', 'e', 'i', 'o', 'u']))
}

impl<'a> RuleGrammarChecker<'a> {
    pub fn new(lex: &'a LexiconSet) -> Self {
        RuleGrammarChecker { lex }
    }

    fn known(&self, word: &str) -> bool {
        let dict = &self.lex.spelling_dictionary;
        let word = word.replace('’', "'");
        if dict.contains(&word) || self.lex.abbreviations.contains(&word) {
            return true;
        }
        if let Some((stem, _)) = word.split_once('\'') {
            if dict.contains(stem) {
                return true;
            }
        }
        word.contains('-')
            && word
                .split('-')
                .all(|part| part.is_empty() || dict.contains(part))
    }

    fn misspelled(&self, token: &Token, sentence_initial: bool) -> bool {
        let s = &token.surface;
        if !token.is_word
            || s.chars().any(|c| c.is_ascii_digit())
            || s.contains('.')
            || !s.chars().any(char::is_alphabetic)
            || is_all_caps(s)
            || (starts_upper(s) && !sentence_initial)
        {
            return false;
        }
        !self.known(&token.lower)
    }

    pub fn check_doc(&self, doc: &StructuredText) -> Vec<GrammarMatch> {
        let mut out = Vec::new();
        for sentence in doc.sentences() {
            let words: Vec<&Token> = sentence.words().collect();
            for (i, t) in words.iter().enumerate() {
                if self.misspelled(t, i == 0) {
                    out.push(GrammarMatch {
                        rule: GrammarRule::Spelling,
                        offset: t.span.0,
                        length: t.span.1 - t.span.0,
                    });
                }
            }
            // adjacency rules look at consecutive tokens, punctuation included
            for pair in sentence.tokens.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                if !(a.is_word && b.is_word) {
                    continue;
                }
                let span = GrammarMatch {
                    rule: GrammarRule::DoubledWord,
                    offset: a.span.0,
                    length: b.span.1 - a.span.0,
                };
                if a.lower == b.lower && a.lower.chars().any(char::is_alphabetic) {
                    out.push(span.clone());
                }
                let article = a.lower.as_str();
                if article == "a" || article == "an" {
                    if let Some(vowel) = vowel_sound(b) {
                        if (article == "a") == vowel {
                            out.push(GrammarMatch {
                                rule: GrammarRule::AAn,
                                ..span
                            });
                        }
                    }
                }
            }
        }
        out.sort_by_key(|m| (m.offset, m.length));
        out
    }

    pub fn check(&self, text: &str) -> Vec<GrammarMatch> {
        if text.trim().is_empty() {
            return Vec::new();
        }
        match crate::textproc::structure_with(text, self.lex) {
            Ok(doc) => self.check_doc(&doc),
            Err(_) => Vec::new(),
        }
    }
}

impl GrammarChecker for RuleGrammarChecker<'_> {
    fn id(&self) -> String {
        let dict = self
            .lex
            .hashes()
            .get(crate::textproc::lexicon::SPELLING_FILE)
            .map(|h| h[..12].to_string())
            .unwrap_or_default();
        format!("builtin-rules-v1-dict{dict}")
    }

    fn count_errors(&self, text: &str) -> Result<usize> {
        Ok(self.check(text).len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(text: &str) -> Vec<GrammarRule> {
        RuleGrammarChecker::default()
            .check(text)
            .into_iter()
            .map(|m| m.rule)
            .collect()
    }

    #[test]
    fn clean_text_has_no_matches() {
        assert!(rules("The cat sat on the mat.").is_empty());
        assert!(rules("In 1990 the U.S. economy grew. John visited Vienna's museums.").is_empty());
        assert!(rules("It's a well-known fact that NASA launched an orbiter.").is_empty());
        assert!(rules("").is_empty());
    }

    #[test]
    fn doubled_word() {
        assert_eq!(rules("the the cat"), [GrammarRule::DoubledWord]);
        // separated by punctuation is fine
        assert!(rules("It was good, good enough.").is_empty());
    }

    #[test]
    fn article_agreement() {
        assert_eq!(rules("She ate an banana."), [GrammarRule::AAn]);
        assert_eq!(rules("She ate a apple."), [GrammarRule::AAn]);
        assert!(rules("He waited an hour for a university bus.").is_empty());
        assert!(rules("She is an FBI agent with a one-way ticket.").is_empty());
    }

    #[test]
    fn spelling() {
        assert_eq!(rules("We recieve mail."), [GrammarRule::Spelling]);
        // sentence-initial unknown words are checked, mid-sentence names are not
        assert_eq!(rules("Zorblax sat with Zorblax."), [GrammarRule::Spelling]);
    }

    #[test]
    fn additive_over_paragraphs() {
        let c = RuleGrammarChecker::default();
        let a = "The the cat definately sat.";
        let b = "He bought a apple and an banana.";
        let joined = format!("{a}\n\n{b}");
        assert_eq!(c.count_errors(&joined).unwrap(), c.count_errors(a).unwrap() + c.count_errors(b).unwrap());
    }
}
