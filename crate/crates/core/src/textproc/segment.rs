//! Paragraph, sentence and token segmentation.
//!
//! Rules:
//! - paragraphs are separated by one or more blank (whitespace-only) lines;
//! - a sentence ends after `.`, `!` or `?` (plus any closing quotes or
//!   brackets) when whitespace follows and the next token starts with an
//!   uppercase letter or a digit, possibly behind an opening quote/bracket;
//!   a `.` that completes a listed abbreviation or a single-capital initial
//!   never ends a sentence;
//! - a paragraph end always ends the current sentence;
//! - word tokens are maximal alphanumeric runs that may contain inner
//!   apostrophes, hyphens and periods (`don't`, `well-known`, `U.S`) and
//!   digit-group commas (`1,000`); every other non-space character is a
//!   one-character punctuation token.

use serde::{Deserialize, Serialize};

use super::lexicon::LexiconSet;
use super::pos::{pos_tag, PosTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    /// Byte range of the token in the source text.
    pub span: (usize, usize),
    pub is_word: bool,
    pub pos: PosTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word)
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    pub fn span(&self) -> (usize, usize) {
        (
            self.tokens.first().map_or(0, |t| t.span.0),
            self.tokens.last().map_or(0, |t| t.span.1),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub sentences: Vec<Sentence>,
}

/// A document decomposed into paragraphs, sentences and annotated tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredText {
    pub text: String,
    pub paragraphs: Vec<Paragraph>,
}

impl StructuredText {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flat_map(|p| p.sentences.iter())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences().flat_map(|s| s.tokens.iter())
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens().filter(|t| t.is_word)
    }

    pub fn paragraph_count(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences().count()
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }

    /// Source text of one sentence.
    pub fn sentence_text(&self, sentence: &Sentence) -> &str {
        let (start, end) = sentence.span();
        &self.text[start..end]
    }
}

/// Segment `text` with the bundled lexicons.
pub fn structure(text: &str) -> Result<StructuredText> {
    structure_with(text, LexiconSet::bundled())
}

/// Segment and POS-tag `text` using the abbreviation list and tagger
/// lexicon from `lex`.
pub fn structure_with(text: &str, lex: &LexiconSet) -> Result<StructuredText> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("text"));
    }
    let mut paragraphs = Vec::new();
    for (start, end) in paragraph_spans(text) {
        let tokens = tokenize_span(&text[start..end], start);
        let mut sentences: Vec<Sentence> = split_sentences(tokens, text, lex)
            .into_iter()
            .map(|tokens| Sentence { tokens })
            .collect();
        for sentence in &mut sentences {
            let tags = pos_tag(&sentence.tokens, lex);
            for (tok, tag) in sentence.tokens.iter_mut().zip(tags) {
                tok.pos = tag;
            }
        }
        paragraphs.push(Paragraph { sentences });
    }
    Ok(StructuredText {
        text: text.to_string(),
        paragraphs,
    })
}

/// Byte spans of the non-blank line groups of `text`.
pub fn paragraph_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            if let Some(span) = current.take() {
                spans.push(span);
            }
            continue;
        }
        let end = start + content.trim_end().len();
        let first = start + (content.len() - content.trim_start().len());
        current = Some(match current {
            Some((s, _)) => (s, end),
            None => (first, end),
        });
    }
    if let Some(span) = current {
        spans.push(span);
    }
    spans
}

fn is_inner_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '.')
}

/// Tokenize a slice whose first byte sits at `base` in the full text.
pub fn tokenize_span(text: &str, base: usize) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                    continue;
                }
                let next = chars.get(j + 1).map(|&(_, n)| n);
                let prev = chars[j - 1].1;
                let joins = match next {
                    Some(n) if n.is_alphanumeric() => {
                        is_inner_joiner(cj) || (cj == ',' && prev.is_ascii_digit() && n.is_ascii_digit())
                    }
                    _ => false,
                };
                if joins {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            tokens.push(make_token(&text[start..end], base + start, base + end, true));
            i = j;
        } else {
            let end = start + c.len_utf8();
            tokens.push(make_token(&text[start..end], base + start, base + end, false));
            i += 1;
        }
    }
    tokens
}

fn make_token(surface: &str, start: usize, end: usize, is_word: bool) -> Token {
    Token {
        surface: surface.to_string(),
        lower: surface.to_lowercase(),
        span: (start, end),
        is_word,
        pos: PosTag::X,
    }
}

fn is_terminator(t: &Token) -> bool {
    matches!(t.surface.as_str(), "." | "!" | "?")
}

fn is_closer(t: &Token) -> bool {
    matches!(
        t.surface.as_str(),
        "\"" | "'" | ")" | "]" | "\u{201D}" | "\u{2019}" | "\u{BB}"
    )
}

fn is_opener(t: &Token) -> bool {
    matches!(
        t.surface.as_str(),
        "\"" | "'" | "(" | "[" | "\u{201C}" | "\u{2018}" | "\u{AB}"
    )
}

fn starts_sentence(t: &Token) -> bool {
    t.surface
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

fn ends_abbreviation(tokens: &[Token], dot: usize, lex: &LexiconSet) -> bool {
    if dot == 0 || tokens[dot].surface != "." {
        return false;
    }
    let prev = &tokens[dot - 1];
    if !prev.is_word || prev.span.1 != tokens[dot].span.0 {
        return false;
    }
    let mut chars = prev.surface.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_uppercase() {
            return true;
        }
    }
    lex.abbreviations.contains(&format!("{}.", prev.lower))
}

fn split_sentences(tokens: Vec<Token>, text: &str, lex: &LexiconSet) -> Vec<Vec<Token>> {
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !is_terminator(&tokens[i]) {
            i += 1;
            continue;
        }
        let term = i;
        let mut j = i + 1;
        while j < tokens.len() && (is_terminator(&tokens[j]) || is_closer(&tokens[j])) {
            // closers only attach when glued to the terminator run
            if tokens[j].span.0 != tokens[j - 1].span.1 {
                break;
            }
            j += 1;
        }
        if j >= tokens.len() {
            break;
        }
        let gap = &text[tokens[j - 1].span.1..tokens[j].span.0];
        let spaced = !gap.is_empty() && gap.chars().all(char::is_whitespace);
        let next_ok = starts_sentence(&tokens[j])
            || (is_opener(&tokens[j]) && tokens.get(j + 1).is_some_and(starts_sentence));
        if spaced && next_ok && !ends_abbreviation(&tokens, term, lex) {
            cuts.push(j);
        }
        i = j;
    }
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut rest = tokens;
    for cut in cuts.into_iter().rev() {
        let tail = rest.split_off(cut);
        out.push(tail);
    }
    if !rest.is_empty() {
        out.push(rest);
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word_surfaces(doc: &StructuredText) -> Vec<&str> {
        doc.words().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn two_sentences_one_paragraph() {
        let doc = structure("Hello world. Bye.").unwrap();
        assert_eq!(doc.paragraph_count(), 1);
        assert_eq!(doc.sentence_count(), 2);
        assert_eq!(word_surfaces(&doc), ["Hello", "world", "Bye"]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        let doc = structure("Dr. Smith left.").unwrap();
        assert_eq!(doc.sentence_count(), 1);
        let doc = structure("Fruit, e.g. Apples, are sweet. Yes.").unwrap();
        assert_eq!(doc.sentence_count(), 2);
    }

    #[test]
    fn blank_line_separates_paragraphs() {
        let doc = structure("A.\n\nB.").unwrap();
        assert_eq!(doc.paragraph_count(), 2);
        let doc = structure("A.\n   \n\n\nBee.\nC continues.").unwrap();
        assert_eq!(doc.paragraph_count(), 2);
        assert_eq!(doc.sentence_count(), 3);
    }

    #[test]
    fn lowercase_continuation_is_not_a_boundary() {
        let doc = structure("It cost 3.5 dollars. it was cheap.").unwrap();
        assert_eq!(doc.sentence_count(), 1);
        assert!(word_surfaces(&doc).contains(&"3.5"));
    }

    #[test]
    fn closing_quote_stays_with_its_sentence() {
        let doc = structure("He said \"Stop.\" Then he left! Why? 1990 came.").unwrap();
        let sents: Vec<&str> = doc.sentences().map(|s| doc.sentence_text(s)).collect();
        assert_eq!(sents, ["He said \"Stop.\"", "Then he left!", "Why?", "1990 came."]);
    }

    #[test]
    fn word_shapes() {
        let doc = structure("Don't re-use 1,000 U.S. items (ok).").unwrap();
        assert_eq!(
            word_surfaces(&doc),
            ["Don't", "re-use", "1,000", "U.S", "items", "ok"]
        );
        let punct: Vec<&str> = doc
            .tokens()
            .filter(|t| !t.is_word)
            .map(|t| t.surface.as_str())
            .collect();
        assert_eq!(punct, [".", "(", ")", "."]);
    }

    #[test]
    fn spans_reconstruct_source() {
        let text = "  Vienna, the capital.\n\n\"Quoted\" text -- here?  Yes!\n";
        let doc = structure(text).unwrap();
        let mut rebuilt = String::new();
        let mut last = 0;
        for t in doc.tokens() {
            rebuilt.push_str(&text[last..t.span.0]);
            rebuilt.push_str(&t.surface);
            last = t.span.1;
        }
        rebuilt.push_str(&text[last..]);
        assert_eq!(rebuilt, text);
    }

    #[test]
    fn empty_text_is_an_error() {
        assert!(matches!(structure("  \n\n "), Err(Error::EmptyInput(_))));
    }
}
