//! Rule-based part-of-speech tagger over the 12-tag universal tagset.
//!
//! Lookup order: punctuation, tagger lexicon, numerals, suffix rules,
//! capitalised unknown word (proper noun), then `X`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lexicon::LexiconSet;
use super::segment::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 12] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Conj,
        PosTag::Prt,
        PosTag::Punct,
        PosTag::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Conj => "CONJ",
            PosTag::Prt => "PRT",
            PosTag::Punct => "PUNCT",
            PosTag::X => "X",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

// Checked in order; the first matching suffix wins.
const SUFFIX_RULES: &[(&str, PosTag)] = &[
    ("ly", PosTag::Adv),
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ism", PosTag::Noun),
    ("ist", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("hood", PosTag::Noun),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ize", PosTag::Verb),
    ("ise", PosTag::Verb),
    ("ized", PosTag::Verb),
    ("ised", PosTag::Verb),
    ("ify", PosTag::Verb),
    ("ed", PosTag::Verb),
    ("ing", PosTag::Verb),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ical", PosTag::Adj),
    ("ic", PosTag::Adj),
    ("al", PosTag::Adj),
    ("ish", PosTag::Adj),
];

fn tag_token(token: &Token, lex: &LexiconSet) -> PosTag {
    if !token.is_word {
        return PosTag::Punct;
    }
    if let Some(&tag) = lex.pos_lexicon.get(&token.lower) {
        return tag;
    }
    if token.lower.starts_with(|c: char| c.is_ascii_digit()) {
        return PosTag::Num;
    }
    let letters = token.lower.chars().count();
    for &(suffix, tag) in SUFFIX_RULES {
        if letters > suffix.len() + 2 && token.lower.ends_with(suffix) {
            return tag;
        }
    }
    if token.surface.starts_with(char::is_uppercase) {
        return PosTag::Noun;
    }
    PosTag::X
}

/// Tag one sentence. Deterministic and context-free per token.
pub fn pos_tag(sentence: &[Token], lex: &LexiconSet) -> Vec<PosTag> {
    sentence.iter().map(|t| tag_token(t, lex)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::segment::tokenize_span;

    fn tags(text: &str) -> Vec<PosTag> {
        pos_tag(&tokenize_span(text, 0), LexiconSet::bundled())
    }

    #[test]
    fn lexicon_lookup() {
        assert_eq!(tags("the dog runs"), [PosTag::Det, PosTag::Noun, PosTag::Verb]);
    }

    #[test]
    fn suffix_and_shape_rules() {
        assert_eq!(tags("quickly"), [PosTag::Adv]);
        assert_eq!(tags("."), [PosTag::Punct]);
        assert_eq!(tags("1990"), [PosTag::Num]);
        assert_eq!(
            tags("organization happiness modernized glorious"),
            [PosTag::Noun, PosTag::Noun, PosTag::Verb, PosTag::Adj]
        );
        assert_eq!(tags("Vienna zzq"), [PosTag::Noun, PosTag::X]);
    }

    #[test]
    fn tag_names_round_trip() {
        for tag in PosTag::ALL {
            assert_eq!(tag.as_str().parse::<PosTag>().unwrap(), tag);
        }
        assert!("NN".parse::<PosTag>().is_err());
    }
}
