use crate::error::{Error, Result};

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Heuristic syllable count: maximal vowel groups (`aeiouy`), minus a silent
/// final `e` unless the word ends in consonant + `le`; never below 1.
///
/// Non-ASCII letters are ignored for vowel grouping. Errors when the word
/// has no letter at all.
pub fn count_syllables(word: &str) -> Result<usize> {
    if !word.chars().any(char::is_alphabetic) {
        return Err(Error::InvalidArgument(format!(
            "cannot count syllables of non-alphabetic `{word}`"
        )));
    }
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let mut groups = 0;
    let mut in_group = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    if groups > 1 && letters[n - 1] == 'e' {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        // `e` only forms its own group when preceded by a consonant
        if !consonant_le && !is_vowel(letters[n - 2]) {
            groups -= 1;
        }
    }
    Ok(groups.max(1))
}
