//! Seeded synthetic data: a two-Gaussian oracle set and a small text corpus.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Category, Klass, TextSample, Variant};
use crate::ml::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub x: Matrix,
}

/// `n` samples in `d` dimensions, half per class, unit variance, class
/// centers at `-separation` and `+separation` on every axis.
pub fn two_gaussians(n: usize, d: usize, separation: f64, seed: u64) -> SyntheticSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i % 2 == 1);
        let center = if label == 1 { separation } else { -separation };
        data.extend((0..d).map(|_| center + normal.sample(&mut rng)));
        labels.push(label);
        ids.push(format!("s{i:05}"));
    }
    SyntheticSet {
        ids,
        labels,
        x: Matrix::new(n, d, data).expect("shape"),
    }
}

/// The standard oracle task: 200 samples, 5 dimensions, centers at ±2σ.
pub fn oracle_task(seed: u64) -> SyntheticSet {
    two_gaussians(200, 5, 2.0, seed)
}

const NOUNS: [&str; 24] = [
    "cell", "river", "market", "song", "law", "temple", "engine", "painting", "match", "protein",
    "border", "empire", "network", "choir", "vote", "ritual", "goal", "canvas", "molecule", "city",
    "server", "melody", "treaty", "stadium",
];
const ADJECTIVES: [&str; 16] = [
    "old", "large", "quiet", "rapid", "strange", "local", "famous", "simple", "bright", "heavy",
    "modern", "ancient", "small", "popular", "complex", "careful",
];
const VERBS: [&str; 16] = [
    "changed", "shaped", "followed", "supported", "replaced", "described", "joined", "crossed",
    "explained", "influenced", "protected", "divided", "built", "opened", "studied", "reached",
];
const MARKERS: [&str; 6] = ["Moreover", "Furthermore", "Additionally", "However", "Overall", "Consequently"];

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().expect("non-empty pool")
}

fn human_sentence(rng: &mut ChaCha8Rng) -> String {
    let (n1, n2, v, a) = (pick(rng, &NOUNS), pick(rng, &NOUNS), pick(rng, &VERBS), pick(rng, &ADJECTIVES));
    match rng.gen_range(0..6) {
        0 => format!("I remember when the {a} {n1} {v} our {n2}, and honestly it was a mess."),
        1 => format!("My teacher said \"the {n1} is {a}\" but I never believed her."),
        2 => format!("We saw it {v} the {n2}!"),
        3 => format!("The {n1} {v} the {a} {n2}  near the old road in {}.", rng.gen_range(1800..2000)),
        4 => format!("Nobody knows why the {n1} {v} the {n2}, do they?"),
        _ => format!("The {a} {n1} {v} a {n2}."),
    }
}

fn ai_sentence(rng: &mut ChaCha8Rng) -> String {
    let (n1, n2, v, a) = (pick(rng, &NOUNS), pick(rng, &NOUNS), pick(rng, &VERBS), pick(rng, &ADJECTIVES));
    let m = pick(rng, &MARKERS);
    match rng.gen_range(0..3) {
        0 => format!("{m}, the {a} {n1} significantly {v} the development of the {n2}."),
        1 => format!("The {n1} plays a crucial role in understanding the {a} {n2}."),
        _ => format!("{m}, it is important to note that the {n1} {v} the overall {n2}."),
    }
}

fn document(rng: &mut ChaCha8Rng, sentence: fn(&mut ChaCha8Rng) -> String, paragraphs: usize) -> String {
    (0..paragraphs)
        .map(|_| {
            let n = rng.gen_range(4..9);
            (0..n).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// A small seeded corpus with the same layout as the published one: for
/// each category and topic, one human text, basic and advanced AI texts,
/// and basic and advanced rephrasings. Human and AI texts are written from
/// different sentence templates, so every task is learnable.
pub fn text_corpus(topics_per_category: usize, seed: u64) -> Vec<TextSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &category in Category::ALL {
        for t in 0..topics_per_category {
            let title = format!("The {} of {}", pick(&mut rng, &NOUNS), pick(&mut rng, &NOUNS));
            let base = format!("{}-{t:02}", category.as_str());
            let human = document(&mut rng, human_sentence, 3);
            let variants = [
                (Klass::Human, Variant::None, human.clone()),
                (Klass::AiGenerated, Variant::Basic, document(&mut rng, ai_sentence, 3)),
                (Klass::AiGenerated, Variant::Advanced, document(&mut rng, ai_sentence, 4)),
                (Klass::AiRephrased, Variant::Basic, rephrase(&mut rng, &human)),
                (Klass::AiRephrased, Variant::Advanced, rephrase(&mut rng, &human)),
            ];
            for (klass, variant, body) in variants {
                out.push(TextSample {
                    id: format!("{base}-{}-{}", klass.as_str(), variant.as_str()),
                    category,
                    topic_title: title.clone(),
                    klass,
                    variant,
                    body,
                });
            }
        }
    }
    out
}

/// Every other sentence of `text` replaced by an AI-style sentence; quotes
/// and doubled blanks removed.
fn rephrase(rng: &mut ChaCha8Rng, text: &str) -> String {
    text.split("\n\n")
        .map(|para| {
            let human: Vec<String> = para
                .split_inclusive(['.', '!', '?'])
                .map(|s| s.trim().replace('"', "").replace("  ", " "))
                .filter(|s| !s.is_empty())
                .collect();
            human
                .into_iter()
                .enumerate()
                .map(|(i, s)| if i % 2 == 1 { ai_sentence(rng) } else { s })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_balance_and_centers() {
        let s = oracle_task(1);
        assert_eq!((s.x.rows(), s.x.cols()), (200, 5));
        assert_eq!(s.labels.iter().filter(|&&l| l == 1).count(), 100);
        for label in [0u8, 1] {
            let rows: Vec<usize> = (0..200).filter(|&r| s.labels[r] == label).collect();
            let mean = rows.iter().map(|&r| s.x.get(r, 0)).sum::<f64>() / rows.len() as f64;
            let want = if label == 1 { 2.0 } else { -2.0 };
            assert!((mean - want).abs() < 0.35, "class {label} mean {mean}");
        }
        assert_eq!(s, oracle_task(1));
        assert_ne!(s.x, oracle_task(2).x);
    }

    #[test]
    fn text_corpus_layout() {
        let c = text_corpus(2, 3);
        assert_eq!(c.len(), 10 * 2 * 5);
        assert_eq!(c.iter().filter(|s| s.klass == Klass::Human).count(), 20);
        assert!(c.iter().all(|s| !s.body.trim().is_empty()));
        assert_eq!(c, text_corpus(2, 3));
        let ids: std::collections::HashSet<&str> = c.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), c.len());
    }
}
