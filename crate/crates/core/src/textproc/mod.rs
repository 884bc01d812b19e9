//! Deterministic segmentation and annotation shared by every feature.

pub mod lexicon;
pub mod pos;
pub mod segment;
pub mod syllables;

pub use lexicon::{LexiconSet, SentimentEntry};
pub use pos::{pos_tag, PosTag};
pub use segment::{structure, structure_with, Paragraph, Sentence, StructuredText, Token};
pub use syllables::count_syllables;
