//! Trained pipeline on disk: the classifier plus everything needed to
//! featurize a new document the same way, and the training matrix used to
//! explain predictions.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stylodetect::corpus::TaskName;
use stylodetect::features::Selection;
use stylodetect::lm::NGramModel;
use stylodetect::ml::SavedModel;
use stylodetect::vectorize::TfidfModel;

pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineFile {
    pub version: u32,
    pub task: TaskName,
    pub selection: String,
    pub schema_id: String,
    pub tfidf_dim: usize,
    pub embedding_dim: usize,
    pub columns: Vec<String>,
    pub seed: u64,
    pub split_seed: u64,
    /// Perplexity source the features were computed with.
    pub perplexity: String,
    /// Sibling files, relative to the pipeline file.
    pub tfidf_file: Option<String>,
    pub lm_file: Option<String>,
    pub features_file: String,
    pub classifier: SavedModel,
}

/// A loaded pipeline with its fitted components.
pub struct Pipeline {
    pub file: PipelineFile,
    pub selection: Selection,
    pub tfidf: Option<TfidfModel>,
    pub lm: Option<NGramModel>,
    pub features: PathBuf,
}

fn sibling(base: &Path, name: &str) -> PathBuf {
    base.parent().unwrap_or(Path::new(".")).join(name)
}

impl Pipeline {
    pub fn load(path: &Path) -> anyhow::Result<Pipeline> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read model {}", path.display()))?;
        let file: PipelineFile = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a stylodetect model file", path.display()))?;
        if file.version != PIPELINE_VERSION {
            anyhow::bail!(
                "model file version {} is not supported (expected {PIPELINE_VERSION})",
                file.version
            );
        }
        let selection: Selection = file.selection.parse()?;
        let read = |name: &str| -> anyhow::Result<String> {
            let p = sibling(path, name);
            std::fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))
        };
        let tfidf = file.tfidf_file.as_deref().map(|n| read(n).and_then(|t| Ok(TfidfModel::from_json(&t)?))).transpose()?;
        let lm = file.lm_file.as_deref().map(|n| read(n).and_then(|t| Ok(NGramModel::from_json(&t)?))).transpose()?;
        let features = sibling(path, &file.features_file);
        Ok(Pipeline {
            file,
            selection,
            tfidf,
            lm,
            features,
        })
    }
}

/// Mid-rank percentile of `v` in `sample`: the share strictly below plus
/// half the share equal, times 100. `None` for an empty sample.
pub fn percentile(sample: &[f64], v: f64) -> Option<f64> {
    if sample.is_empty() {
        return None;
    }
    let below = sample.iter().filter(|&&x| x < v).count() as f64;
    let equal = sample.iter().filter(|&&x| x == v).count() as f64;
    Some(100.0 * (below + 0.5 * equal) / sample.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_rank_percentiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 0.0), Some(0.0));
        assert_eq!(percentile(&s, 5.0), Some(100.0));
        assert_eq!(percentile(&s, 2.0), Some(37.5));
        assert_eq!(percentile(&s, 2.5), Some(50.0));
        assert_eq!(percentile(&[7.0; 3], 7.0), Some(50.0));
        assert_eq!(percentile(&[], 1.0), None);
    }
}
