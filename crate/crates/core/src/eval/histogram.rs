//! Per-class histograms of a single feature over shared bin edges.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::text::{TextProviders, TextTask};
use crate::corpus::{Klass, TextSample};
use crate::error::{Error, Result};
use crate::features::Selection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub feature: String,
    pub bin_low: f64,
    pub bin_high: f64,
    pub class: Klass,
    pub count: usize,
    /// Share of the class's samples that fall in this bin.
    pub fraction: f64,
}

/// `bins` equal-width bins spanning the pooled minimum and maximum; the last
/// bin is closed on the right. Only classes present in `values` get rows.
pub fn histogram(feature: &str, values: &[(Klass, f64)], bins: usize) -> Result<Vec<HistRow>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("histogram values"));
    }
    if let Some((_, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{feature} has non-finite value {v}")));
    }
    let lo = values.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let bin_of = |v: f64| {
        if width == 0.0 {
            0
        } else {
            (((v - lo) / width).floor() as usize).min(bins - 1)
        }
    };
    let mut counts: BTreeMap<Klass, Vec<usize>> = BTreeMap::new();
    for &(k, v) in values {
        counts.entry(k).or_insert_with(|| vec![0; bins])[bin_of(v)] += 1;
    }
    let edge = |i: usize| if i == bins { hi } else { lo + width * i as f64 };
    let mut rows = Vec::with_capacity(bins * counts.len());
    for b in 0..bins {
        for (&class, c) in &counts {
            let total: usize = c.iter().sum();
            rows.push(HistRow {
                feature: feature.to_string(),
                bin_low: edge(b),
                bin_high: edge(b + 1),
                class,
                count: c[b],
                fraction: c[b] as f64 / total as f64,
            });
        }
    }
    Ok(rows)
}

/// `feature,bin_low,bin_high,class,count,fraction`.
pub fn write_histogram_csv<W: Write>(out: W, rows: &[HistRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "bin_low", "bin_high", "class", "count", "fraction"])?;
    for r in rows {
        w.write_record([
            r.feature.as_str(),
            &r.bin_low.to_string(),
            &r.bin_high.to_string(),
            r.class.as_str(),
            &r.count.to_string(),
            &r.fraction.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("histogram csv", e))?;
    Ok(())
}

/// Values of one scalar feature for every sample. Fitted components (the
/// built-in language model) use all human samples as reference.
pub fn corpus_feature_values(
    samples: &[TextSample],
    feature: &str,
    providers: TextProviders<'_>,
) -> Result<Vec<(Klass, f64)>> {
    let schema = providers.schema();
    let desc = schema
        .features
        .iter()
        .find(|f| f.name == feature && f.arity == 1)
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    let selection = Selection {
        name: feature.to_string(),
        categories: [desc.category].into(),
        tags: [desc.tag].into(),
    };
    let position = schema
        .selected(&selection)
        .take_while(|f| f.name != feature)
        .map(|f| f.arity)
        .sum::<usize>();
    let labeled = samples
        .iter()
        .map(|s| (s.clone(), u8::from(s.klass != Klass::Human)))
        .collect();
    let task = TextTask::new("histogram", labeled, providers, selection)?;
    let all: Vec<String> = task.samples().iter().map(|s| s.id.clone()).collect();
    let fitted = task.fit(&all)?;
    let vectors = task.vectors(&fitted)?;
    Ok(task
        .samples()
        .iter()
        .zip(vectors)
        .map(|(s, v)| (s.klass, v.values[position]))
        .collect())
}
