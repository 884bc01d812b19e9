//! CSV and text renderings of evaluation reports.

use std::io::Write;

use super::EvalReport;
use crate::error::Result;
use crate::ml::ModelKind;

/// `task,selection,classifier,fold,acc,f1`, one row per fold.
pub fn write_report_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "selection", "classifier", "fold", "acc", "f1"])?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.task.as_str(),
                r.selection.as_str(),
                r.classifier.label(),
                &f.fold.to_string(),
                &f.acc.to_string(),
                &f.f1.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| crate::Error::io("report csv", e))?;
    Ok(())
}

/// Per-cell means and the configuration chosen in each fold.
pub fn write_summary_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "selection", "classifier", "mean_acc", "mean_f1", "params"])?;
    for r in reports {
        let params: Vec<String> = r.folds.iter().map(|f| f.params.to_string()).collect();
        w.write_record([
            r.task.as_str(),
            r.selection.as_str(),
            r.classifier.label(),
            &r.mean_acc.to_string(),
            &r.mean_f1.to_string(),
            &params.join("; "),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::io("summary csv", e))?;
    Ok(())
}

/// Fixed-width table with one row per selection and Acc/F1 columns per
/// classifier, in percent. The best F1 of each row is starred.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut kinds: Vec<ModelKind> = Vec::new();
    let mut rows: Vec<(&str, &str)> = Vec::new();
    for r in reports {
        if !kinds.contains(&r.classifier) {
            kinds.push(r.classifier);
        }
        if !rows.contains(&(r.task.as_str(), r.selection.as_str())) {
            rows.push((r.task.as_str(), r.selection.as_str()));
        }
    }
    let width = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max("Selection".len());
    let mut out = String::new();
    let mut task = "";
    for &(t, sel) in &rows {
        if t != task {
            if !task.is_empty() {
                out.push('\n');
            }
            task = t;
            out.push_str(&format!("Task: {t}\n{:<width$}", "Selection"));
            for k in &kinds {
                out.push_str(&format!(" | {:>7} {:>7}", format!("{k} Acc"), "F1"));
            }
            out.push('\n');
            out.push_str(&"-".repeat(width + kinds.len() * 18));
            out.push('\n');
        }
        let cells: Vec<Option<&EvalReport>> = kinds
            .iter()
            .map(|&k| {
                reports
                    .iter()
                    .find(|r| r.task == t && r.selection == sel && r.classifier == k)
            })
            .collect();
        let best = cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|r| (i, r.mean_f1)))
            .fold(None, |acc: Option<(usize, f64)>, (i, f)| match acc {
                Some((_, b)) if b >= f => acc,
                _ => Some((i, f)),
            })
            .map(|(i, _)| i);
        out.push_str(&format!("{sel:<width$}"));
        for (i, c) in cells.iter().enumerate() {
            match c {
                Some(r) => {
                    let star = if best == Some(i) { "*" } else { " " };
                    out.push_str(&format!(
                        " | {:>7.1} {:>6.1}{star}",
                        100.0 * r.mean_acc,
                        100.0 * r.mean_f1
                    ));
                }
                None => out.push_str(&format!(" | {:>7} {:>6} ", "-", "-")),
            }
        }
        out.push('\n');
    }
    out
}
