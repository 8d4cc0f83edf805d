//! Comparison tables over finished runs.

use std::fs;
use std::path::{Path, PathBuf};

use super::run::RunRecord;
use super::{runtime, validation, Outcome};
use crate::alsac::train::SELECTION_RULE;
use crate::error::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub avg_cost_eur: f64,
    pub avg_violation_kwh: f64,
    pub episodes: usize,
}

pub fn rows_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("method,sigma,seed,avg_cost_eur,avg_violation_kwh,episodes\n");
    for r in rows {
        let sigma = r.sigma.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{sigma},{},{:.6},{:.6},{}\n",
            r.method, r.seed, r.avg_cost_eur, r.avg_violation_kwh, r.episodes
        ));
    }
    out
}

/// Aligned text rendering; numbers rounded to three decimals.
pub fn rows_text(rows: &[ComparisonRow], digest: &str) -> String {
    let header = ["method", "sigma", "seed", "avg cost (EUR)", "avg violation (kWh)"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                r.seed.to_string(),
                format!("{:.3}", r.avg_cost_eur),
                format!("{:.3}", r.avg_violation_kwh),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |row: &[String]| -> String {
        let mut s = format!("{:<w$}", row[0], w = widths[0]);
        for (c, w) in row.iter().zip(widths).skip(1) {
            s.push_str(&format!("  {c:>w$}"));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&format!(
        "{}\n",
        "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
    ));
    for row in &cells {
        out.push_str(&line(row));
    }
    let episodes = rows.first().map_or(0, |r| r.episodes);
    out.push_str(&format!(
        "\nevaluation data {} ({episodes} test episodes, deterministic policies)\nRL rows use the {SELECTION_RULE}\n",
        &digest[..digest.len().min(12)]
    ));
    out
}

/// Tabulates the given run manifests. The CSV goes to `out`, the aligned text
/// to a `.txt` sibling; the text is also returned.
pub fn compare(manifests: &[PathBuf], out: &Path) -> Outcome<String> {
    if manifests.is_empty() {
        return Err(validation(Error::InvalidConfig(
            "compare needs at least one manifest".into(),
        )));
    }
    let records = manifests
        .iter()
        .map(|p| RunRecord::load(p).map(|r| (p, r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(validation)?;

    let digest = records[0].1.eval_data_digest.clone();
    let mut rows = Vec::new();
    for (path, r) in &records {
        if r.eval_data_digest != digest {
            return Err(validation(Error::InvalidConfig(format!(
                "{} was evaluated on different data (digest {}) than {} (digest {})",
                path.display(),
                r.eval_data_digest,
                records[0].0.display(),
                digest
            ))));
        }
        let (Some(cost), Some(violation)) = (r.avg_cost_eur, r.avg_violation_kwh) else {
            return Err(validation(Error::InvalidConfig(format!(
                "{} has no evaluation metrics (status {})",
                path.display(),
                r.status
            ))));
        };
        rows.push(ComparisonRow {
            method: r.label.clone(),
            sigma: r.sigma,
            seed: r.seed,
            avg_cost_eur: cost,
            avg_violation_kwh: violation,
            episodes: r.eval_episodes,
        });
    }

    let text = rows_text(&rows, &digest);
    fs::write(out, rows_csv(&rows)).map_err(|e| runtime(Error::io(out, e)))?;
    let mut text_path = out.with_extension("txt");
    if text_path == out {
        text_path = out.with_extension("table.txt");
    }
    fs::write(&text_path, &text).map_err(|e| runtime(Error::io(&text_path, e)))?;
    Ok(text)
}
