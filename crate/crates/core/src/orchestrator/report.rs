// SPDX-License-Identifier: Apache-2.0
//! Report emission: per-round CSV, best-encodings JSON, an SVG chart of the
//! min/mean curves, and Verilog export of the top designs.

use super::config::{DesignChoice, TargetMetric};
use super::runner::{design_kind, LoopReport};
use super::store::DatasetStore;
use crate::design::export_verilog;
use crate::qor::QorRecord;
use serde::Serialize;
use std::path::Path;

/// Per-round CSV: `round,min,mean,count` with round 0 being the initial
/// dataset.
pub fn rounds_csv(report: &LoopReport) -> String {
    let mut csv = String::from("round,min,mean,count\n");
    for r in &report.rounds {
        csv.push_str(&format!("{},{},{},{}\n", r.round, r.min, r.mean, r.count));
    }
    csv
}

#[derive(Serialize)]
struct BestEntry<'a> {
    rank: usize,
    record: &'a QorRecord,
}

/// JSON of the best `k` records under the target metric.
pub fn best_json(store: &DatasetStore, target: TargetMetric, k: usize) -> String {
    let mut ranked: Vec<&QorRecord> =
        store.records().iter().filter(|r| r.metric(target).is_some()).collect();
    ranked.sort_by(|a, b| a.metric(target).unwrap().total_cmp(&b.metric(target).unwrap()));
    ranked.truncate(k);
    let entries: Vec<BestEntry> = ranked
        .into_iter()
        .enumerate()
        .map(|(i, record)| BestEntry { rank: i + 1, record })
        .collect();
    serde_json::to_string_pretty(&entries).expect("serializable records")
}

/// Minimal line chart of per-round min and mean as an SVG document.
pub fn chart_svg(report: &LoopReport) -> String {
    let (w, h, pad) = (640.0, 400.0, 48.0);
    let rounds: Vec<f64> = report.rounds.iter().map(|r| r.round as f64).collect();
    let mins: Vec<f64> = report.rounds.iter().map(|r| r.min).collect();
    let means: Vec<f64> = report.rounds.iter().map(|r| r.mean).collect();
    let x_max = rounds.last().copied().unwrap_or(1.0).max(1.0);
    let y_min = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_span = (y_max - y_min).max(1e-9);
    let x = |r: f64| pad + (w - 2.0 * pad) * r / x_max;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - y_min) / y_span;
    let polyline = |vals: &[f64], color: &str| {
        let points: Vec<String> = rounds
            .iter()
            .zip(vals)
            .map(|(&r, &v)| format!("{:.2},{:.2}", x(r), y(v)))
            .collect();
        format!(
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        )
    };
    format!(
        concat!(
            r#"<?xml version="1.0" encoding="UTF-8"?>"#,
            "\n",
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            "\n",
            r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r#"<line x1="{pad}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
            "\n",
            r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{y0}" stroke="black"/>"#,
            "\n{min_line}\n{mean_line}\n",
            r#"<text x="{pad}" y="24" font-family="monospace" font-size="14">min (dark) / mean (light) per round; y: {ymin:.1}..{ymax:.1}</text>"#,
            "\n</svg>\n"
        ),
        w = w,
        h = h,
        pad = pad,
        y0 = h - pad,
        x1 = w - pad,
        min_line = polyline(&mins, "#1a4f8b"),
        mean_line = polyline(&means, "#7fb2e5"),
        ymin = y_min,
        ymax = y_max,
    )
}

/// Writes the full report set into `dir`: rounds.csv, best.json, chart.svg,
/// journal.jsonl and Verilog for the top `top_k` designs.
pub fn emit(
    store: &DatasetStore,
    report: &LoopReport,
    design: &DesignChoice,
    target: TargetMetric,
    dir: &Path,
    top_k: usize,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("rounds.csv"), rounds_csv(report))?;
    std::fs::write(dir.join("best.json"), best_json(store, target, top_k))?;
    std::fs::write(dir.join("chart.svg"), chart_svg(report))?;
    store.write_journal(&dir.join("journal.jsonl"))?;

    let kind = design_kind(design);
    let mut ranked: Vec<&QorRecord> =
        store.records().iter().filter(|r| r.metric(target).is_some()).collect();
    ranked.sort_by(|a, b| a.metric(target).unwrap().total_cmp(&b.metric(target).unwrap()));
    for (i, record) in ranked.iter().take(top_k).enumerate() {
        let table = kind
            .truth_table(&record.encoding)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        let name = format!("design_rank{}", i + 1);
        std::fs::write(dir.join(format!("{name}.v")), export_verilog(&table, &name))?;
    }
    Ok(())
}
