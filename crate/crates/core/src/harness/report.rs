//! Result files: metrics table, run manifest and a static chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{AblationRow, ClassificationMetrics, MetricsRow, SweepResult};
use crate::error::Result;

pub const METRICS_HEADER: &str = "method,cutoff,seed,fold,accuracy,precision,recall,f1";

fn cutoff_label(c: Option<f64>) -> String {
    c.map_or_else(|| "all".to_string(), |h| h.to_string())
}

fn metrics_line(out: &mut String, method: &str, cutoff: Option<f64>, seed: u64, fold: usize, m: &ClassificationMetrics) {
    writeln!(
        out,
        "{method},{},{seed},{fold},{},{},{},{}",
        cutoff_label(cutoff),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1
    )
    .unwrap();
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        metrics_line(&mut out, r.method.name(), r.cutoff, r.seed, r.fold, &r.metrics);
    }
    out
}

/// Ablation rows in the metrics layout; the method column is
/// `defend_<mode>`, the cutoff is the full history and the fold is the
/// held-out one.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        metrics_line(&mut out, &format!("defend_{}", r.mode), None, r.seed, 0, &r.metrics);
    }
    out
}

pub const EXPLANATION_HEADER: &str = "seed,items,comment_ndcg,comment_ndcg_random,sentence_map,sentence_map_random";

pub fn explanation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(EXPLANATION_HEADER);
    out.push('\n');
    for r in rows {
        if let Some(e) = &r.explanation {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.seed, e.items, e.comment_ndcg, e.comment_ndcg_random, e.sentence_map, e.sentence_map_random
            )
            .unwrap();
        }
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    fs::write(path, metrics_csv(rows))?;
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// What a run did and on which inputs. No timestamps, so reruns match.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// input file name -> sha256
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    /// Record digests of every existing file among `paths`.
    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
        for p in paths {
            if p.is_file() {
                self.inputs.insert(p.display().to_string(), file_digest(p)?);
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Mean accuracy against cutoff, one polyline per sweep. The full-history
/// cutoff is drawn one grid step right of the last finite cutoff.
pub fn sweep_svg(sweeps: &[SweepResult]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let cutoffs: Vec<Option<f64>> = sweeps.first().map(|s| s.cutoffs.clone()).unwrap_or_default();
    let slots = cutoffs.len().max(2) as f64 - 1.0;
    let x_of = |i: usize| pad + (w - 2.0 * pad) * i as f64 / slots;
    let y_of = |acc: f64| h - pad - (h - 2.0 * pad) * acc;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - pad,
        w - pad,
        h - pad
    )
    .unwrap();
    writeln!(svg, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad).unwrap();
    for t in 0..=5 {
        let acc = t as f64 / 5.0;
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{acc:.1}</text>"#,
            pad - 6.0,
            y_of(acc) + 4.0
        )
        .unwrap();
    }
    for (i, c) in cutoffs.iter().enumerate() {
        let label = c.map_or_else(|| "all".to_string(), |v| format!("{v}h"));
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            x_of(i),
            h - pad + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">engagement cutoff</text>"#,
        w / 2.0,
        h - 8.0
    )
    .unwrap();
    writeln!(svg, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">accuracy</text>"#, h / 2.0, h / 2.0).unwrap();
    for (k, sweep) in sweeps.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = cutoffs
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| sweep.mean_accuracy(c).map(|a| format!("{:.2},{:.2}", x_of(i), y_of(a))))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            pad + 10.0,
            pad + 16.0 * (k as f64 + 1.0),
            sweep.method
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ClassificationMetrics, Method};

    fn row(cutoff: Option<f64>, acc_counts: (usize, usize, usize, usize)) -> MetricsRow {
        let (tp, fp, tn, fn_) = acc_counts;
        MetricsRow {
            method: Method::WeakOnly,
            cutoff,
            seed: 1,
            fold: 0,
            metrics: ClassificationMetrics::from_counts(tp, fp, tn, fn_),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = metrics_csv(&[row(Some(12.0), (1, 0, 1, 0)), row(None, (0, 1, 0, 1))]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "weak_only,12,1,0,1,1,1,1");
        assert_eq!(lines[2], "weak_only,all,1,0,0,0,0,0");
    }

    #[test]
    fn svg_has_one_line_per_sweep() {
        let sweep = SweepResult {
            method: Method::Trifn,
            cutoffs: vec![Some(12.0), None],
            rows: vec![row(Some(12.0), (1, 0, 1, 0)), row(None, (1, 1, 1, 1))],
        };
        let svg = sweep_svg(&[sweep.clone(), sweep]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">all<"));
    }
}
