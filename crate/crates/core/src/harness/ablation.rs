//! Co-attention ablation runs on a held-out fold.

use serde::Serialize;

use super::{decide, evaluate_classification, explanation_scores, stratified_folds, ClassificationMetrics, ExplanationScores};
use crate::coattend::{train_on, CoAttendConfig, Mode};
use crate::corpus::{Corpus, Label};
use crate::error::Result;
use crate::synthgen::GroundTruthRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mode: Mode,
    pub seed: u64,
    pub best_epoch: usize,
    pub metrics: ClassificationMetrics,
    /// full mode only, when ground truth is available
    pub explanation: Option<ExplanationScores>,
}

/// For each seed, split the gold items into `n_folds` stratified folds, train
/// every mode in `modes` on all folds but the first, and score the first.
pub fn ablation_study(
    corpus: &Corpus,
    truth: Option<&[GroundTruthRecord]>,
    config: &CoAttendConfig,
    modes: &[Mode],
    seeds: &[u64],
    n_folds: usize,
    top_k: usize,
) -> Result<Vec<AblationRow>> {
    let gold = corpus.gold_labels();
    let mut rows = Vec::new();
    for &seed in seeds {
        let folds = stratified_folds(&gold, n_folds, seed)?;
        let test = &folds[0];
        let train: Vec<usize> = folds[1..].concat();
        let cfg = CoAttendConfig {
            seed,
            ..config.clone()
        };
        for &mode in modes {
            let (model, report) = train_on(corpus, Some(&train), &cfg, mode)?;
            let preds: Vec<Label> = test.iter().map(|&j| decide(model.predict(corpus, j))).collect();
            let expected: Vec<Label> = test.iter().map(|&j| gold[j].expect("fold items are labeled")).collect();
            let metrics = evaluate_classification(&preds, &expected)?;
            let explanation = match (mode, truth) {
                (Mode::Full, Some(t)) => Some(explanation_scores(&model, corpus, t, test, top_k)),
                _ => None,
            };
            log::info!("{mode} seed {seed}: f1 {:.3} accuracy {:.3}", metrics.f1, metrics.accuracy);
            rows.push(AblationRow {
                mode,
                seed,
                best_epoch: report.best_epoch,
                metrics,
                explanation,
            });
        }
    }
    Ok(rows)
}

/// Mean F1 of `mode` over the rows.
pub fn mean_f1(rows: &[AblationRow], mode: Mode) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter(|r| r.mode == mode).map(|r| r.metrics.f1).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
