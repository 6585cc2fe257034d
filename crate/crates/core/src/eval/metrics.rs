use serde::{Deserialize, Serialize};

use crate::corpus::Window;
use crate::model::{DecisionRule, FilmClassifier, TextEncoder};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// In class order.
    pub per_class: [ClassMetrics; 3],
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Rows are true labels, columns predicted labels.
    pub confusion: [[usize; 3]; 3],
    pub n: usize,
}

impl EvalReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from `(true, predicted)` pairs. Precision, recall and F1 are 0
/// when their denominator is 0.
pub fn evaluate_predictions(pairs: &[(Label, Label)]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut confusion = [[0usize; 3]; 3];
    for &(t, p) in pairs {
        confusion[t.index()][p.index()] += 1;
    }
    let per_class = Label::ALL.map(|label| {
        let k = label.index();
        let tp = confusion[k][k];
        let predicted: usize = (0..3).map(|i| confusion[i][k]).sum();
        let support: usize = confusion[k].iter().sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics { label, precision, recall, f1, support }
    });
    let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
    Ok(EvalReport {
        accuracy: ratio(correct, pairs.len()),
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0,
        per_class,
        confusion,
        n: pairs.len(),
    })
}

/// Classify every window with its own controls and score the result.
pub fn evaluate<E: TextEncoder>(
    model: &FilmClassifier<E>,
    windows: &[Window],
    rule: &DecisionRule,
) -> Result<EvalReport> {
    let pairs: Vec<(Label, Label)> = windows
        .iter()
        .map(|w| {
            let probs = model.forward(&model.prepare(&w.text), &w.dials());
            (w.label, rule.decide(probs).label)
        })
        .collect();
    evaluate_predictions(&pairs)
}
