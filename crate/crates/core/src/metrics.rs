//! Binary classification metrics: confusion matrix, per-class precision
//! and recall, ROC curve and AUC.
//!
//! Class 0 is female, class 1 is male. Predicted class is the argmax of the
//! two probabilities; an exact tie predicts male.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASS_NAMES: [&str; 2] = ["female", "male"];

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 2]; 2]);

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }
}

fn check_labels(values: &[u8], what: &str) -> Result<()> {
    match values.iter().position(|&v| v > 1) {
        Some(i) => Err(Error::Label(format!("{what}[{i}] = {} is not 0 or 1", values[i]))),
        None => Ok(()),
    }
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::shape(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    check_labels(labels, "labels")?;
    check_labels(predictions, "predictions")?;
    let mut cm = ConfusionMatrix::default();
    for (&a, &p) in labels.iter().zip(predictions) {
        cm.0[a as usize][p as usize] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Set when either ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) }
}

/// Precision and recall for female (index 0) and male (index 1).
pub fn precision_recall(cm: &ConfusionMatrix) -> [ClassMetrics; 2] {
    [0, 1].map(|c| {
        let column = cm.0[0][c] + cm.0[1][c];
        let row = cm.0[c][0] + cm.0[c][1];
        let (precision, dp) = ratio(cm.0[c][c], column);
        let (recall, dr) = ratio(cm.0[c][c], row);
        ClassMetrics { precision, recall, degenerate: dp || dr }
    })
}

/// ROC points `(false positive rate, true positive rate)` from `(0,0)` to
/// `(1,1)`, one step per distinct score, and the trapezoidal AUC.
/// `scores` are predicted probabilities of class 1.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(Vec<(f64, f64)>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    check_labels(labels, "labels")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Range("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc("need at least one sample of each class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of one positive × one negative
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 { tp += 1 } else { fp += 1 }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok((points, area2 as f64 / (2 * pos * neg) as f64))
}

/// Class-1 prediction under the argmax rule (ties go to class 1).
pub fn predict_class(p_female: f64, p_male: f64) -> u8 {
    u8::from(p_male >= p_female)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub female: ClassMetrics,
    pub male: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: PerClass,
    pub roc: Vec<(f64, f64)>,
    /// `None` when the evaluated set holds a single class.
    pub auc: Option<f64>,
}

impl EvalReport {
    /// Builds the full report from per-sample `[p_female, p_male]` rows.
    pub fn from_probs(probs: &[[f64; 2]], labels: &[u8]) -> Result<Self> {
        let preds: Vec<u8> = probs.iter().map(|p| predict_class(p[0], p[1])).collect();
        let cm = confusion(labels, &preds)?;
        let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let (roc, auc) = match roc_auc(&scores, labels) {
            Ok((roc, auc)) => (roc, Some(auc)),
            Err(Error::UndefinedAuc(_)) => (Vec::new(), None),
            Err(e) => return Err(e),
        };
        Ok(Self::from_parts(cm, roc, auc))
    }

    pub fn from_parts(cm: ConfusionMatrix, roc: Vec<(f64, f64)>, auc: Option<f64>) -> Self {
        let [female, male] = precision_recall(&cm);
        EvalReport {
            confusion: cm,
            accuracy: cm.accuracy(),
            per_class: PerClass { female, male },
            roc,
            auc,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn pct(x: f64) -> String {
    format!("{:.0}", x * 100.0)
}

/// Header of the comparison table: precision/recall per class, accuracy and
/// model size.
pub fn table_header() -> String {
    "| CNN Model | Female Precision | Female Recall | Male Precision | Male Recall | Accuracy | Model Parameters (M) |\n\
     |---|---|---|---|---|---|---|"
        .to_string()
}

/// One comparison-table row, rates as whole percentages.
pub fn table_row(model_name: &str, report: &EvalReport, params: usize) -> String {
    let pc = &report.per_class;
    format!(
        "| {} | {} | {} | {} | {} | {} | {:.2} |",
        model_name,
        pct(pc.female.precision),
        pct(pc.female.recall),
        pct(pc.male.precision),
        pct(pc.male.recall),
        pct(report.accuracy),
        params as f64 / 1e6
    )
}

/// Human-readable report: comparison row, confusion matrix and AUC.
pub fn render_report(model_name: &str, report: &EvalReport, params: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", table_header());
    let _ = writeln!(out, "{}", table_row(model_name, report, params));
    let cm = report.confusion.0;
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion (rows = actual, cols = predicted)");
    let _ = writeln!(out, "{:>8} {:>8} {:>8}", "", "female", "male");
    for (name, row) in CLASS_NAMES.iter().zip(cm) {
        let _ = writeln!(out, "{:>8} {:>8} {:>8}", name, row[0], row[1]);
    }
    match report.auc {
        Some(auc) => {
            let _ = writeln!(out, "AUC: {:.2}%", auc * 100.0);
        }
        None => {
            let _ = writeln!(out, "AUC: undefined (single class)");
        }
    }
    out
}
