//! Assembled metrics report with JSON and CSV serialization.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::roc::roc_auc;
use crate::metrics::{
    averages, macro_average, per_class_metrics, AverageSet, Averages, ConfusionMatrix,
    PerClassMetrics, Rate,
};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Mat;

/// Wall-clock echo of the evaluation that produced a report. Volatile
/// across runs, so it is kept out of the canonical JSON/CSV artifacts
/// and reported separately.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvalTiming {
    pub seconds: f64,
    pub ms_per_step: f64,
    pub steps: usize,
}

impl EvalTiming {
    /// `"<seconds> s (<ms> ms/step)"`.
    pub fn display_line(&self) -> String {
        format!("{:.2} s ({:.2} ms/step)", self.seconds, self.ms_per_step)
    }
}

/// Every computed metric for one evaluation run.
///
/// Serialization note: `to_json_string` / `to_csv_string` cover only the
/// deterministic content; timing is excluded so reports from identical
/// runs are byte-identical.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub accuracy: f64,
    pub per_class: Vec<PerClassMetrics>,
    pub macro_avg: AverageSet,
    pub micro_avg: AverageSet,
    pub weighted_avg: AverageSet,
    /// Mean of the per-class one-vs-rest MCC values.
    pub macro_mcc: f64,
    /// One-vs-rest AUC per class; `None` when undefined (a class with no
    /// positives or no negatives in the truth labels).
    pub per_class_auc: Vec<Option<f64>>,
    /// Confusion counts, rows = true class, columns = predicted.
    pub confusion: Vec<Vec<u64>>,
    #[serde(skip)]
    pub roc_curves: Vec<Option<Vec<(f64, f64)>>>,
    #[serde(skip)]
    pub timing: Option<EvalTiming>,
}

/// Build the complete report from truth labels, argmax predictions, and
/// the per-sample class-probability matrix.
pub fn full_report<T: Scalar>(
    y_true: &[usize],
    y_pred: &[usize],
    probabilities: &Mat<T>,
    class_names: Vec<String>,
    timing: Option<EvalTiming>,
) -> Result<MetricsReport> {
    let k = class_names.len();
    if probabilities.rows() != y_true.len() || probabilities.cols() != k {
        return Err(Error::Shape(format!(
            "probability matrix {}x{} vs {} samples / {k} classes",
            probabilities.rows(),
            probabilities.cols(),
            y_true.len()
        )));
    }
    let cm = ConfusionMatrix::with_names(y_true, y_pred, class_names.clone())?;
    let per_class = per_class_metrics(&cm);
    let Averages {
        macro_avg,
        micro_avg,
        weighted_avg,
    } = averages(&per_class, &cm);
    let mcc_rates: Vec<Rate> = per_class.iter().map(|m| m.mcc).collect();
    let macro_mcc = macro_average(&mcc_rates);

    let mut per_class_auc = Vec::with_capacity(k);
    let mut roc_curves = Vec::with_capacity(k);
    for c in 0..k {
        let scores: Vec<f64> = (0..y_true.len())
            .map(|i| probabilities[(i, c)].as_f64())
            .collect();
        let labels: Vec<bool> = y_true.iter().map(|&t| t == c).collect();
        match roc_auc(&scores, &labels) {
            Ok((points, auc)) => {
                per_class_auc.push(Some(auc));
                roc_curves.push(Some(points));
            }
            Err(_) => {
                per_class_auc.push(None);
                roc_curves.push(None);
            }
        }
    }

    Ok(MetricsReport {
        class_names,
        accuracy: cm.accuracy()?,
        per_class,
        macro_avg,
        micro_avg,
        weighted_avg,
        macro_mcc,
        per_class_auc,
        confusion: cm.rows(),
        roc_curves,
        timing,
    })
}

impl MetricsReport {
    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_rows(&self.confusion, self.class_names.clone())
    }

    /// Deterministic pretty JSON (timing excluded).
    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Flat CSV: one row per class plus macro/micro/weighted summary
    /// rows. For single-label multiclass data the micro row equals
    /// accuracy in all three of precision/recall/F1.
    pub fn to_csv_string(&self) -> String {
        fn cell(r: Rate) -> String {
            r.value.to_string()
        }
        let mut out = String::from(
            "row,support,precision,recall,f1,mcc,tnr,npv,fpr,fdr,for,fnr,auc\n",
        );
        for (m, auc) in self.per_class.iter().zip(&self.per_class_auc) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.class,
                m.support,
                cell(m.precision),
                cell(m.recall),
                cell(m.f1),
                cell(m.mcc),
                cell(m.stability.tnr),
                cell(m.stability.npv),
                cell(m.stability.fpr),
                cell(m.stability.fdr),
                cell(m.stability.for_rate),
                cell(m.stability.fnr),
                auc.map_or(String::new(), |a| a.to_string()),
            ));
        }
        let total: u64 = self.per_class.iter().map(|m| m.support).sum();
        for (name, set, mcc) in [
            ("macro_avg", &self.macro_avg, Some(self.macro_mcc)),
            ("micro_avg", &self.micro_avg, None),
            ("weighted_avg", &self.weighted_avg, None),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{},{},,,,,,,\n",
                name,
                total,
                set.precision,
                set.recall,
                set.f1,
                mcc.map_or(String::new(), |m| m.to_string()),
            ));
        }
        out
    }

    /// ROC points of one class as `fpr,tpr` CSV (None when the curve is
    /// undefined).
    pub fn roc_csv(&self, class_index: usize) -> Option<String> {
        self.roc_curves[class_index].as_ref().map(|points| {
            let mut out = String::from("fpr,tpr\n");
            for (fpr, tpr) in points {
                out.push_str(&format!("{fpr},{tpr}\n"));
            }
            out
        })
    }
}

impl ConfusionMatrix {
    /// Rebuild a matrix from serialized nested rows.
    pub fn from_rows(rows: &[Vec<u64>], class_names: Vec<String>) -> Result<Self> {
        let k = class_names.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape(format!("confusion rows are not {k}x{k}")));
        }
        // reconstruct through the label stream to reuse validation
        let mut y_true = Vec::new();
        let mut y_pred = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    y_true.push(i);
                    y_pred.push(j);
                }
            }
        }
        ConfusionMatrix::with_names(&y_true, &y_pred, class_names)
    }
}
