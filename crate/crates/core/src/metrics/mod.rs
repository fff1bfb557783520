//! Multiclass evaluation metrics.
//!
//! Everything derives from the confusion matrix by one-vs-rest
//! reduction: per-class precision/recall/F1 and MCC, the stability
//! family (TNR, NPV, FPR, FDR, FOR, FNR), accuracy, and macro / micro /
//! weighted averages. All ratios are computed in `f64` from integer
//! counts; zero-denominator cases are reported as `0.0` with an explicit
//! `defined: false` flag rather than NaN.

pub mod report;
pub mod roc;
pub mod svg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ratio metric plus a flag telling whether its denominator was
/// nonzero. Undefined values serialize as `0.0` with `defined: false`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub defined: bool,
}

impl Rate {
    pub fn defined(value: f64) -> Self {
        Rate {
            value,
            defined: true,
        }
    }

    pub fn undefined() -> Self {
        Rate {
            value: 0.0,
            defined: false,
        }
    }

    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Rate::undefined()
        } else {
            Rate::defined(num as f64 / den as f64)
        }
    }
}

/// K x K prediction counts; rows are true classes, columns predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
    class_names: Vec<String>,
}

/// One-vs-rest reduction of a confusion matrix for a single class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<Self> {
        Self::with_names(
            y_true,
            y_pred,
            (0..num_classes).map(|c| format!("class_{c}")).collect(),
        )
    }

    pub fn with_names(y_true: &[usize], y_pred: &[usize], class_names: Vec<String>) -> Result<Self> {
        let num_classes = class_names.len();
        if y_true.len() != y_pred.len() {
            return Err(Error::Shape(format!(
                "confusion matrix: {} true labels vs {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        let mut counts = vec![0u64; num_classes * num_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= num_classes || p >= num_classes {
                return Err(Error::Data(format!(
                    "label out of range: true {t}, predicted {p}, {num_classes} classes"
                )));
            }
            counts[t * num_classes + p] += 1;
        }
        Ok(ConfusionMatrix {
            num_classes,
            counts,
            class_names,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.num_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.count(c, c)).sum()
    }

    /// Samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        (0..self.num_classes).map(|j| self.count(c, j)).sum()
    }

    /// `TP = cm[c][c]`, `FP = column c - TP`, `FN = row c - TP`,
    /// `TN = total - TP - FP - FN`.
    pub fn one_vs_rest(&self, c: usize) -> BinaryCounts {
        let tp = self.count(c, c);
        let fp: u64 = (0..self.num_classes)
            .filter(|&i| i != c)
            .map(|i| self.count(i, c))
            .sum();
        let fn_: u64 = (0..self.num_classes)
            .filter(|&j| j != c)
            .map(|j| self.count(c, j))
            .sum();
        let tn = self.total() - tp - fp - fn_;
        BinaryCounts { tp, fp, fn_, tn }
    }

    /// Fraction of correctly classified samples (trace / total).
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Config("accuracy of an empty confusion matrix".into()));
        }
        Ok(self.trace() as f64 / total as f64)
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.num_classes)
            .map(|i| (0..self.num_classes).map(|j| self.count(i, j)).collect())
            .collect()
    }

    /// CSV grid: header of predicted-class names, one row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.num_classes {
            out.push_str(&self.class_names[i]);
            for j in 0..self.num_classes {
                out.push_str(&format!(",{}", self.count(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// Precision `TP/(TP+FP)`, recall `TP/(TP+FN)`, and their harmonic mean.
pub fn precision_recall_f1(tp: u64, fp: u64, fn_: u64) -> (Rate, Rate, Rate) {
    let precision = Rate::ratio(tp, tp + fp);
    let recall = Rate::ratio(tp, tp + fn_);
    let f1 = if precision.defined && recall.defined && precision.value + recall.value > 0.0 {
        Rate::defined(2.0 * precision.value * recall.value / (precision.value + recall.value))
    } else if precision.defined && recall.defined {
        // both are 0: harmonic mean degenerates to 0
        Rate::defined(0.0)
    } else {
        Rate::undefined()
    };
    (precision, recall, f1)
}

/// Matthews correlation coefficient,
/// `((TP*TN) - (FP*FN)) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))`,
/// computed in 128-bit integer / 64-bit float arithmetic so it cannot
/// overflow at dataset scale.
pub fn mcc(tp: u64, fp: u64, fn_: u64, tn: u64) -> Rate {
    let num = (tp as i128 * tn as i128 - fp as i128 * fn_ as i128) as f64;
    let d1 = (tp + fp) as f64;
    let d2 = (tp + fn_) as f64;
    let d3 = (tn + fp) as f64;
    let d4 = (tn + fn_) as f64;
    let den = (d1 * d2 * d3 * d4).sqrt();
    if den == 0.0 {
        Rate::undefined()
    } else {
        Rate::defined(num / den)
    }
}

/// The per-class stability family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityMetrics {
    pub tnr: Rate,
    pub npv: Rate,
    pub fpr: Rate,
    pub fdr: Rate,
    pub for_rate: Rate,
    pub fnr: Rate,
}

/// `TNR = TN/(TN+FP)`, `NPV = TN/(TN+FN)`, `FPR = FP/(FP+TN)`,
/// `FDR = FP/(FP+TP)`, `FOR = FN/(FN+TN)`, `FNR = FN/(FN+TP)`.
pub fn stability_metrics(tp: u64, fp: u64, fn_: u64, tn: u64) -> StabilityMetrics {
    StabilityMetrics {
        tnr: Rate::ratio(tn, tn + fp),
        npv: Rate::ratio(tn, tn + fn_),
        fpr: Rate::ratio(fp, fp + tn),
        fdr: Rate::ratio(fp, fp + tp),
        for_rate: Rate::ratio(fn_, fn_ + tn),
        fnr: Rate::ratio(fn_, fn_ + tp),
    }
}

/// Everything the report carries for a single class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub class: String,
    pub support: u64,
    pub precision: Rate,
    pub recall: Rate,
    pub f1: Rate,
    pub mcc: Rate,
    #[serde(flatten)]
    pub stability: StabilityMetrics,
}

/// Compute the per-class metric block for every class of the matrix.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<PerClassMetrics> {
    (0..cm.num_classes())
        .map(|c| {
            let BinaryCounts { tp, fp, fn_, tn } = cm.one_vs_rest(c);
            let (precision, recall, f1) = precision_recall_f1(tp, fp, fn_);
            PerClassMetrics {
                class: cm.class_names()[c].clone(),
                support: cm.support(c),
                precision,
                recall,
                f1,
                mcc: mcc(tp, fp, fn_, tn),
                stability: stability_metrics(tp, fp, fn_, tn),
            }
        })
        .collect()
}

/// Macro / micro / weighted precision, recall, and F1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub macro_avg: AverageSet,
    pub micro_avg: AverageSet,
    pub weighted_avg: AverageSet,
}

/// Unweighted mean over classes (flagged-undefined values enter as 0.0).
pub fn macro_average(values: &[Rate]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|r| r.value).sum::<f64>() / values.len() as f64
}

/// Support-weighted mean over classes.
pub fn weighted_average(values: &[Rate], supports: &[u64]) -> f64 {
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return 0.0;
    }
    values
        .iter()
        .zip(supports)
        .map(|(r, &s)| r.value * s as f64)
        .sum::<f64>()
        / total as f64
}

/// Macro, micro, and weighted averages of precision/recall/F1.
/// Micro pools TP/FP/FN globally; for single-label multiclass data the
/// micro precision, recall, and F1 all equal accuracy.
pub fn averages(per_class: &[PerClassMetrics], cm: &ConfusionMatrix) -> Averages {
    let precisions: Vec<Rate> = per_class.iter().map(|m| m.precision).collect();
    let recalls: Vec<Rate> = per_class.iter().map(|m| m.recall).collect();
    let f1s: Vec<Rate> = per_class.iter().map(|m| m.f1).collect();
    let supports: Vec<u64> = per_class.iter().map(|m| m.support).collect();

    let (mut tp_pool, mut fp_pool, mut fn_pool) = (0u64, 0u64, 0u64);
    for c in 0..cm.num_classes() {
        let b = cm.one_vs_rest(c);
        tp_pool += b.tp;
        fp_pool += b.fp;
        fn_pool += b.fn_;
    }
    let (micro_p, micro_r, micro_f1) = precision_recall_f1(tp_pool, fp_pool, fn_pool);

    Averages {
        macro_avg: AverageSet {
            precision: macro_average(&precisions),
            recall: macro_average(&recalls),
            f1: macro_average(&f1s),
        },
        micro_avg: AverageSet {
            precision: micro_p.value,
            recall: micro_r.value,
            f1: micro_f1.value,
        },
        weighted_avg: AverageSet {
            precision: weighted_average(&precisions, &supports),
            recall: weighted_average(&recalls, &supports),
            f1: weighted_average(&f1s, &supports),
        },
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn labels(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        proptest::collection::vec((0..k, 0..k), 1..200)
            .prop_map(|pairs| pairs.into_iter().unzip())
    }

    proptest! {
        /// Relabeling classes by a permutation permutes the per-class
        /// metrics and leaves accuracy and macro/micro averages alone.
        #[test]
        fn permutation_invariance(
            (y_true, y_pred) in labels(5),
            perm_seed in 0u64..1000,
        ) {
            let k = 5;
            let mut perm: Vec<usize> = (0..k).collect();
            crate::rng::SplitMix64::new(perm_seed).shuffle(&mut perm);

            let cm = ConfusionMatrix::from_predictions(&y_true, &y_pred, k).unwrap();
            let pc = per_class_metrics(&cm);
            let avg = averages(&pc, &cm);

            let t2: Vec<usize> = y_true.iter().map(|&l| perm[l]).collect();
            let p2: Vec<usize> = y_pred.iter().map(|&l| perm[l]).collect();
            let cm2 = ConfusionMatrix::from_predictions(&t2, &p2, k).unwrap();
            let pc2 = per_class_metrics(&cm2);
            let avg2 = averages(&pc2, &cm2);

            prop_assert_eq!(cm.accuracy().unwrap(), cm2.accuracy().unwrap());
            for c in 0..k {
                prop_assert_eq!(pc[c].precision, pc2[perm[c]].precision);
                prop_assert_eq!(pc[c].recall, pc2[perm[c]].recall);
                prop_assert_eq!(pc[c].f1, pc2[perm[c]].f1);
                prop_assert_eq!(pc[c].mcc, pc2[perm[c]].mcc);
                prop_assert_eq!(pc[c].support, pc2[perm[c]].support);
            }
            prop_assert!((avg.macro_avg.f1 - avg2.macro_avg.f1).abs() < 1e-12);
            prop_assert!((avg.micro_avg.f1 - avg2.micro_avg.f1).abs() < 1e-12);
            prop_assert!((avg.macro_avg.precision - avg2.macro_avg.precision).abs() < 1e-12);
        }

        /// TNR+FPR = 1, FNR+recall = 1, FDR+precision = 1, FOR+NPV = 1
        /// whenever the denominators are positive.
        #[test]
        fn complement_identities(
            tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500,
        ) {
            let s = stability_metrics(tp, fp, fn_, tn);
            let (p, r, _) = precision_recall_f1(tp, fp, fn_);
            if tn + fp > 0 {
                prop_assert!((s.tnr.value + s.fpr.value - 1.0).abs() < 1e-12);
            }
            if tp + fn_ > 0 {
                prop_assert!((s.fnr.value + r.value - 1.0).abs() < 1e-12);
            }
            if tp + fp > 0 {
                prop_assert!((s.fdr.value + p.value - 1.0).abs() < 1e-12);
            }
            if tn + fn_ > 0 {
                prop_assert!((s.for_rate.value + s.npv.value - 1.0).abs() < 1e-12);
            }
        }
    }
}
