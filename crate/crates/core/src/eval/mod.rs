//! Pixel-level segmentation metrics, aggregation, and paired significance
//! testing.
//!
//! The iris is the positive class: a false positive is a pixel predicted as
//! iris that the ground truth marks as background.

mod report;
mod ttest;

pub use report::{read_records_csv, write_records_csv, RECORD_COLUMNS};
pub use ttest::{paired_t_test, student_t_two_sided_p, TTestResult, DEFAULT_ALPHA};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl PixelCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `tp / (tp + fp)`, undefined for an empty prediction.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, undefined for an empty ground truth.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Segmentation error: fraction of disagreeing pixels.
    pub fn error_rate(&self) -> f64 {
        (self.fp + self.fn_) as f64 / self.total() as f64
    }
}

impl std::ops::Add for PixelCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn same_dims(pred: &BinaryMask, truth: &BinaryMask) -> Result<()> {
    if pred.dims() == truth.dims() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )))
    }
}

pub fn confusion_counts(pred: &BinaryMask, truth: &BinaryMask) -> Result<PixelCounts> {
    same_dims(pred, truth)?;
    let mut c = PixelCounts::default();
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// Mean per-pixel XOR between prediction and ground truth.
pub fn segmentation_error(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    same_dims(pred, truth)?;
    let differing = pred
        .labels()
        .iter()
        .zip(truth.labels())
        .filter(|(p, t)| (**p ^ **t) == 1)
        .count();
    Ok(differing as f64 / pred.labels().len() as f64)
}

/// Harmonic mean of precision and recall; `None` when either is undefined
/// or both are zero.
pub fn f1_score(counts: &PixelCounts) -> Option<f64> {
    let p = counts.precision()?;
    let r = counts.recall()?;
    if p + r == 0.0 {
        None
    } else {
        Some(2.0 * p * r / (p + r))
    }
}

/// Metrics of one predicted mask against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: String,
    pub counts: PixelCounts,
    pub e: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl EvalRecord {
    pub fn from_counts(sample_id: impl Into<String>, counts: PixelCounts) -> Self {
        Self {
            sample_id: sample_id.into(),
            counts,
            e: counts.error_rate(),
            precision: counts.precision(),
            recall: counts.recall(),
            f1: f1_score(&counts),
        }
    }

    pub fn evaluate(sample_id: impl Into<String>, pred: &BinaryMask, truth: &BinaryMask) -> Result<Self> {
        Ok(Self::from_counts(sample_id, confusion_counts(pred, truth)?))
    }

    /// F1 with undefined scored as 0, the convention used in aggregates.
    pub fn f1_or_zero(&self) -> f64 {
        self.f1.unwrap_or(0.0)
    }
}

/// Mean and sample standard deviation of per-image E and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub n: usize,
    pub mean_e: f64,
    pub std_e: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    /// Images whose F1 was undefined and entered the statistics as 0.
    pub undefined_f1: Vec<String>,
}

pub fn aggregate(records: &[EvalRecord]) -> Result<AggregateResult> {
    if records.is_empty() {
        return Err(Error::Validation("cannot aggregate zero records".into()));
    }
    let es: Vec<f64> = records.iter().map(|r| r.e).collect();
    let f1s: Vec<f64> = records.iter().map(EvalRecord::f1_or_zero).collect();
    let (mean_e, std_e) = mean_std(&es);
    let (mean_f1, std_f1) = mean_std(&f1s);
    Ok(AggregateResult {
        n: records.len(),
        mean_e,
        std_e,
        mean_f1,
        std_f1,
        undefined_f1: records
            .iter()
            .filter(|r| r.f1.is_none())
            .map(|r| r.sample_id.clone())
            .collect(),
    })
}

/// Arithmetic mean and sample (n - 1) standard deviation; std is 0 for n = 1.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u8]]) -> BinaryMask {
        BinaryMask::from_rows(rows).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let ones = BinaryMask::filled(2, 2, 1);
        let zeros = BinaryMask::zeros(2, 2);
        let c = confusion_counts(&ones, &ones).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (4, 0, 0, 0));
        assert_eq!(confusion_counts(&ones, &zeros).unwrap().fp, 4);
        let c = confusion_counts(&m(&[&[1, 0], &[0, 0]]), &m(&[&[1, 1], &[0, 0]])).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 0, 2, 1));
    }

    #[test]
    fn error_examples() {
        let a = m(&[&[1, 0], &[0, 0]]);
        assert_eq!(segmentation_error(&a, &a).unwrap(), 0.0);
        assert_eq!(segmentation_error(&a, &a.complement()).unwrap(), 1.0);
        assert_eq!(segmentation_error(&a, &m(&[&[1, 1], &[0, 0]])).unwrap(), 0.25);
        assert!(matches!(
            segmentation_error(&a, &BinaryMask::zeros(3, 2)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn f1_examples() {
        let perfect = PixelCounts { tp: 4, ..Default::default() };
        assert_eq!(perfect.precision(), Some(1.0));
        assert_eq!(perfect.recall(), Some(1.0));
        assert_eq!(f1_score(&perfect), Some(1.0));
        let c = PixelCounts { tp: 2, fp: 1, tn: 0, fn_: 1 };
        assert!((f1_score(&c).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let empty_pred = PixelCounts { fn_: 5, ..Default::default() };
        assert_eq!(f1_score(&empty_pred), None);
    }

    #[test]
    fn aggregate_examples() {
        let rec = |id: &str, e: f64, f1: Option<f64>| EvalRecord {
            sample_id: id.into(),
            counts: PixelCounts::default(),
            e,
            precision: None,
            recall: None,
            f1,
        };
        let one = aggregate(&[rec("a", 0.25, Some(0.5))]).unwrap();
        assert_eq!((one.mean_e, one.std_e), (0.25, 0.0));

        let two = aggregate(&[rec("a", 0.1, Some(1.0)), rec("b", 0.3, Some(1.0))]).unwrap();
        assert!((two.mean_e - 0.2).abs() < 1e-15);
        assert!((two.std_e - 0.02f64.sqrt()).abs() < 1e-12);

        let undefined = aggregate(&[rec("a", 0.0, Some(1.0)), rec("b", 0.1, None)]).unwrap();
        assert_eq!(undefined.mean_f1, 0.5);
        assert_eq!(undefined.undefined_f1, vec!["b".to_string()]);

        assert!(aggregate(&[]).is_err());
    }
}
