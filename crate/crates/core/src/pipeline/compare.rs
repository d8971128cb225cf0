use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{paired_t_test, EvalRecord, TTestResult, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ABetter,
    BBetter,
    NoSignificantDifference,
}

/// Paired tests of two methods over the same test images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodComparison {
    pub n: usize,
    /// Test on per-image E, differences `a - b`.
    pub e: TTestResult,
    /// Test on per-image F1 (undefined scored 0), differences `a - b`.
    pub f1: TTestResult,
    /// Lower E wins.
    pub e_verdict: Verdict,
    /// Higher F1 wins.
    pub f1_verdict: Verdict,
}

fn verdict(t: &TTestResult, a_wins_when_positive: bool) -> Verdict {
    if !t.significant || t.mean_difference == 0.0 {
        Verdict::NoSignificantDifference
    } else if (t.mean_difference > 0.0) == a_wins_when_positive {
        Verdict::ABetter
    } else {
        Verdict::BBetter
    }
}

/// Pairs the records by sample id and runs two-sided paired t-tests at
/// alpha 0.05 on E and on F1.
pub fn compare_methods(records_a: &[EvalRecord], records_b: &[EvalRecord]) -> Result<MethodComparison> {
    compare_methods_at(records_a, records_b, DEFAULT_ALPHA)
}

pub fn compare_methods_at(records_a: &[EvalRecord], records_b: &[EvalRecord], alpha: f64) -> Result<MethodComparison> {
    let index = |records: &[EvalRecord], which: &str| -> Result<BTreeMap<String, (f64, f64)>> {
        let mut map = BTreeMap::new();
        for r in records {
            if map.insert(r.sample_id.clone(), (r.e, r.f1_or_zero())).is_some() {
                return Err(Error::Validation(format!("duplicate sample id `{}` in {which}", r.sample_id)));
            }
        }
        Ok(map)
    };
    let a = index(records_a, "first record set")?;
    let b = index(records_b, "second record set")?;
    let ka: BTreeSet<&String> = a.keys().collect();
    let kb: BTreeSet<&String> = b.keys().collect();
    if ka != kb {
        let diff: Vec<&String> = ka.symmetric_difference(&kb).copied().collect();
        return Err(Error::Validation(format!("record sets cover different samples: {diff:?}")));
    }
    let (ea, fa): (Vec<f64>, Vec<f64>) = a.values().copied().unzip();
    let (eb, fb): (Vec<f64>, Vec<f64>) = b.values().copied().unzip();
    let e = paired_t_test(&ea, &eb, alpha)?;
    let f1 = paired_t_test(&fa, &fb, alpha)?;
    Ok(MethodComparison {
        n: ea.len(),
        e,
        f1,
        e_verdict: verdict(&e, false),
        f1_verdict: verdict(&f1, true),
    })
}
