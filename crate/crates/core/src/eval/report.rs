use std::path::Path;

use crate::error::{Error, Result};

use super::{EvalRecord, PixelCounts};

pub const RECORD_COLUMNS: [&str; 9] = ["sample_id", "tp", "fp", "tn", "fn", "e", "precision", "recall", "f1"];

/// Writes per-image records as CSV; undefined ratios are left empty.
pub fn write_records_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RECORD_COLUMNS).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.sample_id.clone(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.tn.to_string(),
            r.counts.fn_.to_string(),
            r.e.to_string(),
            opt(r.precision),
            opt(r.recall),
            opt(r.f1),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads records written by [`write_records_csv`]. Derived columns are
/// recomputed from the counts and must agree with what is stored.
pub fn read_records_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != RECORD_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected columns {RECORD_COLUMNS:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let count = |k: usize| -> Result<u64> {
            row[k].parse().map_err(|e| Error::Parse {
                line,
                message: format!("column `{}`: {e}", RECORD_COLUMNS[k]),
            })
        };
        let counts = PixelCounts {
            tp: count(1)?,
            fp: count(2)?,
            tn: count(3)?,
            fn_: count(4)?,
        };
        if counts.total() == 0 {
            return Err(Error::Parse { line, message: "record has zero pixels".into() });
        }
        let record = EvalRecord::from_counts(&row[0], counts);
        let stored_e: f64 = row[5].parse().map_err(|e| Error::Parse {
            line,
            message: format!("column `e`: {e}"),
        })?;
        if (stored_e - record.e).abs() > 1e-12 {
            return Err(Error::Parse {
                line,
                message: format!("e = {stored_e} disagrees with counts ({})", record.e),
            });
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_undefined_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![
            EvalRecord::from_counts("a", PixelCounts { tp: 3, fp: 1, tn: 10, fn_: 2 }),
            EvalRecord::from_counts("b", PixelCounts { tp: 0, fp: 0, tn: 16, fn_: 0 }),
        ];
        write_records_csv(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sample_id,tp,fp,tn,fn,e,precision,recall,f1\n"));
        assert!(text.contains("b,0,0,16,0,0,,,"));
        assert_eq!(read_records_csv(&path).unwrap(), records);
    }
}
