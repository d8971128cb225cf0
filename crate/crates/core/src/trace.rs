//! Loss traces written as CSV, one row per logged iteration.

use std::path::Path;

use crate::error::{Error, Result};

pub fn write_trace(path: &Path, columns: &[&str], rows: &[(usize, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["iteration"];
    header.extend_from_slice(columns);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (it, values) in rows {
        let mut rec = vec![it.to_string()];
        rec.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: i + 2,
                message: format!("bad number `{s}`"),
            })
        };
        let it = parse(&rec[0])? as usize;
        let values = rec.iter().skip(1).map(parse).collect::<Result<_>>()?;
        out.push((it, values));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line: 0,
            message: format!("{}: {other:?}", path.display()),
        },
    }
}
