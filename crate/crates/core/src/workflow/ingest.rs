use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Parsed input with any notices raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: TimeSeries,
    pub notices: Vec<String>,
}

/// Reads a `t,value` CSV. Rows are stably sorted by `t` when out of order;
/// duplicate `t` values and zero values are kept.
pub fn ingest_csv(path: &Path) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Ingested> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(parse_err(1, format!("expected header `t,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = &record[i];
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{name} `{raw}` is not finite")));
            }
            Ok(v)
        };
        rows.push((field(0, "t")?, field(1, "value")?));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut notices = Vec::new();
    if rows.windows(2).any(|w| w[1].0 < w[0].0) {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        notices.push(format!("{}: rows were not sorted by t and have been sorted", path.display()));
    }
    let (t, v) = rows.into_iter().unzip();
    Ok(Ingested {
        series: TimeSeries::new(t, v)?,
        notices,
    })
}

/// Writes a series as `t,value` CSV.
pub fn write_series_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut out = String::from("t,value\n");
    for (t, v) in series.covariates().iter().zip(series.values()) {
        out.push_str(&format!("{t},{v}\n"));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Ingested> {
        read_csv(text.as_bytes(), Path::new("in.csv"))
    }

    #[test]
    fn minimal_file() {
        let r = read("t,value\n0,1.5\n1,2.5\n").unwrap();
        assert_eq!(r.series.len(), 2);
        assert!(r.notices.is_empty());
    }

    #[test]
    fn crlf_and_duplicates() {
        let r = read("t,value\r\n0,1\r\n0,2\r\n1,0\r\n").unwrap();
        assert_eq!(r.series.values(), &[1.0, 2.0, 0.0]);
    }

    #[test]
    fn malformed_row_names_line() {
        match read("t,value\n2025.0,1\n2025.5,abc\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read("t,value\n1,2,3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read("time,value\n1,2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read("t,value\n1,inf\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn unsorted_rows_are_sorted_stably() {
        let r = read("t,value\n2,1\n1,5\n2,3\n1,4\n").unwrap();
        assert_eq!(r.series.covariates(), &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(r.series.values(), &[5.0, 4.0, 1.0, 3.0]);
        assert_eq!(r.notices.len(), 1);
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = TimeSeries::new(vec![0.0, 0.5, 1.25], vec![3.0, -1.0, 1e-7]).unwrap();
        write_series_csv(&s, &p).unwrap();
        assert_eq!(ingest_csv(&p).unwrap().series, s);
    }
}
