use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("report line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Table(String),
}

/// A rectangular table of strings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = impl ToString>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        assert_eq!(row.len(), self.headers.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of strings is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Table, ReportError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { headers, rows })
    }

    /// Space-aligned columns under a dashed rule.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|i| {
                self.rows
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain([self.headers[i].chars().count(), 1])
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                let _ = write!(s, "{c:<w$}");
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&self.headers);
        out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
        for r in &self.rows {
            out += &line(r);
        }
        out
    }

    /// Reads the output of [`Table::to_text`]; cells must not contain
    /// newlines or leading/trailing spaces.
    pub fn from_text(text: &str) -> Result<Table, ReportError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ReportError::Table("empty".into()))?;
        let rule = lines.next().ok_or_else(|| ReportError::Table("missing rule".into()))?;
        let mut cols: Vec<(usize, usize)> = Vec::new();
        let mut start = None;
        for (i, ch) in rule.chars().chain([' ']).enumerate() {
            match (ch, start) {
                ('-', None) => start = Some(i),
                (' ', Some(s)) => {
                    cols.push((s, i));
                    start = None;
                }
                ('-', Some(_)) | (' ', None) => {}
                _ => return Err(ReportError::Table(format!("unexpected `{ch}` in rule"))),
            }
        }
        let cut = |l: &str| -> Vec<String> {
            let chars: Vec<char> = l.chars().collect();
            cols.iter()
                .enumerate()
                .map(|(i, &(s, e))| {
                    let end = if i + 1 == cols.len() { chars.len() } else { e.min(chars.len()) };
                    chars.get(s.min(chars.len())..end.max(s.min(chars.len()))).map_or(String::new(), |c| {
                        c.iter().collect::<String>().trim().to_string()
                    })
                })
                .collect()
        };
        Ok(Table {
            headers: cut(header),
            rows: lines.map(cut).collect(),
        })
    }
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out += &serde_json::to_string(r).expect("report records serialize");
        out.push('\n');
    }
    out
}

pub fn from_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, ReportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| ReportError::Json { line: i + 1, source }))
        .collect()
}

/// Something that can be written out as per-item records plus a summary.
pub trait Report {
    fn records_jsonl(&self) -> String;
    fn records_table(&self) -> Table;
    fn summary(&self) -> Table;
}

/// Writes `<stem>.jsonl`, `<stem>.csv` and `<stem>.summary.txt` into `dir`.
pub fn emit_report(report: &dyn Report, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (format!("{stem}.jsonl"), report.records_jsonl()),
        (format!("{stem}.csv"), report.records_table().to_csv()?),
        (format!("{stem}.summary.txt"), report.summary().to_text()),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(["id", "verdict", "note"]);
        t.push(["1", "Equivalent", ""]);
        t.push(["20", "Inconclusive", "a, \"quoted\" note"]);
        t
    }

    #[test]
    fn formats_round_trip() {
        let t = sample();
        assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t);
        assert_eq!(Table::from_text(&t.to_text()).unwrap(), t);
        let rows: Vec<Vec<String>> = from_jsonl(&to_jsonl(&t.rows)).unwrap();
        assert_eq!(rows, t.rows);
    }

    #[test]
    fn empty_tables_keep_headers() {
        let t = Table::new(["a", "bb"]);
        assert_eq!(t.to_text(), "a  bb\n-  --\n");
        assert_eq!(t.to_csv().unwrap(), "a,bb\n");
        assert_eq!(Table::from_text(&t.to_text()).unwrap(), t);
        assert_eq!(to_jsonl::<u8>(&[]), "");
    }
}
