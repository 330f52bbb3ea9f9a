//! Delimited-text ingestion and table output.
//!
//! Input files are CSV (or TSV, by `.tsv`/`.tab` extension) with an optional
//! header row; lines starting with `#` are comments. Every field of a numeric
//! table must parse as a finite number.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}, column {col}: missing value")]
    Missing { line: u64, col: usize },
    #[error("line {line}, column {col}: `{value}` is not a finite number")]
    NotNumeric { line: u64, col: usize, value: String },
    #[error("line {line}: expected {expected} fields, found {got}")]
    Ragged { line: u64, expected: usize, got: usize },
    #[error("no data rows")]
    Empty,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

pub type InputResult<T> = std::result::Result<T, InputError>;

/// Rows of string fields under an optional header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<String>>,
}

/// Column-major numeric data with an optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Resolves a comma-separated list of 0-based indices or header names.
    pub fn resolve(&self, selector: &str) -> InputResult<Vec<usize>> {
        selector
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let by_name = self.header.as_ref().and_then(|h| h.iter().position(|c| c == s));
                by_name
                    .or_else(|| s.parse::<usize>().ok().filter(|&i| i < self.ncols()))
                    .ok_or_else(|| InputError::UnknownColumn(s.to_string()))
            })
            .collect::<InputResult<Vec<_>>>()
            .and_then(|v| if v.is_empty() { Err(InputError::UnknownColumn(selector.into())) } else { Ok(v) })
    }

    pub fn select(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        cols.iter().map(|&c| self.columns[c].clone()).collect()
    }

    pub fn name(&self, col: usize) -> String {
        self.header.as_ref().map_or_else(|| col.to_string(), |h| h[col].clone())
    }
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

/// Feeds every non-comment record with its line number to `f`, rejecting
/// records whose width differs from the first one.
fn for_each_record<R: Read>(
    reader: R,
    delimiter: u8,
    mut f: impl FnMut(u64, &csv::StringRecord) -> InputResult<()>,
) -> InputResult<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| InputError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => return Err(InputError::Ragged { line, expected: w, got: rec.len() }),
            _ => {}
        }
        f(line, &rec)?;
    }
    Ok(())
}

/// Parses delimited text, skipping `#` comments and blank lines.
pub fn parse_table<R: Read>(reader: R, delimiter: u8, has_header: bool) -> InputResult<Table> {
    let mut table = Table::default();
    for_each_record(reader, delimiter, |_, rec| {
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if has_header && table.header.is_none() {
            table.header = Some(fields);
        } else {
            table.rows.push(fields);
        }
        Ok(())
    })?;
    Ok(table)
}

/// Parses numeric delimited text.
pub fn parse_numeric<R: Read>(reader: R, delimiter: u8, has_header: bool) -> InputResult<NumericTable> {
    let mut header = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut seen_first = false;
    for_each_record(reader, delimiter, |line, rec| {
        if !seen_first {
            seen_first = true;
            columns = vec![Vec::new(); rec.len()];
            if has_header {
                header = Some(rec.iter().map(str::to_string).collect());
                return Ok(());
            }
        }
        for (j, field) in rec.iter().enumerate() {
            let col = j + 1;
            if field.is_empty() || field.eq_ignore_ascii_case("na") {
                return Err(InputError::Missing { line, col });
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => columns[j].push(v),
                _ => return Err(InputError::NotNumeric { line, col, value: field.to_string() }),
            }
        }
        Ok(())
    })?;
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(InputError::Empty);
    }
    Ok(NumericTable { header, columns })
}

fn open(path: &Path) -> InputResult<File> {
    File::open(path).map_err(|source| InputError::Io { path: path.to_path_buf(), source })
}

pub fn read_table(path: &Path, has_header: bool) -> InputResult<Table> {
    parse_table(open(path)?, delimiter_for(path), has_header)
}

pub fn read_numeric(path: &Path, has_header: bool) -> InputResult<NumericTable> {
    parse_numeric(open(path)?, delimiter_for(path), has_header)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Tsv,
    Pretty,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            "pretty" => Ok(Format::Pretty),
            other => Err(format!("unknown format `{other}` (expected csv, tsv or pretty)")),
        }
    }
}

/// Renders `comments` as `# ` lines followed by the table.
pub fn render(table: &Table, comments: &[String], format: Format) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let delimiter = match format {
        Format::Csv => b',',
        Format::Tsv => b'\t',
        Format::Pretty => return out + &pretty(table),
    };
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    for row in table.header.iter().chain(&table.rows) {
        w.write_record(row).expect("writing to memory");
    }
    out + &String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 fields")
}

fn pretty(table: &Table) -> String {
    let all: Vec<&Vec<String>> = table.header.iter().chain(&table.rows).collect();
    let ncols = all.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|j| all.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in all {
        let line: Vec<String> = row.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Writes `text` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_comments_and_blank_lines() {
        let text = "# produced by a test\na,b\n1,2\n\n3,4.5\n";
        let t = parse_numeric(text.as_bytes(), b',', true).unwrap();
        assert_eq!(t.header, Some(vec!["a".into(), "b".into()]));
        assert_eq!(t.columns, vec![vec![1.0, 3.0], vec![2.0, 4.5]]);
        assert_eq!(t.resolve("b,0").unwrap(), vec![1, 0]);
        assert!(matches!(t.resolve("c"), Err(InputError::UnknownColumn(_))));
    }

    #[test]
    fn errors_name_line_and_column() {
        let e = parse_numeric("1,2\n3,\n".as_bytes(), b',', false).unwrap_err();
        assert!(matches!(e, InputError::Missing { line: 2, col: 2 }), "{e:?}");
        let e = parse_numeric("1,2\nx,4\n".as_bytes(), b',', false).unwrap_err();
        assert!(matches!(e, InputError::NotNumeric { line: 2, col: 1, .. }), "{e:?}");
        let e = parse_numeric("1,2\n3\n".as_bytes(), b',', false).unwrap_err();
        assert!(matches!(e, InputError::Ragged { line: 2, expected: 2, got: 1 }), "{e:?}");
        let e = parse_numeric("1,nan\n".as_bytes(), b',', false).unwrap_err();
        assert!(matches!(e, InputError::NotNumeric { .. }));
        assert!(matches!(parse_numeric("a,b\n".as_bytes(), b',', true), Err(InputError::Empty)));
    }

    #[test]
    fn rendered_csv_round_trips() {
        let t = Table {
            header: Some(vec!["name".into(), "value".into()]),
            rows: vec![vec!["a, quoted".into(), "0.5".into()], vec!["b".into(), "NA".into()]],
        };
        for (fmt, delim) in [(Format::Csv, b','), (Format::Tsv, b'\t')] {
            let text = render(&t, &["k=10".into()], fmt);
            assert!(text.starts_with("# k=10\n"));
            assert_eq!(parse_table(text.as_bytes(), delim, true).unwrap(), t);
        }
    }

    #[test]
    fn pretty_aligns_columns() {
        let t = Table { header: Some(vec!["x".into(), "yy".into()]), rows: vec![vec!["long".into(), "1".into()]] };
        assert_eq!(render(&t, &[], Format::Pretty), "x     yy\nlong  1\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, "first\n").unwrap();
        write_atomic(&p, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "second\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
