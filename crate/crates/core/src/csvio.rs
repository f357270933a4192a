//! Small helpers shared by the flat-file formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct Rows {
    source: String,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Rows {
    pub fn read<R: Read>(input: R, source: &str, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let found = reader.headers().map_err(|e| parse_error(source, 1, e.to_string()))?;
        if found.iter().ne(header.iter().copied()) {
            return Err(parse_error(
                source,
                1,
                format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_error(source, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Self {
            source: source.to_string(),
            rows,
        })
    }

    pub fn open(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path)?;
        Self::read(BufReader::new(file), &path.display().to_string(), header)
    }

    pub fn iter(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().map(|(line, record)| Row {
            source: &self.source,
            line: *line,
            record,
        })
    }
}

pub(crate) struct Row<'a> {
    source: &'a str,
    pub line: u64,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn get<T: FromStr>(&self, idx: usize, name: &str) -> Result<T> {
        let raw = self.record.get(idx).unwrap_or("").trim();
        raw.parse()
            .map_err(|_| self.error(format!("invalid {name} {raw:?}")))
    }

    pub fn str(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("").trim()
    }

    pub fn error(&self, message: String) -> Error {
        parse_error(self.source, self.line, message)
    }
}

pub(crate) fn parse_error(source: &str, line: u64, message: String) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message,
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Write a header plus pre-formatted rows.
pub(crate) fn write_rows<W: Write, I>(out: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Empty string for missing values, shortest round-trip form otherwise.
pub(crate) fn opt_f64(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
