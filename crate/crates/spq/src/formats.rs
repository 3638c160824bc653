//! File formats: quantizer JSON and numeric CSV.
//!
//! CSV output starts with a `# config: {...}` comment holding the resolved run
//! configuration, then a header row. Numbers are written with 17 significant
//! digits so every `f64` survives a write/read cycle bit-exactly.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use spq_core::quantizer::ShiftPeriodicQuantizer;
use spq_core::Vector;

/// Prefix of the configuration comment line.
pub const CONFIG_PREFIX: &str = "# config: ";

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Parse a comma- or whitespace-separated vector such as `"0.5, -1"`.
pub fn parse_vector(s: &str) -> Result<Vector> {
    let values: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("not a number: {t:?}"))
        })
        .collect::<Result<_>>()?;
    Vector::try_from_slice(&values).map_err(|e| anyhow!("bad vector {s:?}: {e}"))
}

/// Column names `prefix0, prefix1, ...`.
pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_quantizer(path: &Path, q: &ShiftPeriodicQuantizer) -> Result<()> {
    write_json(path, q)
}

/// Load a quantizer; parse errors carry the line and column of the offending field.
pub fn load_quantizer(path: &Path) -> Result<ShiftPeriodicQuantizer> {
    read_json(path)
}

/// CSV writer that emits the configuration comment and header up front.
pub struct CsvOut {
    inner: csv::Writer<Box<dyn Write>>,
    width: usize,
}

impl CsvOut {
    /// Write to `path`, or standard output for `None` or `-`.
    pub fn create(path: Option<&Path>, config: &Value, header: &[String]) -> Result<Self> {
        let mut sink: Box<dyn Write> = match path {
            Some(p) if p.as_os_str() != "-" => Box::new(io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            _ => Box::new(io::BufWriter::new(io::stdout())),
        };
        writeln!(sink, "{CONFIG_PREFIX}{config}")?;
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(header)?;
        Ok(CsvOut {
            inner,
            width: header.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.mixed_row(values, &[])
    }

    /// Numeric fields followed by already-formatted trailing fields.
    pub fn mixed_row(&mut self, values: &[f64], extra: &[String]) -> Result<()> {
        if values.len() + extra.len() != self.width {
            bail!(
                "row has {} fields, header has {}",
                values.len() + extra.len(),
                self.width
            );
        }
        let record = values
            .iter()
            .map(|&v| fmt_f64(v))
            .chain(extra.iter().cloned());
        self.inner.write_record(record)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Numeric CSV table: the configuration line (if any), header and rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub config: Option<Value>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Read a numeric CSV. The first line may be a `# config:` comment; a header row is
/// detected when its first field does not parse as a number.
pub fn read_csv(mut source: impl Read) -> Result<CsvTable> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let mut config = None;
    let mut body = text.as_str();
    if let Some(rest) = body.strip_prefix(CONFIG_PREFIX) {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        config = Some(serde_json::from_str(line.trim()).context("parsing the config line")?);
        body = tail;
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if line == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            header = record.iter().map(str::to_owned).collect();
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .with_context(|| format!("row {}: not a number: {f:?}", line + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable {
        config,
        header,
        rows,
    })
}

pub fn read_csv_path(path: Option<&Path>) -> Result<CsvTable> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            read_csv(fs::File::open(p).with_context(|| format!("opening {}", p.display()))?)
        }
        _ => read_csv(io::stdin().lock()),
    }
}
