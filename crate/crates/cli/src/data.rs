//! CSV ingestion and export.
//!
//! Layout: a header row whose first cell names the time column and whose
//! remaining cells name the series; one row per period. Cells equal to one
//! of [`MISSING_TOKENS`] (after trimming blanks) are missing.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ajk_core::TimeSeriesDataset;

use crate::error::{CliError, Result};

pub const MISSING_TOKENS: [&str; 3] = ["", "NA", "NaN"];

/// A dataset together with its period labels, kept verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub data: TimeSeriesDataset,
    pub time_header: String,
    pub labels: Vec<String>,
}

impl Panel {
    /// The first `periods` periods.
    pub fn prefix(&self, periods: usize) -> Result<Panel> {
        Ok(Panel {
            data: self.data.prefix(periods)?,
            time_header: self.time_header.clone(),
            labels: self.labels[..periods].to_vec(),
        })
    }
}

pub fn read_csv(path: &Path) -> Result<Panel> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(file).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv<R: Read>(reader: R) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < 2 {
        return Err(CliError::data("header needs a time column and at least one series column"));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (k, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(CliError::data(format!("row 1, column {}: empty series name", k + 2)));
        }
        if let Some(first) = seen.insert(name, k + 2) {
            return Err(CliError::data(format!(
                "row 1: duplicate series name '{name}' in columns {first} and {}",
                k + 2
            )));
        }
    }

    let n = names.len();
    let mut labels = Vec::new();
    let mut series: Vec<Vec<Option<f64>>> = vec![Vec::new(); n];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(labels.len() + 2, |p| p.line() as usize);
        labels.push(record[0].to_string());
        for (i, cell) in record.iter().skip(1).enumerate() {
            series[i].push(
                parse_cell(cell)
                    .map_err(|m| CliError::data(format!("row {row}, column {} ('{}'): {m}", i + 2, names[i])))?,
            );
        }
    }
    if labels.is_empty() || series.iter().all(|s| s.iter().all(Option::is_none)) {
        return Err(CliError::data("no observations"));
    }
    let data = TimeSeriesDataset::from_rows(&series)?.with_names(names)?;
    Ok(Panel { data, time_header: header[0].to_string(), labels })
}

fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, String> {
    let s = cell.trim();
    if MISSING_TOKENS.contains(&s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Err(format!("non-finite value '{s}'")),
        Err(_) => Err(format!("cannot parse '{s}' as a number")),
    }
}

fn csv_error(e: csv::Error) -> CliError {
    let at = e.position().map(|p| format!("row {}: ", p.line())).unwrap_or_default();
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            CliError::data(format!("{at}ragged row with {len} fields, expected {expected_len}"))
        }
        _ => CliError::data(format!("{at}{e}")),
    }
}

/// Writes the panel in the ingestion format. Values use the shortest
/// round-trip representation and missing cells are written as `NA`.
pub fn write_csv<W: Write>(writer: W, panel: &Panel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = &panel.data;
    let mut header = vec![panel.time_header.clone()];
    header.extend(d.names().iter().cloned());
    w.write_record(&header).map_err(|e| CliError::data(e.to_string()))?;
    for (t, label) in panel.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..d.n()).map(|i| d.get(i, t).map_or_else(|| "NA".to_string(), |v| format!("{v:?}"))));
        w.write_record(&row).map_err(|e| CliError::data(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io("<csv output>", e))
}

pub fn write_csv_file(path: &Path, panel: &Panel) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), panel)
}
