//! CSV panels: `date,ASSET1,...,ASSETN` with one row per period.
//!
//! The first column holds an ISO date (`YYYY-MM-DD` or `YYYY-MM`) or an
//! integer index. Rows with a blank, `NA`/`NaN` or (for prices) non-positive
//! cell are dropped with a warning; anything else that fails to parse is an
//! error naming the file line.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::{PricePanel, ReturnsPanel, Stamp};

/// Fewest usable rows accepted from a file.
pub const MIN_ROWS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<P> {
    pub panel: P,
    /// Rows dropped for missing or invalid cells.
    pub dropped_rows: usize,
}

struct Table {
    stamps: Vec<Stamp>,
    values: Vec<Vec<f64>>,
    names: Vec<String>,
    dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || c.eq_ignore_ascii_case("na")
        || c.eq_ignore_ascii_case("nan")
        || c.eq_ignore_ascii_case("null")
}

fn read_table(path: &Path, positive: bool) -> Result<Table> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(format!("cannot open {shown}"), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let ingest = |row: usize, message: String| Error::Ingest {
        path: shown.clone(),
        row,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| ingest(1, format!("unreadable header: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(ingest(
            1,
            "header needs a timestamp column and at least one asset".into(),
        ));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut stamps: Vec<Stamp> = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            ingest(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let stamp: Stamp = record[0]
            .parse()
            .map_err(|_| ingest(line, format!("unparseable timestamp '{}'", &record[0])))?;
        let mut row = Vec::with_capacity(names.len());
        let mut usable = true;
        for (j, cell) in record.iter().skip(1).enumerate() {
            if is_missing(cell) {
                usable = false;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                ingest(
                    line,
                    format!("column '{}': '{cell}' is not a number", names[j]),
                )
            })?;
            if !v.is_finite() || (positive && v <= 0.0) {
                usable = false;
            }
            row.push(v);
        }
        if !usable {
            dropped += 1;
            continue;
        }
        if let Some(prev) = stamps.last() {
            if stamp <= *prev {
                return Err(ingest(
                    line,
                    format!(
                        "timestamp {stamp} does not come after {prev} (duplicate or out of order)"
                    ),
                ));
            }
            if std::mem::discriminant(&stamp) != std::mem::discriminant(prev) {
                return Err(ingest(line, "mixed date and index timestamps".into()));
            }
        }
        stamps.push(stamp);
        values.push(row);
    }
    if dropped > 0 {
        log::warn!("{shown}: dropped {dropped} row(s) with missing or invalid values");
    }
    if stamps.len() < MIN_ROWS {
        return Err(ingest(
            0,
            format!(
                "only {} usable row(s); at least {MIN_ROWS} are needed",
                stamps.len()
            ),
        ));
    }
    Ok(Table {
        stamps,
        values,
        names,
        dropped,
    })
}

fn to_matrix(values: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(values.len(), n, |r, c| values[r][c])
}

pub fn ingest_prices_csv(path: impl AsRef<Path>) -> Result<Ingested<PricePanel>> {
    let t = read_table(path.as_ref(), true)?;
    let m = to_matrix(&t.values, t.names.len());
    Ok(Ingested {
        panel: PricePanel::new(t.stamps, m, t.names)?,
        dropped_rows: t.dropped,
    })
}

/// Returns rather than prices: non-positive values are kept.
pub fn ingest_returns_csv(
    path: impl AsRef<Path>,
    periods_per_year: u32,
) -> Result<Ingested<ReturnsPanel>> {
    let t = read_table(path.as_ref(), false)?;
    let m = to_matrix(&t.values, t.names.len());
    let origin = match t.stamps[0] {
        Stamp::Index(i) => i,
        Stamp::Date(_) => 0,
    };
    Ok(Ingested {
        panel: ReturnsPanel::new(t.stamps, m, t.names, periods_per_year, origin)?,
        dropped_rows: t.dropped,
    })
}

/// Write a panel in the ingest format. `first` names the timestamp column.
pub fn write_panel_csv(
    path: impl AsRef<Path>,
    first: &str,
    stamps: &[Stamp],
    values: &DMatrix<f64>,
    names: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let io = |e: std::io::Error| Error::io(format!("cannot write {shown}"), e);
    let mut w = csv::Writer::from_writer(File::create(path).map_err(io)?);
    let csv_err = |e: csv::Error| Error::io(format!("cannot write {shown}"), e.into());
    let mut header = vec![first.to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (r, s) in stamps.iter().enumerate() {
        let mut rec = vec![s.to_string()];
        rec.extend(values.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn write_prices_csv(path: impl AsRef<Path>, panel: &PricePanel) -> Result<()> {
    write_panel_csv(
        path,
        "date",
        panel.timestamps(),
        panel.prices(),
        panel.asset_names(),
    )
}

pub fn write_returns_csv(path: impl AsRef<Path>, panel: &ReturnsPanel) -> Result<()> {
    let first = match panel.timestamps().first() {
        Some(Stamp::Index(_)) => "t",
        _ => "date",
    };
    write_panel_csv(
        path,
        first,
        panel.timestamps(),
        panel.returns(),
        panel.asset_names(),
    )
}

/// Write plain text, creating or truncating the file.
pub(crate) fn write_text(path: &Path, body: &str) -> Result<()> {
    let shown = path.display().to_string();
    let mut f = File::create(path).map_err(|e| Error::io(format!("cannot write {shown}"), e))?;
    f.write_all(body.as_bytes())
        .map_err(|e| Error::io(format!("cannot write {shown}"), e))
}
