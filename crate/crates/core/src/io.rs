//! File formats for grid functions.
//!
//! A grid function is stored as a pair `<stem>.json` + `<stem>.csv`. The JSON
//! header holds `{n, c, r, K, values}` where `values` names the CSV file; the
//! CSV has one row per `(i_1, i_2)` line (i_1 fastest) holding the `2^K` values
//! along axis 0, without a header row. 2-D fields can also be written as binary
//! PGM rasters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction, GridHeader};

#[derive(Debug, Serialize, Deserialize)]
struct FileHeader {
    #[serde(flatten)]
    grid: GridHeader,
    values: String,
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.csv`; returns the JSON path.
pub fn save_grid_function(u: &GridFunction, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{stem}.csv");
    let header = FileHeader {
        grid: (*u.grid()).into(),
        values: csv_name.clone(),
    };
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut w, &header)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let mut csv = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(dir.join(csv_name))?;
    let row = u.grid().cells_per_axis();
    for chunk in u.values().chunks(row) {
        csv.write_record(chunk.iter().map(|v| format_value(*v)))?;
    }
    csv.flush()?;
    Ok(json_path)
}

/// Reads a grid function from its JSON header; the CSV path is resolved
/// relative to the header's directory.
pub fn load_grid_function(json_path: &Path) -> Result<GridFunction> {
    let header: FileHeader = serde_json::from_reader(File::open(json_path)?)?;
    let grid = DyadicGrid::try_from(header.grid)?;
    let csv_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.values);
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(csv_path)?;
    let row = grid.cells_per_axis();
    let mut values = Vec::with_capacity(grid.cell_count());
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != row {
            return Err(Error::GridMismatch(format!(
                "CSV row has {} entries, expected {row}",
                rec.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("unparsable value {field:?} in CSV")))?;
            values.push(v);
        }
    }
    GridFunction::new(grid, values)
}

/// Shortest round-trip decimal form.
pub fn format_value(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

/// Writes a 2-D field as a binary PGM. Values are mapped affinely onto 0..=255
/// and the mapping is recorded as a header comment. The top image row is the
/// highest axis-1 index.
pub fn write_pgm(u: &GridFunction, path: &Path) -> Result<()> {
    let g = u.grid();
    if g.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "PGM export needs a 2-D field, got dimension {}",
            g.dim()
        )));
    }
    let (lo, hi) = u
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let offset = lo;
    let scale = if hi > lo { (hi - lo) / 255.0 } else { 1.0 };
    let n = g.cells_per_axis();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n# value = {offset:?} + {scale:?}*gray\n{n} {n}\n255\n")?;
    let mut row = vec![0u8; n];
    for i1 in (0..n).rev() {
        for (i0, px) in row.iter_mut().enumerate() {
            let v = u.value(i0 + n * i1);
            *px = ((v - offset) / scale).round().clamp(0.0, 255.0) as u8;
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes a CSV table with a header row.
pub fn write_table<R, S>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<S>>,
    S: AsRef<str>,
{
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}
