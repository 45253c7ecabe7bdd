//! Field files: a JSON header describing the grid next to a data file holding
//! either little-endian `f64` values or CSV rows `t, i₀, …, iₙ₋₁, value`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Field, Grid};
use crate::error::{Error, Result};

pub const FIELD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Binary,
    Csv,
}

impl FieldFormat {
    fn extension(self) -> &'static str {
        match self {
            FieldFormat::Binary => "bin",
            FieldFormat::Csv => "csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub schema_version: u32,
    pub grid: Grid,
    pub format: FieldFormat,
    /// Data file name, relative to the header's directory.
    pub data_file: String,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes `<stem>.json` and `<stem>.bin|csv` where `header_path` is `<stem>.json`.
pub fn write_field(field: &Field, header_path: &Path, format: FieldFormat) -> Result<PathBuf> {
    let data_path = header_path.with_extension(format.extension());
    let data_file = data_path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| format_err(header_path, "header path has no usable file name"))?
        .to_string();
    let mut out = BufWriter::new(fs::File::create(&data_path)?);
    match format {
        FieldFormat::Binary => {
            for v in field.values() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        FieldFormat::Csv => {
            let grid = field.grid();
            let n = grid.n();
            write!(out, "t")?;
            for d in 0..n {
                write!(out, ",i{d}")?;
            }
            writeln!(out, ",value")?;
            let mut idx = vec![0usize; n];
            for k in 0..grid.slices() {
                for (node, v) in field.slice(k).iter().enumerate() {
                    grid.multi_index(node, &mut idx);
                    write!(out, "{k}")?;
                    for i in &idx {
                        write!(out, ",{i}")?;
                    }
                    // `{:?}` prints the shortest representation that parses back exactly.
                    writeln!(out, ",{v:?}")?;
                }
            }
        }
    }
    out.flush()?;
    let header = FieldHeader {
        schema_version: FIELD_SCHEMA_VERSION,
        grid: field.grid().clone(),
        format,
        data_file,
    };
    fs::write(header_path, serde_json::to_string_pretty(&header)?)?;
    Ok(data_path)
}

pub fn read_field(header_path: &Path) -> Result<Field> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(header_path)?)
        .map_err(|e| format_err(header_path, e.to_string()))?;
    if header.schema_version != FIELD_SCHEMA_VERSION {
        return Err(format_err(
            header_path,
            format!("unsupported schema version {}", header.schema_version),
        ));
    }
    let data_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.data_file);
    let grid = header.grid;
    let values = match header.format {
        FieldFormat::Binary => {
            let bytes = fs::read(&data_path)?;
            if bytes.len() != grid.len() * 8 {
                return Err(format_err(
                    &data_path,
                    format!("expected {} bytes, found {}", grid.len() * 8, bytes.len()),
                ));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
        FieldFormat::Csv => read_csv(&data_path, &grid)?,
    };
    Field::new(grid, values).map_err(|e| format_err(&data_path, e.to_string()))
}

fn read_csv(path: &Path, grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.n();
    let m = grid.spatial_len();
    let mut values = vec![0.0; grid.len()];
    let mut seen = vec![false; grid.len()];
    let mut idx = vec![0usize; n];
    let reader = BufReader::new(fs::File::open(path)?);
    for (line_no, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| format_err(path, format!("line {}: {why}", line_no + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != n + 2 {
            return Err(bad("wrong number of columns"));
        }
        let k: usize = cols[0].trim().parse().map_err(|_| bad("bad time index"))?;
        for d in 0..n {
            idx[d] = cols[d + 1].trim().parse().map_err(|_| bad("bad node index"))?;
        }
        if k >= grid.slices() || idx.iter().any(|&i| i >= grid.nodes_per_axis()) {
            return Err(bad("index out of range"));
        }
        let v: f64 = cols[n + 1].trim().parse().map_err(|_| bad("bad value"))?;
        let flat = k * m + grid.flat_index(&idx);
        if seen[flat] {
            return Err(bad("duplicate entry"));
        }
        seen[flat] = true;
        values[flat] = v;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(format_err(path, format!("missing entry for flat index {missing}")));
    }
    Ok(values)
}
