//! CSV input and output: headerless numeric matrices and chain files.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::samplers::ChainOutput;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

/// Reads a comma-separated numeric matrix without a header row.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match ncols {
            None => ncols = Some(record.len()),
            Some(k) if k != record.len() => {
                return Err(parse_err(
                    path,
                    format!("row {} has {} fields, expected {k}", row + 1, record.len()),
                ))
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, format!("row {}, column {}: '{field}' is not a number", row + 1, col + 1))
            })?;
            values.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.ok_or_else(|| parse_err(path, "file contains no data".into()))?;
    Ok(Matrix::from_row_slice(nrows, ncols, &values))
}

/// Writes a matrix as headerless CSV with shortest round-trip float formatting.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writer.write_record(&row).map_err(|e| parse_err(path, e.to_string()))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Column names of a chain file for the given dimensions.
pub fn chain_header(p: usize, q: usize, m: usize, with_tau: bool) -> Vec<String> {
    let mut names = Vec::with_capacity(2 * p + q + m + 1);
    names.extend((1..=p).map(|j| format!("beta_{j}")));
    names.extend((1..=q).map(|k| format!("u_{k}")));
    names.extend((0..=m).map(|i| format!("lambda_{i}")));
    if with_tau {
        names.extend((1..=p).map(|j| format!("tau_{j}")));
    }
    names
}

/// Writes stored states (and stored τ draws, if any) as a headed CSV.
pub fn write_chain_csv(path: &Path, chain: &ChainOutput) -> Result<()> {
    let (p, q, m) = chain.dims();
    let with_tau = !chain.taus.is_empty();
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(chain_header(p, q, m, with_tau))
        .map_err(|e| parse_err(path, e.to_string()))?;
    for (k, s) in chain.states.iter().enumerate() {
        let mut row: Vec<String> = s
            .beta()
            .iter()
            .chain(s.u().iter())
            .chain(s.lambda().iter())
            .map(|v| v.to_string())
            .collect();
        if with_tau {
            row.extend(chain.taus[k].as_vector().iter().map(|v| v.to_string()));
        }
        writer.write_record(&row).map_err(|e| parse_err(path, e.to_string()))?;
    }
    writer.flush().map_err(io_err(path))
}

/// A chain file read back: column names and one row per stored state.
#[derive(Debug, Clone)]
pub struct ChainTable {
    pub columns: Vec<String>,
    pub values: Matrix,
}

pub fn read_chain_csv(path: &Path) -> Result<ChainTable> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut values = Vec::new();
    let mut nrows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        for field in record.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, format!("row {}: '{field}' is not a number", nrows + 1)))?,
            );
        }
        nrows += 1;
    }
    Ok(ChainTable {
        values: Matrix::from_row_slice(nrows, columns.len(), &values),
        columns,
    })
}
