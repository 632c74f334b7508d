//! File formats: payoff CSV, token JSON, alignment CSV, surrogate datasets,
//! model JSON and generic JSON documents.
//!
//! Payoff tables use little-endian coalition indexing: bit `k` of
//! `coalition_mask` is set when player `k` is in the coalition.
//!
//! Matrix CSV files start with a `rows,cols` line followed by `rows` lines
//! of `cols` comma-separated values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cross_modal::{AlignmentMatrix, TokenSet};
use crate::error::{Error, Result};
use crate::estimators::{SurrogateModel, MODEL_FORMAT_VERSION};
use crate::game::{Game, InteractionMap, Method};
use crate::matrix::Matrix;

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: show(path),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: show(path),
        line,
        message: message.into(),
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: "<memory>".into(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    write_string(path, &text)
}

/// Parses `coalition_mask,value` rows into a payoff table. Every mask in
/// `0..2^n` must appear exactly once; `n` follows from the row count.
pub fn parse_payoff_csv(path: &Path, text: &str) -> Result<Game> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "coalition_mask" || &headers[1] != "value" {
        return Err(parse_err(path, 1, "expected header 'coalition_mask,value'"));
    }
    let mut rows: Vec<(u64, u64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let mask: u64 = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad coalition mask '{}'", &record[0])))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value '{}'", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(path, line, "value is not finite"));
        }
        rows.push((line, mask, value));
    }
    let len = rows.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Format {
            path: show(path),
            message: format!("{len} rows; a payoff table needs 2^n rows with n >= 1"),
        });
    }
    let mut table = vec![f64::NAN; len];
    let mut seen = vec![false; len];
    for (line, mask, value) in rows {
        let k = mask as usize;
        if mask >= len as u64 {
            return Err(parse_err(
                path,
                line,
                format!("mask {mask} outside a table of {len} rows"),
            ));
        }
        if seen[k] {
            return Err(parse_err(path, line, format!("mask {mask} appears twice")));
        }
        seen[k] = true;
        table[k] = value;
    }
    Game::from_table(table)
}

pub fn read_payoff_csv(path: &Path) -> Result<Game> {
    parse_payoff_csv(path, &read_to_string(path)?)
}

pub fn payoff_csv_string(game: &Game) -> Result<String> {
    let table = game.payoff_table()?;
    let mut out = String::from("coalition_mask,value\n");
    for (mask, v) in table.iter().enumerate() {
        out.push_str(&format!("{mask},{v:?}\n"));
    }
    Ok(out)
}

pub fn write_payoff_csv(path: &Path, game: &Game) -> Result<()> {
    write_string(path, &payoff_csv_string(game)?)
}

pub fn read_tokens(path: &Path) -> Result<TokenSet> {
    read_json(path)
}

pub fn write_tokens(path: &Path, tokens: &TokenSet) -> Result<()> {
    write_json(path, tokens)
}

/// Parses the `rows,cols` matrix CSV layout.
pub fn parse_matrix_csv(path: &Path, text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| s.parse::<usize>().ok().filter(|&d| d > 0);
    let (rows, cols) = match dims.as_slice() {
        [r, c] => match (parse_dim(r), parse_dim(c)) {
            (Some(r), Some(c)) => (r, c),
            _ => {
                return Err(parse_err(
                    path,
                    line,
                    format!("bad dimension line '{header}'"),
                ))
            }
        },
        _ => return Err(parse_err(path, line, "first line must be 'rows,cols'")),
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (line, text) in lines {
        if seen_rows == rows {
            return Err(parse_err(path, line, format!("more than {rows} rows")));
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(parse_err(
                path,
                line,
                format!("expected {cols} values, found {}", fields.len()),
            ));
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad number '{f}'")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, "value is not finite"));
            }
            data.push(v);
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Format {
            path: show(path),
            message: format!("expected {rows} rows, found {seen_rows}"),
        });
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn matrix_csv_string(m: &Matrix) -> String {
    let mut out = format!("{},{}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(path, &read_to_string(path)?)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    write_string(path, &matrix_csv_string(m))
}

pub fn read_alignment_csv(path: &Path) -> Result<AlignmentMatrix> {
    AlignmentMatrix::new(read_matrix_csv(path)?).map_err(|e| Error::Format {
        path: show(path),
        message: e.to_string(),
    })
}

pub fn write_alignment_csv(path: &Path, a: &AlignmentMatrix) -> Result<()> {
    write_matrix_csv(path, a.matrix())
}

/// Reads `alignment_XXXX.csv` / `target_XXXX.csv` pairs from `dir`, ordered
/// by their numeric suffix.
pub fn read_dataset_dir(dir: &Path) -> Result<Vec<(AlignmentMatrix, InteractionMap)>> {
    let mut ids: Vec<(u64, String)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let name = entry.map_err(io_err(dir))?.file_name();
        let name = name.to_string_lossy();
        if let Some(id) = name
            .strip_prefix("alignment_")
            .and_then(|s| s.strip_suffix(".csv"))
        {
            let n = id.parse::<u64>().map_err(|_| Error::Format {
                path: show(&dir.join(name.as_ref())),
                message: "suffix must be numeric".into(),
            })?;
            ids.push((n, id.to_string()));
        }
    }
    if ids.is_empty() {
        return Err(Error::Format {
            path: show(dir),
            message: "no alignment_XXXX.csv files".into(),
        });
    }
    ids.sort();
    ids.into_iter()
        .map(|(_, id)| {
            let a = read_alignment_csv(&dir.join(format!("alignment_{id}.csv")))?;
            let target_path = dir.join(format!("target_{id}.csv"));
            let t = read_matrix_csv(&target_path)?;
            if t.shape() != a.matrix().shape() {
                return Err(Error::DimensionMismatch(format!(
                    "{}: target {:?} vs alignment {:?}",
                    show(&target_path),
                    t.shape(),
                    a.matrix().shape()
                )));
            }
            Ok((a, InteractionMap::new(t, Method::Exact)))
        })
        .collect()
}

pub fn write_dataset_dir(
    dir: &Path,
    data: &[(AlignmentMatrix, InteractionMap)],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::with_capacity(2 * data.len());
    for (k, (a, t)) in data.iter().enumerate() {
        let ap = dir.join(format!("alignment_{k:04}.csv"));
        let tp = dir.join(format!("target_{k:04}.csv"));
        write_alignment_csv(&ap, a)?;
        write_matrix_csv(&tp, &t.values)?;
        written.push(ap);
        written.push(tp);
    }
    Ok(written)
}

pub fn read_model(path: &Path) -> Result<SurrogateModel> {
    let model: SurrogateModel = read_json(path)?;
    if model.version != MODEL_FORMAT_VERSION {
        return Err(Error::Format {
            path: show(path),
            message: format!(
                "model format version {} not supported (expected {MODEL_FORMAT_VERSION})",
                model.version
            ),
        });
    }
    model.validate().map_err(|e| Error::Format {
        path: show(path),
        message: e.to_string(),
    })?;
    Ok(model)
}

pub fn write_model(path: &Path, model: &SurrogateModel) -> Result<()> {
    write_json(path, model)
}
