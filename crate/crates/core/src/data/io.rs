//! LIBSVM and CSV readers/writers. Sparse input is densified on load.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Features, LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};

/// Features with the labels exactly as written in the file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub features: Features,
    pub labels: Vec<i64>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_label(token: &str) -> Option<i64> {
    if let Ok(v) = token.parse::<i64>() {
        return Some(v);
    }
    let v = token.parse::<f64>().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Reads a LIBSVM file (`<label> <index>:<value> ...`, 1-based strictly
/// increasing indices). Blank lines and `#` comments are skipped.
pub fn read_libsvm(path: &Path) -> Result<RawDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_token = tokens.next().expect("non-empty line has a token");
        let label = parse_label(label_token)
            .ok_or_else(|| parse_error(path, lineno, format!("non-numeric label `{label_token}`")))?;

        let mut row = Vec::new();
        let mut last = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_error(path, lineno, format!("expected index:value, got `{token}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("non-numeric index `{idx}`")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("non-numeric value `{val}`")))?;
            if idx == 0 {
                return Err(parse_error(path, lineno, "indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_error(path, lineno, format!("index {idx} is not increasing")));
            }
            if !val.is_finite() {
                return Err(parse_error(path, lineno, format!("non-finite value `{val}`")));
            }
            last = idx;
            row.push((idx, val));
        }
        dim = dim.max(last);
        labels.push(label);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Empty(format!("{} contains no samples", path.display())));
    }
    if dim == 0 {
        return Err(Error::Empty(format!("{} contains no feature entries", path.display())));
    }

    let mut values = vec![0.0; rows.len() * dim];
    for (i, row) in rows.iter().enumerate() {
        for &(idx, val) in row {
            values[i * dim + idx - 1] = val;
        }
    }
    Ok(RawDataset {
        features: Features::new(dim, values)?,
        labels,
    })
}

/// Loads a LIBSVM file and remaps its labels to 1..K.
pub fn load_libsvm(path: &Path) -> Result<LabeledDataset> {
    let raw = read_libsvm(path)?;
    LabeledDataset::from_original_labels(raw.features, &raw.labels)
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_error(path, 0, format!("{other:?}")),
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} contains no rows", path.display())));
    }
    Ok(rows)
}

fn parse_cell(path: &Path, row: usize, col: usize, cell: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| {
        parse_error(path, row, format!("column {}: non-numeric cell `{cell}`", col + 1))
    })?;
    if !v.is_finite() {
        return Err(parse_error(path, row, format!("column {}: non-finite cell", col + 1)));
    }
    Ok(v)
}

/// Loads a headerless numeric CSV whose `label_column` (0-based) holds integer
/// labels; labels are remapped exactly as in [`load_libsvm`].
pub fn load_csv(path: &Path, label_column: usize) -> Result<LabeledDataset> {
    let rows = read_csv_rows(path)?;
    let width = rows[0].len();
    if label_column >= width {
        return Err(Error::InvalidArgument(format!(
            "label column {label_column} out of range for {width} columns"
        )));
    }
    if width < 2 {
        return Err(Error::InvalidArgument("CSV needs at least one feature column".into()));
    }
    let mut values = Vec::with_capacity(rows.len() * (width - 1));
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rowno = i + 1;
        if row.len() != width {
            return Err(parse_error(
                path,
                rowno,
                format!("ragged row: {} cells, expected {width}", row.len()),
            ));
        }
        for (j, cell) in row.iter().enumerate() {
            if j == label_column {
                let label = parse_label(cell).ok_or_else(|| {
                    parse_error(path, rowno, format!("column {}: non-integer label `{cell}`", j + 1))
                })?;
                labels.push(label);
            } else {
                values.push(parse_cell(path, rowno, j, cell)?);
            }
        }
    }
    LabeledDataset::from_original_labels(Features::new(width - 1, values)?, &labels)
}

fn read_csv_features(path: &Path) -> Result<Features> {
    let rows = read_csv_rows(path)?;
    let width = rows[0].len();
    let mut values = Vec::with_capacity(rows.len() * width);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(parse_error(
                path,
                i + 1,
                format!("ragged row: {} cells, expected {width}", row.len()),
            ));
        }
        for (j, cell) in row.iter().enumerate() {
            values.push(parse_cell(path, i + 1, j, cell)?);
        }
    }
    Features::new(width, values)
}

/// Loads unlabeled features: a features-only CSV when the extension is
/// `.csv`, otherwise a LIBSVM file whose labels are ignored.
pub fn load_unlabeled(path: &Path) -> Result<UnlabeledDataset> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let features = if is_csv {
        read_csv_features(path)?
    } else {
        read_libsvm(path)?.features
    };
    UnlabeledDataset::new(features)
}

/// Writes LIBSVM lines with nonzero entries only; the last index of each row
/// is always written so the dimension survives a reload.
pub fn write_libsvm(path: &Path, features: &Features, labels: &[i64]) -> Result<()> {
    if features.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features.dim();
    let mut out = String::new();
    for (row, label) in features.rows().zip(labels) {
        write!(out, "{label}").unwrap();
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 || j + 1 == dim {
                write!(out, " {}:{}", j + 1, v).unwrap();
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a headerless, comma-separated feature matrix.
pub fn write_csv_features(path: &Path, features: &Features) -> Result<()> {
    let mut out = String::new();
    for row in features.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
