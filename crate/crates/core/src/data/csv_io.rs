use std::path::Path;

use super::Dataset;
use crate::error::{Result, SrtError};

/// Header name of the optional true-cluster column.
pub const CLUSTER_LABEL_COLUMN: &str = "cluster_label";

fn io_err(path: &Path, source: std::io::Error) -> SrtError {
    SrtError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read a comma-separated file with one header row. The last column (ignoring a
/// `cluster_label` column, if present) is the response; every other column is a
/// numeric feature.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_csv(file).map_err(|e| match e {
        SrtError::Io { source, .. } => io_err(path, source),
        other => other,
    })
}

pub(crate) fn read_csv(reader: impl std::io::Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_col = header.iter().position(|h| h == CLUSTER_LABEL_COLUMN);
    let value_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_col).collect();
    if value_cols.len() < 2 {
        return Err(SrtError::invalid(
            "need at least one feature column and one response column",
        ));
    }
    let (&response_col, feature_cols) = value_cols.split_last().expect("checked above");
    let p = feature_cols.len();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(SrtError::Parse {
                row,
                column: record.len().min(header.len()) + 1,
                message: format!(
                    "expected {} fields, found {}",
                    header.len(),
                    record.len()
                ),
            });
        }
        let number = |c: usize| -> Result<f64> {
            let cell = &record[c];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SrtError::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{cell}` is not a finite number"),
                })
        };
        for &c in feature_cols {
            features.push(number(c)?);
        }
        targets.push(number(response_col)?);
        if let Some(c) = label_col {
            let v = number(c)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(SrtError::Parse {
                    row,
                    column: c + 1,
                    message: "cluster label must be a non-negative integer".into(),
                });
            }
            labels.push(v as usize);
        }
    }
    if targets.is_empty() {
        return Err(SrtError::EmptyDataset);
    }
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let mut ds = Dataset::new(p, features, targets)?.with_feature_names(names)?;
    if label_col.is_some() {
        ds = ds.with_labels(labels)?;
    }
    Ok(ds)
}

fn csv_err(e: csv::Error) -> SrtError {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => SrtError::Io {
            path: String::new(),
            source,
        },
        kind => SrtError::Parse {
            row,
            column: 0,
            message: format!("{kind:?}"),
        },
    }
}

/// Write `data` with a header of feature names, `y`, and `cluster_label` when
/// labels are present. Values use the shortest representation that parses back
/// to the same `f64`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push("y");
    if data.labels.is_some() {
        header.push(CLUSTER_LABEL_COLUMN);
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut fields: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        fields.push(data.targets[i].to_string());
        if let Some(labels) = &data.labels {
            fields.push(labels[i].to_string());
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}
