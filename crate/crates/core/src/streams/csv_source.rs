use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArrivalPattern, GroundTruthTask};
use crate::error::{Error, Result};

/// Reads a regression CSV (header row, comma separated) into a replay stream.
///
/// Rows are reported 1-based, counting data rows only. With
/// `normalize_to_unit_box` each feature column is min-max scaled to `[0, 1]`
/// (a constant column maps to 0). The replay order is a permutation drawn
/// from `shuffle_seed`.
pub fn load_csv_stream(
    path: impl AsRef<Path>,
    feature_columns: &[String],
    label_column: &str,
    normalize_to_unit_box: bool,
    noise_sigma: f64,
    shuffle_seed: u64,
) -> Result<(GroundTruthTask, ArrivalPattern)> {
    let path = path.as_ref();
    if feature_columns.is_empty() {
        return Err(Error::invalid("at least one feature column is required"));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column_index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                row: 0,
                column: name.to_string(),
                message: "column not found in header".into(),
            })
    };
    let feature_idx = feature_columns
        .iter()
        .map(|c| column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = column_index(label_column)?;

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| Error::Parse {
                row,
                column: name.to_string(),
                message: "missing cell".into(),
            })?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("`{raw}` is not a finite number"),
                }),
            }
        };
        let point = feature_idx
            .iter()
            .zip(feature_columns)
            .map(|(&idx, name)| cell(idx, name))
            .collect::<Result<Vec<_>>>()?;
        labels.push(cell(label_idx, label_column)?);
        points.push(point);
    }
    if points.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} has no data rows",
            path.display()
        )));
    }

    if normalize_to_unit_box {
        for j in 0..feature_columns.len() {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[j]), hi.max(p[j]))
                });
            let span = hi - lo;
            for p in &mut points {
                p[j] = if span > 0.0 { (p[j] - lo) / span } else { 0.0 };
            }
        }
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    let rows = order.iter().map(|&i| (i, points[i].clone())).collect();

    Ok((
        GroundTruthTask::CsvReplay {
            points,
            labels,
            noise_sigma,
        },
        ArrivalPattern::replay_rows(rows),
    ))
}
