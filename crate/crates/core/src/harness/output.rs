use std::fs;
use std::path::{Path, PathBuf};

use super::aggregate::{aggregate, summarize, Band};
use super::runner::ExperimentResults;
use super::svg::{band_chart, Series};
use crate::error::{Error, Result};

pub const ROUNDS_HEADER: [&str; 10] = [
    "trial",
    "t",
    "x_repr",
    "labeled",
    "prediction",
    "true_value",
    "error",
    "cum_loss",
    "uncertainty",
    "threshold",
];

pub const SUMMARY_HEADER: [&str; 6] = [
    "t",
    "mean_avg_loss",
    "ci_halfwidth",
    "mean_avg_error",
    "err_ci_halfwidth",
    "mean_cum_labels",
];

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: PathBuf) -> impl Fn(csv::Error) -> Error {
    move |source| Error::Csv {
        path: path.clone(),
        source,
    }
}

/// Writes `rounds.csv`, `summary.csv`, `loss.svg`, `error.svg` and
/// `config.json` into `dir` (plus `failures.csv` when trials aborted).
/// Returns the paths written.
pub fn emit_outputs(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    if results.trials.is_empty() {
        return Err(Error::invalid("no successful trials to emit"));
    }
    create_dir(dir)?;
    let mut written = Vec::new();

    let rounds_path = dir.join("rounds.csv");
    let mut w = csv_writer(&rounds_path)?;
    let err = csv_err(rounds_path.clone());
    w.write_record(ROUNDS_HEADER).map_err(&err)?;
    for trial in &results.trials {
        for (i, round) in trial.rounds.iter().enumerate() {
            let r = &round.record;
            w.write_record([
                trial.index.to_string(),
                (i + 1).to_string(),
                round.x_repr.clone(),
                u8::from(r.labeled).to_string(),
                r.prediction.to_string(),
                r.true_value.to_string(),
                r.prediction_error.to_string(),
                r.cumulative_loss.to_string(),
                round.uncertainty.to_string(),
                round.threshold.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&rounds_path, e))?;
    written.push(rounds_path);

    let summary = summarize(&results.trials)?;
    let summary_path = dir.join("summary.csv");
    let mut w = csv_writer(&summary_path)?;
    let err = csv_err(summary_path.clone());
    w.write_record(SUMMARY_HEADER).map_err(&err)?;
    for t in 0..summary.average_loss.len() {
        w.write_record([
            (t + 1).to_string(),
            summary.average_loss.mean[t].to_string(),
            summary.average_loss.half_width[t].to_string(),
            summary.average_error.mean[t].to_string(),
            summary.average_error.half_width[t].to_string(),
            summary.mean_labels[t].to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&summary_path, e))?;
    written.push(summary_path);

    let name = results.config.policy.name();
    let title = |what: &str| format!("{} ({what})", results.config.name);
    written.push(write_file(
        dir.join("loss.svg"),
        band_chart(
            &title("average loss"),
            "L_t / t",
            &[Series {
                name,
                band: &summary.average_loss,
            }],
        ),
    )?);
    written.push(write_file(
        dir.join("error.svg"),
        band_chart(
            &title("average prediction error"),
            "mean |error|",
            &[Series {
                name,
                band: &summary.average_error,
            }],
        ),
    )?);
    written.push(write_file(
        dir.join("config.json"),
        results.config.to_json(),
    )?);

    if !results.failures.is_empty() {
        let path = dir.join("failures.csv");
        let mut w = csv_writer(&path)?;
        let err = csv_err(path.clone());
        w.write_record(["trial", "seed", "round", "message"])
            .map_err(&err)?;
        for f in &results.failures {
            w.write_record([
                f.index.to_string(),
                f.seed.to_string(),
                f.round.to_string(),
                f.message.clone(),
            ])
            .map_err(&err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Aggregated loss and error bands for several runs drawn on shared axes.
pub fn emit_comparison(
    title: &str,
    runs: &[(String, &ExperimentResults)],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut bands: Vec<(String, Band, Band)> = Vec::new();
    for (label, results) in runs {
        if results.trials.is_empty() {
            continue;
        }
        let s = summarize(&results.trials)?;
        bands.push((label.clone(), s.average_loss, s.average_error));
    }
    let loss: Vec<Series> = bands
        .iter()
        .map(|(n, l, _)| Series { name: n, band: l })
        .collect();
    let error: Vec<Series> = bands
        .iter()
        .map(|(n, _, e)| Series { name: n, band: e })
        .collect();
    Ok(vec![
        write_file(
            dir.join("loss.svg"),
            band_chart(&format!("{title} (average loss)"), "L_t / t", &loss),
        )?,
        write_file(
            dir.join("error.svg"),
            band_chart(
                &format!("{title} (average prediction error)"),
                "mean |error|",
                &error,
            ),
        )?,
    ])
}

/// One row per lambda value of an ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub lambda: f64,
    pub final_avg_loss: f64,
    pub ci_halfwidth: f64,
    pub final_avg_error: f64,
    pub final_labels: f64,
}

pub fn ablation_rows(runs: &[(f64, ExperimentResults)]) -> Result<Vec<AblationRow>> {
    runs.iter()
        .map(|(lambda, results)| {
            let finals = |curves: Vec<Vec<f64>>| -> Result<Band> {
                let last: Vec<Vec<f64>> = curves
                    .into_iter()
                    .map(|c| c.last().copied().into_iter().collect())
                    .collect();
                aggregate(&last)
            };
            let loss = finals(results.trials.iter().map(|t| t.average_loss()).collect())?;
            let error = finals(results.trials.iter().map(|t| t.average_error()).collect())?;
            let labels = finals(results.trials.iter().map(|t| t.label_counts()).collect())?;
            Ok(AblationRow {
                lambda: *lambda,
                final_avg_loss: loss.mean[0],
                ci_halfwidth: loss.half_width[0],
                final_avg_error: error.mean[0],
                final_labels: labels.mean[0],
            })
        })
        .collect()
}

/// Writes `ablation.csv` plus comparison charts over the lambda grid.
pub fn emit_ablation(runs: &[(f64, ExperimentResults)], dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let rows = ablation_rows(runs)?;
    let path = dir.join("ablation.csv");
    let mut w = csv_writer(&path)?;
    let err = csv_err(path.clone());
    w.write_record([
        "lambda",
        "final_avg_loss",
        "ci_halfwidth",
        "final_avg_error",
        "mean_final_labels",
    ])
    .map_err(&err)?;
    for r in &rows {
        w.write_record([
            r.lambda.to_string(),
            r.final_avg_loss.to_string(),
            r.ci_halfwidth.to_string(),
            r.final_avg_error.to_string(),
            r.final_labels.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let mut written = vec![path];
    let labelled: Vec<(String, &ExperimentResults)> = runs
        .iter()
        .map(|(l, r)| (format!("lambda = {l}"), r))
        .collect();
    let title = runs
        .first()
        .map(|(_, r)| r.config.name.clone())
        .unwrap_or_default();
    written.extend(emit_comparison(&title, &labelled, dir)?);
    Ok(written)
}
