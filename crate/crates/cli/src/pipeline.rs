//! Fitting and evaluation shared by the subcommands, and the tables they
//! write.

use std::path::Path;

use anyhow::Context;
use netcov_core::cpm::{cpm_fit, cpm_predict, CpmModel};
use netcov_core::io::{fmt_f64, fmt_opt, write_csv, write_groups};
use netcov_core::metrics::{self, PredictionReport, RocPoint, SupportReport};
use netcov_core::simgen::Simulation;
use netcov_core::tuning::{cross_validate, fit_full_path};
use netcov_core::{linalg, CvOptions, CvResult, Dataset, Family, FitResult, GroupSpec, PathFit, Scheme};
use serde::{Deserialize, Serialize};

pub struct FitOutput {
    pub cv: CvResult,
    pub path: PathFit,
    pub chosen: FitResult,
}

/// Cross-validation, the full-training path over the shared grid, and the
/// model at the one-standard-error choice.
pub fn fit_dataset(ds: &Dataset, spec: &GroupSpec, opts: &CvOptions) -> anyhow::Result<FitOutput> {
    let cv = cross_validate(ds, spec, opts).context("cross-validation")?;
    let (prep, path) = fit_full_path(ds, spec, &cv, &opts.solver).context("full-data path")?;
    let chosen = prep.fit_result(&path.entries[cv.index_1se]);
    Ok(FitOutput { cv, path, chosen })
}

/// `model.json`: the chosen model with the grouping it was fitted under.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedModel {
    pub scheme: Scheme,
    pub index_1se: usize,
    pub model: FitResult,
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

pub fn write_fit(dir: &Path, out: &FitOutput, ds: &Dataset, spec: &GroupSpec) -> anyhow::Result<()> {
    let cv = &out.cv;
    let rows: Vec<Vec<String>> = (0..cv.lambdas.len())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                fmt_f64(cv.lambdas[i]),
                fmt_f64(cv.mean[i]),
                fmt_f64(cv.se[i]),
                flag(i == cv.index_min),
                flag(i == cv.index_1se),
            ]
        })
        .collect();
    write_csv(&dir.join("cv.csv"), &["index", "lambda", "mean_deviance", "se", "is_min", "is_1se"], &rows)?;

    let rows: Vec<Vec<String>> = out
        .path
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                fmt_f64(e.lambda),
                e.active_groups.len().to_string(),
                e.beta.iter().filter(|&&b| metrics::is_selected(b)).count().to_string(),
                fmt_f64(e.deviance),
                e.iterations.to_string(),
                fmt_f64(e.kkt_residual),
            ]
        })
        .collect();
    write_csv(
        &dir.join("path.csv"),
        &["index", "lambda", "n_active_groups", "n_selected", "deviance", "iterations", "kkt_residual"],
        &rows,
    )?;

    let mut rows = Vec::new();
    for (i, e) in out.path.entries.iter().enumerate() {
        for (j, &b) in e.beta.iter().enumerate() {
            if b != 0.0 {
                rows.push(vec![(i + 1).to_string(), (j + 1).to_string(), fmt_f64(b)]);
            }
        }
    }
    write_csv(&dir.join("path_coef.csv"), &["index", "feature", "beta"], &rows)?;

    let idx = ds.index();
    let rows: Vec<Vec<String>> = out
        .chosen
        .beta
        .iter()
        .enumerate()
        .map(|(j, &b)| vec![(j + 1).to_string(), idx.label(j), fmt_f64(b)])
        .collect();
    write_csv(&dir.join("coefficients.csv"), &["feature", "label", "beta"], &rows)?;
    let rows: Vec<Vec<String>> = out.chosen.active_groups.iter().map(|g| vec![g.clone()]).collect();
    write_csv(&dir.join("active_groups.csv"), &["group"], &rows)?;
    write_groups(&dir.join("groups.csv"), spec, &idx)?;

    let saved = SavedModel {
        scheme: spec.scheme(),
        index_1se: cv.index_1se,
        model: out.chosen.clone(),
    };
    let json = serde_json::to_string_pretty(&saved)?;
    netcov_core::io::write_atomic(&dir.join("model.json"), json.as_bytes())?;
    Ok(())
}

fn numeric_records(path: &Path, ncols: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let malformed = |message: String| netcov_core::Error::Malformed {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        if rec.len() != ncols {
            return Err(malformed(format!("line {}: expected {ncols} fields", i + 2)).into());
        }
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| malformed(format!("line {}: non-numeric field", i + 2)))?;
        out.push(row);
    }
    Ok(out)
}

/// Per-feature coefficients of each path entry, from `path.csv` and
/// `path_coef.csv`.
pub fn read_path(dir: &Path, p: usize) -> anyhow::Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let lambdas: Vec<f64> = numeric_records(&dir.join("path.csv"), 7)?.iter().map(|r| r[1]).collect();
    let mut betas = vec![vec![0.0; p]; lambdas.len()];
    let coef_path = dir.join("path_coef.csv");
    for (n, r) in numeric_records(&coef_path, 3)?.iter().enumerate() {
        let (i, j) = (r[0] as usize, r[1] as usize);
        if i == 0 || i > lambdas.len() || j == 0 || j > p {
            anyhow::bail!(netcov_core::Error::Malformed {
                path: coef_path.display().to_string(),
                message: format!("line {}: entry outside the path or feature range", n + 2),
            });
        }
        betas[i - 1][j - 1] = r[2];
    }
    Ok((lambdas, betas))
}

/// One row of `metrics.csv` without the scenario columns.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub n_selected: usize,
    pub support: Option<SupportReport>,
    pub prediction: PredictionReport,
}

pub const METRICS_HEADER: &[&str] = &[
    "method",
    "lambda",
    "n_selected",
    "recall",
    "precision",
    "fdr",
    "correlation",
    "accuracy",
];

impl MetricsRow {
    pub fn fields(&self) -> Vec<String> {
        let s = self.support.as_ref();
        vec![
            self.method.clone(),
            fmt_opt(self.lambda),
            self.n_selected.to_string(),
            fmt_opt(s.and_then(|r| r.recall())),
            fmt_opt(s.and_then(|r| r.precision())),
            fmt_opt(s.and_then(|r| r.features.fdr())),
            fmt_opt(self.prediction.correlation),
            fmt_opt(self.prediction.accuracy),
        ]
    }
}

pub const ROC_HEADER: &[&str] = &["method", "index", "lambda", "fpr", "tpr", "fdr"];

pub fn roc_fields(method: &str, roc: &[RocPoint]) -> Vec<Vec<String>> {
    roc.iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                method.to_string(),
                (i + 1).to_string(),
                fmt_f64(p.lambda),
                fmt_f64(p.fpr),
                fmt_f64(p.tpr),
                fmt_opt(p.fdr),
            ]
        })
        .collect()
}

fn support_of(truth: &[f64]) -> Vec<usize> {
    (0..truth.len()).filter(|&j| truth[j] != 0.0).collect()
}

fn test_rows(ds: &Dataset) -> (nalgebra::DMatrix<f64>, Option<nalgebra::DMatrix<f64>>, Vec<f64>) {
    let rows = &ds.split.test;
    let z = linalg::select_rows(&ds.design.z, rows);
    let w = ds.nuisance.as_ref().map(|w| linalg::select_rows(w, rows));
    let y = rows.iter().map(|&r| ds.response[r]).collect();
    (z, w, y)
}

fn prediction_on_test(y_hat: &[f64], y: &[f64], family: Family) -> anyhow::Result<PredictionReport> {
    if y.len() < 2 {
        return Ok(PredictionReport {
            correlation: None,
            accuracy: None,
        });
    }
    Ok(metrics::prediction_metrics(y_hat, y, family)?)
}

/// Metrics of a fitted model on the test split and, with a truth vector,
/// support recovery and the ROC curve of `path`.
pub fn evaluate_model(
    method: &str,
    model: &FitResult,
    path: Option<&(Vec<f64>, Vec<Vec<f64>>)>,
    ds: &Dataset,
    truth: Option<&[f64]>,
) -> anyhow::Result<(MetricsRow, Vec<RocPoint>)> {
    let p = ds.index().p();
    if model.p() != p {
        anyhow::bail!(netcov_core::Error::Shape(format!(
            "model has {} coefficients, dataset has {p} features",
            model.p()
        )));
    }
    let (z, w, y) = test_rows(ds);
    let y_hat = model.predict(&z, w.as_ref())?;
    let prediction = prediction_on_test(&y_hat, &y, ds.family)?;
    let mut roc = Vec::new();
    let support = match truth {
        Some(t) => {
            if t.len() != p {
                anyhow::bail!(netcov_core::Error::Shape(format!(
                    "truth has {} entries, dataset has {p} features",
                    t.len()
                )));
            }
            let s = support_of(t);
            if let Some((lambdas, betas)) = path {
                roc = metrics::roc_along_path(lambdas, betas, &s)?;
            }
            Some(metrics::support_metrics(&model.beta, &s)?)
        }
        None => None,
    };
    Ok((
        MetricsRow {
            method: method.to_string(),
            lambda: Some(model.lambda),
            n_selected: model.selected().len(),
            support,
            prediction,
        },
        roc,
    ))
}

pub fn fit_cpm(ds: &Dataset, threshold: f64) -> anyhow::Result<CpmModel> {
    if ds.family != Family::Gaussian {
        anyhow::bail!(netcov_core::Error::InvalidInput(
            "CPM supports continuous responses only".into()
        ));
    }
    let rows = &ds.split.train;
    let z = linalg::select_rows(&ds.design.z, rows);
    let y: Vec<f64> = rows.iter().map(|&r| ds.response[r]).collect();
    Ok(cpm_fit(&z, &y, &ds.index(), threshold)?)
}

pub fn evaluate_cpm(model: &CpmModel, ds: &Dataset, truth: Option<&[f64]>) -> anyhow::Result<MetricsRow> {
    let (z, _, y) = test_rows(ds);
    let y_hat = if z.nrows() > 0 { cpm_predict(model, &z)? } else { Vec::new() };
    let prediction = prediction_on_test(&y_hat, &y, ds.family)?;
    let mut selected = vec![0.0; model.p];
    for &e in model.positive.iter().chain(&model.negative) {
        selected[e] = 1.0;
    }
    let support = truth
        .map(|t| metrics::support_metrics(&selected, &support_of(t)))
        .transpose()?;
    Ok(MetricsRow {
        method: "cpm".into(),
        lambda: None,
        n_selected: model.positive.len() + model.negative.len(),
        support,
        prediction,
    })
}

pub fn write_cpm_edges(path: &Path, model: &CpmModel, ds: &Dataset) -> anyhow::Result<()> {
    let idx = ds.index();
    let pairs: Vec<(usize, usize)> = idx.edge_order().collect();
    let rows: Vec<Vec<String>> = model
        .screen
        .iter()
        .map(|s| {
            let (k, l) = pairs[s.edge];
            let sign = if model.positive.contains(&s.edge) {
                "positive"
            } else if model.negative.contains(&s.edge) {
                "negative"
            } else {
                "none"
            };
            vec![
                (s.edge + 1).to_string(),
                (k + 1).to_string(),
                (l + 1).to_string(),
                fmt_f64(s.r),
                fmt_f64(s.p_value),
                sign.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["edge", "k", "l", "r", "p_value", "sign"], &rows)?;
    Ok(())
}

/// Scenario description shared by `scenario.csv` and the metrics tables.
#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub scheme: String,
    pub family: String,
    pub active: String,
    pub alpha: String,
    pub difficulty_kind: String,
    pub difficulty: String,
    pub seed: String,
}

pub const SCENARIO_HEADER: &[&str] = &["scheme", "family", "active", "alpha", "difficulty_kind", "difficulty", "seed"];

impl Scenario {
    pub fn from_simulation(sim: &Simulation, seed: u64) -> Self {
        Scenario {
            scheme: sim.spec.scheme().to_string(),
            family: sim.dataset.family.to_string(),
            active: sim.truth.active_groups.join(";"),
            alpha: fmt_f64(sim.truth.alpha),
            difficulty_kind: sim.difficulty.kind().to_string(),
            difficulty: fmt_f64(sim.difficulty.value()),
            seed: seed.to_string(),
        }
    }

    pub fn unknown() -> Self {
        let na = || "NA".to_string();
        Scenario {
            scheme: na(),
            family: na(),
            active: na(),
            alpha: na(),
            difficulty_kind: na(),
            difficulty: na(),
            seed: na(),
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.scheme.clone(),
            self.family.clone(),
            self.active.clone(),
            self.alpha.clone(),
            self.difficulty_kind.clone(),
            self.difficulty.clone(),
            self.seed.clone(),
        ]
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_csv(path, SCENARIO_HEADER, &[self.fields()])?;
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let rec = reader
            .records()
            .next()
            .ok_or_else(|| netcov_core::Error::Malformed {
                path: path.display().to_string(),
                message: "no scenario row".into(),
            })??;
        if rec.len() != SCENARIO_HEADER.len() {
            anyhow::bail!(netcov_core::Error::Malformed {
                path: path.display().to_string(),
                message: format!("expected {} fields, found {}", SCENARIO_HEADER.len(), rec.len()),
            });
        }
        let f = |i: usize| rec[i].to_string();
        Ok(Scenario {
            scheme: f(0),
            family: f(1),
            active: f(2),
            alpha: f(3),
            difficulty_kind: f(4),
            difficulty: f(5),
            seed: f(6),
        })
    }
}
