use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use netcov_core::grouping::split_communities;
use netcov_core::io::{read_dataset, read_truth, write_csv, write_dataset, write_groups, write_truth};
use netcov_core::metrics::RocPoint;
use netcov_core::{Dataset, GroupSpec, Scheme};
use rayon::prelude::*;

use crate::config::{fit_scheme, write_manifest, Config};
use crate::experiment::{plan, Job, Plan};
use crate::pipeline::{
    evaluate_cpm, evaluate_model, fit_cpm, fit_dataset, read_path, roc_fields, write_cpm_edges, write_fit,
    MetricsRow, SavedModel, Scenario, METRICS_HEADER, ROC_HEADER, SCENARIO_HEADER,
};

fn finish(dir: &Path, subcommand: &str, cfg: &Config, start: Instant) -> anyhow::Result<()> {
    let timings = BTreeMap::from([("total_seconds".to_string(), start.elapsed().as_secs_f64())]);
    write_manifest(dir, subcommand, cfg, &timings)
}

fn header<'a>(prefix: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
    prefix.iter().chain(rest).copied().collect()
}

fn truth_of(dir: &Path, p: usize) -> anyhow::Result<Option<Vec<f64>>> {
    let path = dir.join("truth.csv");
    Ok(if path.exists() { Some(read_truth(&path, p)?) } else { None })
}

fn scenario_of(dir: &Path) -> anyhow::Result<Scenario> {
    let path = dir.join("scenario.csv");
    if path.exists() {
        Scenario::read(&path)
    } else {
        Ok(Scenario::unknown())
    }
}

fn method_name(scheme: Scheme) -> String {
    match scheme {
        Scheme::Singleton => "lasso".into(),
        s => format!("netcov-{s}"),
    }
}

fn job_dir(out: &Path, plan: &Plan, job: &Job) -> std::path::PathBuf {
    if plan.jobs.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(&plan.cells[job.cell].name).join(format!("rep_{:02}", job.replicate))
    }
}

pub fn simulate(cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let plan = plan(cfg)?;
    log::info!("simulating {} cells x {} replicates", plan.cells.len(), cfg.experiment.replicates);
    plan.jobs.par_iter().try_for_each(|job| -> anyhow::Result<()> {
        let sim = plan.simulate(cfg, job)?;
        let dir = job_dir(out, &plan, job);
        write_dataset(&dir, &sim.dataset)?;
        write_truth(&dir.join("truth.csv"), &sim.truth)?;
        write_groups(&dir.join("groups.csv"), &sim.spec, &sim.dataset.index())?;
        Scenario::from_simulation(&sim, job.seed).write(&dir.join("scenario.csv"))
    })?;
    finish(out, "simulate", cfg, start)
}

fn load_for_fit(cfg: &Config, seed: u64) -> anyhow::Result<(Dataset, GroupSpec)> {
    let data = cfg.data_dir()?;
    let mut ds = read_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    if let Some(target) = cfg.fit.split_communities {
        ds.communities = split_communities(&ds.communities, target, seed)?;
    }
    let spec = GroupSpec::build(fit_scheme(&cfg.fit.scheme)?, &ds.communities, &ds.index())?;
    Ok((ds, spec))
}

pub fn fit(cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let (ds, spec) = load_for_fit(cfg, seed)?;
    let fitted = fit_dataset(&ds, &spec, &cfg.solver.cv_options(seed))?;
    std::fs::create_dir_all(out)?;
    write_fit(out, &fitted, &ds, &spec)?;
    finish(out, "fit", cfg, start)
}

fn write_metrics(dir: &Path, scenario: &Scenario, rows: &[MetricsRow]) -> anyhow::Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| scenario.fields().into_iter().chain(r.fields()).collect())
        .collect();
    write_csv(&dir.join("metrics.csv"), &header(SCENARIO_HEADER, METRICS_HEADER), &table)?;
    Ok(())
}

pub fn cpm(cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let data = cfg.data_dir()?;
    let out = cfg.out_dir()?;
    let ds = read_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    let model = fit_cpm(&ds, cfg.cpm.alpha)?;
    let truth = truth_of(data, ds.index().p())?;
    let row = evaluate_cpm(&model, &ds, truth.as_deref())?;
    std::fs::create_dir_all(out)?;
    write_cpm_edges(&out.join("cpm_edges.csv"), &model, &ds)?;
    write_metrics(out, &scenario_of(data)?, &[row])?;
    finish(out, "cpm", cfg, start)
}

pub fn evaluate(cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let fit_dir = cfg.fit_dir()?;
    let data = cfg.data_dir()?;
    let out = cfg.out_dir()?;
    let model_path = fit_dir.join("model.json");
    let malformed = |message: String| netcov_core::Error::Malformed {
        path: model_path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(&model_path).map_err(|e| malformed(e.to_string()))?;
    let saved: SavedModel = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let ds = read_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    let p = ds.index().p();
    if saved.model.p() != p {
        anyhow::bail!(netcov_core::Error::Shape(format!(
            "fitted model has {} coefficients, dataset has {p} features",
            saved.model.p()
        )));
    }
    let truth = truth_of(data, p)?;
    let path = if truth.is_some() { Some(read_path(fit_dir, p)?) } else { None };
    let method = method_name(saved.scheme);
    let (row, roc) = evaluate_model(&method, &saved.model, path.as_ref(), &ds, truth.as_deref())?;
    std::fs::create_dir_all(out)?;
    write_metrics(out, &scenario_of(data)?, &[row])?;
    if truth.is_some() {
        write_csv(&out.join("roc.csv"), ROC_HEADER, &roc_fields(&method, &roc))?;
    }
    finish(out, "evaluate", cfg, start)
}

struct JobResult {
    scenario: Scenario,
    metrics: Vec<MetricsRow>,
    roc: Vec<(String, Vec<RocPoint>)>,
}

fn run_job(cfg: &Config, plan: &Plan, job: &Job) -> anyhow::Result<JobResult> {
    let cell = &plan.cells[job.cell];
    let sim = plan.simulate(cfg, job)?;
    let ds = &sim.dataset;
    let truth = &sim.truth.beta;
    let mut metrics = Vec::new();
    let mut roc = Vec::new();
    for m in &cfg.fit.methods {
        if m == "cpm" {
            if ds.family == netcov_core::Family::Gaussian {
                metrics.push(evaluate_cpm(&fit_cpm(ds, cfg.cpm.alpha)?, ds, Some(truth))?);
            }
            continue;
        }
        let scheme = if m == "netcov" { cell.scheme } else { fit_scheme(m)? };
        let spec = GroupSpec::build(scheme, &ds.communities, &ds.index())?;
        let fitted = fit_dataset(ds, &spec, &cfg.solver.cv_options(job.seed))
            .with_context(|| format!("cell {} replicate {}: {m}", cell.name, job.replicate))?;
        let path = (
            fitted.path.lambdas(),
            fitted.path.entries.iter().map(|e| e.beta.clone()).collect(),
        );
        let name = method_name(scheme);
        let (row, points) = evaluate_model(&name, &fitted.chosen, Some(&path), ds, Some(truth))?;
        metrics.push(row);
        roc.push((name, points));
    }
    Ok(JobResult {
        scenario: Scenario::from_simulation(&sim, job.seed),
        metrics,
        roc,
    })
}

pub fn sweep(cfg: &Config) -> anyhow::Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let plan = plan(cfg)?;
    let results = plan
        .jobs
        .par_iter()
        .map(|job| run_job(cfg, &plan, job))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut scenario_rows = Vec::new();
    let mut metric_rows = Vec::new();
    let mut roc_rows = Vec::new();
    for (job, res) in plan.jobs.iter().zip(&results) {
        let key = vec![plan.cells[job.cell].name.clone(), job.replicate.to_string()];
        scenario_rows.push(key.iter().cloned().chain(res.scenario.fields()).collect());
        for r in &res.metrics {
            metric_rows.push(key.iter().cloned().chain(res.scenario.fields()).chain(r.fields()).collect());
        }
        for (method, points) in &res.roc {
            for f in roc_fields(method, points) {
                roc_rows.push(key.iter().cloned().chain(f).collect());
            }
        }
    }
    let key = ["cell", "replicate"];
    std::fs::create_dir_all(out)?;
    write_csv(&out.join("scenario.csv"), &header(&key, SCENARIO_HEADER), &scenario_rows)?;
    let full: Vec<&str> = header(&key, SCENARIO_HEADER);
    write_csv(&out.join("metrics.csv"), &header(&full, METRICS_HEADER), &metric_rows)?;
    write_csv(&out.join("roc.csv"), &header(&key, ROC_HEADER), &roc_rows)?;
    finish(out, "sweep", cfg, start)
}
