//! Run configuration: a TOML file with dotted keys, overridden by flags.
//!
//! Every key has a default except `seed`. Unknown keys are rejected all at
//! once. The resolved configuration, with defaults filled in, is written to
//! `run_manifest.toml` together with a `[run]` table of metadata; that file
//! is itself a valid `--config`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use netcov_core::{CvOptions, Family, Scheme, SolverOptions};
use serde::{Deserialize, Deserializer, Serialize};
use toml::{Table, Value};

/// A problem with the configuration or command line (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "paths.data",
    "paths.fit",
    "paths.out",
    "experiment.scheme",
    "experiment.family",
    "experiment.active_count",
    "experiment.active_groups",
    "experiment.alpha",
    "experiment.alpha_points",
    "experiment.snr_min",
    "experiment.snr_max",
    "experiment.replicates",
    "experiment.n_train",
    "experiment.n_test",
    "experiment.n_communities",
    "experiment.nodes_per_community",
    "experiment.d",
    "experiment.design",
    "experiment.split_communities",
    "solver.folds",
    "solver.grid_size",
    "solver.min_ratio",
    "solver.tol",
    "solver.max_iter",
    "solver.kkt_tol",
    "fit.scheme",
    "fit.methods",
    "fit.split_communities",
    "cpm.alpha",
];

/// Methods a sweep can run. `netcov` is the group lasso under the scheme
/// that generated the cell.
pub const METHODS: &[&str] = &["netcov", "nbg", "ebg", "lasso", "cpm"];

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    one_or_many(d).map(Some)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub fit: Fit,
    #[serde(default)]
    pub cpm: Cpm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    #[serde(deserialize_with = "one_or_many")]
    pub scheme: Vec<Scheme>,
    #[serde(deserialize_with = "one_or_many")]
    pub family: Vec<Family>,
    /// Sizes of the preset active sets.
    #[serde(deserialize_with = "one_or_many")]
    pub active_count: Vec<usize>,
    /// Explicit active group names; replaces `active_count`.
    #[serde(skip_serializing_if = "Option::is_none", deserialize_with = "opt_one_or_many")]
    pub active_groups: Option<Vec<String>>,
    /// Explicit magnitudes; otherwise a geometric grid over `snr_min..snr_max`.
    #[serde(skip_serializing_if = "Option::is_none", deserialize_with = "opt_one_or_many")]
    pub alpha: Option<Vec<f64>>,
    pub alpha_points: usize,
    pub snr_min: f64,
    pub snr_max: f64,
    pub replicates: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_communities: usize,
    pub nodes_per_community: usize,
    pub d: usize,
    /// Dataset directory whose design replaces the synthetic one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_communities: Option<usize>,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            scheme: vec![Scheme::Ebg],
            family: vec![Family::Gaussian],
            active_count: vec![1],
            active_groups: None,
            alpha: None,
            alpha_points: 20,
            snr_min: 0.01,
            snr_max: 10.0,
            replicates: 1,
            n_train: 1000,
            n_test: 1000,
            n_communities: 10,
            nodes_per_community: 5,
            d: 1,
            design: None,
            split_communities: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub folds: usize,
    pub grid_size: usize,
    pub min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub kkt_tol: f64,
}

impl Default for Solver {
    fn default() -> Self {
        let cv = CvOptions::default();
        Solver {
            folds: cv.folds,
            grid_size: cv.grid_size,
            min_ratio: cv.min_ratio,
            tol: cv.solver.tol,
            max_iter: cv.solver.max_iter,
            kkt_tol: cv.solver.kkt_tol,
        }
    }
}

impl Solver {
    pub fn cv_options(&self, seed: u64) -> CvOptions {
        CvOptions {
            folds: self.folds,
            seed,
            grid_size: self.grid_size,
            min_ratio: self.min_ratio,
            solver: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                kkt_tol: self.kkt_tol,
                trace: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fit {
    /// Grouping used by `fit`: nbg, ebg or lasso.
    pub scheme: String,
    /// Methods run by `sweep`.
    #[serde(deserialize_with = "one_or_many")]
    pub methods: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_communities: Option<usize>,
}

impl Default for Fit {
    fn default() -> Self {
        Fit {
            scheme: "ebg".into(),
            methods: vec!["netcov".into(), "lasso".into()],
            split_communities: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cpm {
    /// Screening p-value threshold.
    pub alpha: f64,
}

impl Default for Cpm {
    fn default() -> Self {
        Cpm { alpha: 0.01 }
    }
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push(key),
        }
    }
}

/// Parses `key=value`, reading the value as TOML and falling back to a
/// bare string.
pub fn parse_assignment(s: &str) -> anyhow::Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| config_error(format!("expected key=value, got `{s}`")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("`{p}` is not a table in key `{key}`")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Preset values applied before the file and flags.
pub fn preset(name: &str) -> anyhow::Result<Vec<(String, Value)>> {
    let text = match name {
        // both schemes and families, one or five active groups, twenty
        // magnitudes and ten replicates per cell
        "experiment-1" => {
            r#"
            experiment.scheme = ["nbg", "ebg"]
            experiment.family = ["gaussian", "binomial"]
            experiment.active_count = [1, 5]
            experiment.alpha_points = 20
            experiment.replicates = 10
            fit.methods = ["netcov", "lasso"]
            "#
        }
        other => return Err(config_error(format!("unknown preset `{other}` (known: experiment-1)"))),
    };
    let table: Table = text.parse().expect("preset text is valid TOML");
    let mut keys = Vec::new();
    flatten("", &table, &mut keys);
    Ok(keys
        .into_iter()
        .map(|k| {
            let v = k.split('.').fold(Value::Table(table.clone()), |v, p| v[p].clone());
            (k, v)
        })
        .collect())
}

/// Builds the resolved configuration from an optional file, a preset and
/// overriding assignments, in that order of increasing precedence.
pub fn load(
    file: Option<&Path>,
    preset_name: Option<&str>,
    overrides: &[(String, Value)],
) -> anyhow::Result<Config> {
    let mut table = Table::new();
    if let Some(name) = preset_name {
        for (k, v) in preset(name)? {
            set_dotted(&mut table, &k, v)?;
        }
    }
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut file_table: Table = text
            .parse()
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        // manifests carry run metadata next to the configuration
        file_table.remove("run");
        let mut keys = Vec::new();
        flatten("", &file_table, &mut keys);
        for k in keys {
            let v = k.split('.').fold(Value::Table(file_table.clone()), |v, p| v[p].clone());
            set_dotted(&mut table, &k, v)?;
        }
    }
    for (k, v) in overrides {
        set_dotted(&mut table, k, v.clone())?;
    }

    let mut keys = Vec::new();
    flatten("", &table, &mut keys);
    let unknown: Vec<&String> = keys.iter().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).collect();
    if !unknown.is_empty() {
        let list: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
        return Err(config_error(format!("unknown configuration keys: {}", list.join(", "))));
    }
    let cfg = Config::deserialize(Value::Table(table))
        .map_err(|e| config_error(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl Config {
    fn validate(&self) -> anyhow::Result<()> {
        let e = &self.experiment;
        let s = &self.solver;
        let checks = [
            (e.scheme.is_empty(), "experiment.scheme must not be empty"),
            (e.family.is_empty(), "experiment.family must not be empty"),
            (
                e.active_groups.is_none() && e.active_count.is_empty(),
                "experiment.active_count must not be empty",
            ),
            (e.replicates == 0, "experiment.replicates must be positive"),
            (e.alpha_points == 0, "experiment.alpha_points must be positive"),
            (
                !(e.snr_min > 0.0 && e.snr_max >= e.snr_min),
                "experiment.snr_min must be positive and at most experiment.snr_max",
            ),
            (
                e.alpha.as_ref().is_some_and(|a| a.is_empty() || a.iter().any(|v| !(*v > 0.0))),
                "experiment.alpha values must be positive",
            ),
            (s.folds < 2, "solver.folds must be at least 2"),
            (s.grid_size == 0, "solver.grid_size must be positive"),
            (!(s.min_ratio > 0.0 && s.min_ratio < 1.0), "solver.min_ratio must lie in (0, 1)"),
            (!(s.tol > 0.0), "solver.tol must be positive"),
            (!(s.kkt_tol > 0.0), "solver.kkt_tol must be positive"),
            (s.max_iter == 0, "solver.max_iter must be positive"),
            (!(self.cpm.alpha >= 0.0 && self.cpm.alpha <= 1.0), "cpm.alpha must lie in [0, 1]"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(bad, _)| *bad) {
            return Err(config_error(*msg));
        }
        if let Some(m) = self.fit.methods.iter().find(|m| !METHODS.contains(&m.as_str())) {
            return Err(config_error(format!(
                "unknown method `{m}` in fit.methods (known: {})",
                METHODS.join(", ")
            )));
        }
        if self.fit.methods.is_empty() {
            return Err(config_error("fit.methods must not be empty"));
        }
        fit_scheme(&self.fit.scheme)?;
        Ok(())
    }

    /// The seed, which every randomized command requires.
    pub fn seed(&self) -> anyhow::Result<u64> {
        self.seed
            .ok_or_else(|| config_error("a seed is required (set `seed` or pass --seed)"))
    }

    pub fn out_dir(&self) -> anyhow::Result<&Path> {
        self.paths
            .out
            .as_deref()
            .ok_or_else(|| config_error("an output directory is required (--out or paths.out)"))
    }

    pub fn data_dir(&self) -> anyhow::Result<&Path> {
        self.paths
            .data
            .as_deref()
            .ok_or_else(|| config_error("a dataset directory is required (--data or paths.data)"))
    }

    pub fn fit_dir(&self) -> anyhow::Result<&Path> {
        self.paths
            .fit
            .as_deref()
            .ok_or_else(|| config_error("a fit directory is required (--fit or paths.fit)"))
    }
}

/// `lasso` is the singleton grouping.
pub fn fit_scheme(name: &str) -> anyhow::Result<Scheme> {
    match name {
        "nbg" => Ok(Scheme::Nbg),
        "ebg" => Ok(Scheme::Ebg),
        "lasso" => Ok(Scheme::Singleton),
        other => Err(config_error(format!("unknown scheme `{other}` (expected nbg, ebg or lasso)"))),
    }
}

#[derive(Debug, Serialize)]
struct RunInfo<'a> {
    subcommand: &'a str,
    version: &'a str,
    timings: &'a BTreeMap<String, f64>,
}

/// Writes `run_manifest.toml` into `dir`.
pub fn write_manifest(
    dir: &Path,
    subcommand: &str,
    cfg: &Config,
    timings: &BTreeMap<String, f64>,
) -> anyhow::Result<()> {
    let mut table = match Value::try_from(cfg)? {
        Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    };
    let run = RunInfo {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        timings,
    };
    table.insert("run".into(), Value::try_from(&run)?);
    netcov_core::io::write_atomic(&dir.join("run_manifest.toml"), toml::to_string(&table)?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let f = write("seed = 3\nexperiment.scheme = \"nbg\"\n[solver]\ngrid_size = 10\n");
        let over = vec![parse_assignment("solver.folds=5").unwrap()];
        let cfg = load(Some(f.path()), None, &over).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.experiment.scheme, vec![Scheme::Nbg]);
        assert_eq!((cfg.solver.grid_size, cfg.solver.folds), (10, 5));
        assert_eq!(cfg.solver.min_ratio, 0.05);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let f = write("seed = 1\ncolour = 2\nsolver.gird_size = 3\n");
        let err = load(Some(f.path()), None, &[]).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("solver.gird_size"), "{err}");
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = load(None, Some("experiment-1"), &[("seed".into(), Value::Integer(9))]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_manifest(dir.path(), "simulate", &cfg, &BTreeMap::from([("total".into(), 1.5)])).unwrap();
        let again = load(Some(&dir.path().join("run_manifest.toml")), None, &[]).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.experiment.replicates, 10);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let over = vec![parse_assignment("solver.folds=1").unwrap()];
        let err = load(None, None, &over).unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
        assert!(load(None, None, &[]).unwrap().seed().is_err());
        assert_eq!(parse_assignment("fit.scheme=ebg").unwrap().1, Value::String("ebg".into()));
    }
}
