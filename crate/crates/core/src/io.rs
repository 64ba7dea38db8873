//! On-disk dataset layout and small CSV helpers.
//!
//! A dataset directory holds headerless CSV files:
//!
//! * `A.csv`: one row per observation, edges in canonical order
//! * `X.csv`: one row per observation, node covariates node-major (absent when `d = 0`)
//! * `y.csv`: one response per line
//! * `communities.csv`: `node_id,community_id`, both 1-based
//! * `nuisance.csv`: optional nuisance covariates
//!
//! plus `manifest.toml` recording `n`, `d`, `n_obs`, `family` and the
//! 1-based train/test row ranges (`"1-785"`, `"786-881"`, `"1-3,7"`).
//!
//! Files are written to a temporary name and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{CommunityMap, Dataset, DesignMatrix, Family, FeatureIndex, Split};
use crate::error::{Error, Result};
use crate::grouping::GroupSpec;
use crate::simgen::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub n: usize,
    pub d: usize,
    pub n_obs: usize,
    pub family: Family,
    pub train_rows: String,
    #[serde(default)]
    pub test_rows: String,
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest form that parses back to the same value; exponent notation for
/// very small or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

/// Writes a CSV table; `header` may be empty for headerless files.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|&v| fmt_f64(v)).collect())
        .collect();
    write_csv(path, &[], &rows)
}

/// Reads a headerless numeric CSV. `ncols` is checked when given.
pub fn read_matrix(path: &Path, ncols: Option<usize>) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    let mut data = Vec::new();
    let mut nrows = 0;
    let mut width = ncols;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(path, e.to_string()))?;
        match width {
            Some(w) if w != rec.len() => {
                return Err(Error::malformed(
                    path,
                    format!("line {} has {} fields, expected {w}", i + 1, rec.len()),
                ))
            }
            None => width = Some(rec.len()),
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::malformed(path, format!("line {}: `{field}` is not a number", i + 1))
            })?;
            data.push(v);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, width.unwrap_or(0), &data))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path, Some(1))?;
    Ok(DVector::from_column_slice(m.as_slice()))
}

/// Parses 1-based inclusive ranges such as `"1-785"` or `"1-3,7"` into
/// 0-based row indices.
pub fn parse_row_ranges(s: &str) -> Result<Vec<usize>> {
    let mut rows = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::invalid(format!("row range `{part}` is not of the form a-b or a"));
        let (a, b) = match part.split_once('-') {
            Some((a, b)) => (
                a.trim().parse::<usize>().map_err(|_| bad())?,
                b.trim().parse::<usize>().map_err(|_| bad())?,
            ),
            None => {
                let a = part.parse::<usize>().map_err(|_| bad())?;
                (a, a)
            }
        };
        if a == 0 || b < a {
            return Err(bad());
        }
        rows.extend(a - 1..b);
    }
    Ok(rows)
}

/// Inverse of [`parse_row_ranges`], merging consecutive rows.
pub fn format_row_ranges(rows: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let start = rows[i];
        let mut end = start;
        while i + 1 < rows.len() && rows[i + 1] == end + 1 {
            end += 1;
            i += 1;
        }
        parts.push(if start == end {
            format!("{}", start + 1)
        } else {
            format!("{}-{}", start + 1, end + 1)
        });
        i += 1;
    }
    parts.join(",")
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let idx = ds.index();
    let z = &ds.design.z;
    let ne = idx.n_edges();
    write_matrix(&dir.join("A.csv"), &z.columns(0, ne).into_owned())?;
    if idx.n_covariates() > 0 {
        write_matrix(&dir.join("X.csv"), &z.columns(ne, idx.p() - ne).into_owned())?;
    }
    let y: Vec<Vec<String>> = ds.response.iter().map(|&v| vec![fmt_f64(v)]).collect();
    write_csv(&dir.join("y.csv"), &[], &y)?;
    let comm: Vec<Vec<String>> = ds
        .communities
        .labels()
        .iter()
        .enumerate()
        .map(|(k, &c)| vec![(k + 1).to_string(), c.to_string()])
        .collect();
    write_csv(&dir.join("communities.csv"), &[], &comm)?;
    if let Some(w) = &ds.nuisance {
        write_matrix(&dir.join("nuisance.csv"), w)?;
    }
    let manifest = DatasetManifest {
        n: idx.n_nodes(),
        d: idx.n_covariates(),
        n_obs: ds.n_obs(),
        family: ds.family,
        train_rows: format_row_ranges(&ds.split.train),
        test_rows: format_row_ranges(&ds.split.test),
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::invalid(format!("cannot encode manifest: {e}")))?;
    write_atomic(&dir.join("manifest.toml"), text.as_bytes())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.toml");
    let text = fs::read_to_string(&path).map_err(|e| Error::malformed(&path, e.to_string()))?;
    toml::from_str(&text).map_err(|e| Error::malformed(&path, e.to_string()))
}

pub fn read_communities(path: &Path, n: usize) -> Result<CommunityMap> {
    let m = read_matrix(path, Some(2))?;
    if m.nrows() != n {
        return Err(Error::malformed(path, format!("{} nodes listed, expected {n}", m.nrows())));
    }
    let mut labels = vec![0usize; n];
    let mut seen = vec![false; n];
    for i in 0..n {
        let (node, comm) = (m[(i, 0)], m[(i, 1)]);
        let as_index = |v: f64| (v.fract() == 0.0 && v >= 1.0).then_some(v as usize);
        let node = as_index(node)
            .filter(|&k| k <= n)
            .ok_or_else(|| Error::malformed(path, format!("line {}: bad node id", i + 1)))?;
        let comm = as_index(comm)
            .ok_or_else(|| Error::malformed(path, format!("line {}: bad community id", i + 1)))?;
        if seen[node - 1] {
            return Err(Error::malformed(path, format!("node {node} listed twice")));
        }
        seen[node - 1] = true;
        labels[node - 1] = comm;
    }
    CommunityMap::new(labels)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let man = read_manifest(dir)?;
    let idx = FeatureIndex::new(man.n, man.d)?;
    let a = read_matrix(&dir.join("A.csv"), Some(idx.n_edges()))?;
    let check_rows = |m: &DMatrix<f64>, name: &str| {
        if m.nrows() == man.n_obs {
            Ok(())
        } else {
            Err(Error::malformed(
                &dir.join(name),
                format!("{} rows, manifest says {}", m.nrows(), man.n_obs),
            ))
        }
    };
    check_rows(&a, "A.csv")?;
    let mut z = DMatrix::zeros(man.n_obs, idx.p());
    z.columns_mut(0, idx.n_edges()).copy_from(&a);
    if man.d > 0 {
        let x = read_matrix(&dir.join("X.csv"), Some(man.n * man.d))?;
        check_rows(&x, "X.csv")?;
        z.columns_mut(idx.n_edges(), man.n * man.d).copy_from(&x);
    }
    let y = read_vector(&dir.join("y.csv"))?;
    if y.len() != man.n_obs {
        return Err(Error::malformed(
            &dir.join("y.csv"),
            format!("{} rows, manifest says {}", y.len(), man.n_obs),
        ));
    }
    let communities = read_communities(&dir.join("communities.csv"), man.n)?;
    let nuisance_path = dir.join("nuisance.csv");
    let nuisance = if nuisance_path.exists() {
        let w = read_matrix(&nuisance_path, None)?;
        check_rows(&w, "nuisance.csv")?;
        Some(w)
    } else {
        None
    };
    let split = Split {
        train: parse_row_ranges(&man.train_rows)?,
        test: parse_row_ranges(&man.test_rows)?,
    };
    Dataset::new(DesignMatrix { index: idx, z }, y, man.family, communities, nuisance, split)
}

/// `truth.csv`: 1-based feature index and coefficient, one line per feature.
pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let rows: Vec<Vec<String>> = truth
        .beta
        .iter()
        .enumerate()
        .map(|(j, &b)| vec![(j + 1).to_string(), fmt_f64(b)])
        .collect();
    write_csv(path, &[], &rows)
}

/// Reads `truth.csv` back as a dense coefficient vector of length `p`.
pub fn read_truth(path: &Path, p: usize) -> Result<Vec<f64>> {
    let m = read_matrix(path, Some(2))?;
    let mut beta = vec![0.0; p];
    for i in 0..m.nrows() {
        let j = m[(i, 0)];
        if j.fract() != 0.0 || j < 1.0 || j as usize > p {
            return Err(Error::malformed(path, format!("line {}: bad feature index", i + 1)));
        }
        beta[j as usize - 1] = m[(i, 1)];
    }
    Ok(beta)
}

/// `groups.csv`: one line per (group, feature) membership.
pub fn write_groups(path: &Path, spec: &GroupSpec, idx: &FeatureIndex) -> Result<()> {
    let mut rows = Vec::new();
    for g in spec.groups() {
        for &f in &g.features {
            rows.push(vec![g.name.clone(), (f + 1).to_string(), idx.label(f)]);
        }
    }
    write_csv(path, &["group", "feature", "label"], &rows)
}
