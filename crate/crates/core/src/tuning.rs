//! K-fold cross-validation over a fixed `lambda` grid with the
//! one-standard-error rule.
//!
//! The grid is computed once from the full training set and shared by every
//! fold. Each fold learns its own nuisance model, standardization and
//! orthonormal bases from its training part only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};
use crate::grouping::GroupSpec;
use crate::linalg;
use crate::model::{FitResult, PathFit, Prepared};
use crate::solver::{self, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub min_ratio: f64,
    pub solver: SolverOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 10,
            seed: 0,
            grid_size: 100,
            min_ratio: 0.05,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Descending grid shared by all folds.
    pub lambdas: Vec<f64>,
    /// Mean held-out deviance per observation, per `lambda`.
    pub mean: Vec<f64>,
    /// Standard error of `mean` across folds.
    pub se: Vec<f64>,
    /// Position of the minimum mean deviance.
    pub index_min: usize,
    /// Position chosen by the one-standard-error rule.
    pub index_1se: usize,
    /// Fold of each training row, aligned with the dataset's training rows.
    pub fold_of: Vec<usize>,
    /// `folds x lambdas` held-out deviances.
    pub fold_deviance: Vec<Vec<f64>>,
}

impl CvResult {
    pub fn lambda_min(&self) -> f64 {
        self.lambdas[self.index_min]
    }

    pub fn lambda_1se(&self) -> f64 {
        self.lambdas[self.index_1se]
    }
}

/// Returns `(index_min, index_1se)` for a descending grid: the first position
/// of the minimum mean and the first (largest-`lambda`) position whose mean
/// lies within one standard error of it.
pub fn one_se_rule(mean: &[f64], se: &[f64]) -> Result<(usize, usize)> {
    if mean.is_empty() || mean.len() != se.len() {
        return Err(Error::shape("mean and standard error vectors must be non-empty and aligned"));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::Degenerate("non-finite cross-validation deviance".into()));
    }
    let mut imin = 0;
    for (i, &m) in mean.iter().enumerate() {
        if m < mean[imin] {
            imin = i;
        }
    }
    let bound = mean[imin] + se[imin];
    let i1se = mean
        .iter()
        .position(|&m| m <= bound)
        .expect("the minimum satisfies its own bound");
    Ok((imin, i1se))
}

/// Seeded fold labels for `n` rows: a random permutation assigned
/// round-robin, so fold sizes differ by at most one.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold_of[row] = pos % folds;
    }
    fold_of
}

fn derived_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn folds_are_usable(y: &[f64], fold_of: &[usize], folds: usize) -> bool {
    (0..folds).all(|k| {
        let mut it = y.iter().zip(fold_of).filter(|(_, &f)| f != k).map(|(v, _)| *v);
        match it.next() {
            Some(first) => it.any(|v| v != first),
            None => false,
        }
    })
}

/// Fold assignment for a dataset's training rows. For binary responses a
/// draw that leaves some fold's training part with a single class is
/// replaced once by a draw from a derived seed.
pub fn dataset_folds(ds: &Dataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let n = ds.split.train.len();
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    if n < folds {
        return Err(Error::invalid(format!(
            "{n} training rows cannot fill {folds} folds"
        )));
    }
    let fold_of = assign_folds(n, folds, seed);
    if ds.family != Family::Binomial {
        return Ok(fold_of);
    }
    let y: Vec<f64> = ds.split.train.iter().map(|&r| ds.response[r]).collect();
    if folds_are_usable(&y, &fold_of, folds) {
        return Ok(fold_of);
    }
    let retry = assign_folds(n, folds, derived_seed(seed));
    if folds_are_usable(&y, &retry, folds) {
        log::warn!("fold assignment redrawn: a fold's training part had a single class");
        return Ok(retry);
    }
    Err(Error::Degenerate(
        "a fold's training part has a single response class after redrawing".into(),
    ))
}

/// Preprocessing learned on the training part of fold `k`.
pub fn prepare_fold(ds: &Dataset, spec: &GroupSpec, fold_of: &[usize], k: usize) -> Result<Prepared> {
    let rows: Vec<usize> = ds
        .split
        .train
        .iter()
        .zip(fold_of)
        .filter(|(_, &f)| f != k)
        .map(|(&r, _)| r)
        .collect();
    Prepared::from_dataset(ds, spec, &rows)
}

/// The shared grid: `grid_size` log-spaced values below `lambda_max` of the
/// full training set.
pub fn training_grid(full: &Prepared, opts: &CvOptions) -> Result<Vec<f64>> {
    solver::lambda_grid(full.lambda_max()?, opts.grid_size, opts.min_ratio)
}

/// Cross-validates `spec` on the dataset's training rows.
pub fn cross_validate(ds: &Dataset, spec: &GroupSpec, opts: &CvOptions) -> Result<CvResult> {
    let full = Prepared::from_dataset(ds, spec, &ds.split.train)?;
    let lambdas = training_grid(&full, opts)?;
    cross_validate_on_grid(ds, spec, &lambdas, opts)
}

pub fn cross_validate_on_grid(
    ds: &Dataset,
    spec: &GroupSpec,
    lambdas: &[f64],
    opts: &CvOptions,
) -> Result<CvResult> {
    let fold_of = dataset_folds(ds, opts.folds, opts.seed)?;
    let fold_deviance = (0..opts.folds)
        .into_par_iter()
        .map(|k| fold_deviances(ds, spec, &fold_of, k, lambdas, &opts.solver))
        .collect::<Result<Vec<_>>>()?;

    let nf = opts.folds as f64;
    let mut mean = Vec::with_capacity(lambdas.len());
    let mut se = Vec::with_capacity(lambdas.len());
    for l in 0..lambdas.len() {
        let vals: Vec<f64> = fold_deviance.iter().map(|f| f[l]).collect();
        let m = linalg::mean(&vals);
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nf - 1.0);
        mean.push(m);
        se.push(var.sqrt() / nf.sqrt());
    }
    let (index_min, index_1se) = one_se_rule(&mean, &se)?;
    Ok(CvResult {
        lambdas: lambdas.to_vec(),
        mean,
        se,
        index_min,
        index_1se,
        fold_of,
        fold_deviance,
    })
}

fn fold_deviances(
    ds: &Dataset,
    spec: &GroupSpec,
    fold_of: &[usize],
    k: usize,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let prep = prepare_fold(ds, spec, fold_of, k)?;
    let held: Vec<usize> = ds
        .split
        .train
        .iter()
        .zip(fold_of)
        .filter(|(_, &f)| f == k)
        .map(|(&r, _)| r)
        .collect();
    let z = linalg::select_rows(&ds.design.z, &held);
    let w = ds.nuisance.as_ref().map(|w| linalg::select_rows(w, &held));
    let y: Vec<f64> = held.iter().map(|&r| ds.response[r]).collect();
    let path = prep.fit_path(lambdas, opts)?;
    path.entries
        .iter()
        .map(|e| prep.fit_result(e).mean_deviance(&z, w.as_ref(), &y))
        .collect()
}

/// Full-training-set path over `cv.lambdas` and the refit at the one-SE
/// choice. The path is computed down to the smallest grid value.
pub fn fit_full_path(ds: &Dataset, spec: &GroupSpec, cv: &CvResult, opts: &SolverOptions) -> Result<(Prepared, PathFit)> {
    let full = Prepared::from_dataset(ds, spec, &ds.split.train)?;
    let path = full.fit_path(&cv.lambdas, opts)?;
    Ok((full, path))
}

/// Refits on the full training set at the one-SE `lambda`, warm-starting
/// down the grid.
pub fn select_and_refit(ds: &Dataset, spec: &GroupSpec, cv: &CvResult, opts: &SolverOptions) -> Result<FitResult> {
    let full = Prepared::from_dataset(ds, spec, &ds.split.train)?;
    let path = full.fit_path(&cv.lambdas[..=cv.index_1se], opts)?;
    let last = path.entries.last().expect("grid is non-empty");
    Ok(full.fit_result(last))
}
