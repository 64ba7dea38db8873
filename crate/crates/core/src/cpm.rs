//! Connectome predictive modeling: marginal edge screening by Pearson
//! correlation, sign-split summation of the selected edges, and ordinary
//! least squares on the two summary scores.
//!
//! Only edge columns are read; node covariates never enter the model.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::FeatureIndex;
use crate::error::{Error, Result};
use crate::linalg;

/// Screening statistics for one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScreen {
    /// Canonical (0-based) edge coordinate.
    pub edge: usize,
    pub r: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpmModel {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    pub intercept: f64,
    pub slope_pos: f64,
    pub slope_neg: f64,
    pub threshold: f64,
    /// Number of columns of the design the model was fitted on.
    pub p: usize,
    /// Screening results for every edge.
    pub screen: Vec<EdgeScreen>,
}

/// Two-sided p-value of a Pearson correlation from `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

pub fn cpm_fit(z: &DMatrix<f64>, y: &[f64], idx: &FeatureIndex, threshold: f64) -> Result<CpmModel> {
    let n = z.nrows();
    if y.len() != n {
        return Err(Error::shape(format!("{} responses for {n} rows", y.len())));
    }
    if z.ncols() != idx.p() {
        return Err(Error::shape(format!(
            "design has {} columns, index expects {}",
            z.ncols(),
            idx.p()
        )));
    }
    if n <= 2 {
        return Err(Error::invalid("screening needs at least three training rows"));
    }
    if linalg::variance(y) <= 0.0 {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    let screen: Vec<EdgeScreen> = (0..idx.n_edges())
        .into_par_iter()
        .map(|e| match linalg::pearson(linalg::column(z, e), y) {
            Some(r) => EdgeScreen {
                edge: e,
                r,
                p_value: correlation_p_value(r, n),
            },
            None => EdgeScreen {
                edge: e,
                r: 0.0,
                p_value: 1.0,
            },
        })
        .collect();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for s in &screen {
        if s.p_value < threshold {
            if s.r > 0.0 {
                positive.push(s.edge);
            } else if s.r < 0.0 {
                negative.push(s.edge);
            }
        }
    }
    let sp = scores(z, &positive);
    let sn = scores(z, &negative);
    let mut cols: Vec<&[f64]> = Vec::new();
    if !positive.is_empty() {
        cols.push(&sp);
    }
    if !negative.is_empty() {
        cols.push(&sn);
    }
    let coef = ols_with_intercept(&cols, y)?;
    let mut it = coef[1..].iter().copied();
    let slope_pos = if positive.is_empty() { 0.0 } else { it.next().unwrap() };
    let slope_neg = if negative.is_empty() { 0.0 } else { it.next().unwrap() };
    Ok(CpmModel {
        positive,
        negative,
        intercept: coef[0],
        slope_pos,
        slope_neg,
        threshold,
        p: z.ncols(),
        screen,
    })
}

fn scores(z: &DMatrix<f64>, edges: &[usize]) -> Vec<f64> {
    let mut s = vec![0.0; z.nrows()];
    for &e in edges {
        linalg::axpy(1.0, linalg::column(z, e), &mut s);
    }
    s
}

/// Least squares of `y` on `[1, cols...]`, minimum-norm if rank deficient.
fn ols_with_intercept(cols: &[&[f64]], y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    let x = DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let svd = x.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    let b = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|e| Error::Degenerate(format!("CPM regression failed: {e}")))?;
    Ok(b.iter().copied().collect())
}

pub fn cpm_predict(model: &CpmModel, z: &DMatrix<f64>) -> Result<Vec<f64>> {
    if z.ncols() != model.p {
        return Err(Error::shape(format!(
            "design has {} columns, model was fitted on {}",
            z.ncols(),
            model.p
        )));
    }
    let sp = scores(z, &model.positive);
    let sn = scores(z, &model.negative);
    Ok(sp
        .iter()
        .zip(&sn)
        .map(|(a, b)| model.intercept + model.slope_pos * a + model.slope_neg * b)
        .collect())
}
