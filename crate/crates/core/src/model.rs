//! End-to-end fitting pipeline: nuisance residualization, standardization,
//! group expansion, orthonormalization and penalized fits, plus a
//! self-contained fitted model for prediction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family};
use crate::error::{Error, Result};
use crate::grouping::{ExpansionMap, GroupSpec};
use crate::linalg::{self, sigmoid};
use crate::preprocess::{
    back_transform, nuisance_targets, orthonormalize, split_targets, NuisanceModel,
    Orthonormalized, Standardizer,
};
use crate::solver::{self, PenalizedProblem, Solution, SolverOptions};

/// Everything learned from a set of training rows before the penalized fit.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub family: Family,
    pub nuisance: Option<NuisanceModel>,
    pub standardizer: Standardizer,
    pub map: ExpansionMap,
    pub group_names: Vec<String>,
    pub ortho: Orthonormalized,
    /// Transformed training response, aligned with the rows of `ortho.design`.
    pub response: DVector<f64>,
}

impl Prepared {
    /// Learns preprocessing from `rows` of `z` and `y` only.
    pub fn fit(
        z: &DMatrix<f64>,
        y: &DVector<f64>,
        nuisance: Option<&DMatrix<f64>>,
        family: Family,
        rows: &[usize],
        spec: &GroupSpec,
    ) -> Result<Self> {
        if z.ncols() != spec.p() {
            return Err(Error::shape(format!(
                "design has {} columns, grouping covers {}",
                z.ncols(),
                spec.p()
            )));
        }
        let z_tr = linalg::select_rows(z, rows);
        let y_tr = linalg::select_entries(y, rows);
        let local: Vec<usize> = (0..rows.len()).collect();
        let (nuis, z_tr, y_tr) = match nuisance {
            Some(w) => {
                let w_tr = linalg::select_rows(w, rows);
                let targets = nuisance_targets(&z_tr, &y_tr, family);
                let model = NuisanceModel::fit(&w_tr, &targets, &local)?;
                let resid = model.residualize(&w_tr, &targets)?;
                let (zc, yc) = split_targets(resid, &y_tr, family);
                (Some(model), zc, yc)
            }
            None => (None, z_tr, y_tr),
        };
        let standardizer = Standardizer::fit(&z_tr, &y_tr, &local, family)?;
        let zs = standardizer.transform(&z_tr)?;
        let ys = standardizer.transform_response(&y_tr);
        let map = spec.expansion();
        let ortho = orthonormalize(&zs, &map)?;
        Ok(Prepared {
            family,
            nuisance: nuis,
            standardizer,
            map,
            group_names: spec.names(),
            ortho,
            response: ys,
        })
    }

    pub fn from_dataset(ds: &Dataset, spec: &GroupSpec, rows: &[usize]) -> Result<Self> {
        Prepared::fit(
            &ds.design.z,
            &ds.response,
            ds.nuisance.as_ref(),
            ds.family,
            rows,
            spec,
        )
    }

    pub fn problem(&self) -> Result<PenalizedProblem<'_>> {
        PenalizedProblem::new(
            &self.ortho.design,
            &self.response,
            self.family,
            &self.ortho.layout,
        )
    }

    pub fn lambda_max(&self) -> Result<f64> {
        solver::lambda_max(&self.problem()?)
    }

    /// Names of the groups with a nonzero coefficient block.
    pub fn active_names(&self, sol: &Solution) -> Vec<String> {
        sol.active_groups(&self.ortho.layout)
            .into_iter()
            .map(|g| self.group_names[self.ortho.spec_group(g)].clone())
            .collect()
    }

    pub fn entry(&self, sol: &Solution) -> Result<PathEntry> {
        let (_, beta) = back_transform(sol.beta.as_slice(), &self.ortho, &self.map)?;
        Ok(PathEntry {
            lambda: sol.lambda,
            intercept: sol.intercept,
            beta_tilde: sol.beta.as_slice().to_vec(),
            beta: beta.as_slice().to_vec(),
            active_groups: self.active_names(sol),
            deviance: sol.deviance,
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
        })
    }

    pub fn fit_path(&self, lambdas: &[f64], opts: &SolverOptions) -> Result<PathFit> {
        let problem = self.problem()?;
        let sols = solver::fit_path(&problem, lambdas, opts)?;
        let entries = sols
            .iter()
            .map(|s| self.entry(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(PathFit { entries })
    }

    pub fn fit_result(&self, entry: &PathEntry) -> FitResult {
        FitResult {
            family: self.family,
            lambda: entry.lambda,
            intercept: entry.intercept,
            beta: entry.beta.clone(),
            active_groups: entry.active_groups.clone(),
            standardizer: self.standardizer.clone(),
            nuisance: self.nuisance.clone(),
        }
    }
}

/// One point of a regularization path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    pub lambda: f64,
    pub intercept: f64,
    /// Coefficients in the orthonormal basis.
    pub beta_tilde: Vec<f64>,
    /// Folded-back coefficients on the standardized original features.
    pub beta: Vec<f64>,
    pub active_groups: Vec<String>,
    pub deviance: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Fits along a strictly decreasing grid, largest `lambda` first.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFit {
    pub entries: Vec<PathEntry>,
}

impl PathFit {
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A fitted model that predicts from raw design rows.
///
/// `beta` lives on the standardized feature scale, so its support is the
/// selected feature set and magnitudes are comparable across features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub lambda: f64,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub active_groups: Vec<String>,
    pub standardizer: Standardizer,
    pub nuisance: Option<NuisanceModel>,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Linear predictor on the model scale (standardized response for
    /// gaussian, logit for binomial), before adding back nuisance effects.
    fn model_eta(&self, z: &DMatrix<f64>, nuisance: Option<&DMatrix<f64>>) -> Result<(Vec<f64>, Vec<f64>)> {
        if z.ncols() != self.p() {
            return Err(Error::shape(format!(
                "design has {} columns, model expects {}",
                z.ncols(),
                self.p()
            )));
        }
        let (z, offset) = match (&self.nuisance, nuisance) {
            (Some(model), Some(w)) => {
                let dummy = DVector::zeros(z.nrows());
                let targets = nuisance_targets(z, &dummy, self.family);
                let resid = model.residualize(w, &targets)?;
                let (zc, yc) = split_targets(resid, &dummy, self.family);
                // the response column of `targets` was zero, so `-yc` is the
                // nuisance prediction of y
                let offset = match self.family {
                    Family::Gaussian => yc.iter().map(|v| -v).collect(),
                    Family::Binomial => vec![0.0; z.nrows()],
                };
                (zc, offset)
            }
            (Some(_), None) => {
                return Err(Error::invalid("model was fitted with nuisance covariates"))
            }
            (None, Some(_)) => {
                return Err(Error::invalid("model was fitted without nuisance covariates"))
            }
            (None, None) => (z.clone(), vec![0.0; z.nrows()]),
        };
        let zs = self.standardizer.transform(&z)?;
        let mut eta = vec![self.intercept; zs.nrows()];
        for (j, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                linalg::axpy(b, linalg::column(&zs, j), &mut eta);
            }
        }
        Ok((eta, offset))
    }

    /// Linear predictor in response units (gaussian) or logits (binomial).
    pub fn linear_predictor(&self, z: &DMatrix<f64>, nuisance: Option<&DMatrix<f64>>) -> Result<Vec<f64>> {
        let (eta, offset) = self.model_eta(z, nuisance)?;
        Ok(eta
            .into_iter()
            .zip(offset)
            .map(|(e, o)| self.standardizer.response_scale(e) + o)
            .collect())
    }

    /// Predicted response (gaussian) or success probability (binomial).
    pub fn predict(&self, z: &DMatrix<f64>, nuisance: Option<&DMatrix<f64>>) -> Result<Vec<f64>> {
        let eta = self.linear_predictor(z, nuisance)?;
        Ok(match self.family {
            Family::Gaussian => eta,
            Family::Binomial => eta.into_iter().map(sigmoid).collect(),
        })
    }

    /// Deviance per observation on the raw response scale.
    pub fn mean_deviance(&self, z: &DMatrix<f64>, nuisance: Option<&DMatrix<f64>>, y: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(z, nuisance)?;
        if eta.len() != y.len() {
            return Err(Error::shape("response length differs from design rows"));
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(solver::deviance(self.family, y, &eta) / y.len() as f64)
    }

    pub fn selected(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > crate::metrics::SELECTION_THRESHOLD)
            .map(|(j, _)| j)
            .collect()
    }
}
