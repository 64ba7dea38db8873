//! Column standardization, nuisance residualization and groupwise
//! orthonormalization.
//!
//! All statistics are learned from training rows only and then applied to
//! any rows. Variances use the `1/N` convention.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Family;
use crate::error::{Error, Result};
use crate::grouping::ExpansionMap;
use crate::linalg;
use crate::solver::GroupLayout;

/// Singular values at or below this fraction of the group's largest one are
/// treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Per-column centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; `0` marks a constant column, which is
    /// mapped to zero in every row.
    pub sds: Vec<f64>,
    pub family: Family,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Standardizer {
    pub fn fit(z: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize], family: Family) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::invalid(
                "standardization needs at least two training rows",
            ));
        }
        let n = rows.len() as f64;
        let mut means = Vec::with_capacity(z.ncols());
        let mut sds = Vec::with_capacity(z.ncols());
        let mut constant = 0usize;
        for j in 0..z.ncols() {
            let col = linalg::column(z, j);
            let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n;
            let v = rows.iter().map(|&i| (col[i] - m) * (col[i] - m)).sum::<f64>() / n;
            let sd = v.sqrt();
            // spread indistinguishable from rounding of the mean counts as constant
            let sd = if sd <= 1e-13 * m.abs().max(f64::MIN_POSITIVE) {
                constant += 1;
                0.0
            } else {
                sd
            };
            means.push(m);
            sds.push(sd);
        }
        if constant > 0 {
            log::warn!("{constant} constant training column(s) set to zero");
        }
        let (y_mean, y_sd) = match family {
            Family::Gaussian => {
                let m = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
                let v = rows.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum::<f64>() / n;
                if v <= 0.0 {
                    return Err(Error::Degenerate(
                        "response is constant on the training rows".into(),
                    ));
                }
                (m, v.sqrt())
            }
            Family::Binomial => (0.0, 1.0),
        };
        Ok(Standardizer {
            means,
            sds,
            family,
            y_mean,
            y_sd,
        })
    }

    pub fn p(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.p() {
            return Err(Error::shape(format!(
                "design has {} columns, standardizer {}",
                z.ncols(),
                self.p()
            )));
        }
        let mut out = z.clone();
        let n = z.nrows().max(1);
        for (j, col) in out.as_mut_slice().chunks_exact_mut(n).enumerate() {
            let (m, s) = (self.means[j], self.sds[j]);
            let inv = if s > 0.0 { 1.0 / s } else { 0.0 };
            for v in col {
                *v = (*v - m) * inv;
            }
        }
        Ok(out)
    }

    /// Gaussian responses are centered and scaled; binary ones pass through.
    pub fn transform_response(&self, y: &DVector<f64>) -> DVector<f64> {
        match self.family {
            Family::Gaussian => y.map(|v| (v - self.y_mean) / self.y_sd),
            Family::Binomial => y.clone(),
        }
    }

    /// Maps a standardized-scale linear predictor back to response units
    /// (gaussian) or leaves it as a logit (binomial).
    pub fn response_scale(&self, eta: f64) -> f64 {
        match self.family {
            Family::Gaussian => self.y_mean + self.y_sd * eta,
            Family::Binomial => eta,
        }
    }
}

/// Standardizes every row of `z` (and `y`) with statistics of `train_rows`.
pub fn standardize(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    train_rows: &[usize],
    family: Family,
) -> Result<(Standardizer, DMatrix<f64>, DVector<f64>)> {
    let st = Standardizer::fit(z, y, train_rows, family)?;
    let zs = st.transform(z)?;
    let ys = st.transform_response(y);
    Ok((st, zs, ys))
}

/// Least-squares regression of target columns on an intercept plus
/// nuisance covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceModel {
    /// `(q + 1) x m` coefficients, intercept first.
    pub coef: Vec<Vec<f64>>,
    pub q: usize,
}

impl NuisanceModel {
    /// Fits on training rows only. Rank-deficient nuisance designs get the
    /// minimum-norm solution.
    pub fn fit(w: &DMatrix<f64>, targets: &DMatrix<f64>, rows: &[usize]) -> Result<Self> {
        let q = w.ncols();
        if q >= rows.len() {
            return Err(Error::invalid(format!(
                "{q} nuisance covariates need more than {} training rows",
                rows.len()
            )));
        }
        let design = with_intercept(&linalg::select_rows(w, rows));
        let t = linalg::select_rows(targets, rows);
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = RANK_TOL * smax;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank < q + 1 {
            log::warn!(
                "nuisance design has rank {rank} < {}; using the minimum-norm fit",
                q + 1
            );
        }
        let coef = svd
            .solve(&t, tol)
            .map_err(|e| Error::Degenerate(format!("nuisance regression failed: {e}")))?;
        Ok(NuisanceModel {
            coef: (0..coef.nrows())
                .map(|i| coef.row(i).iter().copied().collect())
                .collect(),
            q,
        })
    }

    fn coef_matrix(&self) -> DMatrix<f64> {
        let m = self.coef.first().map_or(0, Vec::len);
        DMatrix::from_fn(self.q + 1, m, |i, j| self.coef[i][j])
    }

    /// `targets - [1 W] coef` for every row.
    pub fn residualize(&self, w: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if w.ncols() != self.q || w.nrows() != targets.nrows() {
            return Err(Error::shape("nuisance covariates do not match the fitted model"));
        }
        let coef = self.coef_matrix();
        if coef.ncols() != targets.ncols() {
            return Err(Error::shape("target columns do not match the fitted model"));
        }
        Ok(targets - with_intercept(w) * coef)
    }
}

fn with_intercept(w: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(w.nrows(), w.ncols() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            w[(i, j - 1)]
        }
    })
}

/// Removes the nuisance-predicted part of every feature column and of the
/// response, with coefficients learned on `train_rows`. Binary responses are
/// left untouched.
pub fn residualize_nuisance(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    train_rows: &[usize],
    family: Family,
) -> Result<(NuisanceModel, DMatrix<f64>, DVector<f64>)> {
    let targets = nuisance_targets(z, y, family);
    let model = NuisanceModel::fit(w, &targets, train_rows)?;
    let resid = model.residualize(w, &targets)?;
    let (zc, yc) = split_targets(resid, y, family);
    Ok((model, zc, yc))
}

pub(crate) fn nuisance_targets(z: &DMatrix<f64>, y: &DVector<f64>, family: Family) -> DMatrix<f64> {
    match family {
        Family::Gaussian => {
            let mut t = z.clone().insert_column(z.ncols(), 0.0);
            t.set_column(z.ncols(), y);
            t
        }
        Family::Binomial => z.clone(),
    }
}

pub(crate) fn split_targets(
    resid: DMatrix<f64>,
    y: &DVector<f64>,
    family: Family,
) -> (DMatrix<f64>, DVector<f64>) {
    match family {
        Family::Gaussian => {
            let p = resid.ncols() - 1;
            let yc = resid.column(p).into_owned();
            (resid.remove_column(p), yc)
        }
        Family::Binomial => (resid, y.clone()),
    }
}

/// Right singular vectors and inverse singular values of one group's
/// column block, restricted to its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBasis {
    /// Position of the group in the [`GroupSpec`](crate::GroupSpec).
    pub group: usize,
    /// `|G| x r`
    pub v: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl GroupBasis {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Result of orthonormalizing each group of the expanded design.
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    /// `[U_G : G]`, `N x sum(r_G)`, with `U_G^T U_G = I`.
    pub design: DMatrix<f64>,
    /// Column ranges of each retained group in `design`, with penalty
    /// multipliers `sqrt(r_G)`.
    pub layout: GroupLayout,
    /// One entry per retained group, aligned with `layout`.
    pub basis: Vec<GroupBasis>,
    /// Groups of the spec dropped because their block has rank zero.
    pub dropped: Vec<usize>,
}

impl Orthonormalized {
    /// Spec position of retained group `g`.
    pub fn spec_group(&self, g: usize) -> usize {
        self.basis[g].group
    }
}

/// Replaces each group's block of `z` (already standardized, `N x p`) by an
/// orthonormal basis of its column space. The penalty multiplier of a group
/// is the square root of its rank; rank-zero groups are dropped.
pub fn orthonormalize(z: &DMatrix<f64>, map: &ExpansionMap) -> Result<Orthonormalized> {
    if z.ncols() != map.p() {
        return Err(Error::shape(format!(
            "design has {} columns, expansion expects {}",
            z.ncols(),
            map.p()
        )));
    }
    let n = z.nrows();
    let decomposed: Vec<Option<(DMatrix<f64>, GroupBasis)>> = (0..map.ranges().len())
        .into_par_iter()
        .map(|g| group_svd(z, map.group_features(g), g))
        .collect();

    let total: usize = decomposed.iter().flatten().map(|(_, b)| b.rank()).sum();
    let mut data = Vec::with_capacity(n * total);
    let mut ranges = Vec::new();
    let mut weights = Vec::new();
    let mut basis = Vec::new();
    let mut dropped = Vec::new();
    for (g, item) in decomposed.into_iter().enumerate() {
        match item {
            Some((u, b)) => {
                let start = data.len() / n.max(1);
                data.extend_from_slice(u.as_slice());
                ranges.push(start..start + b.rank());
                weights.push((b.rank() as f64).sqrt());
                basis.push(b);
            }
            None => dropped.push(g),
        }
    }
    if !dropped.is_empty() {
        log::warn!("dropping {} group(s) with rank zero", dropped.len());
    }
    Ok(Orthonormalized {
        design: DMatrix::from_vec(n, total, data),
        layout: GroupLayout::new(ranges, weights)?,
        basis,
        dropped,
    })
}

fn group_svd(z: &DMatrix<f64>, features: &[usize], g: usize) -> Option<(DMatrix<f64>, GroupBasis)> {
    if features.len() == 1 {
        let col = linalg::column(z, features[0]);
        let s = linalg::norm2(col);
        if s == 0.0 || !s.is_finite() {
            return None;
        }
        let u = DMatrix::from_iterator(col.len(), 1, col.iter().map(|v| v / s));
        return Some((
            u,
            GroupBasis {
                group: g,
                v: DMatrix::from_element(1, 1, 1.0),
                singular_values: vec![s],
            },
        ));
    }
    let block = linalg::select_columns(z, features);
    let svd = block.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| svd.singular_values[j] > RANK_TOL * smax)
        .collect();
    let u_kept = linalg::select_columns(&u, &keep);
    let v = DMatrix::from_fn(features.len(), keep.len(), |i, j| vt[(keep[j], i)]);
    let singular_values = keep.iter().map(|&j| svd.singular_values[j]).collect();
    Some((
        u_kept,
        GroupBasis {
            group: g,
            v,
            singular_values,
        },
    ))
}

/// Maps coefficients of the orthonormal design back to the expanded space
/// (`beta*_G = V_G S_G^{-1} beta~_G`) and folds duplicates together.
/// Returns `(beta_star, beta)`.
pub fn back_transform(
    beta_tilde: &[f64],
    ortho: &Orthonormalized,
    map: &ExpansionMap,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if beta_tilde.len() != ortho.design.ncols() {
        return Err(Error::shape(format!(
            "coefficient vector has length {}, orthonormal design has {} columns",
            beta_tilde.len(),
            ortho.design.ncols()
        )));
    }
    let mut beta_star = DVector::zeros(map.p_star());
    for (g, b) in ortho.basis.iter().enumerate() {
        let coef = &beta_tilde[ortho.layout.ranges[g].clone()];
        if coef.iter().all(|&c| c == 0.0) {
            continue;
        }
        let scaled: Vec<f64> = coef
            .iter()
            .zip(&b.singular_values)
            .map(|(c, s)| c / s)
            .collect();
        let target = map.ranges()[b.group].clone();
        for (row, e) in target.enumerate() {
            beta_star[e] = (0..b.rank()).map(|j| b.v[(row, j)] * scaled[j]).sum();
        }
    }
    let beta = map.fold_back(beta_star.as_slice())?;
    Ok((beta_star, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CommunityMap, FeatureIndex};
    use crate::grouping::{Group, GroupSpec, Scheme};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn standardize_hand_example() {
        let z = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        let (st, zs, _) = standardize(&z, &y, &[0, 1, 2], Family::Gaussian).unwrap();
        assert!((st.means[0] - 2.0).abs() < 1e-15);
        assert!((st.sds[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let expected = [-1.224744871391589, 0.0, 1.224744871391589];
        for i in 0..3 {
            assert!((zs[(i, 0)] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_matrix(&mut rng, 20, 4);
        let y = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let rows: Vec<usize> = (0..20).collect();
        let (_, zs, ys) = standardize(&z, &y, &rows, Family::Gaussian).unwrap();
        let (_, zs2, ys2) = standardize(&zs, &ys, &rows, Family::Gaussian).unwrap();
        assert!((zs - zs2).amax() < 1e-12);
        assert!((ys - ys2).amax() < 1e-12);
    }

    #[test]
    fn training_mean_row_maps_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_matrix(&mut rng, 10, 3);
        let y = DVector::from_fn(10, |i, _| i as f64);
        let st = Standardizer::fit(&z, &y, &(0..10).collect::<Vec<_>>(), Family::Gaussian).unwrap();
        let mean_row = DMatrix::from_row_slice(1, 3, &st.means);
        assert!(st.transform(&mean_row).unwrap().amax() < 1e-15);
    }

    #[test]
    fn standardization_ignores_test_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut z = random_matrix(&mut rng, 12, 3);
        let y = DVector::from_fn(12, |i, _| (i % 3) as f64);
        let train: Vec<usize> = (0..8).collect();
        let a = Standardizer::fit(&z, &y, &train, Family::Gaussian).unwrap();
        z.row_mut(10).fill(1e6);
        let b = Standardizer::fit(&z, &y, &train, Family::Gaussian).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_column_left_at_zero_and_short_input_rejected() {
        let z = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0]);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let (st, zs, ys) = standardize(&z, &y, &[0, 1, 2], Family::Binomial).unwrap();
        assert_eq!(st.sds[1], 0.0);
        assert!(zs.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(ys, y);
        assert!(Standardizer::fit(&z, &y, &[0], Family::Binomial).is_err());
    }

    #[test]
    fn intercept_only_nuisance_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_matrix(&mut rng, 15, 3);
        let y = DVector::from_fn(15, |_, _| rng.random_range(0.0..1.0));
        let w = DMatrix::zeros(15, 0);
        let rows: Vec<usize> = (0..10).collect();
        let (_, zc, yc) = residualize_nuisance(&z, &y, &w, &rows, Family::Gaussian).unwrap();
        for j in 0..3 {
            let m = rows.iter().map(|&i| z[(i, j)]).sum::<f64>() / 10.0;
            for i in 0..15 {
                assert!((zc[(i, j)] - (z[(i, j)] - m)).abs() < 1e-12);
            }
        }
        let my = rows.iter().map(|&i| y[i]).sum::<f64>() / 10.0;
        assert!((yc[12] - (y[12] - my)).abs() < 1e-12);
    }

    #[test]
    fn nuisance_residuals_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_matrix(&mut rng, 20, 3);
        let mut z = random_matrix(&mut rng, 20, 2);
        // second feature is exactly linear in the nuisance covariates
        for i in 0..20 {
            z[(i, 1)] = 1.5 + 2.0 * w[(i, 0)] - w[(i, 2)];
        }
        let y = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let rows: Vec<usize> = (0..20).collect();
        let (_, zc, yc) = residualize_nuisance(&z, &y, &w, &rows, Family::Gaussian).unwrap();
        assert!(zc.column(1).amax() < 1e-10);
        for c in 0..3 {
            let wc = w.column(c);
            assert!(wc.dot(&zc.column(0)).abs() < 1e-8);
            assert!(wc.dot(&yc).abs() < 1e-8);
        }
        assert!(zc.column(0).sum().abs() < 1e-10);
    }

    #[test]
    fn too_many_nuisance_covariates() {
        let w = DMatrix::zeros(4, 4);
        let t = DMatrix::zeros(4, 1);
        assert!(NuisanceModel::fit(&w, &t, &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn residualize_then_standardize_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = random_matrix(&mut rng, 30, 2);
        let z = random_matrix(&mut rng, 30, 3);
        let y = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let rows: Vec<usize> = (0..30).collect();
        let (_, zc, yc) = residualize_nuisance(&z, &y, &w, &rows, Family::Gaussian).unwrap();
        let (_, a, _) = standardize(&zc, &yc, &rows, Family::Gaussian).unwrap();
        let (_, zs, ys) = standardize(&z, &y, &rows, Family::Gaussian).unwrap();
        let (_, zsc, ysc) = residualize_nuisance(&zs, &ys, &w, &rows, Family::Gaussian).unwrap();
        let (_, b, _) = standardize(&zsc, &ysc, &rows, Family::Gaussian).unwrap();
        assert!((a - b).amax() < 1e-10);
    }

    fn spec_two_groups(p: usize, split: usize) -> GroupSpec {
        GroupSpec::new(
            Scheme::Nbg,
            p,
            vec![
                Group {
                    name: "a".into(),
                    features: (0..split).collect(),
                },
                Group {
                    name: "b".into(),
                    features: (split..p).collect(),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn orthonormal_blocks_and_full_rank_multiplier() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = random_matrix(&mut rng, 50, 8);
        let map = spec_two_groups(8, 5).expansion();
        let o = orthonormalize(&z, &map).unwrap();
        assert!((o.layout.weights[0] - 5f64.sqrt()).abs() < 1e-15);
        for r in &o.layout.ranges {
            let u = o.design.columns(r.start, r.len());
            let gram = u.transpose() * u;
            assert!((gram - DMatrix::identity(r.len(), r.len())).amax() < 1e-10);
        }
        // reconstruction of each block
        for (g, b) in o.basis.iter().enumerate() {
            let r = o.layout.ranges[g].clone();
            let u = o.design.columns(r.start, r.len());
            let s = DMatrix::from_diagonal(&DVector::from_vec(b.singular_values.clone()));
            let recon = u * s * b.v.transpose();
            let block = linalg::select_columns(&z, map.group_features(b.group));
            assert!((recon - &block).norm() / block.norm() < 1e-8);
        }
    }

    #[test]
    fn duplicate_columns_reduce_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut z = random_matrix(&mut rng, 30, 3);
        for i in 0..30 {
            z[(i, 1)] = z[(i, 0)];
        }
        let map = spec_two_groups(3, 2).expansion();
        let o = orthonormalize(&z, &map).unwrap();
        assert_eq!(o.basis[0].rank(), 1);
        assert_eq!(o.layout.weights[0], 1.0);
    }

    #[test]
    fn zero_block_is_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut z = random_matrix(&mut rng, 10, 3);
        z.column_mut(2).fill(0.0);
        let map = spec_two_groups(3, 2).expansion();
        let o = orthonormalize(&z, &map).unwrap();
        assert_eq!(o.dropped, vec![1]);
        assert_eq!(o.basis.len(), 1);
    }

    #[test]
    fn back_transform_preserves_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cm = CommunityMap::from_sizes(&[2, 2, 1]).unwrap();
        let idx = FeatureIndex::new(5, 1).unwrap();
        let spec = GroupSpec::ebg(&cm, &idx).unwrap();
        let map = spec.expansion();
        let mut z = random_matrix(&mut rng, 40, idx.p());
        // make one group rank deficient
        for i in 0..40 {
            z[(i, 1)] = 2.0 * z[(i, 0)];
        }
        let o = orthonormalize(&z, &map).unwrap();
        let bt = DVector::from_fn(o.design.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let (_, beta) = back_transform(bt.as_slice(), &o, &map).unwrap();
        let lhs = &o.design * &bt;
        let rhs = &z * &beta;
        assert!((&lhs - &rhs).amax() <= 1e-8 * lhs.amax().max(1.0));

        let zero = vec![0.0; o.design.ncols()];
        assert_eq!(back_transform(&zero, &o, &map).unwrap().1, DVector::zeros(idx.p()));
    }
}
