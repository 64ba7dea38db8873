//! Simulation of synthetic and semi-synthetic experiments with a known
//! coefficient vector.
//!
//! The support of `beta` is the union of named groups and every nonzero
//! entry equals `alpha`; the intercept is zero. Training and test responses
//! are drawn independently over the same design rows.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CommunityMap, Dataset, DesignMatrix, Family, FeatureIndex, Split};
use crate::error::{Error, Result};
use crate::grouping::{GroupSpec, Scheme};
use crate::linalg::{self, sigmoid};

/// Active groups used by the synthetic experiments, by scheme and count.
pub fn preset_groups(scheme: Scheme, count: usize) -> Result<Vec<String>> {
    let names: &[&str] = match (scheme, count) {
        (Scheme::Nbg, 1) => &["1"],
        (Scheme::Nbg, 5) => &["1", "2", "3", "4", "5"],
        (Scheme::Ebg, 1) => &["(1,1)"],
        (Scheme::Ebg, 5) => &["(1,1)", "(3,1)", "(3,2)", "(4,4)", "(6,5)"],
        _ => {
            return Err(Error::invalid(format!(
                "no preset with {count} active {scheme} group(s)"
            )))
        }
    };
    Ok(names.iter().map(|s| s.to_string()).collect())
}

/// Problem difficulty: signal-to-noise ratio (gaussian) or Bayes error
/// (binomial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Difficulty {
    Snr(f64),
    BayesError(f64),
}

impl Difficulty {
    pub fn value(self) -> f64 {
        match self {
            Difficulty::Snr(v) | Difficulty::BayesError(v) => v,
        }
    }

    pub fn kind(self) -> &'static str {
        match self {
            Difficulty::Snr(_) => "snr",
            Difficulty::BayesError(_) => "bayes_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// Sorted coordinates of the nonzero entries.
    pub support: Vec<usize>,
    pub active_groups: Vec<String>,
    pub alpha: f64,
}

pub fn make_beta(spec: &GroupSpec, active: &[String], alpha: f64) -> Result<GroundTruth> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let support = spec.union_of(active)?;
    let mut beta = vec![0.0; spec.p()];
    for &j in &support {
        beta[j] = alpha;
    }
    Ok(GroundTruth {
        beta,
        intercept: 0.0,
        support,
        active_groups: active.to_vec(),
        alpha,
    })
}

/// Rows of iid standard normal features in canonical order.
pub fn gen_design_synthetic(n_obs: usize, idx: &FeatureIndex, rng: &mut impl Rng) -> DMatrix<f64> {
    let p = idx.p();
    let mut rows = Vec::with_capacity(n_obs * p);
    for _ in 0..n_obs * p {
        rows.push(rng.sample::<f64, _>(StandardNormal));
    }
    DMatrix::from_row_slice(n_obs, p, &rows)
}

fn linear_predictor(z: &DMatrix<f64>, beta: &[f64], intercept: f64) -> Vec<f64> {
    let mut eta = vec![intercept; z.nrows()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            linalg::axpy(b, linalg::column(z, j), &mut eta);
        }
    }
    eta
}

/// Gaussian: `Z beta + eps` with unit noise variance; binomial: Bernoulli
/// draws with success probability `logit^-1(Z beta)`.
pub fn draw_response(z: &DMatrix<f64>, truth: &GroundTruth, family: Family, rng: &mut impl Rng) -> Result<DVector<f64>> {
    if z.ncols() != truth.beta.len() {
        return Err(Error::shape(format!(
            "design has {} columns, beta has {}",
            z.ncols(),
            truth.beta.len()
        )));
    }
    let eta = linear_predictor(z, &truth.beta, truth.intercept);
    Ok(DVector::from_iterator(
        eta.len(),
        eta.into_iter().map(|e| match family {
            Family::Gaussian => e + rng.sample::<f64, _>(StandardNormal),
            Family::Binomial => f64::from(u8::from(rng.random::<f64>() < sigmoid(e))),
        }),
    ))
}

/// Difficulty over the empirical distribution of the rows of `z`, with unit
/// noise variance for the gaussian family.
pub fn scenario_difficulty(z: &DMatrix<f64>, beta: &[f64], family: Family) -> Result<Difficulty> {
    if z.ncols() != beta.len() {
        return Err(Error::shape("design and beta lengths differ"));
    }
    if z.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let eta = linear_predictor(z, beta, 0.0);
    Ok(match family {
        Family::Gaussian => Difficulty::Snr(linalg::variance(&eta)),
        Family::Binomial => Difficulty::BayesError(linalg::mean(
            &eta.iter()
                .map(|&e| {
                    let p = sigmoid(e);
                    p.min(1.0 - p)
                })
                .collect::<Vec<_>>(),
        )),
    })
}

/// `points` magnitudes whose gaussian SNR for `support` independent
/// unit-variance features runs geometrically from `snr_lo` to `snr_hi`.
pub fn alpha_grid(points: usize, snr_lo: f64, snr_hi: f64, support: usize) -> Result<Vec<f64>> {
    if points == 0 || support == 0 || !(snr_lo > 0.0) || !(snr_hi >= snr_lo) {
        return Err(Error::invalid("alpha grid needs points >= 1 and 0 < snr_lo <= snr_hi"));
    }
    let k = support as f64;
    if points == 1 {
        return Ok(vec![(snr_lo / k).sqrt()]);
    }
    let step = (snr_hi / snr_lo).ln() / (points - 1) as f64;
    Ok((0..points)
        .map(|i| (snr_lo * (step * i as f64).exp() / k).sqrt())
        .collect())
}

/// Seed of replicate `r` derived from a base seed (SplitMix64 finalizer).
pub fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    let mut z = seed.wrapping_add((replicate as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub scheme: Scheme,
    pub active_groups: Vec<String>,
    pub alpha: f64,
    pub family: Family,
    pub n_train: usize,
    pub n_test: usize,
    pub n_communities: usize,
    pub nodes_per_community: usize,
    pub d: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            scheme: Scheme::Ebg,
            active_groups: vec!["(1,1)".into()],
            alpha: 0.2,
            family: Family::Gaussian,
            n_train: 1000,
            n_test: 1000,
            n_communities: 10,
            nodes_per_community: 5,
            d: 1,
        }
    }
}

/// A simulated dataset with its generating coefficients.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub spec: GroupSpec,
    pub truth: GroundTruth,
    /// Computed over the training rows.
    pub difficulty: Difficulty,
}

/// Fully synthetic experiment. The test rows repeat the first `n_test`
/// training design rows with independently drawn responses.
pub fn simulate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<Simulation> {
    if cfg.n_test > cfg.n_train {
        return Err(Error::invalid(format!(
            "test rows share the training design, so n_test ({}) cannot exceed n_train ({})",
            cfg.n_test, cfg.n_train
        )));
    }
    if cfg.n_train < 2 {
        return Err(Error::invalid("at least two training rows are required"));
    }
    let sizes = vec![cfg.nodes_per_community; cfg.n_communities];
    let cm = CommunityMap::from_sizes(&sizes)?;
    let idx = FeatureIndex::new(cm.n_nodes(), cfg.d)?;
    let spec = GroupSpec::build(cfg.scheme, &cm, &idx)?;
    let truth = make_beta(&spec, &cfg.active_groups, cfg.alpha)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_train = gen_design_synthetic(cfg.n_train, &idx, &mut rng);
    let z_test = z_train.rows(0, cfg.n_test).into_owned();
    assemble(cm, idx, spec, truth, cfg.family, z_train, z_test, None, &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    cm: CommunityMap,
    idx: FeatureIndex,
    spec: GroupSpec,
    truth: GroundTruth,
    family: Family,
    z_train: DMatrix<f64>,
    z_test: DMatrix<f64>,
    nuisance: Option<DMatrix<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<Simulation> {
    let y_train = draw_response(&z_train, &truth, family, rng)?;
    let y_test = draw_response(&z_test, &truth, family, rng)?;
    let difficulty = scenario_difficulty(&z_train, &truth.beta, family)?;
    let (n_tr, n_te) = (z_train.nrows(), z_test.nrows());
    let p = idx.p();
    let mut z = DMatrix::zeros(n_tr + n_te, p);
    z.rows_mut(0, n_tr).copy_from(&z_train);
    z.rows_mut(n_tr, n_te).copy_from(&z_test);
    let y = DVector::from_iterator(n_tr + n_te, y_train.iter().chain(y_test.iter()).copied());
    let split = Split {
        train: (0..n_tr).collect(),
        test: (n_tr..n_tr + n_te).collect(),
    };
    let dataset = Dataset::new(DesignMatrix { index: idx, z }, y, family, cm, nuisance, split)?;
    Ok(Simulation {
        dataset,
        spec,
        truth,
        difficulty,
    })
}

/// Semi-synthetic experiment over a supplied design. Columns are centered
/// with training means (applied to both splits) and responses are drawn
/// over the centered rows.
pub fn simulate_semisynthetic(
    base: &Dataset,
    scheme: Scheme,
    active: &[String],
    alpha: f64,
    family: Family,
    seed: u64,
) -> Result<Simulation> {
    if base.split.test.is_empty() {
        return Err(Error::invalid("semi-synthetic data needs a test split"));
    }
    let idx = base.index();
    let spec = GroupSpec::build(scheme, &base.communities, &idx)?;
    let truth = make_beta(&spec, active, alpha)?;
    let (z_train, z_test) = center_by_training(&base.design.z, &base.split)?;
    let nuisance = base.nuisance.as_ref().map(|w| {
        let rows: Vec<usize> = base.split.train.iter().chain(&base.split.test).copied().collect();
        linalg::select_rows(w, &rows)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assemble(
        base.communities.clone(),
        idx,
        spec,
        truth,
        family,
        z_train,
        z_test,
        nuisance,
        &mut rng,
    )
}

/// Training and test rows with training column means subtracted from both.
pub fn center_by_training(z: &DMatrix<f64>, split: &Split) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    split.validate(z.nrows())?;
    let mut tr = linalg::select_rows(z, &split.train);
    let mut te = linalg::select_rows(z, &split.test);
    for j in 0..z.ncols() {
        let m = linalg::mean(linalg::column(&tr, j));
        tr.column_mut(j).iter_mut().for_each(|v| *v -= m);
        te.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    Ok((tr, te))
}
