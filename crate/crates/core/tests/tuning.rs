use netcov_core::simgen::{simulate_synthetic, SyntheticConfig};
use netcov_core::tuning::{self, cross_validate, prepare_fold, select_and_refit};
use netcov_core::{CvOptions, Family, Scheme};

fn small_config(family: Family, alpha: f64) -> SyntheticConfig {
    SyntheticConfig {
        scheme: Scheme::Ebg,
        active_groups: vec!["(1,1)".into()],
        alpha,
        family,
        n_train: 120,
        n_test: 40,
        n_communities: 3,
        nodes_per_community: 3,
        d: 1,
    }
}

fn opts(seed: u64) -> CvOptions {
    CvOptions {
        folds: 5,
        seed,
        grid_size: 25,
        ..CvOptions::default()
    }
}

#[test]
fn cross_validation_is_deterministic() {
    let sim = simulate_synthetic(&small_config(Family::Gaussian, 0.5), 3).unwrap();
    let a = cross_validate(&sim.dataset, &sim.spec, &opts(1)).unwrap();
    let b = cross_validate(&sim.dataset, &sim.spec, &opts(1)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lambdas.len(), 25);
    assert!(a.index_1se <= a.index_min);
}

#[test]
fn one_se_choice_is_the_largest_admissible_lambda() {
    let sim = simulate_synthetic(&small_config(Family::Binomial, 0.8), 4).unwrap();
    let cv = cross_validate(&sim.dataset, &sim.spec, &opts(2)).unwrap();
    let bound = cv.mean[cv.index_min] + cv.se[cv.index_min];
    let admissible: Vec<usize> = (0..cv.lambdas.len()).filter(|&i| cv.mean[i] <= bound).collect();
    let best = admissible
        .iter()
        .copied()
        .max_by(|&i, &j| cv.lambdas[i].total_cmp(&cv.lambdas[j]))
        .unwrap();
    assert_eq!(cv.index_1se, best);
    for l in 0..cv.lambdas.len() {
        let vals: Vec<f64> = cv.fold_deviance.iter().map(|f| f[l]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((m - cv.mean[l]).abs() < 1e-12);
    }
}

#[test]
fn held_out_rows_never_reach_fold_preprocessing() {
    let sim = simulate_synthetic(&small_config(Family::Gaussian, 0.5), 5).unwrap();
    let ds = &sim.dataset;
    let fold_of = tuning::dataset_folds(ds, 5, 9).unwrap();
    let k = 2;
    let before = prepare_fold(ds, &sim.spec, &fold_of, k).unwrap();

    let mut mutated = ds.clone();
    for (pos, &row) in ds.split.train.iter().enumerate() {
        if fold_of[pos] == k {
            mutated.design.z.row_mut(row).iter_mut().for_each(|v| *v = 1e6 * (*v + 1.0));
            mutated.response[row] = -1e6;
        }
    }
    for &row in &ds.split.test {
        mutated.response[row] = 42.0;
    }
    let after = prepare_fold(&mutated, &sim.spec, &fold_of, k).unwrap();
    assert_eq!(before.standardizer, after.standardizer);
    assert_eq!(before.ortho.design, after.ortho.design);
    assert_eq!(before.ortho.basis, after.ortho.basis);
    assert_eq!(before.response, after.response);
}

#[test]
fn refit_at_lambda_max_is_the_zero_model() {
    let sim = simulate_synthetic(&small_config(Family::Gaussian, 0.5), 6).unwrap();
    let mut cv = cross_validate(&sim.dataset, &sim.spec, &opts(3)).unwrap();
    cv.index_1se = 0;
    let fit = select_and_refit(&sim.dataset, &sim.spec, &cv, &Default::default()).unwrap();
    assert!(fit.beta.iter().all(|&b| b == 0.0));
    assert!(fit.active_groups.is_empty());
    let pred = fit.predict(&sim.dataset.design.z, None).unwrap();
    assert!(pred.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn refit_deviance_beats_the_zero_model() {
    let sim = simulate_synthetic(&small_config(Family::Gaussian, 0.7), 8).unwrap();
    let ds = &sim.dataset;
    let cv = cross_validate(ds, &sim.spec, &opts(4)).unwrap();
    let fit = select_and_refit(ds, &sim.spec, &cv, &Default::default()).unwrap();
    let z = netcov_core::linalg::select_rows(&ds.design.z, &ds.split.train);
    let y: Vec<f64> = ds.split.train.iter().map(|&r| ds.response[r]).collect();
    let mut zero = fit.clone();
    zero.beta.iter_mut().for_each(|b| *b = 0.0);
    zero.intercept = 0.0;
    let d_fit = fit.mean_deviance(&z, None, &y).unwrap();
    let d_zero = zero.mean_deviance(&z, None, &y).unwrap();
    assert!(d_fit <= d_zero, "{d_fit} > {d_zero}");
}
