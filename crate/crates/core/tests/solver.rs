mod common;

use common::oracle;
use nalgebra::{DMatrix, DVector};
use netcov_core::grouping::Group;
use netcov_core::solver::{self, fit_at_lambda, kkt_residual};
use netcov_core::{Family, GroupSpec, Prepared, Scheme, SolverOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn families() -> [Family; 2] {
    [Family::Gaussian, Family::Binomial]
}

#[test]
fn matches_proximal_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for seed in 0..6u64 {
        for family in families() {
            let inst = common::random_instance(seed, 50, rng.random_range(5..=20), family, seed % 2 == 0);
            let prep = inst.prepare();
            let problem = prep.problem().unwrap();
            let lambda = rng.random_range(0.1..0.7) * solver::lambda_max(&problem).unwrap();
            let sol = fit_at_lambda(&problem, lambda, None, &SolverOptions::default()).unwrap();

            let o = oracle::Problem {
                x: &prep.ortho.design,
                y: &prep.response,
                family,
                ranges: &prep.ortho.layout.ranges,
                weights: &prep.ortho.layout.weights,
            };
            let (mu, b) = o.solve(lambda, 20_000);
            let f_oracle = o.objective(lambda, mu, &b);
            let f_solver = o.objective(lambda, sol.intercept, &sol.beta);
            assert!(
                (f_solver - f_oracle).abs() <= 1e-6 * f_oracle.abs(),
                "seed {seed} {family}: {f_solver} vs {f_oracle}"
            );
        }
    }
}

#[test]
fn kkt_holds_along_paths() {
    for seed in 0..8u64 {
        for family in families() {
            let inst = common::random_instance(100 + seed, 50, 25, family, seed % 2 == 1);
            let prep = inst.prepare();
            let problem = prep.problem().unwrap();
            let grid = solver::lambda_grid(solver::lambda_max(&problem).unwrap(), 20, 0.05).unwrap();
            let path = solver::fit_path(&problem, &grid, &SolverOptions::default()).unwrap();
            for s in &path {
                let r = kkt_residual(&problem, s.lambda, s.intercept, s.beta.as_slice());
                assert!(r <= 1e-6, "seed {seed} {family} lambda {}: {r}", s.lambda);
            }
        }
    }
}

#[test]
fn lambda_zero_gaussian_is_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (50, 8);
    let z = common::gaussian_matrix(&mut rng, n, p);
    let y = DVector::from_fn(n, |i, _| 1.0 + z[(i, 0)] - 0.5 * z[(i, 3)] + rng.random_range(-1.0..1.0));
    let spec = common::random_groups(&mut rng, p, false);
    let rows: Vec<usize> = (0..n).collect();
    let prep = Prepared::fit(&z, &y, None, Family::Gaussian, &rows, &spec).unwrap();
    let sol = fit_at_lambda(&prep.problem().unwrap(), 0.0, None, &SolverOptions::default()).unwrap();
    let fit = prep.fit_result(&prep.entry(&sol).unwrap());
    let pred = fit.predict(&z, None).unwrap();

    let mut x = DMatrix::from_element(n, p + 1, 1.0);
    x.columns_mut(1, p).copy_from(&z);
    let coef = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let ols = &x * coef;
    for i in 0..n {
        assert!((pred[i] - ols[i]).abs() < 1e-8, "row {i}: {} vs {}", pred[i], ols[i]);
    }
}

#[test]
fn rank_deficient_groups_keep_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 30;
    let mut z = common::gaussian_matrix(&mut rng, n, 6);
    // column 2 duplicates column 0 up to scale, column 5 is a sum
    for i in 0..n {
        z[(i, 2)] = 3.0 * z[(i, 0)];
        z[(i, 5)] = z[(i, 3)] + z[(i, 4)];
    }
    let y = DVector::from_fn(n, |i, _| z[(i, 0)] + z[(i, 4)] + rng.random_range(-0.5..0.5));
    let groups = vec![
        Group { name: "a".into(), features: vec![0, 1, 2] },
        Group { name: "b".into(), features: vec![2, 3, 4, 5] },
    ];
    let spec = GroupSpec::new(Scheme::Nbg, 6, groups).unwrap();
    let rows: Vec<usize> = (0..n).collect();
    let prep = Prepared::fit(&z, &y, None, Family::Gaussian, &rows, &spec).unwrap();
    assert_eq!(prep.ortho.basis[0].rank(), 2);
    assert_eq!(prep.ortho.basis[1].rank(), 3);
    let problem = prep.problem().unwrap();
    let lambda = 0.2 * solver::lambda_max(&problem).unwrap();
    let sol = fit_at_lambda(&problem, lambda, None, &SolverOptions::default()).unwrap();
    let fit = prep.fit_result(&prep.entry(&sol).unwrap());
    let pred = fit.linear_predictor(&z, None).unwrap();
    let eta = (&prep.ortho.design * &sol.beta).add_scalar(sol.intercept);
    for i in 0..n {
        let direct = prep.standardizer.response_scale(eta[i]);
        assert!((pred[i] - direct).abs() < 1e-8);
    }
}

#[test]
fn singleton_groups_recover_lasso() {
    // with one column per group the penalty is a weighted l1 norm, so the
    // orthonormal coefficients solve a plain lasso on the unit-norm columns
    let inst = common::random_instance(77, 50, 12, Family::Gaussian, false);
    let spec = GroupSpec::new(
        Scheme::Singleton,
        12,
        (0..12).map(|j| Group { name: format!("{}", j + 1), features: vec![j] }).collect(),
    )
    .unwrap();
    let rows: Vec<usize> = (0..50).collect();
    let prep = Prepared::fit(&inst.z, &inst.y, None, Family::Gaussian, &rows, &spec).unwrap();
    let problem = prep.problem().unwrap();
    let lambda = 0.3 * solver::lambda_max(&problem).unwrap();
    let sol = fit_at_lambda(&problem, lambda, None, &SolverOptions::default()).unwrap();
    // coordinatewise lasso optimality on the centered response
    let x = &prep.ortho.design;
    let r = &prep.response - x * &sol.beta - DVector::from_element(50, sol.intercept);
    for j in 0..12 {
        let g = x.column(j).dot(&r) / 50.0;
        if sol.beta[j] == 0.0 {
            assert!(g.abs() <= lambda * (1.0 + 1e-6));
        } else {
            assert!((g - lambda * sol.beta[j].signum()).abs() <= 1e-6 * lambda);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_is_monotone_and_certified(seed in 0u64..10_000, binomial in any::<bool>(), overlap in any::<bool>()) {
        let family = if binomial { Family::Binomial } else { Family::Gaussian };
        let inst = common::random_instance(seed, 40, 15, family, overlap);
        let prep = inst.prepare();
        let problem = prep.problem().unwrap();
        let lambda = 0.3 * solver::lambda_max(&problem).unwrap();
        let opts = SolverOptions { trace: true, ..SolverOptions::default() };
        let sol = fit_at_lambda(&problem, lambda, None, &opts).unwrap();
        for w in sol.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        prop_assert!(sol.kkt_residual <= 1e-6);
    }
}
