#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use netcov_core::grouping::Group;
use netcov_core::{Family, GroupSpec, Prepared, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub spec: GroupSpec,
    pub family: Family,
}

impl Instance {
    pub fn prepare(&self) -> Prepared {
        let rows: Vec<usize> = (0..self.z.nrows()).collect();
        Prepared::fit(&self.z, &self.y, None, self.family, &rows, &self.spec).unwrap()
    }
}

/// Contiguous blocks of sizes 1..=5 covering `0..p`; with `overlap`, each
/// group also borrows up to three features from elsewhere.
pub fn random_groups(rng: &mut ChaCha8Rng, p: usize, overlap: bool) -> GroupSpec {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < p {
        let len = rng.random_range(1..=5).min(p - start);
        let mut features: Vec<usize> = (start..start + len).collect();
        if overlap {
            for _ in 0..rng.random_range(0..=3) {
                features.push(rng.random_range(0..p));
            }
        }
        groups.push(Group {
            name: format!("g{}", groups.len() + 1),
            features,
        });
        start += len;
    }
    GroupSpec::new(Scheme::Nbg, p, groups).unwrap()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
}

/// Sparse linear signal plus noise, or Bernoulli draws through the logistic
/// link. Binary responses are redrawn until both classes occur.
pub fn random_instance(seed: u64, n: usize, p: usize, family: Family, overlap: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = gaussian_matrix(&mut rng, n, p);
    let spec = random_groups(&mut rng, p, overlap);
    let beta: Vec<f64> = (0..p)
        .map(|_| if rng.random_bool(0.3) { rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let eta: Vec<f64> = (0..n)
        .map(|i| 0.3 + (0..p).map(|j| z[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let y = loop {
        let y = DVector::from_iterator(
            n,
            eta.iter().map(|&e| match family {
                Family::Gaussian => e + rng.sample::<f64, _>(StandardNormal),
                Family::Binomial => {
                    let prob = 1.0 / (1.0 + (-e).exp());
                    f64::from(u8::from(rng.random_bool(prob)))
                }
            }),
        );
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if family == Family::Gaussian || (ones > 1 && ones < n - 1) {
            break y;
        }
    };
    Instance { z, y, spec, family }
}
