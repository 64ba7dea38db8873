//! Accelerated proximal gradient for the same penalized objective, written
//! against the raw matrices so it shares no code with the library solver.

use nalgebra::{DMatrix, DVector};
use netcov_core::Family;

pub struct Problem<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub family: Family,
    pub ranges: &'a [std::ops::Range<usize>],
    pub weights: &'a [f64],
}

impl Problem<'_> {
    fn eta(&self, mu: f64, b: &DVector<f64>) -> DVector<f64> {
        (self.x * b).add_scalar(mu)
    }

    /// `(1/N) * deviance` and its gradient in `(mu, b)`.
    pub fn loss_grad(&self, mu: f64, b: &DVector<f64>) -> (f64, f64, DVector<f64>) {
        let n = self.y.len() as f64;
        let eta = self.eta(mu, b);
        let (loss, r) = match self.family {
            Family::Gaussian => {
                let r = self.y - &eta;
                (0.5 * r.norm_squared() / n, r)
            }
            Family::Binomial => {
                let mut loss = 0.0;
                let mut r = DVector::zeros(eta.len());
                for i in 0..eta.len() {
                    let e = eta[i];
                    let lse = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
                    loss += -2.0 * (self.y[i] * e - lse);
                    r[i] = 2.0 * (self.y[i] - 1.0 / (1.0 + (-e).exp()));
                }
                (loss / n, r)
            }
        };
        let g = -(self.x.transpose() * &r) / n;
        (loss, -r.sum() / n, g)
    }

    pub fn objective(&self, lambda: f64, mu: f64, b: &DVector<f64>) -> f64 {
        let pen: f64 = self
            .ranges
            .iter()
            .zip(self.weights)
            .map(|(r, w)| w * b.rows(r.start, r.len()).norm())
            .sum();
        self.loss_grad(mu, b).0 + lambda * pen
    }

    fn lipschitz(&self) -> f64 {
        let n = self.x.nrows();
        let mut aug = DMatrix::from_element(n, self.x.ncols() + 1, 1.0);
        aug.columns_mut(1, self.x.ncols()).copy_from(self.x);
        let s = aug.singular_values().max();
        let c = match self.family {
            Family::Gaussian => 1.0,
            Family::Binomial => 0.5,
        };
        c * s * s / n as f64
    }

    /// FISTA with gradient-based restart; returns `(mu, b)`.
    pub fn solve(&self, lambda: f64, iterations: usize) -> (f64, DVector<f64>) {
        let step = 1.0 / self.lipschitz();
        let m = self.x.ncols();
        let (mut mu, mut b) = (0.0, DVector::zeros(m));
        let (mut mu_y, mut b_y) = (mu, b.clone());
        let mut t: f64 = 1.0;
        for _ in 0..iterations {
            let (_, g0, g) = self.loss_grad(mu_y, &b_y);
            let mu_new = mu_y - step * g0;
            let mut b_new = &b_y - step * g;
            for (r, w) in self.ranges.iter().zip(self.weights) {
                let mut blk = b_new.rows_mut(r.start, r.len());
                let nrm = blk.norm();
                let thr = step * lambda * w;
                if nrm <= thr {
                    blk.fill(0.0);
                } else {
                    blk *= 1.0 - thr / nrm;
                }
            }
            let restart = (mu_y - mu_new) * (mu_new - mu) + (&b_y - &b_new).dot(&(&b_new - &b)) > 0.0;
            if restart {
                t = 1.0;
            }
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let k = (t - 1.0) / t_new;
            mu_y = mu_new + k * (mu_new - mu);
            b_y = &b_new + k * (&b_new - &b);
            mu = mu_new;
            b = b_new;
            t = t_new;
        }
        (mu, b)
    }
}
