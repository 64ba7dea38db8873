//! Standardized group LASSO on a design whose groups are orthonormal.
//!
//! Minimizes
//!
//! ```text
//! Q(mu, b) = (1/N) L(mu, b) + lambda * sum_G w_G ||b_G||_2
//! ```
//!
//! where `L` is half the residual sum of squares (gaussian) or
//! `-2 * log-likelihood` (binomial), `N` is the number of rows and `w_G` the
//! group multiplier (`sqrt(rank)` after orthonormalization). The intercept is
//! unpenalized.
//!
//! Each group block `U_G` is assumed to satisfy `U_G^T U_G = I`, so the
//! gaussian block update is a closed-form group soft-threshold. The binomial
//! loss is majorized by a quadratic with curvature `1/4` per observation
//! (the global bound on the logistic variance); the surrogate is refreshed at
//! the start of every sweep and minimized blockwise, so the objective never
//! increases.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::data::Family;
use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, norm2, sigmoid, softplus};

/// Column ranges of each group in the design and their penalty multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLayout {
    pub ranges: Vec<Range<usize>>,
    pub weights: Vec<f64>,
}

impl GroupLayout {
    pub fn new(ranges: Vec<Range<usize>>, weights: Vec<f64>) -> Result<Self> {
        if ranges.len() != weights.len() {
            return Err(Error::shape("one multiplier per group is required"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("group multiplier {w} is not positive")));
        }
        let mut next = 0;
        for r in &ranges {
            if r.start != next || r.is_empty() {
                return Err(Error::invalid(
                    "group column ranges must be non-empty and contiguous",
                ));
            }
            next = r.end;
        }
        Ok(GroupLayout { ranges, weights })
    }

    pub fn n_groups(&self) -> usize {
        self.ranges.len()
    }

    pub fn n_cols(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// One penalized fitting problem: design, response, family and grouping.
#[derive(Debug, Clone, Copy)]
pub struct PenalizedProblem<'a> {
    pub design: &'a DMatrix<f64>,
    pub response: &'a DVector<f64>,
    pub family: Family,
    pub layout: &'a GroupLayout,
}

impl<'a> PenalizedProblem<'a> {
    pub fn new(
        design: &'a DMatrix<f64>,
        response: &'a DVector<f64>,
        family: Family,
        layout: &'a GroupLayout,
    ) -> Result<Self> {
        if design.nrows() != response.len() {
            return Err(Error::shape(format!(
                "design has {} rows, response {}",
                design.nrows(),
                response.len()
            )));
        }
        if design.ncols() != layout.n_cols() {
            return Err(Error::shape(format!(
                "design has {} columns, groups cover {}",
                design.ncols(),
                layout.n_cols()
            )));
        }
        if design.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if family == Family::Binomial && response.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binomial responses must be 0 or 1"));
        }
        Ok(PenalizedProblem {
            design,
            response,
            family,
            layout,
        })
    }

    fn n(&self) -> usize {
        self.design.nrows()
    }

    /// Loss scale: the gradient of `(1/N) L` in `eta` is `-(scale/N) (y - mean)`.
    fn scale(&self) -> f64 {
        match self.family {
            Family::Gaussian => 1.0,
            Family::Binomial => 2.0,
        }
    }

    fn linear_predictor(&self, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![intercept; self.n()];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                axpy(b, linalg::column(self.design, j), &mut eta);
            }
        }
        eta
    }

    /// Intercept of the model with all coefficients zero.
    pub fn null_intercept(&self) -> Result<f64> {
        let ybar = linalg::mean(self.response.as_slice());
        match self.family {
            Family::Gaussian => Ok(ybar),
            Family::Binomial => {
                if ybar <= 0.0 || ybar >= 1.0 {
                    return Err(Error::Degenerate(
                        "binary response has a single class".into(),
                    ));
                }
                Ok((ybar / (1.0 - ybar)).ln())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on the largest coefficient change in a sweep,
    /// measured in the coordinates of a basis with `(1/N) U^T U = I`.
    pub tol: f64,
    /// Maximum number of sweeps.
    pub max_iter: usize,
    /// Required KKT residual, relative to `lambda * w_G`.
    pub kkt_tol: f64,
    /// Record the objective after every sweep.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_iter: 10_000,
            kkt_tol: 1e-6,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub lambda: f64,
    pub intercept: f64,
    /// Coefficients in the orthonormal design's coordinates.
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Training deviance `L`.
    pub deviance: f64,
    pub objective: f64,
    /// Objective after each sweep (only with [`SolverOptions::trace`]).
    pub trace: Vec<f64>,
}

impl Solution {
    /// Indices of groups with a nonzero coefficient block.
    pub fn active_groups(&self, layout: &GroupLayout) -> Vec<usize> {
        (0..layout.n_groups())
            .filter(|&g| self.beta.as_slice()[layout.ranges[g].clone()].iter().any(|&b| b != 0.0))
            .collect()
    }
}

/// Training loss `L`: `1/2 * RSS` (gaussian) or
/// `-2 * sum(y * eta - log(1 + exp(eta)))` (binomial).
pub fn deviance(family: Family, y: &[f64], eta: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), eta.len());
    match family {
        Family::Gaussian => 0.5 * y.iter().zip(eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        Family::Binomial => {
            -2.0 * y
                .iter()
                .zip(eta)
                .map(|(&yi, &e)| yi * e - softplus(e))
                .sum::<f64>()
        }
    }
}

/// Group soft-threshold `max(0, 1 - t/||z||) z`; exactly zero when `||z|| <= t`.
pub fn group_update(z: &[f64], t: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    shrink_in_place(&mut out, t);
    out
}

fn shrink_in_place(z: &mut [f64], t: f64) {
    let nrm = norm2(z);
    if nrm <= t {
        z.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let f = 1.0 - t / nrm;
        z.iter_mut().for_each(|v| *v *= f);
    }
}

/// Gradient of `(1/N) L` at `(intercept, beta)`: `(d/d mu, d/d beta)`.
pub fn gradient(problem: &PenalizedProblem<'_>, intercept: f64, beta: &[f64]) -> (f64, DVector<f64>) {
    let eta = problem.linear_predictor(intercept, beta);
    let resid = working_residual(problem, &eta);
    let c = -problem.scale() / problem.n() as f64;
    let g0 = c * resid.iter().sum::<f64>();
    let g = DVector::from_fn(problem.design.ncols(), |j, _| {
        c * dot(linalg::column(problem.design, j), &resid)
    });
    (g0, g)
}

fn working_residual(problem: &PenalizedProblem<'_>, eta: &[f64]) -> Vec<f64> {
    let y = problem.response.as_slice();
    match problem.family {
        Family::Gaussian => y.iter().zip(eta).map(|(a, b)| a - b).collect(),
        Family::Binomial => y.iter().zip(eta).map(|(a, &b)| a - sigmoid(b)).collect(),
    }
}

pub fn objective(problem: &PenalizedProblem<'_>, lambda: f64, intercept: f64, beta: &[f64]) -> f64 {
    let eta = problem.linear_predictor(intercept, beta);
    let loss = deviance(problem.family, problem.response.as_slice(), &eta) / problem.n() as f64;
    loss + lambda * penalty(problem.layout, beta)
}

/// `sum_G w_G ||beta_G||`
pub fn penalty(layout: &GroupLayout, beta: &[f64]) -> f64 {
    layout
        .ranges
        .iter()
        .zip(&layout.weights)
        .map(|(r, w)| w * norm2(&beta[r.clone()]))
        .sum()
}

/// Largest violation of the group stationarity conditions, relative to
/// `lambda * w_G` (absolute when `lambda = 0`).
///
/// Active group: `||grad_G + lambda w_G b_G / ||b_G|| ||`; inactive group:
/// `max(0, ||grad_G|| - lambda w_G)`.
pub fn kkt_residual(problem: &PenalizedProblem<'_>, lambda: f64, intercept: f64, beta: &[f64]) -> f64 {
    let (_, grad) = gradient(problem, intercept, beta);
    kkt_from_gradient(problem.layout, lambda, beta, grad.as_slice())
}

fn kkt_from_gradient(layout: &GroupLayout, lambda: f64, beta: &[f64], grad: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, &w) in layout.ranges.iter().zip(&layout.weights) {
        let b = &beta[r.clone()];
        let g = &grad[r.clone()];
        let bound = lambda * w;
        let nb = norm2(b);
        let violation = if nb > 0.0 {
            g.iter()
                .zip(b)
                .map(|(gi, bi)| {
                    let v = gi + bound * bi / nb;
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        } else {
            (norm2(g) - bound).max(0.0)
        };
        let rel = if bound > 0.0 { violation / bound } else { violation };
        worst = worst.max(rel);
    }
    worst
}

/// Smallest `lambda` at which every group is zero:
/// `max_G ||grad_G(mu0, 0)|| / w_G` with `mu0` the intercept-only fit.
pub fn lambda_max(problem: &PenalizedProblem<'_>) -> Result<f64> {
    let mu0 = problem.null_intercept()?;
    let y = problem.response.as_slice();
    let ybar = linalg::mean(y);
    if y.iter().all(|&v| v == ybar) {
        return Err(Error::Degenerate("response is constant".into()));
    }
    let eta = vec![mu0; problem.n()];
    let resid = working_residual(problem, &eta);
    let c = problem.scale() / problem.n() as f64;
    let mut best: f64 = 0.0;
    for (r, &w) in problem.layout.ranges.iter().zip(&problem.layout.weights) {
        let nrm = r
            .clone()
            .map(|j| {
                let v = dot(linalg::column(problem.design, j), &resid);
                v * v
            })
            .sum::<f64>()
            .sqrt();
        best = best.max(c * nrm / w);
    }
    if !(best > 0.0) || !best.is_finite() {
        return Err(Error::Degenerate(
            "response is orthogonal to every group; lambda_max is zero".into(),
        ));
    }
    // absorb rounding so that lambda_max itself is fully sparse
    Ok(best * (1.0 + 1e-12))
}

/// `size` values log-spaced from `lambda_max` down to `min_ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, size: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::invalid("lambda_max must be positive"));
    }
    if size == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::invalid("min_ratio must lie in (0, 1)"));
    }
    if size == 1 {
        return Ok(vec![lambda_max]);
    }
    let step = min_ratio.ln() / (size - 1) as f64;
    let mut grid: Vec<f64> = (0..size)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect();
    grid[0] = lambda_max;
    grid[size - 1] = lambda_max * min_ratio;
    Ok(grid)
}

/// Sweeps between extrapolation attempts.
const ANDERSON_DEPTH: usize = 5;

struct Descent<'p, 'a> {
    problem: &'p PenalizedProblem<'a>,
    intercept: f64,
    beta: Vec<f64>,
    /// gaussian: y - eta; binomial: surrogate residual 4 (y - p) - (eta - eta_ref)
    resid: Vec<f64>,
    /// binomial only
    eta: Vec<f64>,
}

impl<'p, 'a> Descent<'p, 'a> {
    fn new(problem: &'p PenalizedProblem<'a>, intercept: f64, beta: Vec<f64>) -> Self {
        let eta = problem.linear_predictor(intercept, &beta);
        let resid = match problem.family {
            Family::Gaussian => problem
                .response
                .iter()
                .zip(&eta)
                .map(|(y, e)| y - e)
                .collect(),
            Family::Binomial => vec![0.0; eta.len()],
        };
        Descent {
            problem,
            intercept,
            beta,
            resid,
            eta,
        }
    }

    fn threshold(&self, lambda: f64, w: f64) -> f64 {
        self.problem.scale() * self.problem.n() as f64 * lambda * w
    }

    /// One pass of blockwise minimization over `groups`, preceded by an
    /// intercept update. Returns the largest coefficient change.
    fn sweep(&mut self, groups: &[usize], lambda: f64) -> f64 {
        let prob = self.problem;
        let binomial = prob.family == Family::Binomial;
        if binomial {
            // surrogate: (1/(4N)) ||eta + 4 (y - p) - eta'||^2
            for ((r, &e), &y) in self.resid.iter_mut().zip(&self.eta).zip(prob.response.iter()) {
                *r = 4.0 * (y - sigmoid(e));
            }
        }
        let n = prob.n() as f64;
        let d0 = self.resid.iter().sum::<f64>() / n;
        self.intercept += d0;
        self.resid.iter_mut().for_each(|r| *r -= d0);
        if binomial {
            self.eta.iter_mut().for_each(|e| *e += d0);
        }
        let mut max_delta = d0.abs();

        let mut z = Vec::new();
        for &g in groups {
            let range = prob.layout.ranges[g].clone();
            z.clear();
            z.extend(
                range
                    .clone()
                    .map(|j| dot(linalg::column(prob.design, j), &self.resid) + self.beta[j]),
            );
            shrink_in_place(&mut z, self.threshold(lambda, prob.layout.weights[g]));
            for (k, j) in range.enumerate() {
                let delta = z[k] - self.beta[j];
                if delta != 0.0 {
                    let col = linalg::column(prob.design, j);
                    axpy(-delta, col, &mut self.resid);
                    if binomial {
                        axpy(delta, col, &mut self.eta);
                    }
                    self.beta[j] = z[k];
                    max_delta = max_delta.max(delta.abs());
                }
            }
        }
        max_delta
    }

    fn active(&self) -> Vec<usize> {
        let layout = self.problem.layout;
        (0..layout.n_groups())
            .filter(|&g| self.beta[layout.ranges[g].clone()].iter().any(|&b| b != 0.0))
            .collect()
    }

    /// Recomputes the linear predictor from scratch to shed accumulated
    /// rounding, then evaluates the KKT residual.
    fn refresh_and_check(&mut self, lambda: f64) -> f64 {
        let prob = self.problem;
        self.eta = prob.linear_predictor(self.intercept, &self.beta);
        let resid = working_residual(prob, &self.eta);
        if prob.family == Family::Gaussian {
            self.resid.clone_from(&resid);
        }
        let c = -prob.scale() / prob.n() as f64;
        let grad: Vec<f64> = (0..prob.design.ncols())
            .map(|j| c * dot(linalg::column(prob.design, j), &resid))
            .collect();
        kkt_from_gradient(prob.layout, lambda, &self.beta, &grad)
    }

    /// Unpenalized gaussian case: adds the minimum-norm least-squares
    /// correction `[1 U]^+ r`, which the descent only approaches
    /// geometrically on ill-conditioned designs.
    fn polish_least_squares(&mut self) -> bool {
        let prob = self.problem;
        let (n, m) = prob.design.shape();
        let mut x = DMatrix::from_element(n, m + 1, 1.0);
        x.columns_mut(1, m).copy_from(prob.design);
        let svd = x.svd(true, true);
        let Some(&smax) = svd.singular_values.iter().max_by(|a, b| a.total_cmp(b)) else {
            return false;
        };
        let Ok(step) = svd.solve(&DVector::from_column_slice(&self.resid), 1e-10 * smax) else {
            return false;
        };
        if step.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.intercept += step[0];
        for (b, d) in self.beta.iter_mut().zip(step.iter().skip(1)) {
            *b += d;
        }
        true
    }

    fn objective(&self, lambda: f64) -> f64 {
        objective(self.problem, lambda, self.intercept, &self.beta)
    }

    /// Intercept followed by the coefficients in `cols`.
    fn snapshot(&self, cols: &[usize]) -> Vec<f64> {
        std::iter::once(self.intercept)
            .chain(cols.iter().map(|&j| self.beta[j]))
            .collect()
    }

    /// Anderson extrapolation from consecutive snapshots: the affine
    /// combination of iterates whose combined step is smallest. The new point
    /// is kept only if it lowers the objective.
    fn extrapolate(&mut self, hist: &[Vec<f64>], cols: &[usize], lambda: f64) -> bool {
        let m = hist.len() - 1;
        let diffs: Vec<Vec<f64>> = hist
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
        let mut gram = DMatrix::from_fn(m, m, |a, b| dot(&diffs[a], &diffs[b]));
        let ridge = 1e-10 * gram.trace();
        if !(ridge > 0.0) || !ridge.is_finite() {
            return false;
        }
        for a in 0..m {
            gram[(a, a)] += ridge;
        }
        let Some(chol) = gram.cholesky() else {
            return false;
        };
        let w = chol.solve(&DVector::from_element(m, 1.0));
        let total = w.sum();
        if !total.is_finite() || total == 0.0 {
            return false;
        }
        let mut x = vec![0.0; hist[0].len()];
        for (k, wk) in w.iter().enumerate() {
            axpy(wk / total, &hist[k + 1], &mut x);
        }
        // candidate predictor from the current one: eta + (mu' - mu) + U_A (b' - b)
        let prob = self.problem;
        let mut eta = self.linear_state();
        let d0 = x[0] - self.intercept;
        eta.iter_mut().for_each(|e| *e += d0);
        for (&j, &v) in cols.iter().zip(&x[1..]) {
            let delta = v - self.beta[j];
            if delta != 0.0 {
                axpy(delta, linalg::column(prob.design, j), &mut eta);
            }
        }
        let n = prob.n() as f64;
        let mut beta = self.beta.clone();
        for (&j, &v) in cols.iter().zip(&x[1..]) {
            beta[j] = v;
        }
        let y = prob.response.as_slice();
        let candidate = deviance(prob.family, y, &eta) / n + lambda * penalty(prob.layout, &beta);
        let current = deviance(prob.family, y, &self.linear_state()) / n
            + lambda * penalty(prob.layout, &self.beta);
        if !(candidate < current) {
            return false;
        }
        self.intercept = x[0];
        self.beta = beta;
        match prob.family {
            Family::Gaussian => {
                for ((r, yi), e) in self.resid.iter_mut().zip(y).zip(&eta) {
                    *r = yi - e;
                }
            }
            Family::Binomial => self.eta = eta,
        }
        true
    }

    /// Current linear predictor, from the maintained residual (gaussian) or
    /// directly (binomial).
    fn linear_state(&self) -> Vec<f64> {
        match self.problem.family {
            Family::Gaussian => self
                .problem
                .response
                .iter()
                .zip(&self.resid)
                .map(|(y, r)| y - r)
                .collect(),
            Family::Binomial => self.eta.clone(),
        }
    }

    fn into_solution(self, lambda: f64, iterations: usize, kkt: f64, trace: Vec<f64>) -> Solution {
        let eta = self.problem.linear_predictor(self.intercept, &self.beta);
        let dev = deviance(self.problem.family, self.problem.response.as_slice(), &eta);
        let objective = dev / self.problem.n() as f64 + lambda * penalty(self.problem.layout, &self.beta);
        Solution {
            lambda,
            intercept: self.intercept,
            beta: DVector::from_vec(self.beta),
            iterations,
            kkt_residual: kkt,
            deviance: dev,
            objective,
            trace,
        }
    }
}

/// Solves the problem at one `lambda`, optionally warm-started.
///
/// Cyclic group descent alternates full sweeps (which may activate groups)
/// with sweeps restricted to the active groups. The coefficient-change test
/// is followed by a KKT check; if the check fails the change threshold is
/// tightened and descent continues.
pub fn fit_at_lambda(
    problem: &PenalizedProblem<'_>,
    lambda: f64,
    warm: Option<&Solution>,
    opts: &SolverOptions,
) -> Result<Solution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let m = problem.design.ncols();
    let (intercept, beta) = match warm {
        Some(s) if s.beta.len() == m => (s.intercept, s.beta.as_slice().to_vec()),
        Some(_) => return Err(Error::shape("warm start has the wrong length")),
        None => (problem.null_intercept()?, vec![0.0; m]),
    };
    let mut state = Descent::new(problem, intercept, beta);
    let all: Vec<usize> = (0..problem.layout.n_groups()).collect();
    // the change test is on the scale of coordinates with (1/N) U^T U = I
    let mut tol = opts.tol * (problem.n() as f64).sqrt();
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut last_kkt = f64::INFINITY;

    while iterations < opts.max_iter {
        let delta = state.sweep(&all, lambda);
        iterations += 1;
        if opts.trace {
            trace.push(state.objective(lambda));
        }
        if delta < tol {
            last_kkt = state.refresh_and_check(lambda);
            if last_kkt <= opts.kkt_tol {
                if lambda == 0.0 && problem.family == Family::Gaussian && state.polish_least_squares() {
                    last_kkt = state.refresh_and_check(lambda);
                }
                return Ok(state.into_solution(lambda, iterations, last_kkt, trace));
            }
            tol = (tol * 0.1).max(1e-300);
            continue;
        }
        let active = state.active();
        let cols: Vec<usize> = active
            .iter()
            .flat_map(|&g| problem.layout.ranges[g].clone())
            .collect();
        let mut hist = vec![state.snapshot(&cols)];
        while iterations < opts.max_iter {
            let d = state.sweep(&active, lambda);
            iterations += 1;
            if d < tol {
                if opts.trace {
                    trace.push(state.objective(lambda));
                }
                break;
            }
            hist.push(state.snapshot(&cols));
            if hist.len() > ANDERSON_DEPTH {
                state.extrapolate(&hist, &cols, lambda);
                hist.clear();
                hist.push(state.snapshot(&cols));
            }
            if opts.trace {
                trace.push(state.objective(lambda));
            }
        }
    }
    if last_kkt.is_infinite() {
        last_kkt = state.refresh_and_check(lambda);
    }
    Err(Error::NoConvergence {
        iterations,
        kkt_residual: last_kkt,
        last: Box::new(state.into_solution(lambda, iterations, last_kkt, trace)),
    })
}

/// Linear extrapolation of the last two path points in `log(lambda)`, kept
/// only when it beats the previous solution on the objective at `lambda`.
fn extrapolated_start(problem: &PenalizedProblem<'_>, lambda: f64, path: &[Solution]) -> Option<Solution> {
    let [.., a, b] = path else { return None };
    let t = (lambda / b.lambda).ln() / (b.lambda / a.lambda).ln();
    if !t.is_finite() {
        return None;
    }
    let beta: Vec<f64> = b
        .beta
        .iter()
        .zip(a.beta.iter())
        .map(|(&vb, &va)| if vb == 0.0 { 0.0 } else { vb + t * (vb - va) })
        .collect();
    let intercept = b.intercept + t * (b.intercept - a.intercept);
    let f_new = objective(problem, lambda, intercept, &beta);
    let f_old = objective(problem, lambda, b.intercept, b.beta.as_slice());
    (f_new < f_old).then(|| Solution {
        lambda,
        intercept,
        beta: DVector::from_vec(beta),
        ..b.clone()
    })
}

/// Fits a decreasing sequence of `lambda` values with warm starts. A
/// non-converged point is retried once with ten times the sweep budget.
pub fn fit_path(
    problem: &PenalizedProblem<'_>,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<Solution>> {
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::invalid("lambda grid must be strictly decreasing"));
    }
    let mut out: Vec<Solution> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let guess = extrapolated_start(problem, lambda, &out);
        let warm = guess.as_ref().or(out.last());
        let sol = match fit_at_lambda(problem, lambda, warm, opts) {
            Ok(s) => s,
            Err(Error::NoConvergence { .. }) => {
                let retry = SolverOptions {
                    max_iter: opts.max_iter * 10,
                    ..*opts
                };
                fit_at_lambda(problem, lambda, warm, &retry)?
            }
            Err(e) => return Err(e),
        };
        out.push(sol);
    }
    Ok(out)
}
