use nalgebra::DMatrix;

use super::{
    log_sum_exp, soft_threshold, CoefficientSet, SolverOptions, Standardization, KKT_ACCEPT,
    KKT_TARGET,
};
use crate::error::{Error, Result};

/// Linear predictors beyond this magnitude at `lambda = 0` are treated as
/// divergence caused by separable data.
const SEPARATION_ETA: f64 = 50.0;
const MIN_WEIGHT: f64 = 1e-5;

/// Current iterate on the scaled problem.
#[derive(Debug, Clone)]
pub(crate) struct MultinomialState {
    pub intercepts: Vec<f64>,
    /// d x K
    pub betas: DMatrix<f64>,
}

pub(crate) struct MultinomialPath {
    n: usize,
    k: usize,
    xs: DMatrix<f64>,
    /// 0-based class of each row.
    y: Vec<usize>,
    /// One-hot response, n x K.
    y_onehot: DMatrix<f64>,
    marginals: Vec<f64>,
    lambda_max: f64,
    st: Standardization,
    opts: SolverOptions,
}

impl MultinomialPath {
    pub fn new(x: &DMatrix<f64>, codes: &[u32], levels: u32, opts: &SolverOptions) -> Result<Self> {
        let n = x.nrows();
        let k = levels as usize;
        let mut counts = vec![0usize; k];
        for &c in codes {
            counts[c as usize - 1] += 1;
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::AbsentCategory {
                category: missing as u32 + 1,
                levels,
            });
        }
        let st = Standardization::new(x, opts.standardize);
        let xs = st.apply(x);
        let y: Vec<usize> = codes.iter().map(|&c| c as usize - 1).collect();
        let y_onehot = DMatrix::from_fn(n, k, |i, c| f64::from(y[i] == c));
        let marginals: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let nf = n as f64;
        let mut lambda_max = 0.0f64;
        for c in 0..k {
            for j in 0..xs.ncols() {
                let g: f64 = (0..n)
                    .map(|i| xs[(i, j)] * (y_onehot[(i, c)] - marginals[c]))
                    .sum::<f64>()
                    / nf;
                lambda_max = lambda_max.max(g.abs());
            }
        }
        Ok(MultinomialPath {
            n,
            k,
            xs,
            y,
            y_onehot,
            marginals,
            lambda_max,
            st,
            opts: *opts,
        })
    }

    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    /// Intercepts at the centered log marginal proportions, zero betas.
    pub fn null_state(&self) -> MultinomialState {
        let logs: Vec<f64> = self.marginals.iter().map(|p| p.ln()).collect();
        let mean = logs.iter().sum::<f64>() / self.k as f64;
        MultinomialState {
            intercepts: logs.iter().map(|l| l - mean).collect(),
            betas: DMatrix::zeros(self.dim(), self.k),
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn linear_predictors(&self, state: &MultinomialState) -> DMatrix<f64> {
        let mut eta = &self.xs * &state.betas;
        for c in 0..self.k {
            eta.column_mut(c).add_scalar_mut(state.intercepts[c]);
        }
        eta
    }

    fn mean_neg_loglik(&self, eta: &DMatrix<f64>) -> f64 {
        let mut buf = vec![0.0; self.k];
        let mut total = 0.0;
        for i in 0..self.n {
            for c in 0..self.k {
                buf[c] = eta[(i, c)];
            }
            total += log_sum_exp(&buf) - eta[(i, self.y[i])];
        }
        total / self.n as f64
    }

    fn objective(&self, eta: &DMatrix<f64>, betas: &DMatrix<f64>, lambda: f64) -> f64 {
        self.mean_neg_loglik(eta) + lambda * betas.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn probabilities(&self, eta: &DMatrix<f64>) -> DMatrix<f64> {
        let mut p = eta.clone();
        for mut row in p.row_iter_mut() {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.apply(|v| *v = (*v - m).exp());
            let s = row.sum();
            row /= s;
        }
        p
    }

    fn kkt(&self, eta: &DMatrix<f64>, state: &MultinomialState, lambda: f64) -> f64 {
        let nf = self.n as f64;
        let resid = &self.y_onehot - self.probabilities(eta);
        let grad = self.xs.tr_mul(&resid) / -nf;
        let mut worst = 0.0f64;
        for c in 0..self.k {
            worst = worst.max((resid.column(c).sum() / nf).abs());
            for j in 0..self.dim() {
                if self.st.scales[j] == 0.0 {
                    continue;
                }
                let b = state.betas[(j, c)];
                let g = grad[(j, c)];
                let v = if b != 0.0 {
                    (g + lambda * b.signum()).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                };
                worst = worst.max(v);
            }
        }
        worst
    }

    pub fn solve(&self, lambda: f64, state: &mut MultinomialState) -> Result<()> {
        if lambda >= self.lambda_max {
            *state = self.null_state();
            return Ok(());
        }
        let (n, d, k) = (self.n, self.dim(), self.k);
        let nf = n as f64;
        let active: Vec<usize> = (0..d).filter(|&j| self.st.scales[j] != 0.0).collect();
        for j in 0..d {
            if self.st.scales[j] == 0.0 {
                state.betas.row_mut(j).fill(0.0);
            }
        }
        let mut eta = self.linear_predictors(state);
        let mut objective = self.objective(&eta, &state.betas, lambda);

        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut a = vec![0.0; d];
        let mut new_beta = vec![0.0; d];
        let mut deta = vec![0.0; n];
        let inner_tol = self.opts.tol * 0.1;

        for _ in 0..self.opts.max_sweeps {
            let mut max_change = 0.0f64;
            for c in 0..k {
                // Quadratic approximation of the loss in class c's parameters.
                let probs = self.probabilities(&eta);
                for i in 0..n {
                    let p = probs[(i, c)];
                    w[i] = (p * (1.0 - p)).max(MIN_WEIGHT);
                    r[i] = (self.y_onehot[(i, c)] - p) / w[i];
                }
                let wsum: f64 = w.iter().sum();
                for &j in &active {
                    a[j] = (0..n).map(|i| w[i] * self.xs[(i, j)].powi(2)).sum::<f64>() / nf;
                }
                let mut new_b0 = state.intercepts[c];
                for j in 0..d {
                    new_beta[j] = state.betas[(j, c)];
                }

                for _ in 0..self.opts.max_sweeps {
                    let mut inner_change = 0.0f64;
                    let d0 = (0..n).map(|i| w[i] * r[i]).sum::<f64>() / wsum;
                    if d0 != 0.0 {
                        new_b0 += d0;
                        r.iter_mut().for_each(|v| *v -= d0);
                        inner_change = inner_change.max(d0.abs());
                    }
                    for &j in &active {
                        if a[j] <= 0.0 {
                            continue;
                        }
                        let col = self.xs.column(j);
                        let u = (0..n).map(|i| w[i] * col[i] * r[i]).sum::<f64>() / nf
                            + a[j] * new_beta[j];
                        let nb = soft_threshold(u, lambda) / a[j];
                        let delta = nb - new_beta[j];
                        if delta != 0.0 {
                            for i in 0..n {
                                r[i] -= delta * col[i];
                            }
                            new_beta[j] = nb;
                            inner_change = inner_change.max(delta.abs());
                        }
                    }
                    if inner_change < inner_tol {
                        break;
                    }
                }

                // Step towards the subproblem solution with backtracking.
                let d0 = new_b0 - state.intercepts[c];
                let dbeta: Vec<f64> = (0..d).map(|j| new_beta[j] - state.betas[(j, c)]).collect();
                let step_size = dbeta.iter().fold(d0.abs(), |m, v| m.max(v.abs()));
                if step_size == 0.0 {
                    continue;
                }
                for i in 0..n {
                    deta[i] = d0 + (0..d).map(|j| self.xs[(i, j)] * dbeta[j]).sum::<f64>();
                }
                let mut t = 1.0;
                let mut trial_eta = eta.clone();
                let mut trial_betas = state.betas.clone();
                let accepted = loop {
                    for i in 0..n {
                        trial_eta[(i, c)] = eta[(i, c)] + t * deta[i];
                    }
                    for j in 0..d {
                        trial_betas[(j, c)] = state.betas[(j, c)] + t * dbeta[j];
                    }
                    let f = self.objective(&trial_eta, &trial_betas, lambda);
                    if f <= objective + 1e-13 * objective.abs().max(1.0) {
                        objective = f;
                        break true;
                    }
                    t *= 0.5;
                    if t < 1e-10 {
                        break false;
                    }
                };
                if accepted {
                    eta = trial_eta;
                    state.betas = trial_betas;
                    state.intercepts[c] += t * d0;
                    max_change = max_change.max(t * step_size);
                }
            }

            // The intercepts are only identified up to a common shift.
            let shift = state.intercepts.iter().sum::<f64>() / k as f64;
            if shift != 0.0 {
                state.intercepts.iter_mut().for_each(|b| *b -= shift);
                eta.add_scalar_mut(-shift);
                objective = self.objective(&eta, &state.betas, lambda);
            }

            if lambda == 0.0 && eta.iter().any(|v| v.abs() > SEPARATION_ETA) {
                return Err(Error::PerfectSeparation);
            }
            if max_change < self.opts.tol && self.kkt(&eta, state, lambda) <= KKT_TARGET {
                return Ok(());
            }
        }
        if lambda == 0.0 {
            return Err(Error::PerfectSeparation);
        }
        let kkt = self.kkt(&eta, state, lambda);
        if kkt < KKT_ACCEPT {
            return Ok(());
        }
        Err(Error::NonConvergence {
            sweeps: self.opts.max_sweeps,
            kkt,
        })
    }

    pub fn coefficients(&self, state: &MultinomialState) -> CoefficientSet {
        let d = self.dim();
        let betas: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                (0..self.k)
                    .map(|c| self.st.unscale(j, state.betas[(j, c)]))
                    .collect()
            })
            .collect();
        let intercepts = (0..self.k)
            .map(|c| {
                state.intercepts[c]
                    - (0..d)
                        .map(|j| betas[j][c] * self.st.means[j])
                        .sum::<f64>()
            })
            .collect();
        CoefficientSet {
            intercepts,
            betas,
            residual_sigma: None,
        }
    }
}
