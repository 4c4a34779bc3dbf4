use nalgebra::{DMatrix, DVector};

use super::{
    soft_threshold, CoefficientSet, SolverOptions, Standardization, GAUSSIAN_KKT_TARGET, KKT_ACCEPT,
};
use crate::error::{Error, Result};

/// Gaussian lasso on a fixed design, reusable across penalties.
///
/// Coefficients handed to and from [`GaussianPath::solve`] are on the
/// scaled problem; [`GaussianPath::coefficients`] maps them back.
pub(crate) struct GaussianPath {
    n: usize,
    st: Standardization,
    y_mean: f64,
    /// Scaled, centered `X'X / n`.
    gram: DMatrix<f64>,
    /// Scaled, centered `X'y / n`.
    xty: DVector<f64>,
    /// Centered `y'y / n`.
    yy: f64,
    lambda_max: f64,
    opts: SolverOptions,
}

impl GaussianPath {
    pub fn new(x: &DMatrix<f64>, y: &[f64], opts: &SolverOptions) -> Self {
        let n = x.nrows();
        let nf = n as f64;
        let st = Standardization::new(x, opts.standardize);
        let xs = st.apply(x);
        let y_mean = y.iter().sum::<f64>() / nf;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let gram = xs.tr_mul(&xs) / nf;
        let xty = xs.tr_mul(&yc) / nf;
        let yy = yc.dot(&yc) / nf;
        let lambda_max = xty.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        GaussianPath {
            n,
            st,
            y_mean,
            gram,
            xty,
            yy,
            lambda_max,
            opts: *opts,
        }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    /// Smallest penalty whose solution is entirely zero.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let b = DVector::from_column_slice(beta);
        0.5 * self.yy - self.xty.dot(&b) + 0.5 * b.dot(&(&self.gram * &b))
            + lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn kkt(&self, beta: &[f64], q: &DVector<f64>, lambda: f64) -> f64 {
        (0..self.dim())
            .filter(|&j| self.st.scales[j] != 0.0)
            .map(|j| {
                let grad = q[j] - self.xty[j];
                if beta[j] != 0.0 {
                    (grad + lambda * beta[j].signum()).abs()
                } else {
                    (grad.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Cyclic coordinate descent from the warm start held in `beta`.
    pub fn solve(&self, lambda: f64, beta: &mut [f64]) -> Result<()> {
        if lambda >= self.lambda_max {
            beta.fill(0.0);
            return Ok(());
        }
        let d = self.dim();
        let active: Vec<usize> = (0..d).filter(|&j| self.st.scales[j] != 0.0).collect();
        for j in 0..d {
            if self.st.scales[j] == 0.0 {
                beta[j] = 0.0;
            }
        }
        let mut q = &self.gram * DVector::from_column_slice(beta);
        let mut last_obj = if cfg!(debug_assertions) {
            self.objective(beta, lambda)
        } else {
            0.0
        };

        for _ in 0..self.opts.max_sweeps {
            let mut max_change = 0.0f64;
            for &j in &active {
                let gjj = self.gram[(j, j)];
                let z = self.xty[j] - q[j] + gjj * beta[j];
                let new = soft_threshold(z, lambda) / gjj;
                let delta = new - beta[j];
                if delta != 0.0 {
                    beta[j] = new;
                    q.axpy(delta, &self.gram.column(j), 1.0);
                    max_change = max_change.max(delta.abs());
                }
            }
            if cfg!(debug_assertions) {
                let obj = self.objective(beta, lambda);
                debug_assert!(
                    obj <= last_obj + 1e-10 * last_obj.abs().max(1.0),
                    "objective increased: {last_obj} -> {obj}"
                );
                last_obj = obj;
            }
            if max_change < self.opts.tol {
                // Refresh the running product before trusting the check.
                q = &self.gram * DVector::from_column_slice(beta);
                if self.kkt(beta, &q, lambda) <= GAUSSIAN_KKT_TARGET {
                    return Ok(());
                }
            }
        }
        let q = &self.gram * DVector::from_column_slice(beta);
        let kkt = self.kkt(beta, &q, lambda);
        if kkt < KKT_ACCEPT {
            return Ok(());
        }
        Err(Error::NonConvergence {
            sweeps: self.opts.max_sweeps,
            kkt,
        })
    }

    pub fn coefficients(&self, beta: &[f64]) -> CoefficientSet {
        let betas: Vec<f64> = beta
            .iter()
            .enumerate()
            .map(|(j, &b)| self.st.unscale(j, b))
            .collect();
        let intercept = self.y_mean
            - betas
                .iter()
                .zip(&self.st.means)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        let b = DVector::from_column_slice(beta);
        let rss_over_n =
            (self.yy - 2.0 * self.xty.dot(&b) + b.dot(&(&self.gram * &b))).max(0.0);
        let sigma = (rss_over_n * self.n as f64 / (self.n - 1) as f64).sqrt();
        CoefficientSet {
            intercepts: vec![intercept],
            betas: betas.into_iter().map(|b| vec![b]).collect(),
            residual_sigma: Some(sigma),
        }
    }
}
