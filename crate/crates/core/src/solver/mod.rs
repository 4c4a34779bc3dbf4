//! l1-penalized regression engines.
//!
//! Both families minimize a mean loss plus `lambda * sum |beta|` with an
//! unpenalized intercept. Design columns are centered and, unless
//! disabled, scaled to unit (population) standard deviation before the
//! solve; the penalty applies to the scaled coefficients and results are
//! mapped back to the original scale. Constant columns always get a zero
//! coefficient.
//!
//! * Gaussian: `(1/2n) ||y - b0 - X b||^2`, cyclic coordinate descent on
//!   the Gram matrix.
//! * Multinomial: `-(1/n) sum_i log P(y_i)` with one coefficient vector
//!   per category (`P(k) = exp(mu_k) / sum_l exp(mu_l)`), solved by
//!   class-wise quadratic approximation, inner coordinate descent and a
//!   backtracking step.

mod gaussian;
mod multinomial;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use gaussian::GaussianPath;
pub(crate) use multinomial::MultinomialPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Multinomial { levels: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub standardize: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_sweeps: 10_000,
            standardize: true,
        }
    }
}

/// Stationarity target checked before a solve is declared converged.
pub(crate) const KKT_TARGET: f64 = 1e-7;
/// Sweeps over the Gram matrix are cheap, so the Gaussian solver aims lower.
pub(crate) const GAUSSIAN_KKT_TARGET: f64 = 1e-10;
/// A solve that exhausts its sweeps is still accepted below this violation.
pub(crate) const KKT_ACCEPT: f64 = 1e-6;

/// Intercept(s) and coefficients on the original design scale.
/// `betas[j]` holds one value (Gaussian) or one per category (multinomial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub intercepts: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_sigma: Option<f64>,
}

impl CoefficientSet {
    pub fn n_predictors(&self) -> usize {
        self.betas.len()
    }

    pub fn n_responses(&self) -> usize {
        self.intercepts.len()
    }

    pub fn is_null(&self) -> bool {
        self.betas.iter().flatten().all(|&b| b == 0.0)
    }

    /// Linear predictor of response `k` for one encoded design row.
    pub fn linear_predictor(&self, x: &[f64], k: usize) -> f64 {
        self.intercepts[k]
            + self
                .betas
                .iter()
                .zip(x)
                .map(|(b, v)| b[k] * v)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    pub x: &'a DMatrix<f64>,
    /// Real responses, or category codes `1..=K` for the multinomial family.
    pub y: &'a [f64],
    pub family: Family,
    pub lambda: f64,
    pub standardize: bool,
}

impl<'a> LassoProblem<'a> {
    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.x.shape();
        if n < 2 {
            return Err(Error::InsufficientRows {
                needed: 2,
                available: n,
            });
        }
        if d < 1 {
            return Err(Error::DimensionMismatch("design has no columns".into()));
        }
        if self.y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} design rows",
                self.y.len(),
                n
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {}", self.lambda)));
        }
        if self.x.iter().chain(self.y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entries".into()));
        }
        if let Family::Multinomial { levels } = self.family {
            if levels < 2 {
                return Err(Error::InvalidArgument("multinomial needs K >= 2".into()));
            }
            for &v in self.y {
                if v.fract() != 0.0 || v < 1.0 || v > levels as f64 {
                    return Err(Error::CategoryOutOfRange {
                        row: 0,
                        column: "response".into(),
                        value: v.to_string(),
                        levels,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<CoefficientSet> {
        let opts = SolverOptions {
            standardize: self.standardize,
            ..*opts
        };
        match self.family {
            Family::Gaussian => fit_gaussian_lasso(self.x, self.y, self.lambda, &opts),
            Family::Multinomial { levels } => {
                let codes: Vec<u32> = self.y.iter().map(|&v| v as u32).collect();
                fit_multinomial_lasso(self.x, &codes, levels, self.lambda, &opts)
            }
        }
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn fit_gaussian_lasso(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    opts: &SolverOptions,
) -> Result<CoefficientSet> {
    LassoProblem {
        x,
        y,
        family: Family::Gaussian,
        lambda,
        standardize: opts.standardize,
    }
    .validate()?;
    let path = GaussianPath::new(x, y, opts);
    let mut beta = vec![0.0; x.ncols()];
    path.solve(lambda, &mut beta)?;
    Ok(path.coefficients(&beta))
}

pub fn fit_multinomial_lasso(
    x: &DMatrix<f64>,
    codes: &[u32],
    levels: u32,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<CoefficientSet> {
    let y: Vec<f64> = codes.iter().map(|&c| f64::from(c)).collect();
    LassoProblem {
        x,
        y: &y,
        family: Family::Multinomial { levels },
        lambda,
        standardize: opts.standardize,
    }
    .validate()?;
    let path = MultinomialPath::new(x, codes, levels, opts)?;
    let mut state = path.null_state();
    path.solve(lambda, &mut state)?;
    Ok(path.coefficients(&state))
}

/// Column centering and scaling used by both solvers.
#[derive(Debug, Clone)]
pub(crate) struct Standardization {
    pub means: Vec<f64>,
    /// Zero marks a constant column.
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn new(x: &DMatrix<f64>, scale: bool) -> Self {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            means.push(m);
            scales.push(if sd <= 1e-12 * (1.0 + m.abs()) {
                0.0
            } else if scale {
                sd
            } else {
                1.0
            });
        }
        Standardization { means, scales }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut xs = x.clone();
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            if s == 0.0 {
                col.fill(0.0);
            } else {
                col.apply(|v| *v = (*v - m) / s);
            }
        }
        xs
    }

    /// Scaled coefficient to original scale.
    pub fn unscale(&self, j: usize, b: f64) -> f64 {
        if self.scales[j] == 0.0 {
            0.0
        } else {
            b / self.scales[j]
        }
    }
}

/// Largest violation of the subgradient optimality conditions, measured
/// on the scaled problem the solver works on. Intercepts contribute the
/// absolute value of their (unpenalized) gradient.
pub fn kkt_violation(problem: &LassoProblem<'_>, solution: &CoefficientSet) -> Result<f64> {
    let (n, d) = problem.x.shape();
    let k = match problem.family {
        Family::Gaussian => 1,
        Family::Multinomial { levels } => levels as usize,
    };
    if solution.betas.len() != d
        || solution.intercepts.len() != k
        || solution.betas.iter().any(|b| b.len() != k)
        || problem.y.len() != n
    {
        return Err(Error::DimensionMismatch(
            "solution does not match the problem".into(),
        ));
    }
    let st = Standardization::new(problem.x, problem.standardize);
    let xs = st.apply(problem.x);
    let nf = n as f64;

    // residuals[i][k] = observed - fitted (mean or probability)
    let mut residuals = DMatrix::zeros(n, k);
    for i in 0..n {
        let row: Vec<f64> = problem.x.row(i).iter().copied().collect();
        match problem.family {
            Family::Gaussian => {
                residuals[(i, 0)] = problem.y[i] - solution.linear_predictor(&row, 0);
            }
            Family::Multinomial { .. } => {
                let eta: Vec<f64> = (0..k).map(|c| solution.linear_predictor(&row, c)).collect();
                let probs = softmax(&eta);
                let yi = problem.y[i] as usize - 1;
                for c in 0..k {
                    residuals[(i, c)] = f64::from(c == yi) - probs[c];
                }
            }
        }
    }

    let mut worst = 0.0f64;
    for c in 0..k {
        worst = worst.max((residuals.column(c).sum() / nf).abs());
        for j in 0..d {
            let grad = -xs.column(j).dot(&residuals.column(c)) / nf;
            let scaled = solution.betas[j][c] * st.scales[j];
            let v = if scaled != 0.0 {
                (grad + problem.lambda * scaled.signum()).abs()
            } else {
                (grad.abs() - problem.lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// Probabilities from linear predictors via max-shifted exponentials.
pub fn softmax(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub(crate) fn log_sum_exp(eta: &[f64]) -> f64 {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + eta.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
