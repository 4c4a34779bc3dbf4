//! Synthetic data from known generating models.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VariableSpec};
use crate::error::{Error, Result};
use crate::rng::Stream;

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THIN: usize = 10;
pub const VAR_BURN_IN: usize = 500;

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!("{what} is not symmetric")));
    }
    Ok(())
}

/// Covariance implied by a precision matrix.
pub fn covariance_of(precision: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(precision, "precision")?;
    check_symmetric(precision, "precision")?;
    let chol = precision
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

/// `n` independent zero-mean Gaussian draws with the given precision.
pub fn sample_ggm(precision: &DMatrix<f64>, n: usize, seed: u64) -> Result<Dataset> {
    let cov = covariance_of(precision)?;
    let p = cov.nrows();
    let l = cov.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    let mut s = Stream::new(seed, 0);
    let z = DMatrix::from_fn(p, n, |_, _| s.normal());
    let x = (l * z).transpose();
    Dataset::new(names(p).into_iter().map(VariableSpec::continuous).collect(), x)
}

/// Gibbs sampler for the binary pairwise model
/// `P(x) ~ exp(sum_i t_i x_i + sum_{i<j} w_ij x_i x_j)` on spins
/// `x in {-1, +1}`. Spin -1 is category 1, +1 is category 2.
pub fn sample_ising_gibbs(
    weights: &DMatrix<f64>,
    thresholds: &[f64],
    n: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<Dataset> {
    check_square(weights, "weights")?;
    check_symmetric(weights, "weights")?;
    let p = weights.nrows();
    if thresholds.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} thresholds for {p} variables",
            thresholds.len()
        )));
    }
    if (0..p).any(|i| weights[(i, i)] != 0.0) {
        return Err(Error::InvalidArgument("weights need a zero diagonal".into()));
    }
    if thin == 0 {
        return Err(Error::InvalidArgument("thinning interval must be positive".into()));
    }
    let mut s = Stream::new(seed, 0);
    let mut x: Vec<f64> = (0..p)
        .map(|_| if s.uniform() < 0.5 { -1.0 } else { 1.0 })
        .collect();
    let sweep = |x: &mut Vec<f64>, s: &mut Stream| {
        for i in 0..p {
            let field = thresholds[i] + (0..p).map(|j| weights[(i, j)] * x[j]).sum::<f64>();
            let up = 1.0 / (1.0 + (-2.0 * field).exp());
            x[i] = if s.uniform() < up { 1.0 } else { -1.0 };
        }
    };
    for _ in 0..burn_in {
        sweep(&mut x, &mut s);
    }
    let mut values = DMatrix::zeros(n, p);
    for r in 0..n {
        for _ in 0..thin {
            sweep(&mut x, &mut s);
        }
        for j in 0..p {
            values[(r, j)] = if x[j] > 0.0 { 2.0 } else { 1.0 };
        }
    }
    Dataset::new(
        names(p).into_iter().map(|nm| VariableSpec::categorical(nm, 2)).collect(),
        values,
    )
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `x_t = B x_{t-1} + e_t` with independent Gaussian noise, started at zero
/// and run through a burn-in that is discarded.
pub fn simulate_var(
    coefficients: &DMatrix<f64>,
    noise_sds: &[f64],
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    check_square(coefficients, "coefficients")?;
    let p = coefficients.nrows();
    if noise_sds.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} noise sds for {p} variables",
            noise_sds.len()
        )));
    }
    if noise_sds.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("noise sds must be non-negative".into()));
    }
    let radius = spectral_radius(coefficients);
    if radius >= 1.0 {
        return Err(Error::UnstableVar(radius));
    }
    let mut s = Stream::new(seed, 0);
    let mut x = nalgebra::DVector::zeros(p);
    let mut values = DMatrix::zeros(n, p);
    for t in 0..VAR_BURN_IN + n {
        let mut next = coefficients * &x;
        for j in 0..p {
            next[j] += noise_sds[j] * s.normal();
        }
        x = next;
        if t >= VAR_BURN_IN {
            values.row_mut(t - VAR_BURN_IN).copy_from(&x.transpose());
        }
    }
    Dataset::new(names(p).into_iter().map(VariableSpec::continuous).collect(), values)
}

/// Population R² of each node regressed on all others.
pub fn population_r2(precision: &DMatrix<f64>) -> Result<Vec<f64>> {
    let cov = covariance_of(precision)?;
    Ok((0..cov.nrows())
        .map(|j| 1.0 - (1.0 / precision[(j, j)]) / cov[(j, j)])
        .collect())
}

/// Partial correlation matrix implied by a precision matrix.
pub fn partial_correlations(precision: &DMatrix<f64>) -> DMatrix<f64> {
    let p = precision.nrows();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            -precision[(i, j)] / (precision[(i, i)] * precision[(j, j)]).sqrt()
        }
    })
}

/// Precision of a chain graph `1 - 2 - ... - p` with unit diagonal and the
/// given partial correlation between neighbors.
pub fn chain_precision(p: usize, partial: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            -partial
        } else {
            0.0
        }
    })
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = rows.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch("matrix rows differ in length".into()));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// A generating model as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratingModel {
    Ggm {
        precision: Vec<Vec<f64>>,
    },
    Ising {
        weights: Vec<Vec<f64>>,
        thresholds: Vec<f64>,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default = "default_thin")]
        thin: usize,
    },
    Var {
        coefficients: Vec<Vec<f64>>,
        noise_sds: Vec<f64>,
    },
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_thin() -> usize {
    DEFAULT_THIN
}

impl GeneratingModel {
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            GeneratingModel::Ggm { precision } => sample_ggm(&rows_to_matrix(precision)?, n, seed),
            GeneratingModel::Ising {
                weights,
                thresholds,
                burn_in,
                thin,
            } => sample_ising_gibbs(&rows_to_matrix(weights)?, thresholds, n, *burn_in, *thin, seed),
            GeneratingModel::Var {
                coefficients,
                noise_sds,
            } => simulate_var(&rows_to_matrix(coefficients)?, noise_sds, n, seed),
        }
    }
}
