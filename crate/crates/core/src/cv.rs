//! Regularization paths and k-fold cross-validated penalty selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::solver::{
    softmax, CoefficientSet, Family, GaussianPath, LassoProblem, MultinomialPath, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            n_lambda: 50,
            lambda_min_ratio: 1e-3,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 || self.folds > n {
            return Err(Error::InvalidArgument(format!(
                "{} folds for {n} rows",
                self.folds
            )));
        }
        if self.n_lambda < 2 {
            return Err(Error::InvalidArgument("n_lambda must be at least 2".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda_min_ratio {} outside (0, 1)",
                self.lambda_min_ratio
            )));
        }
        Ok(())
    }
}

/// How the penalty of a nodewise regression is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Penalty {
    CrossValidated(CvConfig),
    Fixed { lambda: f64 },
    /// `factor * lambda_max` of each regression.
    RelativeToMax { factor: f64 },
}

enum Path {
    Gaussian(GaussianPath),
    Multinomial(MultinomialPath),
}

impl Path {
    fn new(x: &DMatrix<f64>, y: &[f64], family: Family, opts: &SolverOptions) -> Result<Path> {
        LassoProblem {
            x,
            y,
            family,
            lambda: 0.0,
            standardize: opts.standardize,
        }
        .validate()?;
        Ok(match family {
            Family::Gaussian => Path::Gaussian(GaussianPath::new(x, y, opts)),
            Family::Multinomial { levels } => {
                let codes: Vec<u32> = y.iter().map(|&v| v as u32).collect();
                Path::Multinomial(MultinomialPath::new(x, &codes, levels, opts)?)
            }
        })
    }

    fn lambda_max(&self) -> f64 {
        match self {
            Path::Gaussian(g) => g.lambda_max(),
            Path::Multinomial(m) => m.lambda_max(),
        }
    }

    /// Warm-started fits along `lambdas`, in order.
    fn solve(&self, lambdas: &[f64]) -> Result<Vec<CoefficientSet>> {
        let mut out = Vec::with_capacity(lambdas.len());
        match self {
            Path::Gaussian(g) => {
                let mut beta = vec![0.0; g.dim()];
                for &l in lambdas {
                    g.solve(l, &mut beta)?;
                    out.push(g.coefficients(&beta));
                }
            }
            Path::Multinomial(m) => {
                let mut state = m.null_state();
                for &l in lambdas {
                    m.solve(l, &mut state)?;
                    out.push(m.coefficients(&state));
                }
            }
        }
        Ok(out)
    }
}

/// Penalized fits at each penalty of a (decreasing) sequence, each
/// warm-started from the previous solution.
pub fn solve_path(
    x: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<CoefficientSet>> {
    Path::new(x, y, family, opts)?.solve(lambdas)
}

/// Smallest penalty at which every coefficient is zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64], family: Family, opts: &SolverOptions) -> Result<f64> {
    Ok(Path::new(x, y, family, opts)?.lambda_max())
}

fn log_spaced(max: f64, config: &CvConfig) -> Vec<f64> {
    let steps = (config.n_lambda - 1) as f64;
    (0..config.n_lambda)
        .map(|i| max * config.lambda_min_ratio.powf(i as f64 / steps))
        .collect()
}

/// Log-spaced decreasing sequence from `lambda_max` down to
/// `lambda_max * lambda_min_ratio`.
pub fn lambda_path(
    x: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    config: &CvConfig,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    if family == Family::Gaussian {
        let m = y.iter().sum::<f64>() / y.len().max(1) as f64;
        if y.iter().all(|v| (v - m).abs() == 0.0) {
            return Err(Error::ZeroVariance);
        }
    }
    let mut max = lambda_max(x, y, family, opts)?;
    if max <= 0.0 {
        // No predictor varies; every penalty gives the null model.
        max = 1.0;
    }
    Ok(log_spaced(max, config))
}

/// Assigns each row to a fold. Fold sizes differ by at most one; with
/// `strata`, each stratum is spread round-robin across folds.
pub fn fold_assignment(
    n: usize,
    folds: usize,
    strata: Option<&[u32]>,
    stream: &mut Stream,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut order);
    if let Some(strata) = strata {
        // Stable sort keeps the shuffled order within each stratum.
        order.sort_by_key(|&i| strata[i]);
    }
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

fn training_has_all_categories(codes: &[u32], levels: u32, fold: &[usize], folds: usize) -> bool {
    (0..folds).all(|f| {
        let mut seen = vec![false; levels as usize];
        for (i, &c) in codes.iter().enumerate() {
            if fold[i] != f {
                seen[c as usize - 1] = true;
            }
        }
        seen.into_iter().all(|s| s)
    })
}

fn holdout_loss(fit: &CoefficientSet, x: &DMatrix<f64>, y: &[f64], family: Family) -> f64 {
    let n = x.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        total += match family {
            Family::Gaussian => (y[i] - fit.linear_predictor(&row, 0)).powi(2),
            Family::Multinomial { levels } => {
                let eta: Vec<f64> = (0..levels as usize)
                    .map(|k| fit.linear_predictor(&row, k))
                    .collect();
                let p = softmax(&eta)[y[i] as usize - 1];
                -p.max(1e-15).ln()
            }
        };
    }
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Mean over folds of the held-out loss at each penalty.
    pub mean_loss: Vec<f64>,
    pub best_index: usize,
    pub best_lambda: f64,
}

/// k-fold cross-validation over the penalty path. Losses are mean squared
/// error (Gaussian) or mean log-loss (multinomial); the minimum wins and
/// ties go to the larger penalty.
pub fn select_lambda(
    x: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    config: &CvConfig,
    stream_id: u64,
    opts: &SolverOptions,
) -> Result<CvResult> {
    let n = x.nrows();
    config.validate(n)?;
    let lambdas = lambda_path(x, y, family, config, opts)?;

    let mut stream = Stream::new(config.seed, stream_id);
    let fold = match family {
        Family::Gaussian => fold_assignment(n, config.folds, None, &mut stream),
        Family::Multinomial { levels } => {
            let codes: Vec<u32> = y.iter().map(|&v| v as u32).collect();
            let mut fold = fold_assignment(n, config.folds, Some(&codes), &mut stream);
            if !training_has_all_categories(&codes, levels, &fold, config.folds) {
                fold = fold_assignment(n, config.folds, Some(&codes), &mut stream);
                if !training_has_all_categories(&codes, levels, &fold, config.folds) {
                    let mut counts = vec![0usize; levels as usize];
                    codes.iter().for_each(|&c| counts[c as usize - 1] += 1);
                    let rare = counts.iter().position(|&c| c < 2).unwrap_or(0);
                    return Err(Error::AbsentCategory {
                        category: rare as u32 + 1,
                        levels,
                    });
                }
            }
            fold
        }
    };

    let mut sum_loss = vec![0.0; lambdas.len()];
    for f in 0..config.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
        let x_train = x.select_rows(train.iter());
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let x_test = x.select_rows(test.iter());
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let fits = solve_path(&x_train, &y_train, family, &lambdas, opts)?;
        for (l, fit) in fits.iter().enumerate() {
            sum_loss[l] += holdout_loss(fit, &x_test, &y_test, family);
        }
    }
    let mean_loss: Vec<f64> = sum_loss
        .into_iter()
        .map(|s| s / config.folds as f64)
        .collect();
    let mut best_index = 0;
    for (l, &loss) in mean_loss.iter().enumerate() {
        if loss < mean_loss[best_index] {
            best_index = l;
        }
    }
    Ok(CvResult {
        best_lambda: lambdas[best_index],
        lambdas,
        mean_loss,
        best_index,
    })
}

#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub coefficients: CoefficientSet,
    pub lambda: f64,
    pub cv: Option<CvResult>,
}

/// Fits one regression with its penalty chosen per `penalty`.
pub fn fit_penalized(
    x: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    penalty: &Penalty,
    stream_id: u64,
    opts: &SolverOptions,
) -> Result<PenalizedFit> {
    match *penalty {
        Penalty::CrossValidated(config) => {
            let cv = select_lambda(x, y, family, &config, stream_id, opts)?;
            let fits = solve_path(x, y, family, &cv.lambdas[..=cv.best_index], opts)?;
            let coefficients = fits.into_iter().last().expect("non-empty path");
            Ok(PenalizedFit {
                coefficients,
                lambda: cv.best_lambda,
                cv: Some(cv),
            })
        }
        Penalty::Fixed { lambda } => {
            let fit = solve_path(x, y, family, &[lambda], opts)?;
            Ok(PenalizedFit {
                coefficients: fit.into_iter().next().expect("one fit"),
                lambda,
                cv: None,
            })
        }
        Penalty::RelativeToMax { factor } => {
            let path = Path::new(x, y, family, opts)?;
            let lambda = factor * path.lambda_max();
            let fit = path.solve(&[lambda])?;
            Ok(PenalizedFit {
                coefficients: fit.into_iter().next().expect("one fit"),
                lambda,
                cv: None,
            })
        }
    }
}
