//! Mixed vector autoregression with consecutiveness-aware lagged designs.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::Penalty;
use crate::data::{validate_time_index, Centering, Dataset, TimeIndex, VariableSpec};
use crate::design::{build_design, predictors_for, Predictor};
use crate::error::{Error, Result};
use crate::mgm::{combined_sign, fit_node, link_summary, NodeModel};
use crate::solver::SolverOptions;

/// Fewest lagged rows a fit will accept.
pub const MIN_LAGGED_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    pub lags: Vec<u32>,
    /// Row `r` concatenates the data rows at `kept_rows[r] - lags[l]` for
    /// each lag slot `l`.
    pub sources: DMatrix<f64>,
    pub predictors: Vec<Predictor>,
    /// Encoded predictors, one row per kept row.
    pub x: DMatrix<f64>,
    /// Responses at the kept rows.
    pub y: DMatrix<f64>,
    /// 0-based data rows used as responses.
    pub kept_rows: Vec<usize>,
}

impl LaggedDesign {
    pub fn m(&self) -> usize {
        self.kept_rows.len()
    }
}

pub fn validate_lags(lags: &[u32]) -> Result<()> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("empty lag set".into()));
    }
    if lags.contains(&0) {
        return Err(Error::InvalidArgument("lags must be positive".into()));
    }
    let mut sorted = lags.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != lags.len() {
        return Err(Error::InvalidArgument("duplicate lag".into()));
    }
    Ok(())
}

/// Pairs each usable row with its lagged predecessors. With a time index a
/// row enters only if, for every lag, the predecessor lies on the same day
/// exactly that many beeps earlier; without one, every row past the
/// largest lag enters.
pub fn build_lagged_design(
    d: &Dataset,
    lags: &[u32],
    time: Option<&[TimeIndex]>,
) -> Result<LaggedDesign> {
    validate_lags(lags)?;
    let n = d.n();
    let p = d.p();
    if let Some(t) = time {
        if t.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "time index has {} rows, data has {n}",
                t.len()
            )));
        }
        validate_time_index(t)?;
    }
    let max_lag = *lags.iter().max().expect("non-empty") as usize;
    let kept_rows: Vec<usize> = (max_lag..n)
        .filter(|&r| match time {
            None => true,
            Some(t) => lags.iter().all(|&l| {
                let prev = &t[r - l as usize];
                prev.day == t[r].day && t[r].beep - prev.beep == i64::from(l)
            }),
        })
        .collect();
    let m = kept_rows.len();
    let values = d.values();
    let sources = DMatrix::from_fn(m, p * lags.len(), |r, c| {
        let (slot, j) = (c / p, c % p);
        values[(kept_rows[r] - lags[slot] as usize, j)]
    });
    let predictors: Vec<Predictor> = lags
        .iter()
        .enumerate()
        .flat_map(|(slot, &l)| predictors_for(d.spec(), None, l, slot))
        .collect();
    let x = build_design(&sources, &predictors);
    let y = DMatrix::from_fn(m, p, |r, j| values[(kept_rows[r], j)]);
    Ok(LaggedDesign {
        lags: lags.to_vec(),
        sources,
        predictors,
        x,
        y,
        kept_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarConfig {
    pub lags: Vec<u32>,
    pub penalty: Penalty,
    pub binary_sign: bool,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for VarConfig {
    fn default() -> Self {
        VarConfig {
            lags: vec![1],
            penalty: Penalty::CrossValidated(Default::default()),
            binary_sign: false,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub spec: Vec<VariableSpec>,
    pub lags: Vec<u32>,
    /// `coefficients[l][i][j]`: effect of variable `j` at `t - lags[l]` on
    /// variable `i` at `t`. For categorical ends this is the mean absolute
    /// coefficient times the sign (the bare mean when the sign is undefined).
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub signs: Vec<Vec<Vec<i8>>>,
    pub intercepts: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    /// Residual standard deviation of continuous nodes.
    pub residual_sigmas: Vec<Option<f64>>,
    pub binary_sign: bool,
    pub node_models: Vec<NodeModel>,
    pub centering: Option<Centering>,
    pub seed: u64,
}

impl VarModel {
    pub fn p(&self) -> usize {
        self.spec.len()
    }

    /// Edge weight matrix per lag: absolute values of `coefficients`.
    pub fn weights(&self, lag_slot: usize) -> Vec<Vec<f64>> {
        self.coefficients[lag_slot]
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).collect())
            .collect()
    }
}

/// Regresses each variable at time t on all variables (itself included) at
/// each lag.
pub fn fit_mvar(d: &Dataset, time: Option<&[TimeIndex]>, config: &VarConfig) -> Result<VarModel> {
    if d.centering().is_none() {
        return Err(Error::NotCentered("VAR fit"));
    }
    let design = build_lagged_design(d, &config.lags, time)?;
    if design.m() < MIN_LAGGED_ROWS {
        return Err(Error::InsufficientRows {
            needed: MIN_LAGGED_ROWS,
            available: design.m(),
        });
    }
    let spec = d.spec();
    let p = d.p();
    let node_models = (0..p)
        .into_par_iter()
        .map(|i| {
            let y: Vec<f64> = design.y.column(i).iter().copied().collect();
            fit_node(
                i,
                &spec[i],
                &design.x,
                &y,
                design.predictors.clone(),
                &config.penalty,
                &config.solver,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut coefficients = vec![vec![vec![0.0; p]; p]; config.lags.len()];
    let mut signs = vec![vec![vec![0i8; p]; p]; config.lags.len()];
    for (slot, &lag) in config.lags.iter().enumerate() {
        for i in 0..p {
            for j in 0..p {
                let (abs, contrast) =
                    link_summary(&node_models[i], spec, j, lag, config.binary_sign);
                let weight = abs.iter().sum::<f64>() / abs.len() as f64;
                let sign = combined_sign(&[contrast]);
                signs[slot][i][j] = if weight > 0.0 { sign } else { 0 };
                coefficients[slot][i][j] = match (contrast, spec[i].is_categorical() || spec[j].is_categorical()) {
                    (Some(c), false) => c,
                    _ if sign != 0 => f64::from(sign) * weight,
                    _ => weight,
                };
            }
        }
    }
    let seed = match config.penalty {
        Penalty::CrossValidated(cv) => cv.seed,
        _ => 0,
    };
    Ok(VarModel {
        spec: spec.to_vec(),
        lags: config.lags.clone(),
        coefficients,
        signs,
        intercepts: node_models.iter().map(|m| m.coefficients.intercepts.clone()).collect(),
        lambdas: node_models.iter().map(|m| m.lambda).collect(),
        residual_sigmas: node_models.iter().map(|m| m.coefficients.residual_sigma).collect(),
        binary_sign: config.binary_sign,
        node_models,
        centering: d.centering().cloned(),
        seed,
    })
}
