//! Pairwise mixed graphical models by nodewise regression.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{fit_penalized, Penalty};
use crate::data::{marginal_distribution, Centering, Dataset, VariableSpec};
use crate::design::{build_design, predictors_for, Predictor};
use crate::error::{Error, Result};
use crate::solver::{CoefficientSet, Family, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    #[default]
    Or,
    And,
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rule> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Rule::Or),
            "and" => Ok(Rule::And),
            _ => Err(Error::InvalidArgument(format!("unknown rule '{s}'"))),
        }
    }
}

/// One fitted nodewise regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    pub node: usize,
    pub family: Family,
    /// Design column `c` reads `predictors[c]`; `coefficients.betas[c]`
    /// holds its coefficient(s).
    pub predictors: Vec<Predictor>,
    pub coefficients: CoefficientSet,
    pub lambda: f64,
    /// Category proportions of the training response (categorical nodes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_marginals: Option<Vec<f64>>,
}

impl NodeModel {
    /// Coefficients linking this node to `variable` at `lag`, as
    /// `(predictor category, response index, value)`.
    pub fn coefficients_for(
        &self,
        variable: usize,
        lag: u32,
    ) -> impl Iterator<Item = (Option<u32>, usize, f64)> + '_ {
        self.predictors
            .iter()
            .zip(&self.coefficients.betas)
            .filter(move |(p, _)| p.variable == variable && p.lag == lag)
            .flat_map(|(p, b)| b.iter().enumerate().map(move |(k, &v)| (p.category, k, v)))
    }

    /// Variables with at least one nonzero coefficient.
    pub fn neighbors(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .predictors
            .iter()
            .zip(&self.coefficients.betas)
            .filter(|(_, b)| b.iter().any(|&v| v != 0.0))
            .map(|(p, _)| p.variable)
            .collect();
        out.dedup();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub(crate) fn family_of(spec: &VariableSpec) -> Family {
    if spec.is_categorical() {
        Family::Multinomial {
            levels: spec.levels,
        }
    } else {
        Family::Gaussian
    }
}

/// Fits the regression of `y` (reals or category codes) on `x`. A constant
/// continuous response gets an intercept-only model with penalty 0.
pub(crate) fn fit_node(
    node: usize,
    spec: &VariableSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    predictors: Vec<Predictor>,
    penalty: &Penalty,
    opts: &SolverOptions,
) -> Result<NodeModel> {
    let family = family_of(spec);
    let train_marginals = match family {
        Family::Multinomial { levels } => {
            let codes: Vec<u32> = y.iter().map(|&v| v as u32).collect();
            Some(marginal_distribution(&codes, levels)?)
        }
        Family::Gaussian => None,
    };
    if family == Family::Gaussian && y.iter().all(|&v| v == y[0]) {
        return Ok(NodeModel {
            node,
            family,
            coefficients: CoefficientSet {
                intercepts: vec![y[0]],
                betas: vec![vec![0.0]; predictors.len()],
                residual_sigma: Some(0.0),
            },
            predictors,
            lambda: 0.0,
            train_marginals,
        });
    }
    let fit = fit_penalized(x, y, family, penalty, node as u64, opts)?;
    Ok(NodeModel {
        node,
        family,
        predictors,
        coefficients: fit.coefficients,
        lambda: fit.lambda,
        train_marginals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgmConfig {
    pub rule: Rule,
    pub penalty: Penalty,
    /// Give edges touching binary variables a sign.
    pub binary_sign: bool,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for MgmConfig {
    fn default() -> Self {
        MgmConfig {
            rule: Rule::Or,
            penalty: Penalty::CrossValidated(Default::default()),
            binary_sign: false,
            solver: SolverOptions::default(),
        }
    }
}

impl MgmConfig {
    pub fn seed(&self) -> u64 {
        match self.penalty {
            Penalty::CrossValidated(cv) => cv.seed,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMgm {
    pub spec: Vec<VariableSpec>,
    pub rule: Rule,
    pub binary_sign: bool,
    pub node_models: Vec<NodeModel>,
    /// Symmetric, non-negative, zero diagonal.
    pub wadj: Vec<Vec<f64>>,
    /// +1, -1, or 0 where the sign is undefined or there is no edge.
    pub signs: Vec<Vec<i8>>,
    pub lambdas: Vec<f64>,
    pub centering: Option<Centering>,
    pub seed: u64,
}

impl PairwiseMgm {
    pub fn p(&self) -> usize {
        self.spec.len()
    }

    pub fn n_edges(&self) -> usize {
        let p = self.p();
        (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.wadj[i][j] > 0.0)
            .count()
    }
}

/// Regresses every column on all others and combines the neighborhoods.
pub fn fit_mgm(d: &Dataset, config: &MgmConfig) -> Result<PairwiseMgm> {
    if d.centering().is_none() {
        return Err(Error::NotCentered("mixed graphical model fit"));
    }
    if d.n() <= 10 {
        return Err(Error::InsufficientRows {
            needed: 11,
            available: d.n(),
        });
    }
    if d.p() < 2 {
        return Err(Error::InvalidArgument(
            "a network needs at least two variables".into(),
        ));
    }
    let spec = d.spec();
    let node_models = (0..d.p())
        .into_par_iter()
        .map(|s| {
            let predictors = predictors_for(spec, Some(s), 0, 0);
            let x = build_design(d.values(), &predictors);
            fit_node(
                s,
                &spec[s],
                &x,
                &d.column(s),
                predictors,
                &config.penalty,
                &config.solver,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let neighborhoods: Vec<Vec<usize>> = node_models.iter().map(NodeModel::neighbors).collect();
    let adjacency = combine_neighborhoods(&neighborhoods, config.rule);
    let (wadj, signs) = edge_weights(&node_models, spec, &adjacency, config.binary_sign);
    Ok(PairwiseMgm {
        spec: spec.to_vec(),
        rule: config.rule,
        binary_sign: config.binary_sign,
        lambdas: node_models.iter().map(|m| m.lambda).collect(),
        node_models,
        wadj,
        signs,
        centering: d.centering().cloned(),
        seed: config.seed(),
    })
}

/// Symmetric adjacency from nodewise neighbor sets.
pub fn combine_neighborhoods(neighborhoods: &[Vec<usize>], rule: Rule) -> Vec<Vec<bool>> {
    let p = neighborhoods.len();
    let has = |i: usize, j: usize| neighborhoods[i].contains(&j);
    let mut adj = vec![vec![false; p]; p];
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            adj[i][j] = match rule {
                Rule::Or => has(i, j) || has(j, i),
                Rule::And => has(i, j) && has(j, i),
            };
        }
    }
    adj
}

/// Contrast weights of a variable's encoding, or `None` if its effects
/// carry no sign.
fn sign_contrast(spec: &VariableSpec, binary_sign: bool) -> Option<&'static [f64]> {
    match (spec.is_categorical(), spec.levels) {
        (false, _) => Some(&[1.0]),
        (true, 2) if binary_sign => Some(&[-1.0, 1.0]),
        _ => None,
    }
}

/// Mean absolute coefficient linking `model`'s response to `variable`,
/// with the signed contrast when both ends admit one.
pub(crate) fn link_summary(
    model: &NodeModel,
    spec: &[VariableSpec],
    variable: usize,
    lag: u32,
    binary_sign: bool,
) -> (Vec<f64>, Option<f64>) {
    let collected: Vec<(Option<u32>, usize, f64)> = model.coefficients_for(variable, lag).collect();
    let abs: Vec<f64> = collected.iter().map(|c| c.2.abs()).collect();
    let contrast = match (
        sign_contrast(&spec[variable], binary_sign),
        sign_contrast(&spec[model.node], binary_sign),
    ) {
        (Some(pc), Some(rc)) => Some(
            collected
                .iter()
                .map(|&(cat, k, v)| pc[cat.map_or(0, |c| c as usize - 1)] * rc[k] * v)
                .sum::<f64>(),
        ),
        _ => None,
    };
    (abs, contrast)
}

/// Sign shared by every nonzero contrast, 0 if they disagree or any end
/// has no signed contrast.
pub(crate) fn combined_sign(contrasts: &[Option<f64>]) -> i8 {
    if contrasts.iter().any(Option::is_none) {
        return 0;
    }
    let mut sign = 0i8;
    for c in contrasts.iter().flatten() {
        let s = if *c > 0.0 {
            1
        } else if *c < 0.0 {
            -1
        } else {
            continue;
        };
        if sign == 0 {
            sign = s;
        } else if sign != s {
            return 0;
        }
    }
    sign
}

/// Edge weights and signs for the edges marked in `adjacency`. The weight
/// is the mean absolute coefficient over both regressions; edges whose
/// coefficients are all zero are dropped.
pub fn edge_weights(
    models: &[NodeModel],
    spec: &[VariableSpec],
    adjacency: &[Vec<bool>],
    binary_sign: bool,
) -> (Vec<Vec<f64>>, Vec<Vec<i8>>) {
    let p = models.len();
    let mut wadj = vec![vec![0.0; p]; p];
    let mut signs = vec![vec![0i8; p]; p];
    for i in 0..p {
        for j in i + 1..p {
            if !adjacency[i][j] {
                continue;
            }
            let (abs_i, con_i) = link_summary(&models[i], spec, j, 0, binary_sign);
            let (abs_j, con_j) = link_summary(&models[j], spec, i, 0, binary_sign);
            let all: Vec<f64> = abs_i.into_iter().chain(abs_j).collect();
            let weight = all.iter().sum::<f64>() / all.len() as f64;
            if weight == 0.0 {
                continue;
            }
            let sign = combined_sign(&[con_i, con_j]);
            wadj[i][j] = weight;
            wadj[j][i] = weight;
            signs[i][j] = sign;
            signs[j][i] = sign;
        }
    }
    (wadj, signs)
}
