//! Nodewise predictions and predictability measures.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeIndex, VariableKind, VariableSpec};
use crate::design::encode_row;
use crate::error::{Error, Result};
use crate::mgm::NodeModel;
use crate::model_io::NetworkModel;
use crate::mvar::build_lagged_design;
use crate::solver::{softmax, Family};

/// Conditional mean of a continuous node given one source row.
pub fn predict_gaussian(model: &NodeModel, source_row: &[f64]) -> Result<f64> {
    if model.family != Family::Gaussian {
        return Err(Error::InvalidArgument(format!(
            "node {} is not continuous",
            model.node
        )));
    }
    let x = encode_row(source_row, &model.predictors)?;
    Ok(model.coefficients.linear_predictor(&x, 0))
}

/// Category probabilities and the most probable category (1-based, lowest
/// on ties) from linear predictors.
pub fn classify(eta: &[f64]) -> (Vec<f64>, u32) {
    let probs = softmax(eta);
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    (probs, best as u32 + 1)
}

/// Category probabilities and predicted category of a categorical node.
pub fn predict_categorical(model: &NodeModel, source_row: &[f64]) -> Result<(Vec<f64>, u32)> {
    let Family::Multinomial { levels } = model.family else {
        return Err(Error::InvalidArgument(format!(
            "node {} is not categorical",
            model.node
        )));
    };
    let x = encode_row(source_row, &model.predictors)?;
    let eta: Vec<f64> = (0..levels as usize)
        .map(|k| model.coefficients.linear_predictor(&x, k))
        .collect();
    Ok(classify(&eta))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Continuous(Vec<f64>),
    Categorical {
        /// One row per observation.
        probabilities: Vec<Vec<f64>>,
        classes: Vec<u32>,
    },
}

/// Predictions for every row of `sources`.
pub fn predict_node(model: &NodeModel, sources: &DMatrix<f64>) -> Result<Predictions> {
    let rows = (0..sources.nrows()).map(|i| sources.row(i).iter().copied().collect::<Vec<f64>>());
    match model.family {
        Family::Gaussian => Ok(Predictions::Continuous(
            rows.map(|r| predict_gaussian(model, &r)).collect::<Result<_>>()?,
        )),
        Family::Multinomial { .. } => {
            let (probabilities, classes) = rows
                .map(|r| predict_categorical(model, &r))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(Predictions::Categorical {
                probabilities,
                classes,
            })
        }
    }
}

fn sample_variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `1 - var(predicted - observed) / var(observed)` with sample variances.
pub fn r_squared(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::InsufficientRows {
            needed: 2,
            available: observed.len(),
        });
    }
    if observed.iter().all(|&v| v == observed[0]) {
        return Err(Error::ZeroVariance);
    }
    let resid = predicted.iter().zip(observed).map(|(p, o)| p - o);
    Ok(1.0 - sample_variance(resid) / sample_variance(observed.iter().copied()))
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[u32], observed: &[u32]) -> Result<f64> {
    if predicted.len() != observed.len() || observed.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    let hits = predicted.iter().zip(observed).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / observed.len() as f64)
}

/// Accuracy of always predicting the modal category.
pub fn marginal_accuracy(marginals: &[f64]) -> f64 {
    marginals.iter().copied().fold(0.0, f64::max)
}

/// `(acc - max p) / (1 - max p)`, unclamped.
pub fn normalized_accuracy(acc: f64, marginals: &[f64]) -> Result<f64> {
    let base = marginal_accuracy(marginals);
    if base >= 1.0 {
        return Err(Error::DegenerateMarginal);
    }
    Ok((acc - base) / (1.0 - base))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    WithinSample,
    OutOfSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePredictability {
    pub name: String,
    pub kind: VariableKind,
    /// Continuous nodes; absent when the evaluated column is constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc: Option<f64>,
    /// Normalized against the training marginals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ncc: Option<f64>,
    /// Largest category proportion in the evaluated rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc_marg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityReport {
    pub model_kind: String,
    pub sample_kind: SampleKind,
    /// Rows the measures were computed on.
    pub n_rows: usize,
    pub nodes: Vec<NodePredictability>,
}

impl PredictabilityReport {
    pub fn node(&self, name: &str) -> Option<&NodePredictability> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Plain-text table with columns R2, CC, nCC and CCmarg.
    pub fn to_table(&self) -> String {
        let width = self.nodes.iter().map(|n| n.name.len()).max().unwrap_or(0).max(8);
        let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:>7} {:>7} {:>7} {:>7}",
            "Variable", "R2", "CC", "nCC", "CCmarg"
        );
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "{:<width$} {:>7} {:>7} {:>7} {:>7}",
                n.name,
                cell(n.r2),
                cell(n.cc),
                cell(n.ncc),
                cell(n.cc_marg)
            );
        }
        out
    }
}

pub(crate) fn check_spec(expected: &[VariableSpec], found: &[VariableSpec]) -> Result<()> {
    if expected.len() != found.len() {
        return Err(Error::SpecMismatch(format!(
            "model has {} variables, data has {}",
            expected.len(),
            found.len()
        )));
    }
    for (e, f) in expected.iter().zip(found) {
        if e.name != f.name || !e.same_shape(f) {
            return Err(Error::SpecMismatch(format!(
                "model variable '{}' ({:?}, {} levels) vs data variable '{}' ({:?}, {} levels)",
                e.name, e.kind, e.levels, f.name, f.kind, f.levels
            )));
        }
    }
    Ok(())
}

fn measure(
    model: &NodeModel,
    spec: &VariableSpec,
    sources: &DMatrix<f64>,
    observed: &[f64],
) -> Result<NodePredictability> {
    let mut out = NodePredictability {
        name: spec.name.clone(),
        kind: spec.kind,
        r2: None,
        cc: None,
        ncc: None,
        cc_marg: None,
    };
    match predict_node(model, sources)? {
        Predictions::Continuous(pred) => {
            out.r2 = match r_squared(&pred, observed) {
                Ok(r) => Some(r),
                Err(Error::ZeroVariance) => None,
                Err(e) => return Err(e),
            };
        }
        Predictions::Categorical { classes, .. } => {
            let obs: Vec<u32> = observed.iter().map(|&v| v as u32).collect();
            let cc = accuracy(&classes, &obs)?;
            let eval_marginals = crate::data::marginal_distribution(&obs, spec.levels)?;
            let train = model.train_marginals.as_deref().unwrap_or(&eval_marginals);
            out.cc = Some(cc);
            out.ncc = normalized_accuracy(cc, train).ok();
            out.cc_marg = Some(marginal_accuracy(&eval_marginals));
        }
    }
    Ok(out)
}

/// Predictability of every node on `d`, which must share the model's
/// variables and carry the training centering.
pub fn evaluate(
    model: &NetworkModel,
    d: &Dataset,
    time: Option<&[TimeIndex]>,
    kind: SampleKind,
) -> Result<PredictabilityReport> {
    check_spec(model.spec(), d.spec())?;
    match (d.centering(), model.centering()) {
        (None, _) => return Err(Error::NotCentered("evaluation data")),
        (Some(a), Some(b)) if a != b => return Err(Error::CenteringMismatch),
        _ => {}
    }
    let (sources, responses) = match model {
        NetworkModel::Mgm(_) => (d.values().clone(), d.values().clone()),
        NetworkModel::Var(v) => {
            let design = build_lagged_design(d, &v.lags, time)?;
            (design.sources, design.y)
        }
    };
    if responses.nrows() < 2 {
        return Err(Error::InsufficientRows {
            needed: 2,
            available: responses.nrows(),
        });
    }
    let nodes = model
        .node_models()
        .iter()
        .zip(d.spec())
        .map(|(m, s)| {
            let observed: Vec<f64> = responses.column(m.node).iter().copied().collect();
            measure(m, s, &sources, &observed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictabilityReport {
        model_kind: model.kind().to_string(),
        sample_kind: kind,
        n_rows: responses.nrows(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Predictor;
    use crate::solver::CoefficientSet;

    fn node(family: Family, intercepts: Vec<f64>, betas: Vec<Vec<f64>>) -> NodeModel {
        NodeModel {
            node: 0,
            family,
            predictors: (0..betas.len())
                .map(|j| Predictor {
                    variable: j + 1,
                    category: None,
                    lag: 0,
                    source: j + 1,
                })
                .collect(),
            coefficients: CoefficientSet {
                intercepts,
                betas,
                residual_sigma: None,
            },
            lambda: 0.0,
            train_marginals: None,
        }
    }

    #[test]
    fn conditional_mean_example() {
        let m = node(Family::Gaussian, vec![0.25], vec![vec![0.1], vec![-0.5]]);
        let mu = predict_gaussian(&m, &[f64::NAN, 2.0, 1.0]).unwrap();
        assert!((mu - -0.05).abs() < 1e-12);
    }

    #[test]
    fn missing_predictor_is_an_error() {
        let m = node(Family::Gaussian, vec![0.25], vec![vec![0.1], vec![-0.5]]);
        assert!(matches!(
            predict_gaussian(&m, &[0.0, 2.0]),
            Err(Error::MissingPredictor(2))
        ));
        assert!(matches!(
            predict_gaussian(&m, &[0.0, f64::NAN, 1.0]),
            Err(Error::MissingPredictor(1))
        ));
    }

    #[test]
    fn category_probability_example() {
        let m = node(
            Family::Multinomial { levels: 2 },
            vec![0.0, 0.0],
            vec![vec![0.5, -0.5], vec![1.0, -1.0]],
        );
        let (p, class) = predict_categorical(&m, &[0.0, 1.0, 1.0]).unwrap();
        assert!((p[0] - 0.952_574_126_822_433_5).abs() < 1e-12);
        assert!((p[1] - 0.047_425_873_177_566_78).abs() < 1e-12);
        assert_eq!(class, 1);
    }

    #[test]
    fn ties_and_gauge() {
        let (p, class) = classify(&[0.0; 4]);
        assert_eq!(p, vec![0.25; 4]);
        assert_eq!(class, 1);
        let a = classify(&[0.3, -1.0, 2.0]).0;
        let b = classify(&[100.3, 99.0, 102.0]).0;
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
        let big = classify(&[1000.0, -1000.0, 999.0]).0;
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn r_squared_reference_points() {
        let obs = [1.0, 3.0, 2.0, 5.0];
        assert_eq!(r_squared(&obs, &obs).unwrap(), 1.0);
        assert!(r_squared(&[2.75; 4], &obs).unwrap().abs() < 1e-15);
        assert!(matches!(r_squared(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::ZeroVariance)));
        let shifted: Vec<f64> = obs.iter().map(|v| v + 7.0).collect();
        let pred = [1.5, 2.5, 2.0, 4.0];
        let pred_shifted: Vec<f64> = pred.iter().map(|v| v + 7.0).collect();
        assert!(
            (r_squared(&pred, &obs).unwrap() - r_squared(&pred_shifted, &shifted).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn accuracy_measures() {
        assert_eq!(accuracy(&[1, 2, 1], &[1, 2, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[2, 1], &[1, 2]).unwrap(), 0.0);
        let obs: Vec<u32> = (0..100).map(|i| if i < 10 { 1 } else { 2 }).collect();
        assert_eq!(accuracy(&[2; 100], &obs).unwrap(), 0.9);
        assert_eq!(marginal_accuracy(&[0.1, 0.9]), 0.9);
        assert_eq!(marginal_accuracy(&[0.5, 0.5]), 0.5);
        assert_eq!(normalized_accuracy(0.9, &[0.1, 0.9]).unwrap(), 0.0);
        assert!((normalized_accuracy(0.98, &[0.1, 0.9]).unwrap() - 0.8).abs() < 1e-12);
        assert!((normalized_accuracy(0.9, &[0.5, 0.5]).unwrap() - 0.8).abs() < 1e-12);
        assert!(normalized_accuracy(0.5, &[0.1, 0.9]).unwrap() < 0.0);
        assert!(matches!(
            normalized_accuracy(1.0, &[0.0, 1.0]),
            Err(Error::DegenerateMarginal)
        ));
    }

    #[test]
    fn table_has_expected_columns() {
        let r = PredictabilityReport {
            model_kind: "mgm".into(),
            sample_kind: SampleKind::WithinSample,
            n_rows: 10,
            nodes: vec![NodePredictability {
                name: "lonely".into(),
                kind: VariableKind::Continuous,
                r2: Some(0.55),
                cc: None,
                ncc: None,
                cc_marg: None,
            }],
        };
        let t = r.to_table();
        let header: Vec<&str> = t.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ["Variable", "R2", "CC", "nCC", "CCmarg"]);
        assert!(t.contains("0.550"));
    }
}
