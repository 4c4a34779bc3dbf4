//! Mapping between variables and regression design columns.
//!
//! A node regression sees a "source row": for cross-sectional models the
//! data row itself, for lagged models the concatenation of the rows at
//! each lag. Every design column is one [`Predictor`] reading a source
//! cell, either as a raw value (continuous) or as a category indicator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::VariableSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictor {
    pub variable: usize,
    /// Indicator category (1-based) for categorical sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<u32>,
    /// Time lag; 0 for cross-sectional models.
    #[serde(default)]
    pub lag: u32,
    /// Position in the source row.
    pub source: usize,
}

impl Predictor {
    pub fn encode(&self, source_row: &[f64]) -> Result<f64> {
        let v = *source_row
            .get(self.source)
            .ok_or(Error::MissingPredictor(self.variable))?;
        if !v.is_finite() {
            return Err(Error::MissingPredictor(self.variable));
        }
        Ok(match self.category {
            Some(k) => f64::from(v as u32 == k),
            None => v,
        })
    }
}

/// Predictors for every variable except `exclude`, reading source slot
/// `slot` (each slot spans `spec.len()` cells).
pub fn predictors_for(
    spec: &[VariableSpec],
    exclude: Option<usize>,
    lag: u32,
    slot: usize,
) -> Vec<Predictor> {
    let p = spec.len();
    let mut out = Vec::new();
    for (j, s) in spec.iter().enumerate() {
        if Some(j) == exclude {
            continue;
        }
        let source = slot * p + j;
        if s.is_categorical() {
            out.extend((1..=s.levels).map(|k| Predictor {
                variable: j,
                category: Some(k),
                lag,
                source,
            }));
        } else {
            out.push(Predictor {
                variable: j,
                category: None,
                lag,
                source,
            });
        }
    }
    out
}

/// Encodes every row of `sources` into a design matrix.
pub fn build_design(sources: &DMatrix<f64>, predictors: &[Predictor]) -> DMatrix<f64> {
    DMatrix::from_fn(sources.nrows(), predictors.len(), |i, c| {
        let pr = &predictors[c];
        let v = sources[(i, pr.source)];
        match pr.category {
            Some(k) => f64::from(v as u32 == k),
            None => v,
        }
    })
}

pub fn encode_row(source_row: &[f64], predictors: &[Predictor]) -> Result<Vec<f64>> {
    predictors.iter().map(|p| p.encode(source_row)).collect()
}
