//! Versioned, self-describing JSON documents for models and reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{spec_hash, Centering, VariableSpec};
use crate::error::{Error, Result};
use crate::mgm::{NodeModel, PairwiseMgm};
use crate::mvar::VarModel;
use crate::predictability::PredictabilityReport;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "lowercase")]
pub enum NetworkModel {
    Mgm(PairwiseMgm),
    Var(VarModel),
}

impl NetworkModel {
    pub fn spec(&self) -> &[VariableSpec] {
        match self {
            NetworkModel::Mgm(m) => &m.spec,
            NetworkModel::Var(m) => &m.spec,
        }
    }

    pub fn node_models(&self) -> &[NodeModel] {
        match self {
            NetworkModel::Mgm(m) => &m.node_models,
            NetworkModel::Var(m) => &m.node_models,
        }
    }

    pub fn centering(&self) -> Option<&Centering> {
        match self {
            NetworkModel::Mgm(m) => m.centering.as_ref(),
            NetworkModel::Var(m) => m.centering.as_ref(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            NetworkModel::Mgm(m) => m.seed,
            NetworkModel::Var(m) => m.seed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NetworkModel::Mgm(_) => "mgm",
            NetworkModel::Var(_) => "var",
        }
    }

    pub fn is_directed(&self) -> bool {
        matches!(self, NetworkModel::Var(_))
    }
}

impl From<PairwiseMgm> for NetworkModel {
    fn from(m: PairwiseMgm) -> Self {
        NetworkModel::Mgm(m)
    }
}

impl From<VarModel> for NetworkModel {
    fn from(m: VarModel) -> Self {
        NetworkModel::Var(m)
    }
}

/// Where an artifact came from: enough to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_hash: String,
    pub seed: u64,
    /// The options the producing command ran with.
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(spec: &[VariableSpec], seed: u64, config: serde_json::Value) -> Self {
        Provenance {
            spec_hash: spec_hash(spec),
            seed,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub provenance: Provenance,
    pub model: NetworkModel,
    /// Within-sample predictability computed at fit time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_report: Option<PredictabilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub provenance: Provenance,
    pub report: PredictabilityReport,
}

impl ModelDocument {
    pub fn new(model: NetworkModel, config: serde_json::Value) -> Self {
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            provenance: Provenance::new(model.spec(), model.seed(), config),
            model,
            self_report: None,
        }
    }
}

impl ReportDocument {
    pub fn new(report: PredictabilityReport, provenance: Provenance) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            provenance,
            report,
        }
    }
}

fn check_schema(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::InvalidSpec(format!(
            "unsupported schema version {found} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    check_schema(doc.schema_version)?;
    if doc.provenance.spec_hash != spec_hash(doc.model.spec()) {
        return Err(Error::SpecMismatch(
            "model file spec hash does not match its variables".into(),
        ));
    }
    Ok(doc)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ReportDocument = serde_json::from_str(&text)?;
    check_schema(doc.schema_version)?;
    Ok(doc)
}
