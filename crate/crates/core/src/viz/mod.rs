//! Network layout and SVG/DOT rendering with predictability rings.

mod dot;
mod layout;
mod svg;

use serde::{Deserialize, Serialize};

pub use dot::export_dot;
pub use layout::{spring_layout, LayoutOptions};
pub use svg::{render_svg, SvgOptions};

use crate::data::VariableKind;
use crate::error::{Error, Result};
use crate::model_io::NetworkModel;
use crate::predictability::PredictabilityReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingPalette {
    pub explained: String,
    pub marginal: String,
    pub additional: String,
}

impl Default for RingPalette {
    fn default() -> Self {
        RingPalette {
            explained: "#90B4D4".into(),
            marginal: "#ffa500".into(),
            additional: "#ff4300".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSegment {
    pub fraction: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Non-negative.
    pub weight: f64,
    pub sign: i8,
    pub directed: bool,
    pub self_loop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<u32>,
}

/// Headline predictability shown in labels: R2 or nCC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMeasure {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedGraph {
    pub directed: bool,
    /// One point per node in the unit square.
    pub coordinates: Vec<(f64, f64)>,
    pub edges: Vec<Edge>,
    /// Per node, segments laid clockwise from 12 o'clock.
    pub rings: Vec<Vec<RingSegment>>,
    pub labels: Vec<String>,
    pub measures: Vec<Option<NodeMeasure>>,
}

/// Ring segments: explained variance for continuous nodes; the marginal
/// accuracy followed by the accuracy gained over it for categorical nodes.
pub fn build_rings(report: &PredictabilityReport, palette: &RingPalette) -> Result<Vec<Vec<RingSegment>>> {
    report
        .nodes
        .iter()
        .map(|n| {
            let missing = || Error::InvalidArgument(format!("no predictability for node '{}'", n.name));
            match n.kind {
                VariableKind::Continuous => {
                    let r2 = n.r2.ok_or_else(missing)?;
                    Ok(vec![RingSegment {
                        fraction: r2.clamp(0.0, 1.0),
                        color: palette.explained.clone(),
                    }])
                }
                VariableKind::Categorical => {
                    let (cc, marg) = n.cc.zip(n.cc_marg).ok_or_else(missing)?;
                    let marg = marg.clamp(0.0, 1.0);
                    Ok(vec![
                        RingSegment {
                            fraction: marg,
                            color: palette.marginal.clone(),
                        },
                        RingSegment {
                            fraction: (cc.min(1.0) - marg).max(0.0),
                            color: palette.additional.clone(),
                        },
                    ])
                }
            }
        })
        .collect()
}

fn headline(report: &PredictabilityReport) -> Vec<Option<NodeMeasure>> {
    report
        .nodes
        .iter()
        .map(|n| match n.kind {
            VariableKind::Continuous => n.r2.map(|v| NodeMeasure {
                name: "R2".into(),
                value: v,
            }),
            VariableKind::Categorical => n.ncc.map(|v| NodeMeasure {
                name: "nCC".into(),
                value: v,
            }),
        })
        .collect()
}

impl RenderedGraph {
    /// Lays out a fitted network. Without a report nodes get no rings.
    pub fn from_model(
        model: &NetworkModel,
        report: Option<&PredictabilityReport>,
        palette: &RingPalette,
        layout: &LayoutOptions,
    ) -> Result<RenderedGraph> {
        let spec = model.spec();
        let p = spec.len();
        if let Some(r) = report {
            if r.nodes.len() != p || r.nodes.iter().zip(spec).any(|(n, s)| n.name != s.name) {
                return Err(Error::SpecMismatch("report nodes differ from model variables".into()));
            }
        }
        let mut edges = Vec::new();
        let mut layout_w = vec![vec![0.0; p]; p];
        match model {
            NetworkModel::Mgm(m) => {
                for i in 0..p {
                    for j in i + 1..p {
                        let w = m.wadj[i][j];
                        if w > 0.0 {
                            edges.push(Edge {
                                from: i,
                                to: j,
                                weight: w,
                                sign: m.signs[i][j],
                                directed: false,
                                self_loop: false,
                                lag: None,
                            });
                            layout_w[i][j] = w;
                            layout_w[j][i] = w;
                        }
                    }
                }
            }
            NetworkModel::Var(v) => {
                let multi = v.lags.len() > 1;
                for (slot, &lag) in v.lags.iter().enumerate() {
                    for i in 0..p {
                        for j in 0..p {
                            let w = v.coefficients[slot][i][j].abs();
                            if w == 0.0 {
                                continue;
                            }
                            // Coefficient (i, j) is the effect of j on i.
                            edges.push(Edge {
                                from: j,
                                to: i,
                                weight: w,
                                sign: v.signs[slot][i][j],
                                directed: true,
                                self_loop: i == j,
                                lag: multi.then_some(lag),
                            });
                            if i != j {
                                let m = layout_w[i][j].max(w);
                                layout_w[i][j] = m;
                                layout_w[j][i] = m;
                            }
                        }
                    }
                }
            }
        }
        let rings = match report {
            Some(r) => build_rings(r, palette)?,
            None => vec![Vec::new(); p],
        };
        Ok(RenderedGraph {
            directed: model.is_directed(),
            coordinates: spring_layout(&layout_w, layout.iterations, layout.seed),
            edges,
            rings,
            labels: spec.iter().map(|s| s.name.clone()).collect(),
            measures: report.map_or_else(|| vec![None; p], headline),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.coordinates.len();
        if self.rings.len() != p || self.labels.len() != p || self.measures.len() != p {
            return Err(Error::DimensionMismatch("graph node attributes differ in length".into()));
        }
        for e in &self.edges {
            if e.from >= p || e.to >= p {
                return Err(Error::DimensionMismatch(format!("edge {}-{} out of range", e.from, e.to)));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidArgument("edge weights must be non-negative".into()));
            }
            if e.self_loop && !self.directed {
                return Err(Error::InvalidArgument("self-loops need a directed graph".into()));
            }
        }
        for r in &self.rings {
            if r.iter().any(|s| !(0.0..=1.0).contains(&s.fraction))
                || r.iter().map(|s| s.fraction).sum::<f64>() > 1.0 + 1e-12
            {
                return Err(Error::InvalidArgument("ring fractions must sum to at most 1".into()));
            }
        }
        Ok(())
    }
}
