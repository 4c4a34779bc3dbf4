//! Typed tabular data: variable specs, CSV ingestion, centering and
//! categorical encoding.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical,
}

/// Name and type of one column. Continuous variables have `levels == 1`.
///
/// `labels` optionally names the categories of a categorical variable in
/// code order (`labels[0]` is code 1). When empty, cells are read as
/// integer codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    pub levels: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Continuous,
            levels: 1,
            labels: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, levels: u32) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Categorical,
            levels,
            labels: Vec::new(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == VariableKind::Categorical
    }

    /// Same name, kind and level count; labels are ignored.
    pub fn same_shape(&self, other: &VariableSpec) -> bool {
        self.name == other.name && self.kind == other.kind && self.levels == other.levels
    }
}

pub fn validate_specs(specs: &[VariableSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::InvalidSpec(format!("duplicate name {:?}", s.name)));
        }
        match s.kind {
            VariableKind::Continuous if s.levels != 1 => {
                return Err(Error::InvalidSpec(format!(
                    "continuous variable {:?} must have 1 level",
                    s.name
                )))
            }
            VariableKind::Categorical if s.levels < 2 => {
                return Err(Error::InvalidSpec(format!(
                    "categorical variable {:?} needs at least 2 levels",
                    s.name
                )))
            }
            _ => {}
        }
        if !s.labels.is_empty() && s.labels.len() != s.levels as usize {
            return Err(Error::InvalidSpec(format!(
                "variable {:?} declares {} labels for {} levels",
                s.name,
                s.labels.len(),
                s.levels
            )));
        }
    }
    Ok(())
}

/// Parses a spec sidecar: one `name,kind,levels[,label1|label2|...]` line per
/// variable. `kind` is `g`/`gaussian`/`continuous` or `c`/`categorical`.
/// Blank lines and `#` comments are skipped.
pub fn parse_spec(text: &str) -> Result<Vec<VariableSpec>> {
    let mut specs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::InvalidSpec(format!(
                "line {}: expected name,kind,levels[,labels]",
                lineno + 1
            )));
        }
        let kind = match fields[1].to_ascii_lowercase().as_str() {
            "g" | "gaussian" | "continuous" => VariableKind::Continuous,
            "c" | "categorical" => VariableKind::Categorical,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "line {}: unknown kind {other:?}",
                    lineno + 1
                )))
            }
        };
        let levels: u32 = fields[2].parse().map_err(|_| {
            Error::InvalidSpec(format!("line {}: bad level count {:?}", lineno + 1, fields[2]))
        })?;
        let labels = fields
            .get(3)
            .map(|l| l.split('|').map(|s| s.trim().to_string()).collect())
            .unwrap_or_default();
        specs.push(VariableSpec {
            name: fields[0].to_string(),
            kind,
            levels,
            labels,
        });
    }
    validate_specs(&specs)?;
    Ok(specs)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<Vec<VariableSpec>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text)
}

pub fn format_spec(specs: &[VariableSpec]) -> String {
    let mut out = String::new();
    for s in specs {
        let kind = match s.kind {
            VariableKind::Continuous => "g",
            VariableKind::Categorical => "c",
        };
        let _ = write!(out, "{},{},{}", s.name, kind, s.levels);
        if !s.labels.is_empty() {
            let _ = write!(out, ",{}", s.labels.join("|"));
        }
        out.push('\n');
    }
    out
}

/// SHA-256 over the canonical sidecar text, hex encoded.
pub fn spec_hash(specs: &[VariableSpec]) -> String {
    hex::encode(Sha256::digest(format_spec(specs).as_bytes()))
}

/// Column means (and optional scales) removed from the continuous
/// columns. Categorical entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub means: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<Option<f64>>>,
}

/// Immutable n x p table. Continuous cells are reals, categorical cells
/// are integer codes in `1..=levels` stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    spec: Vec<VariableSpec>,
    values: DMatrix<f64>,
    centering: Option<Centering>,
}

impl Dataset {
    pub fn new(spec: Vec<VariableSpec>, values: DMatrix<f64>) -> Result<Self> {
        validate_specs(&spec)?;
        if values.ncols() != spec.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {} variables",
                values.ncols(),
                spec.len()
            )));
        }
        for (j, s) in spec.iter().enumerate() {
            for i in 0..values.nrows() {
                let v = values[(i, j)];
                if !v.is_finite() {
                    return Err(Error::MissingValue {
                        row: i + 1,
                        column: s.name.clone(),
                    });
                }
                if s.is_categorical() && (v.fract() != 0.0 || v < 1.0 || v > s.levels as f64) {
                    return Err(Error::CategoryOutOfRange {
                        row: i + 1,
                        column: s.name.clone(),
                        value: v.to_string(),
                        levels: s.levels,
                    });
                }
            }
        }
        Ok(Dataset {
            spec,
            values,
            centering: None,
        })
    }

    pub fn from_columns(spec: Vec<VariableSpec>, columns: &[Vec<f64>]) -> Result<Self> {
        if columns.len() != spec.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {} variables",
                columns.len(),
                spec.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        let values = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        Dataset::new(spec, values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn spec(&self) -> &[VariableSpec] {
        &self.spec
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn centering(&self) -> Option<&Centering> {
        self.centering.as_ref()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Category codes of a categorical column.
    pub fn codes(&self, j: usize) -> Vec<u32> {
        self.values.column(j).iter().map(|&v| v as u32).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let values = self.values.select_rows(rows.iter());
        Dataset {
            spec: self.spec.clone(),
            values,
            centering: self.centering.clone(),
        }
    }

    /// Subtracts the sample mean from every continuous column.
    pub fn center_continuous(&self) -> Result<Dataset> {
        if self.centering.is_some() {
            return Err(Error::AlreadyCentered);
        }
        let means = self
            .spec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                (!s.is_categorical()).then(|| {
                    let col = self.values.column(j);
                    col.sum() / col.len().max(1) as f64
                })
            })
            .collect();
        self.center_with(&Centering {
            means,
            scales: None,
        })
    }

    /// Applies a recorded centering (typically the training one) to
    /// uncentered data.
    pub fn center_with(&self, centering: &Centering) -> Result<Dataset> {
        if self.centering.is_some() {
            return Err(Error::AlreadyCentered);
        }
        if centering.means.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "centering for {} columns applied to {}",
                centering.means.len(),
                self.p()
            )));
        }
        let mut values = self.values.clone();
        for (j, s) in self.spec.iter().enumerate() {
            match (s.is_categorical(), centering.means[j]) {
                (false, Some(m)) => {
                    let scale = centering
                        .scales
                        .as_ref()
                        .and_then(|sc| sc[j])
                        .unwrap_or(1.0);
                    values.column_mut(j).apply(|v| *v = (*v - m) / scale);
                }
                (true, None) => {}
                _ => {
                    return Err(Error::DimensionMismatch(format!(
                        "centering entry {j} does not match the variable kind"
                    )))
                }
            }
        }
        Ok(Dataset {
            spec: self.spec.clone(),
            values,
            centering: Some(centering.clone()),
        })
    }

    /// Divides centered continuous columns by their sample standard
    /// deviation (constant columns are left unscaled).
    pub fn zscore_continuous(&self) -> Result<Dataset> {
        let Some(centering) = &self.centering else {
            return Err(Error::NotCentered("z-scoring"));
        };
        if centering.scales.is_some() {
            return Err(Error::AlreadyCentered);
        }
        let n = self.n();
        let scales: Vec<Option<f64>> = self
            .spec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                (!s.is_categorical()).then(|| {
                    let ss: f64 = self.values.column(j).iter().map(|v| v * v).sum();
                    let sd = (ss / (n.max(2) - 1) as f64).sqrt();
                    if sd > 0.0 {
                        sd
                    } else {
                        1.0
                    }
                })
            })
            .collect();
        let mut values = self.values.clone();
        for (j, s) in scales.iter().enumerate() {
            if let Some(s) = s {
                values.column_mut(j).apply(|v| *v /= s);
            }
        }
        Ok(Dataset {
            spec: self.spec.clone(),
            values,
            centering: Some(Centering {
                means: centering.means.clone(),
                scales: Some(scales),
            }),
        })
    }

    /// Reverses centering (and scaling), returning data on the original scale.
    pub fn uncenter(&self) -> Dataset {
        let mut values = self.values.clone();
        if let Some(c) = &self.centering {
            for j in 0..self.p() {
                if let Some(m) = c.means[j] {
                    let scale = c.scales.as_ref().and_then(|s| s[j]).unwrap_or(1.0);
                    values.column_mut(j).apply(|v| *v = *v * scale + m);
                }
            }
        }
        Dataset {
            spec: self.spec.clone(),
            values,
            centering: None,
        }
    }
}

/// Reads a CSV with a header row whose names match `spec` in order.
///
/// Categorical cells are mapped to codes as follows: declared labels map
/// by position; otherwise integer cells are taken as codes and must lie in
/// `1..=levels`; otherwise distinct labels receive codes in order of first
/// appearance and are recorded in the returned spec.
pub fn load_csv(path: impl AsRef<Path>, spec: &[VariableSpec]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, spec)
}

pub fn read_csv<R: Read>(reader: R, spec: &[VariableSpec]) -> Result<Dataset> {
    validate_specs(spec)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<String> = spec.iter().map(|s| s.name.clone()).collect();
    if header != expected {
        return Err(Error::HeaderMismatch {
            expected,
            found: header,
        });
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); spec.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, cell) in record.iter().enumerate() {
            raw[j].push(cell.to_string());
        }
    }

    let mut out_spec = spec.to_vec();
    let mut columns = Vec::with_capacity(spec.len());
    for (j, s) in spec.iter().enumerate() {
        let cells = &raw[j];
        let column = match s.kind {
            VariableKind::Continuous => parse_continuous(cells, &s.name)?,
            VariableKind::Categorical => {
                let (codes, labels) = parse_categorical(cells, s)?;
                out_spec[j].labels = labels;
                codes
            }
        };
        columns.push(column);
    }
    Dataset::from_columns(out_spec, &columns)
}

fn parse_continuous(cells: &[String], name: &str) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue {
                    row: i + 1,
                    column: name.to_string(),
                });
            }
            c.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Unparseable {
                    row: i + 1,
                    column: name.to_string(),
                    value: c.clone(),
                    expected: "a real number",
                })
        })
        .collect()
}

fn parse_categorical(cells: &[String], s: &VariableSpec) -> Result<(Vec<f64>, Vec<String>)> {
    let out_of_range = |i: usize, c: &str| Error::CategoryOutOfRange {
        row: i + 1,
        column: s.name.clone(),
        value: c.to_string(),
        levels: s.levels,
    };
    for (i, c) in cells.iter().enumerate() {
        if c.is_empty() || c.eq_ignore_ascii_case("na") {
            return Err(Error::MissingValue {
                row: i + 1,
                column: s.name.clone(),
            });
        }
    }

    if !s.labels.is_empty() {
        let lookup: HashMap<&str, usize> = s
            .labels
            .iter()
            .enumerate()
            .map(|(k, l)| (l.as_str(), k + 1))
            .collect();
        let codes = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                lookup
                    .get(c.as_str())
                    .map(|&k| k as f64)
                    .ok_or_else(|| out_of_range(i, c))
            })
            .collect::<Result<_>>()?;
        return Ok((codes, s.labels.clone()));
    }

    if cells.iter().all(|c| c.parse::<i64>().is_ok()) {
        let codes = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let v: i64 = c.parse().unwrap_or_default();
                if v >= 1 && v <= s.levels as i64 {
                    Ok(v as f64)
                } else {
                    Err(out_of_range(i, c))
                }
            })
            .collect::<Result<_>>()?;
        return Ok((codes, Vec::new()));
    }

    let mut labels: Vec<String> = Vec::new();
    let mut codes = Vec::with_capacity(cells.len());
    for (i, c) in cells.iter().enumerate() {
        let code = match labels.iter().position(|l| l == c) {
            Some(k) => k + 1,
            None => {
                if labels.len() == s.levels as usize {
                    return Err(out_of_range(i, c));
                }
                labels.push(c.clone());
                labels.len()
            }
        };
        codes.push(code as f64);
    }
    // Levels that never appeared keep placeholder labels.
    while labels.len() < s.levels as usize {
        labels.push(format!("level{}", labels.len() + 1));
    }
    Ok((codes, labels))
}

/// Writes the dataset (on its stored scale) with a header row.
pub fn write_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(d.spec.iter().map(|s| s.name.as_str()))?;
    for i in 0..d.n() {
        let row: Vec<String> = d
            .spec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let v = d.values[(i, j)];
                if s.is_categorical() {
                    let code = v as usize;
                    s.labels
                        .get(code - 1)
                        .cloned()
                        .unwrap_or_else(|| code.to_string())
                } else {
                    v.to_string()
                }
            })
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One-hot indicator matrix (n x K) for codes in `1..=levels`.
pub fn encode_categorical(codes: &[u32], levels: u32) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(codes.len(), levels as usize);
    for (i, &c) in codes.iter().enumerate() {
        if c < 1 || c > levels {
            return Err(Error::CategoryOutOfRange {
                row: i + 1,
                column: String::from("<column>"),
                value: c.to_string(),
                levels,
            });
        }
        out[(i, c as usize - 1)] = 1.0;
    }
    Ok(out)
}

/// Relative category frequencies `p_1..p_K`.
pub fn marginal_distribution(codes: &[u32], levels: u32) -> Result<Vec<f64>> {
    if codes.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let mut counts = vec![0usize; levels as usize];
    for (i, &c) in codes.iter().enumerate() {
        if c < 1 || c > levels {
            return Err(Error::CategoryOutOfRange {
                row: i + 1,
                column: String::from("<column>"),
                value: c.to_string(),
                levels,
            });
        }
        counts[c as usize - 1] += 1;
    }
    let n = codes.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Measurement occasion of a row in an experience-sampling series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeIndex {
    pub day: i64,
    pub beep: i64,
}

pub fn validate_time_index(time: &[TimeIndex]) -> Result<()> {
    for (i, w) in time.windows(2).enumerate() {
        let ordered = w[1].day > w[0].day || (w[1].day == w[0].day && w[1].beep > w[0].beep);
        if !ordered {
            return Err(Error::UnorderedTime(i + 2));
        }
    }
    Ok(())
}

/// Reads a `day,beep` CSV (header required).
pub fn load_time_index(path: impl AsRef<Path>) -> Result<Vec<TimeIndex>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["day", "beep"] {
        return Err(Error::HeaderMismatch {
            expected: vec!["day".into(), "beep".into()],
            found: header,
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize, name: &str| {
            rec[k].parse::<i64>().map_err(|_| Error::Unparseable {
                row: i + 1,
                column: name.to_string(),
                value: rec[k].to_string(),
                expected: "an integer",
            })
        };
        out.push(TimeIndex {
            day: parse(0, "day")?,
            beep: parse(1, "beep")?,
        });
    }
    validate_time_index(&out)?;
    Ok(out)
}
