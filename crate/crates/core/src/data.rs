//! Observed-data structure `(X, R, R·A, R·Y)`: CSV ingestion, covariate
//! imputation, encoding and subgroup partitioning.
//!
//! A [`CausalDataset`] keeps the raw covariate columns (with the missing mask
//! recorded at load time) alongside an optional encoded [`DesignMatrix`].
//! Treatment and outcome are `None` exactly where the follow-up indicator is 0.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered covariate roster with per-column kinds.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub columns: Vec<ColumnSpec>,
}

/// One entry of the encoding plan: which design columns a covariate produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingEntry {
    pub column: String,
    pub outputs: Vec<String>,
}

impl CovariateSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Config(format!("duplicate covariate column `{}`", c.name)));
            }
            if let ColumnKind::Categorical { levels } = &c.kind {
                if levels.len() < 2 {
                    return Err(Error::Config(format!(
                        "categorical column `{}` needs at least two levels",
                        c.name
                    )));
                }
                let unique: std::collections::HashSet<_> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return Err(Error::Config(format!("categorical column `{}` repeats a level", c.name)));
                }
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Encoding plan with reference-level one-hot for categorical columns.
    pub fn one_hot_map(&self) -> Vec<EncodingEntry> {
        self.columns
            .iter()
            .map(|c| EncodingEntry {
                column: c.name.clone(),
                outputs: match &c.kind {
                    ColumnKind::Continuous | ColumnKind::Binary => vec![c.name.clone()],
                    ColumnKind::Categorical { levels } => {
                        levels[1..].iter().map(|l| format!("{}={}", c.name, l)).collect()
                    }
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    /// Level indices into the column's declared levels.
    Categorical(Vec<Option<usize>>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    fn is_missing(&self, i: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[i].is_none(),
            ColumnData::Categorical(v) => v[i].is_none(),
        }
    }

    fn select(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// A raw covariate column plus the missing mask observed at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub spec: ColumnSpec,
    pub data: ColumnData,
    pub missing: Vec<bool>,
}

impl Column {
    pub fn numeric(name: &str, kind: ColumnKind, values: Vec<Option<f64>>) -> Self {
        let missing = values.iter().map(Option::is_none).collect();
        Self { spec: ColumnSpec { name: name.into(), kind }, data: ColumnData::Numeric(values), missing }
    }

    pub fn categorical(name: &str, levels: Vec<String>, values: Vec<Option<usize>>) -> Self {
        let missing = values.iter().map(Option::is_none).collect();
        Self {
            spec: ColumnSpec { name: name.into(), kind: ColumnKind::Categorical { levels } },
            data: ColumnData::Categorical(values),
            missing,
        }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn any_missing(&self) -> bool {
        (0..self.len()).any(|i| self.data.is_missing(i))
    }

    /// Cell rendered for CSV output; empty string for missing.
    pub fn render(&self, i: usize) -> String {
        match (&self.data, &self.spec.kind) {
            (ColumnData::Numeric(v), _) => v[i].map(|x| x.to_string()).unwrap_or_default(),
            (ColumnData::Categorical(v), ColumnKind::Categorical { levels }) => {
                v[i].map(|l| levels[l].clone()).unwrap_or_default()
            }
            (ColumnData::Categorical(_), _) => unreachable!("categorical data with non-categorical kind"),
        }
    }

    pub fn numeric_value(&self, i: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Numeric(v) => v[i],
            ColumnData::Categorical(v) => v[i].map(|l| l as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    #[default]
    Binary,
    /// Real outcome bounded in `[0, 1]`.
    Bounded,
}

/// Stored encoding parameters, reusable on new data with the same schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub columns: Vec<ColumnEncoding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ColumnEncoding {
    Standardize { name: String, mean: f64, sd: f64 },
    Identity { name: String },
    OneHot { name: String, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalDataset {
    ids: Vec<String>,
    covariates: Vec<Column>,
    r: Vec<bool>,
    a: Vec<Option<bool>>,
    y: Vec<Option<f64>>,
    group: Option<Vec<String>>,
    outcome_kind: OutcomeKind,
    design: Option<DesignMatrix>,
    encoding: Option<EncodingParams>,
}

impl CausalDataset {
    /// Assembles a dataset and checks the observed-data invariants.
    pub fn new(
        ids: Vec<String>,
        covariates: Vec<Column>,
        r: Vec<bool>,
        a: Vec<Option<bool>>,
        y: Vec<Option<f64>>,
        outcome_kind: OutcomeKind,
    ) -> Result<Self> {
        let n = r.len();
        if ids.len() != n || a.len() != n || y.len() != n {
            return Err(Error::Data("role vectors have different lengths".into()));
        }
        for c in &covariates {
            if c.len() != n || c.missing.len() != n {
                return Err(Error::Data(format!("covariate `{}` has {} rows, expected {n}", c.name(), c.len())));
            }
        }
        CovariateSchema { columns: covariates.iter().map(|c| c.spec.clone()).collect() }.validate()?;
        for i in 0..n {
            if r[i] {
                let yi = y[i].ok_or_else(|| Error::Data(format!("row {} ({}): R=1 but outcome missing", i + 1, ids[i])))?;
                if a[i].is_none() {
                    return Err(Error::Data(format!("row {} ({}): R=1 but treatment missing", i + 1, ids[i])));
                }
                check_outcome(yi, outcome_kind).map_err(|m| Error::Data(format!("row {} ({}): {m}", i + 1, ids[i])))?;
            } else if a[i].is_some() || y[i].is_some() {
                return Err(Error::Data(format!(
                    "row {} ({}): treatment/outcome present where R=0",
                    i + 1,
                    ids[i]
                )));
            }
        }
        Ok(Self { ids, covariates, r, a, y, group: None, outcome_kind, design: None, encoding: None })
    }

    /// Dataset whose covariates are already an encoded design (simulation and tests).
    pub fn from_design(
        design: DesignMatrix,
        r: Vec<bool>,
        a: Vec<Option<bool>>,
        y: Vec<Option<f64>>,
        outcome_kind: OutcomeKind,
    ) -> Result<Self> {
        let n = design.nrows();
        let ids = (0..n).map(|i| (i + 1).to_string()).collect();
        let covariates = design
            .names()
            .iter()
            .enumerate()
            .map(|(j, name)| Column::numeric(name, ColumnKind::Continuous, design.column(j).into_iter().map(Some).collect()))
            .collect();
        let mut ds = Self::new(ids, covariates, r, a, y, outcome_kind)?;
        ds.design = Some(design);
        Ok(ds)
    }

    /// Replaces the raw covariate columns, keeping any design already attached.
    pub fn with_covariates(mut self, covariates: Vec<Column>) -> Result<Self> {
        if let Some(c) = covariates.iter().find(|c| c.len() != self.n() || c.missing.len() != self.n()) {
            return Err(Error::Data(format!("covariate `{}` has {} rows, expected {}", c.name(), c.len(), self.n())));
        }
        CovariateSchema { columns: covariates.iter().map(|c| c.spec.clone()).collect() }.validate()?;
        self.covariates = covariates;
        Ok(self)
    }

    pub fn with_group(mut self, group: Vec<String>) -> Result<Self> {
        if group.len() != self.n() {
            return Err(Error::Data("group vector length differs from dataset".into()));
        }
        self.group = Some(group);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn covariates(&self) -> &[Column] {
        &self.covariates
    }

    pub fn covariate(&self, name: &str) -> Option<&Column> {
        self.covariates.iter().find(|c| c.name() == name)
    }

    pub fn schema(&self) -> CovariateSchema {
        CovariateSchema { columns: self.covariates.iter().map(|c| c.spec.clone()).collect() }
    }

    pub fn r(&self) -> &[bool] {
        &self.r
    }

    pub fn a(&self) -> &[Option<bool>] {
        &self.a
    }

    pub fn y(&self) -> &[Option<f64>] {
        &self.y
    }

    pub fn group(&self) -> Option<&[String]> {
        self.group.as_deref()
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    pub fn design(&self) -> Option<&DesignMatrix> {
        self.design.as_ref()
    }

    pub fn encoding(&self) -> Option<&EncodingParams> {
        self.encoding.as_ref()
    }

    /// Encoded design; errors if [`encode`] has not run.
    pub fn require_design(&self) -> Result<&DesignMatrix> {
        self.design
            .as_ref()
            .ok_or_else(|| Error::Data("covariates have not been encoded".into()))
    }

    /// Observed treatment as 0/1, `None` where R=0.
    pub fn a_value(&self, i: usize) -> Option<f64> {
        self.a[i].map(|a| if a { 1.0 } else { 0.0 })
    }

    /// Rows restricted to `idx`, preserving order.
    pub fn select_rows(&self, idx: &[usize]) -> CausalDataset {
        CausalDataset {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|c| Column {
                    spec: c.spec.clone(),
                    data: c.data.select(idx),
                    missing: idx.iter().map(|&i| c.missing[i]).collect(),
                })
                .collect(),
            r: idx.iter().map(|&i| self.r[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            group: self.group.as_ref().map(|g| idx.iter().map(|&i| g[i].clone()).collect()),
            outcome_kind: self.outcome_kind,
            design: self.design.as_ref().map(|d| d.select_rows(idx)),
            encoding: self.encoding.clone(),
        }
    }

    /// Writes the dataset back in the input layout (id, covariates, roles).
    pub fn write_csv<W: Write>(&self, writer: W, roles: &RoleMap) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let id_col = roles.id.clone().unwrap_or_else(|| "id".to_string());
        let mut header = vec![id_col];
        header.extend(self.covariates.iter().map(|c| c.name().to_string()));
        header.push(roles.followup.clone());
        header.push(roles.treatment.clone());
        header.push(roles.outcome.clone());
        if let (Some(g), Some(_)) = (&roles.group, &self.group) {
            header.push(g.clone());
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.ids[i].clone()];
            rec.extend(self.covariates.iter().map(|c| c.render(i)));
            rec.push(if self.r[i] { "1" } else { "0" }.to_string());
            rec.push(self.a[i].map(|a| if a { "1" } else { "0" }.to_string()).unwrap_or_default());
            rec.push(self.y[i].map(|y| y.to_string()).unwrap_or_default());
            if let (Some(_), Some(g)) = (&roles.group, &self.group) {
                rec.push(g[i].clone());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_outcome(y: f64, kind: OutcomeKind) -> std::result::Result<(), String> {
    match kind {
        OutcomeKind::Binary if y != 0.0 && y != 1.0 => Err(format!("binary outcome has value {y}")),
        OutcomeKind::Bounded if !(0.0..=1.0).contains(&y) => Err(format!("bounded outcome {y} outside [0, 1]")),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

/// Row predicate `column op value`, evaluated on raw CSV cells before anything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    pub op: FilterOp,
    pub value: String,
}

impl std::str::FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // longest operators first
        for (tok, op) in [
            ("!=", FilterOp::Ne),
            ("<=", FilterOp::Le),
            (">=", FilterOp::Ge),
            ("=", FilterOp::Eq),
            ("<", FilterOp::Lt),
            (">", FilterOp::Gt),
        ] {
            if let Some(pos) = s.find(tok) {
                let column = s[..pos].trim();
                let value = s[pos + tok.len()..].trim();
                if column.is_empty() {
                    break;
                }
                return Ok(Filter { column: column.into(), op, value: value.into() });
            }
        }
        Err(Error::Config(format!("cannot parse filter `{s}` (expected column<op>value)")))
    }
}

impl Filter {
    /// Missing cells never satisfy a predicate.
    pub fn matches(&self, cell: &str) -> bool {
        if is_missing_token(cell) {
            return false;
        }
        match (cell.trim().parse::<f64>(), self.value.parse::<f64>()) {
            (Ok(a), Ok(b)) => match self.op {
                FilterOp::Eq => a == b,
                FilterOp::Ne => a != b,
                FilterOp::Lt => a < b,
                FilterOp::Le => a <= b,
                FilterOp::Gt => a > b,
                FilterOp::Ge => a >= b,
            },
            _ => match self.op {
                FilterOp::Eq => cell.trim() == self.value,
                FilterOp::Ne => cell.trim() != self.value,
                FilterOp::Lt => cell.trim() < self.value.as_str(),
                FilterOp::Le => cell.trim() <= self.value.as_str(),
                FilterOp::Gt => cell.trim() > self.value.as_str(),
                FilterOp::Ge => cell.trim() >= self.value.as_str(),
            },
        }
    }
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoleMap {
    pub covariates: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub followup: String,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub filters: Vec<Filter>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Mask treatment/outcome values present on R=0 rows instead of rejecting.
    pub lenient: bool,
    pub outcome_kind: OutcomeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// 1-based data rows dropped because the follow-up indicator was missing.
    pub missing_followup_rows: Vec<usize>,
    /// 1-based data rows whose treatment/outcome were masked in lenient mode.
    pub masked_rows: Vec<usize>,
    pub filtered_out: usize,
}

pub fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

/// Reads a dataset from a CSV file with a header row.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: Option<&CovariateSchema>,
    roles: &RoleMap,
    opts: LoadOptions,
) -> Result<(CausalDataset, LoadReport)> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.as_ref().display())))?;
    read_csv(file, schema, roles, opts)
}

pub fn read_csv<R: Read>(
    reader: R,
    schema: Option<&CovariateSchema>,
    roles: &RoleMap,
    opts: LoadOptions,
) -> Result<(CausalDataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column `{name}` not found in header")))
    };
    let r_idx = col(&roles.followup)?;
    let a_idx = col(&roles.treatment)?;
    let y_idx = col(&roles.outcome)?;
    let g_idx = roles.group.as_deref().map(col).transpose()?;
    let id_idx = roles.id.as_deref().map(col).transpose()?;
    let cov_idx: Vec<usize> = roles.covariates.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let filter_idx: Vec<usize> = roles.filters.iter().map(|f| col(&f.column)).collect::<Result<_>>()?;

    let mut report = LoadReport::default();
    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let cells: Vec<String> = rec.iter().map(str::to_string).collect();
        if cells.len() != headers.len() {
            return Err(Error::Parse { row, column: "*".into(), message: "wrong number of fields".into() });
        }
        records.push((row, cells));
    }

    let schema = match schema {
        Some(s) => {
            s.validate()?;
            for name in &roles.covariates {
                if s.get(name).is_none() {
                    return Err(Error::Config(format!("covariate `{name}` missing from schema")));
                }
            }
            CovariateSchema { columns: roles.covariates.iter().map(|n| s.get(n).unwrap().clone()).collect() }
        }
        None => infer_schema(&roles.covariates, &cov_idx, &records)?,
    };
    records.retain(|(_, cells)| {
        let keep = roles.filters.iter().zip(&filter_idx).all(|(f, &j)| f.matches(&cells[j]));
        if !keep {
            report.filtered_out += 1;
        }
        keep
    });

    let mut ids = Vec::new();
    let mut r = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut group = Vec::new();
    let mut kept_rows = Vec::new();
    for (row, cells) in &records {
        let r_cell = &cells[r_idx];
        if is_missing_token(r_cell) {
            report.missing_followup_rows.push(*row);
            continue;
        }
        let ri = parse_binary(r_cell).ok_or_else(|| Error::Parse {
            row: *row,
            column: roles.followup.clone(),
            message: format!("follow-up indicator must be 0 or 1, got `{r_cell}`"),
        })?;
        let ai = parse_optional(&cells[a_idx], *row, &roles.treatment, parse_binary)?;
        let yi = parse_optional(&cells[y_idx], *row, &roles.outcome, |s| s.trim().parse::<f64>().ok())?;
        let (ai, yi, ri) = if !ri {
            if ai.is_some() || yi.is_some() {
                if !opts.lenient {
                    return Err(Error::Data(format!(
                        "row {row}: treatment/outcome present where {} = 0 (use lenient mode to mask)",
                        roles.followup
                    )));
                }
                report.masked_rows.push(*row);
            }
            (None, None, false)
        } else if ai.is_none() || yi.is_none() {
            if !opts.lenient {
                return Err(Error::Data(format!(
                    "row {row}: {} = 1 but treatment or outcome is missing",
                    roles.followup
                )));
            }
            report.masked_rows.push(*row);
            (None, None, false)
        } else {
            (ai, yi, true)
        };
        ids.push(match id_idx {
            Some(j) => cells[j].clone(),
            None => row.to_string(),
        });
        r.push(ri);
        a.push(ai);
        y.push(yi);
        if let Some(j) = g_idx {
            group.push(cells[j].trim().to_string());
        }
        kept_rows.push((*row, cells));
    }

    let mut covariates = Vec::with_capacity(schema.columns.len());
    for (spec, &j) in schema.columns.iter().zip(&cov_idx) {
        covariates.push(parse_column(spec, j, &kept_rows)?);
    }
    let mut ds = CausalDataset::new(ids, covariates, r, a, y, opts.outcome_kind)?;
    if g_idx.is_some() {
        ds = ds.with_group(group)?;
    }
    Ok((ds, report))
}

fn parse_binary(s: &str) -> Option<bool> {
    match s.trim().parse::<f64>() {
        Ok(0.0) => Some(false),
        Ok(1.0) => Some(true),
        _ => None,
    }
}

fn parse_optional<T>(cell: &str, row: usize, column: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
    if is_missing_token(cell) {
        return Ok(None);
    }
    f(cell).map(Some).ok_or_else(|| Error::Parse {
        row,
        column: column.into(),
        message: format!("malformed value `{cell}`"),
    })
}

fn parse_column(spec: &ColumnSpec, j: usize, rows: &[(usize, &Vec<String>)]) -> Result<Column> {
    match &spec.kind {
        ColumnKind::Continuous | ColumnKind::Binary => {
            let mut values = Vec::with_capacity(rows.len());
            for (row, cells) in rows {
                let v = parse_optional(&cells[j], *row, &spec.name, |s| {
                    let v = s.trim().parse::<f64>().ok().filter(|v| v.is_finite())?;
                    if spec.kind == ColumnKind::Binary && v != 0.0 && v != 1.0 {
                        return None;
                    }
                    Some(v)
                })?;
                values.push(v);
            }
            Ok(Column::numeric(&spec.name, spec.kind.clone(), values))
        }
        ColumnKind::Categorical { levels } => {
            let mut values = Vec::with_capacity(rows.len());
            for (row, cells) in rows {
                values.push(parse_optional(&cells[j], *row, &spec.name, |s| {
                    levels.iter().position(|l| l == s.trim())
                })?);
            }
            Ok(Column::categorical(&spec.name, levels.clone(), values))
        }
    }
}

/// Numeric columns with only {0,1} become binary, other numeric columns continuous,
/// anything else categorical with levels in sorted order.
fn infer_schema(names: &[String], idx: &[usize], rows: &[(usize, Vec<String>)]) -> Result<CovariateSchema> {
    let mut columns = Vec::new();
    for (name, &j) in names.iter().zip(idx) {
        let present: Vec<&str> = rows.iter().map(|(_, c)| c[j].trim()).filter(|s| !is_missing_token(s)).collect();
        let numeric: Option<Vec<f64>> = present.iter().map(|s| s.parse::<f64>().ok()).collect();
        let kind = match numeric {
            Some(vals) if !vals.is_empty() && vals.iter().all(|&v| v == 0.0 || v == 1.0) => ColumnKind::Binary,
            Some(_) => ColumnKind::Continuous,
            None => {
                let levels: std::collections::BTreeSet<&str> = present.iter().copied().collect();
                ColumnKind::Categorical { levels: levels.into_iter().map(String::from).collect() }
            }
        };
        columns.push(ColumnSpec { name: name.clone(), kind });
    }
    CovariateSchema::new(columns)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputationReport {
    /// Column name and number of imputed cells, for columns that had any.
    pub imputed: Vec<(String, usize)>,
    pub indicator_columns: Vec<String>,
}

/// Fills missing covariate cells (mean for continuous, mode for binary and
/// categorical) and appends one `<name>_missing` indicator per affected column.
pub fn impute_covariates(dataset: &CausalDataset) -> Result<(CausalDataset, ImputationReport)> {
    let mut out = dataset.clone();
    let mut indicators = Vec::new();
    let mut report = ImputationReport { imputed: Vec::new(), indicator_columns: Vec::new() };
    for col in &mut out.covariates {
        let missing_now: Vec<bool> = (0..col.len()).map(|i| col.data.is_missing(i)).collect();
        let count = missing_now.iter().filter(|&&m| m).count();
        if count == 0 {
            continue;
        }
        if count == col.len() {
            return Err(Error::Data(format!("covariate `{}` is entirely missing", col.name())));
        }
        match (&mut col.data, &col.spec.kind) {
            (ColumnData::Numeric(v), ColumnKind::Continuous) => {
                let present: Vec<f64> = v.iter().flatten().copied().collect();
                let fill = present.iter().sum::<f64>() / present.len() as f64;
                v.iter_mut().filter(|x| x.is_none()).for_each(|x| *x = Some(fill));
            }
            (ColumnData::Numeric(v), _) => {
                let ones = v.iter().flatten().filter(|&&x| x == 1.0).count();
                let zeros = v.iter().flatten().count() - ones;
                let fill = if ones > zeros { 1.0 } else { 0.0 };
                v.iter_mut().filter(|x| x.is_none()).for_each(|x| *x = Some(fill));
            }
            (ColumnData::Categorical(v), ColumnKind::Categorical { levels }) => {
                let mut counts = vec![0usize; levels.len()];
                v.iter().flatten().for_each(|&l| counts[l] += 1);
                // ties resolve to the earliest level
                let fill = counts
                    .iter()
                    .enumerate()
                    .fold((0, 0), |best, (l, &c)| if c > best.1 { (l, c) } else { best })
                    .0;
                v.iter_mut().filter(|x| x.is_none()).for_each(|x| *x = Some(fill));
            }
            (ColumnData::Categorical(_), _) => unreachable!("categorical data with non-categorical kind"),
        }
        let name = format!("{}_missing", col.name());
        report.imputed.push((col.name().to_string(), count));
        report.indicator_columns.push(name.clone());
        indicators.push(Column::numeric(
            &name,
            ColumnKind::Binary,
            missing_now.iter().map(|&m| Some(if m { 1.0 } else { 0.0 })).collect(),
        ));
    }
    out.covariates.extend(indicators);
    CovariateSchema { columns: out.covariates.iter().map(|c| c.spec.clone()).collect() }.validate()?;
    out.design = None;
    out.encoding = None;
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeReport {
    pub constant_columns: Vec<String>,
}

/// Encodes covariates with freshly estimated parameters (full-sample moments).
pub fn encode(dataset: &CausalDataset) -> Result<(CausalDataset, EncodeReport)> {
    let mut params = Vec::new();
    let mut constant_columns = Vec::new();
    for col in &dataset.covariates {
        if col.any_missing() {
            return Err(Error::Data(format!("covariate `{}` still has missing cells; impute first", col.name())));
        }
        let name = col.name().to_string();
        params.push(match (&col.spec.kind, &col.data) {
            (ColumnKind::Continuous, ColumnData::Numeric(v)) => {
                let n = v.len() as f64;
                let mean = v.iter().flatten().sum::<f64>() / n;
                let var = v.iter().flatten().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                if !(sd > 1e-12) {
                    log::warn!("covariate `{name}` has zero variance; encoded as a constant 0 column");
                    constant_columns.push(name.clone());
                }
                ColumnEncoding::Standardize { name, mean, sd }
            }
            (ColumnKind::Binary, _) => ColumnEncoding::Identity { name },
            (ColumnKind::Categorical { levels }, _) => ColumnEncoding::OneHot { name, levels: levels.clone() },
            (ColumnKind::Continuous, ColumnData::Categorical(_)) => unreachable!("continuous column with level data"),
        });
    }
    let params = EncodingParams { columns: params };
    let out = apply_encoding(dataset, &params)?;
    Ok((out, EncodeReport { constant_columns }))
}

/// Encodes with previously stored parameters.
pub fn apply_encoding(dataset: &CausalDataset, params: &EncodingParams) -> Result<CausalDataset> {
    let n = dataset.n();
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for enc in &params.columns {
        let cname = match enc {
            ColumnEncoding::Standardize { name, .. } | ColumnEncoding::Identity { name } | ColumnEncoding::OneHot { name, .. } => name,
        };
        let col = dataset
            .covariate(cname)
            .ok_or_else(|| Error::Data(format!("encoding refers to unknown covariate `{cname}`")))?;
        let value = |i: usize| -> Result<f64> {
            col.numeric_value(i)
                .ok_or_else(|| Error::Data(format!("covariate `{cname}` has a missing cell at row {}", i + 1)))
        };
        match enc {
            ColumnEncoding::Standardize { mean, sd, .. } => {
                let v = (0..n)
                    .map(|i| value(i).map(|x| if *sd > 1e-12 { (x - mean) / sd } else { 0.0 }))
                    .collect::<Result<_>>()?;
                names.push(cname.clone());
                cols.push(v);
            }
            ColumnEncoding::Identity { .. } => {
                names.push(cname.clone());
                cols.push((0..n).map(value).collect::<Result<_>>()?);
            }
            ColumnEncoding::OneHot { levels, .. } => {
                let codes: Vec<usize> = (0..n).map(|i| value(i).map(|v| v as usize)).collect::<Result<_>>()?;
                for (l, level) in levels.iter().enumerate().skip(1) {
                    names.push(format!("{cname}={level}"));
                    cols.push(codes.iter().map(|&c| if c == l { 1.0 } else { 0.0 }).collect());
                }
            }
        }
    }
    let d = cols.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(cols.iter().map(|c| c[i]));
    }
    let mut out = dataset.clone();
    out.design = Some(DesignMatrix::new(n, d, data, names)?);
    out.encoding = Some(params.clone());
    Ok(out)
}

/// Ordered subgroup labels and per-row assignment (`None` = excluded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupPartition {
    pub labels: Vec<String>,
    pub assignment: Vec<Option<usize>>,
}

impl SubgroupPartition {
    /// Partition from an explicit label vector. Numeric labels sort numerically,
    /// others lexicographically.
    pub fn from_labels(labels: &[String]) -> Self {
        let mut uniq: Vec<String> = labels.iter().cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        if uniq.iter().all(|l| l.parse::<f64>().is_ok()) {
            uniq.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
        }
        let index: HashMap<&str, usize> = uniq.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
        let assignment = labels.iter().map(|l| Some(index[l.as_str()])).collect();
        Self { labels: uniq, assignment }
    }

    /// The trivial partition with every row in one group.
    pub fn single(n: usize, label: &str) -> Self {
        Self { labels: vec![label.to_string()], assignment: vec![Some(0); n] }
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.labels.len()];
        self.assignment.iter().flatten().for_each(|&g| c[g] += 1);
        c
    }

    pub fn members(&self, g: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, a)| (*a == Some(g)).then_some(i))
            .collect()
    }

    pub fn excluded(&self) -> Vec<usize> {
        self.assignment.iter().enumerate().filter_map(|(i, a)| a.is_none().then_some(i)).collect()
    }

    /// Labels of groups with no members.
    pub fn empty_groups(&self) -> Vec<String> {
        self.counts()
            .iter()
            .zip(&self.labels)
            .filter(|(&c, _)| c == 0)
            .map(|(_, l)| l.clone())
            .collect()
    }
}

/// Groups ages into `<=low`, `low+1`, ..., `high-1`, `>=high`. Rows whose age
/// was missing at load time are excluded.
pub fn partition_by_age(dataset: &CausalDataset, age_column: &str, pool_low: i64, pool_high: i64) -> Result<SubgroupPartition> {
    if pool_high <= pool_low {
        return Err(Error::Config(format!("age pooling bounds must satisfy low < high, got {pool_low}, {pool_high}")));
    }
    let col = dataset
        .covariate(age_column)
        .ok_or_else(|| Error::Config(format!("age column `{age_column}` is not a covariate")))?;
    if !matches!(col.data, ColumnData::Numeric(_)) {
        return Err(Error::Data(format!("age column `{age_column}` is not numeric")));
    }
    let mut labels = vec![format!("<={pool_low}")];
    labels.extend((pool_low + 1..pool_high).map(|a| a.to_string()));
    labels.push(format!(">={pool_high}"));
    let last = labels.len() - 1;
    let assignment: Vec<Option<usize>> = (0..dataset.n())
        .map(|i| {
            if col.missing[i] {
                return None;
            }
            let age = col.numeric_value(i)?.floor() as i64;
            Some(if age <= pool_low {
                0
            } else if age >= pool_high {
                last
            } else {
                (age - pool_low) as usize
            })
        })
        .collect();
    let part = SubgroupPartition { labels, assignment };
    let empty = part.empty_groups();
    if !empty.is_empty() {
        log::warn!("age groups with no observations: {}", empty.join(", "));
    }
    Ok(part)
}

/// Distinct value combinations of the named columns, as stratum ids.
pub fn strata(dataset: &CausalDataset, columns: &[&str]) -> Result<Vec<usize>> {
    let cols: Vec<&Column> = columns
        .iter()
        .map(|c| dataset.covariate(c).ok_or_else(|| Error::Config(format!("unknown covariate `{c}`"))))
        .collect::<Result<_>>()?;
    let mut keys: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let raw: Vec<Vec<String>> = (0..dataset.n()).map(|i| cols.iter().map(|c| c.render(i)).collect()).collect();
    for k in &raw {
        let next = keys.len();
        keys.entry(k.clone()).or_insert(next);
    }
    Ok(raw.iter().map(|k| keys[k]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roles() -> RoleMap {
        RoleMap {
            covariates: vec!["age".into(), "sex".into()],
            treatment: "a".into(),
            outcome: "y".into(),
            followup: "r".into(),
            ..Default::default()
        }
    }

    const SIX_ROWS: &str = "age,sex,r,a,y\n\
        12,f,1,1,0\n\
        13,m,1,0,1\n\
        14,f,0,,\n\
        15,m,1,1,1\n\
        16,f,1,0,0\n\
        NA,m,1,0,0\n";

    fn load(s: &str, opts: LoadOptions) -> Result<(CausalDataset, LoadReport)> {
        read_csv(s.as_bytes(), None, &roles(), opts)
    }

    #[test]
    fn loads_inline_csv() {
        let (ds, rep) = load(SIX_ROWS, LoadOptions::default()).unwrap();
        assert_eq!(ds.n(), 6);
        assert!(!ds.r()[2]);
        assert_eq!(ds.a()[2], None);
        assert_eq!(ds.y()[2], None);
        assert_eq!(ds.a()[0], Some(true));
        assert!(rep.missing_followup_rows.is_empty());
        assert!(ds.covariate("age").unwrap().missing[5]);
        assert_eq!(
            ds.covariate("sex").unwrap().spec.kind,
            ColumnKind::Categorical { levels: vec!["f".into(), "m".into()] }
        );
    }

    #[test]
    fn strict_mode_rejects_treatment_on_unobserved_row() {
        let csv = "age,sex,r,a,y\n12,f,1,1,0\n13,m,0,1,\n";
        let err = load(csv, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let (ds, rep) = load(csv, LoadOptions { lenient: true, ..Default::default() }).unwrap();
        assert_eq!(ds.a()[1], None);
        assert_eq!(rep.masked_rows, vec![2]);
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let csv = "age,sex,r,a,y\n12,f,1,1,0\nabc,m,1,0,1\n";
        let schema = CovariateSchema::new(vec![
            ColumnSpec { name: "age".into(), kind: ColumnKind::Continuous },
            ColumnSpec { name: "sex".into(), kind: ColumnKind::Categorical { levels: vec!["f".into(), "m".into()] } },
        ])
        .unwrap();
        let err = read_csv(csv.as_bytes(), Some(&schema), &roles(), LoadOptions::default()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "age");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_followup_rows_are_dropped_and_reported() {
        let csv = "age,sex,r,a,y\n12,f,1,1,0\n13,m,,1,1\n14,m,0,,\n";
        let (ds, rep) = load(csv, LoadOptions::default()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(rep.missing_followup_rows, vec![2]);
    }

    #[test]
    fn followup_must_be_binary() {
        let csv = "age,sex,r,a,y\n12,f,2,1,0\n13,m,1,1,0\n";
        assert!(matches!(load(csv, LoadOptions::default()), Err(Error::Parse { .. })));
    }

    #[test]
    fn filters_apply_before_construction() {
        let mut roles = roles();
        roles.filters = vec!["sex=f".parse().unwrap(), "age<16".parse().unwrap()];
        let (ds, rep) = read_csv(SIX_ROWS.as_bytes(), None, &roles, LoadOptions::default()).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(rep.filtered_out, 4);
    }

    #[test]
    fn mean_imputation_with_indicator() {
        let col = Column::numeric("x", ColumnKind::Continuous, vec![Some(1.0), None, Some(3.0)]);
        let ds = CausalDataset::new(
            vec!["1".into(), "2".into(), "3".into()],
            vec![col],
            vec![false; 3],
            vec![None; 3],
            vec![None; 3],
            OutcomeKind::Binary,
        )
        .unwrap();
        let (imp, rep) = impute_covariates(&ds).unwrap();
        let x = imp.covariate("x").unwrap();
        assert_eq!(x.data, ColumnData::Numeric(vec![Some(1.0), Some(2.0), Some(3.0)]));
        let ind = imp.covariate("x_missing").unwrap();
        assert_eq!(ind.data, ColumnData::Numeric(vec![Some(0.0), Some(1.0), Some(0.0)]));
        assert_eq!(rep.indicator_columns, vec!["x_missing".to_string()]);
    }

    #[test]
    fn mode_imputation_for_categorical() {
        let col = Column::categorical("c", vec!["a".into(), "b".into()], vec![Some(0), Some(0), None, Some(1)]);
        let ds = CausalDataset::new(
            (1..=4).map(|i| i.to_string()).collect(),
            vec![col],
            vec![false; 4],
            vec![None; 4],
            vec![None; 4],
            OutcomeKind::Binary,
        )
        .unwrap();
        let (imp, _) = impute_covariates(&ds).unwrap();
        assert_eq!(imp.covariate("c").unwrap().render(2), "a");
        assert!(imp.covariate("c_missing").is_some());
    }

    #[test]
    fn no_missing_is_identity() {
        let (ds, _) = load("age,sex,r,a,y\n12,f,1,1,0\n13,m,1,0,1\n", LoadOptions::default()).unwrap();
        let (imp, rep) = impute_covariates(&ds).unwrap();
        assert_eq!(imp, ds);
        assert!(rep.indicator_columns.is_empty());
    }

    #[test]
    fn entirely_missing_column_errors() {
        let col = Column::numeric("x", ColumnKind::Continuous, vec![None, None]);
        let ds = CausalDataset::new(vec!["1".into(), "2".into()], vec![col], vec![false; 2], vec![None; 2], vec![None; 2], OutcomeKind::Binary).unwrap();
        assert!(impute_covariates(&ds).is_err());
    }

    fn single_col(col: Column) -> CausalDataset {
        let n = col.len();
        CausalDataset::new((1..=n).map(|i| i.to_string()).collect(), vec![col], vec![false; n], vec![None; n], vec![None; n], OutcomeKind::Binary).unwrap()
    }

    #[test]
    fn one_hot_drops_reference_level() {
        let col = Column::categorical("c", vec!["a".into(), "b".into(), "c".into()], vec![Some(0), Some(1), Some(2)]);
        let (enc, _) = encode(&single_col(col)).unwrap();
        let d = enc.design().unwrap();
        assert_eq!(d.ncols(), 2);
        assert_eq!(d.names(), &["c=b".to_string(), "c=c".to_string()]);
        assert_eq!(d.row(0), &[0.0, 0.0]);
        assert_eq!(d.row(2), &[0.0, 1.0]);
    }

    #[test]
    fn two_point_standardization() {
        let (enc, _) = encode(&single_col(Column::numeric("x", ColumnKind::Continuous, vec![Some(0.0), Some(10.0)]))).unwrap();
        assert_eq!(enc.design().unwrap().column(0), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let (enc, rep) = encode(&single_col(Column::numeric("x", ColumnKind::Continuous, vec![Some(4.0); 3]))).unwrap();
        assert_eq!(enc.design().unwrap().column(0), vec![0.0; 3]);
        assert_eq!(rep.constant_columns, vec!["x".to_string()]);
    }

    #[test]
    fn encode_requires_imputation() {
        let (ds, _) = load(SIX_ROWS, LoadOptions::default()).unwrap();
        assert!(encode(&ds).is_err());
        let (imp, _) = impute_covariates(&ds).unwrap();
        let (enc, _) = encode(&imp).unwrap();
        // age, sex=m, age_missing
        assert_eq!(enc.design().unwrap().ncols(), 3);
    }

    #[test]
    fn encoding_is_idempotent_with_stored_params() {
        let (ds, _) = load(SIX_ROWS, LoadOptions::default()).unwrap();
        let (imp, _) = impute_covariates(&ds).unwrap();
        let (enc, _) = encode(&imp).unwrap();
        let again = apply_encoding(&enc, enc.encoding().unwrap()).unwrap();
        assert_eq!(again.design(), enc.design());
    }

    #[test]
    fn age_partition_pools_extremes() {
        let ages = [11.0, 12.0, 13.0, 19.0, 20.0];
        let ds = single_col(Column::numeric("age", ColumnKind::Continuous, ages.iter().map(|&a| Some(a)).collect()));
        let p = partition_by_age(&ds, "age", 12, 19).unwrap();
        assert_eq!(p.labels, vec!["<=12", "13", "14", "15", "16", "17", "18", ">=19"]);
        let got: Vec<&str> = p.assignment.iter().map(|a| p.labels[a.unwrap()].as_str()).collect();
        assert_eq!(got, vec!["<=12", "<=12", "13", ">=19", ">=19"]);
    }

    #[test]
    fn age_partition_excludes_missing() {
        let ds = single_col(Column::numeric("age", ColumnKind::Continuous, vec![Some(14.0), None, Some(15.0)]));
        let (imp, _) = impute_covariates(&ds).unwrap();
        let p = partition_by_age(&imp, "age", 12, 19).unwrap();
        assert_eq!(p.excluded(), vec![1]);
        assert_eq!(p.counts().iter().sum::<usize>(), 2);
    }

    #[test]
    fn constant_age_gives_single_nonempty_group() {
        let ds = single_col(Column::numeric("age", ColumnKind::Continuous, vec![Some(15.0); 4]));
        let p = partition_by_age(&ds, "age", 12, 19).unwrap();
        let nonempty: Vec<_> = p.counts().iter().zip(&p.labels).filter(|(c, _)| **c > 0).map(|(_, l)| l.clone()).collect();
        assert_eq!(nonempty, vec!["15".to_string()]);
        assert_eq!(p.empty_groups().len(), 7);
    }

    #[test]
    fn schema_rejects_duplicates_and_single_level() {
        let dup = vec![
            ColumnSpec { name: "x".into(), kind: ColumnKind::Continuous },
            ColumnSpec { name: "x".into(), kind: ColumnKind::Binary },
        ];
        assert!(CovariateSchema::new(dup).is_err());
        let one = vec![ColumnSpec { name: "c".into(), kind: ColumnKind::Categorical { levels: vec!["a".into()] } }];
        assert!(CovariateSchema::new(one).is_err());
    }

    #[test]
    fn encoding_plan_covers_each_column_once() {
        let s = CovariateSchema::new(vec![
            ColumnSpec { name: "x".into(), kind: ColumnKind::Continuous },
            ColumnSpec { name: "c".into(), kind: ColumnKind::Categorical { levels: vec!["a".into(), "b".into(), "c".into()] } },
        ])
        .unwrap();
        let plan = s.one_hot_map();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].outputs, vec!["c=b", "c=c"]);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(Option<i32>, Option<bool>, bool, bool, bool)>> {
        prop::collection::vec((prop::option::of(-50i32..50), prop::option::of(any::<bool>()), any::<bool>(), any::<bool>(), any::<bool>()), 2..30)
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in arb_rows()) {
            let mut csv = String::from("age,sex,r,a,y\n");
            for (age, sex, r, a, y) in &rows {
                let age = age.map(|v| (v as f64 / 4.0).to_string()).unwrap_or_default();
                let sex = sex.map(|s| if s { "m" } else { "f" }).unwrap_or("NA");
                if *r {
                    csv.push_str(&format!("{age},{sex},1,{},{}\n", *a as u8, *y as u8));
                } else {
                    csv.push_str(&format!("{age},{sex},0,,\n"));
                }
            }
            let schema = CovariateSchema::new(vec![
                ColumnSpec { name: "age".into(), kind: ColumnKind::Continuous },
                ColumnSpec { name: "sex".into(), kind: ColumnKind::Categorical { levels: vec!["f".into(), "m".into()] } },
            ]).unwrap();
            let mut rm = roles();
            rm.id = Some("id".into());
            let (ds, _) = read_csv(csv.as_bytes(), Some(&schema), &roles(), LoadOptions::default()).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf, &rm).unwrap();
            let (back, _) = read_csv(buf.as_slice(), Some(&schema), &rm, LoadOptions::default()).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn imputation_preserves_observed_cells(vals in prop::collection::vec(prop::option::of(-100.0f64..100.0), 2..40)) {
            prop_assume!(vals.iter().any(Option::is_some));
            let ds = single_col(Column::numeric("x", ColumnKind::Continuous, vals.clone()));
            let (imp, _) = impute_covariates(&ds).unwrap();
            let x = imp.covariate("x").unwrap();
            for (i, v) in vals.iter().enumerate() {
                if let Some(v) = v {
                    prop_assert_eq!(x.numeric_value(i), Some(*v));
                }
            }
            if let Some(ind) = imp.covariate("x_missing") {
                for (i, v) in vals.iter().enumerate() {
                    prop_assert_eq!(ind.numeric_value(i) == Some(1.0), v.is_none());
                }
            } else {
                prop_assert!(vals.iter().all(Option::is_some));
            }
        }
    }
}
