//! Study samples and ingestion from delimited text.
//!
//! A [`Dataset`] is a [`Design`] (covariates plus treatment arms) together
//! with an outcome vector. Anything that must not look at outcomes, such as
//! balance diagnostics and propensity fitting, takes a `&Design`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeFamily {
    Continuous,
    Binary,
}

/// Covariates and treatment assignment, without outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    covariates: DMatrix<f64>,
    covariate_names: Vec<String>,
    treatment: Vec<usize>,
    arms: usize,
    arm_labels: Vec<String>,
}

impl Design {
    /// Builds a design and checks its invariants. `arm_labels` defaults to
    /// `"0".."K-1"` when empty.
    pub fn new(
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
        treatment: Vec<usize>,
        arms: usize,
        arm_labels: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        let p = covariates.ncols();
        if covariate_names.len() != p {
            return Err(Error::Domain(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                p
            )));
        }
        if treatment.len() != n {
            return Err(Error::Domain(format!(
                "treatment has length {} but there are {} units",
                treatment.len(),
                n
            )));
        }
        if arms < 2 {
            return Err(Error::Domain(format!("need at least 2 arms, got {arms}")));
        }
        let arm_labels = if arm_labels.is_empty() {
            (0..arms).map(|k| k.to_string()).collect()
        } else {
            arm_labels
        };
        if arm_labels.len() != arms {
            return Err(Error::Domain(format!(
                "{} arm labels for {} arms",
                arm_labels.len(),
                arms
            )));
        }
        let mut counts = vec![0usize; arms];
        for &z in &treatment {
            if z >= arms {
                return Err(Error::Domain(format!("arm code {z} out of range 0..{arms}")));
            }
            counts[z] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Domain(format!("arm {k} empty")));
        }
        if n < p + 2 {
            return Err(Error::Domain(format!(
                "need n >= p + 2, got n = {n}, p = {p}"
            )));
        }
        if let Some(pos) = covariates.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % n, pos / n);
            return Err(Error::Domain(format!(
                "non-finite covariate value at unit {row}, covariate `{}`",
                covariate_names[col]
            )));
        }
        Ok(Self {
            covariates,
            covariate_names,
            treatment,
            arms,
            arm_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treatment(&self) -> &[usize] {
        &self.treatment
    }

    /// Raw treatment label for each arm code.
    pub fn arm_labels(&self) -> &[String] {
        &self.arm_labels
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.arms];
        for &z in &self.treatment {
            counts[z] += 1;
        }
        counts
    }

    /// Subsample (with repetition) by unit indices. Fails if an arm ends up
    /// empty or the sample is too small.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let covariates = self.covariates.select_rows(rows.iter());
        let treatment = rows.iter().map(|&i| self.treatment[i]).collect();
        Self::new(
            covariates,
            self.covariate_names.clone(),
            treatment,
            self.arms,
            self.arm_labels.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    design: Design,
    outcome: Vec<f64>,
    family: OutcomeFamily,
}

impl Dataset {
    pub fn new(design: Design, outcome: Vec<f64>, family: OutcomeFamily) -> Result<Self> {
        if outcome.len() != design.n() {
            return Err(Error::Domain(format!(
                "outcome has length {} but there are {} units",
                outcome.len(),
                design.n()
            )));
        }
        if let Some(i) = outcome.iter().position(|y| !y.is_finite()) {
            return Err(Error::Domain(format!("non-finite outcome at unit {i}")));
        }
        if family == OutcomeFamily::Binary {
            if let Some(i) = outcome.iter().position(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::Domain(format!(
                    "binary outcome must be 0 or 1, unit {i} has {}",
                    outcome[i]
                )));
            }
        }
        Ok(Self {
            design,
            outcome,
            family,
        })
    }

    /// Convenience constructor for in-memory samples with arm labels `0..K-1`.
    pub fn from_parts(
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
        treatment: Vec<usize>,
        arms: usize,
        outcome: Vec<f64>,
        family: OutcomeFamily,
    ) -> Result<Self> {
        let design = Design::new(covariates, covariate_names, treatment, arms, Vec::new())?;
        Self::new(design, outcome, family)
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn family(&self) -> OutcomeFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn arms(&self) -> usize {
        self.design.arms()
    }

    pub fn treatment(&self) -> &[usize] {
        self.design.treatment()
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        self.design.covariates()
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let design = self.design.select(rows)?;
        let outcome = rows.iter().map(|&i| self.outcome[i]).collect();
        Self::new(design, outcome, self.family)
    }

    /// Copy with a different outcome vector (same family checks apply).
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Self::new(self.design.clone(), outcome, self.family)
    }

    /// Writes the sample as CSV: covariate columns, then `treatment` (raw
    /// arm labels), then `outcome`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self
            .design
            .covariate_names
            .iter()
            .map(String::as_str)
            .collect();
        header.push("treatment");
        header.push("outcome");
        out.write_record(&header)?;
        let x = self.covariates();
        for i in 0..self.n() {
            let mut record: Vec<String> = (0..self.p()).map(|j| format_real(x[(i, j)])).collect();
            record.push(self.design.arm_labels[self.treatment()[i]].clone());
            record.push(format_real(self.outcome[i]));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest round-trippable text form of a float.
pub(crate) fn format_real(v: f64) -> String {
    format!("{v:?}")
}

/// Column roles for ingesting a delimited file.
///
/// Read from TOML:
///
/// ```toml
/// treatment_col = "z"
/// outcome_col = "y"
/// covariate_cols = ["age", "sex", "site"]
/// categorical_cols = ["site"]
/// outcome_family = "continuous"   # or "binary"
/// # optional: explicit treatment levels in arm order
/// # treatment_levels = ["control", "drug"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub treatment_col: String,
    #[serde(default)]
    pub outcome_col: Option<String>,
    pub covariate_cols: Vec<String>,
    #[serde(default = "default_family")]
    pub outcome_family: OutcomeFamily,
    #[serde(default)]
    pub categorical_cols: Vec<String>,
    #[serde(default)]
    pub treatment_levels: Option<Vec<String>>,
}

fn default_family() -> OutcomeFamily {
    OutcomeFamily::Continuous
}

impl IngestConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl RawTable {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Non-empty cell or an ingestion error. Rows are reported 1-based,
    /// counting data rows only.
    fn cell(&self, row: usize, col: usize) -> Result<&str> {
        let value = self.rows[row].get(col).map(String::as_str).unwrap_or("");
        if value.is_empty() {
            return Err(Error::Ingestion {
                row: row + 1,
                column: self.headers[col].clone(),
                reason: "empty cell".into(),
            });
        }
        Ok(value)
    }

    fn real(&self, row: usize, col: usize) -> Result<f64> {
        let text = self.cell(row, col)?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Ingestion {
                row: row + 1,
                column: self.headers[col].clone(),
                reason: format!("cannot parse `{text}` as a finite number"),
            }),
        }
    }
}

/// Maps raw treatment labels to arm codes. Integer labels map to themselves
/// (so a missing code shows up as an empty arm); other labels are coded by
/// sorted order.
fn code_treatment(
    raw: &[&str],
    levels: Option<&[String]>,
    column: &str,
) -> Result<(Vec<usize>, Vec<String>)> {
    if let Some(levels) = levels {
        let codes = raw
            .iter()
            .enumerate()
            .map(|(i, v)| {
                levels.iter().position(|l| l == v).ok_or_else(|| Error::Ingestion {
                    row: i + 1,
                    column: column.to_string(),
                    reason: format!("label `{v}` not among treatment_levels"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((codes, levels.to_vec()));
    }
    let integer: Option<Vec<usize>> = raw.iter().map(|v| v.parse::<usize>().ok()).collect();
    if let Some(codes) = integer {
        let arms = codes.iter().copied().max().unwrap_or(0) + 1;
        let arms = arms.max(2);
        return Ok((codes, (0..arms).map(|k| k.to_string()).collect()));
    }
    let distinct: Vec<String> = raw
        .iter()
        .map(|v| v.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = distinct
        .iter()
        .enumerate()
        .map(|(k, v)| (v.as_str(), k))
        .collect();
    let codes = raw.iter().map(|v| index[v]).collect();
    Ok((codes, distinct))
}

fn build_design(table: &RawTable, config: &IngestConfig) -> Result<Design> {
    for c in &config.categorical_cols {
        if !config.covariate_cols.contains(c) {
            return Err(Error::Schema(format!(
                "categorical column `{c}` is not listed in covariate_cols"
            )));
        }
    }
    let n = table.rows.len();
    let z_col = table.column(&config.treatment_col)?;
    let cov_cols = config
        .covariate_cols
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (name, &col) in config.covariate_cols.iter().zip(&cov_cols) {
        if config.categorical_cols.contains(name) {
            let values = (0..n)
                .map(|i| table.cell(i, col))
                .collect::<Result<Vec<_>>>()?;
            let levels: BTreeSet<&str> = values.iter().copied().collect();
            // First (smallest) level is the reference and gets no column.
            for level in levels.iter().skip(1) {
                names.push(format!("{name}={level}"));
                columns.push(
                    values
                        .iter()
                        .map(|v| if v == level { 1.0 } else { 0.0 })
                        .collect(),
                );
            }
        } else {
            names.push(name.clone());
            columns.push((0..n).map(|i| table.real(i, col)).collect::<Result<_>>()?);
        }
    }
    let p = columns.len();
    let covariates = DMatrix::from_fn(n, p, |i, j| columns[j][i]);

    let raw_z = (0..n)
        .map(|i| table.cell(i, z_col))
        .collect::<Result<Vec<_>>>()?;
    let (treatment, labels) = code_treatment(&raw_z, config.treatment_levels.as_deref(), &config.treatment_col)?;
    let arms = labels.len();
    if arms < 2 {
        return Err(Error::Domain(format!(
            "only one treatment arm (`{}`) present",
            labels.first().map(String::as_str).unwrap_or("")
        )));
    }
    Design::new(covariates, names, treatment, arms, labels)
}

/// Reads covariates and treatment only. The outcome column is never
/// touched and may be absent from the file.
pub fn ingest_design_from_reader<R: Read>(reader: R, config: &IngestConfig) -> Result<Design> {
    let table = RawTable::read(reader)?;
    build_design(&table, config)
}

pub fn ingest_design(path: impl AsRef<Path>, config: &IngestConfig) -> Result<Design> {
    ingest_design_from_reader(std::fs::File::open(path)?, config)
}

pub fn ingest_from_reader<R: Read>(reader: R, config: &IngestConfig) -> Result<Dataset> {
    let table = RawTable::read(reader)?;
    let outcome_name = config
        .outcome_col
        .as_deref()
        .ok_or_else(|| Error::Schema("outcome_col is required".into()))?;
    let y_col = table.column(outcome_name)?;
    let design = build_design(&table, config)?;
    let outcome = (0..table.rows.len())
        .map(|i| table.real(i, y_col))
        .collect::<Result<Vec<_>>>()?;
    if config.outcome_family == OutcomeFamily::Binary {
        if let Some(i) = outcome.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Ingestion {
                row: i + 1,
                column: outcome_name.to_string(),
                reason: "binary outcome must be 0 or 1".into(),
            });
        }
    }
    Dataset::new(design, outcome, config.outcome_family)
}

/// Reads a delimited file with a header row into a [`Dataset`].
pub fn ingest(path: impl AsRef<Path>, config: &IngestConfig) -> Result<Dataset> {
    ingest_from_reader(std::fs::File::open(path)?, config)
}
