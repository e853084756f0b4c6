//! Long-format country-year panels: ingestion, validation and the
//! standardize / shifted-log / lag transforms.
//!
//! The year axis is always contiguous. A year with no rows in the source
//! file exists in the dataset as an all-missing slice, so lags are
//! positional by calendar year.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate key ({country}, {year})")]
    DuplicateKey { country: String, year: i32 },
    #[error("line {row}, column `{column}`: cannot parse `{value}` as a number")]
    UnparseableNumeric { row: u64, column: String, value: String },
    #[error("line {0}: empty country code")]
    EmptyCountry(u64),
    #[error("panel has no data rows")]
    EmptyPanel,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` already exists")]
    DuplicateVariable(String),
    #[error("variable `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("variable `{0}` has fewer than 2 non-missing values")]
    InsufficientData(String),
    #[error("ln argument not positive for `{symbol}` at ({country}, {year})")]
    NonPositiveArgument { symbol: String, country: String, year: i32 },
    #[error("lag {k} is not smaller than the number of years ({n_years})")]
    LagTooLarge { k: usize, n_years: usize },
    #[error("lag order must be positive")]
    ZeroLag,
    #[error("shift must be positive and finite, got {0}")]
    InvalidShift(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    AsIs,
    /// Welfare "bads" that are negated before entering the index.
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub symbol: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source_tag: String,
    #[serde(default)]
    pub polarity: Polarity,
}

impl VariableDef {
    pub fn new(symbol: impl Into<String>) -> Self {
        VariableDef {
            symbol: symbol.into(),
            description: String::new(),
            source_tag: String::new(),
            polarity: Polarity::AsIs,
        }
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }
}

/// One entry of the transform log. `timestamp` is the step's position in
/// the log (a logical clock), keeping emitted artifacts reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub op: String,
    pub vars: Vec<String>,
    pub params: Value,
    pub timestamp: u64,
}

/// Rectangular country × year × variable store.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    countries: Vec<String>,
    years: Vec<i32>,
    variables: Vec<VariableDef>,
    /// One column per variable, indexed `country * n_years + year_offset`.
    columns: Vec<Vec<Option<f64>>>,
    transform_log: Vec<TransformRecord>,
}

impl PanelDataset {
    pub fn new(
        countries: Vec<String>,
        first_year: i32,
        n_years: usize,
        variables: Vec<VariableDef>,
        columns: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, PanelError> {
        check_schema(&variables)?;
        if variables.len() != columns.len() {
            return Err(PanelError::DimensionMismatch(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let cells = countries.len() * n_years;
        if let Some(c) = columns.iter().find(|c| c.len() != cells) {
            return Err(PanelError::DimensionMismatch(format!(
                "column has {} cells, expected {}",
                c.len(),
                cells
            )));
        }
        let unique: BTreeSet<&String> = countries.iter().collect();
        if unique.len() != countries.len() {
            return Err(PanelError::InvalidSchema("country codes must be unique".into()));
        }
        let years = (0..n_years as i32).map(|k| first_year + k).collect();
        Ok(PanelDataset { countries, years, variables, columns, transform_log: Vec::new() })
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.variables
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.symbol.as_str())
    }

    pub fn transform_log(&self) -> &[TransformRecord] {
        &self.transform_log
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn cell(&self, country: usize, year_offset: usize) -> usize {
        country * self.years.len() + year_offset
    }

    pub fn var_index(&self, symbol: &str) -> Result<usize, PanelError> {
        self.variables
            .iter()
            .position(|v| v.symbol == symbol)
            .ok_or_else(|| PanelError::UnknownVariable(symbol.to_string()))
    }

    pub fn has_variable(&self, symbol: &str) -> bool {
        self.variables.iter().any(|v| v.symbol == symbol)
    }

    pub fn column(&self, symbol: &str) -> Result<&[Option<f64>], PanelError> {
        Ok(&self.columns[self.var_index(symbol)?])
    }

    pub fn get(&self, country: usize, year_offset: usize, var: usize) -> Option<f64> {
        self.columns[var][self.cell(country, year_offset)]
    }

    /// Value of `symbol` for a country at a calendar year; `None` outside the year range.
    pub fn value_at(&self, symbol: &str, country: usize, year: i32) -> Result<Option<f64>, PanelError> {
        let v = self.var_index(symbol)?;
        let first = self.years[0];
        if year < first || year > *self.years.last().unwrap() {
            return Ok(None);
        }
        Ok(self.get(country, (year - first) as usize, v))
    }

    /// Missing mask of one variable, same indexing as the column.
    pub fn missing_mask(&self, symbol: &str) -> Result<Vec<bool>, PanelError> {
        Ok(self.column(symbol)?.iter().map(Option::is_none).collect())
    }

    pub fn missing_count(&self) -> usize {
        self.columns.iter().map(|c| c.iter().filter(|v| v.is_none()).count()).sum()
    }

    fn log(&mut self, op: &str, vars: Vec<String>, params: Value) {
        let timestamp = self.transform_log.len() as u64;
        self.transform_log.push(TransformRecord { op: op.to_string(), vars, params, timestamp });
    }

    /// Returns a copy with an extra variable appended.
    pub fn with_variable(&self, def: VariableDef, column: Vec<Option<f64>>) -> Result<Self, PanelError> {
        if def.symbol.is_empty() {
            return Err(PanelError::InvalidSchema("empty symbol".into()));
        }
        if self.has_variable(&def.symbol) {
            return Err(PanelError::DuplicateVariable(def.symbol));
        }
        if column.len() != self.n_countries() * self.n_years() {
            return Err(PanelError::DimensionMismatch(format!(
                "new column has {} cells, expected {}",
                column.len(),
                self.n_countries() * self.n_years()
            )));
        }
        let mut out = self.clone();
        let sym = def.symbol.clone();
        out.variables.push(def);
        out.columns.push(column);
        out.log("add_variable", vec![sym], json!({}));
        Ok(out)
    }

    /// Replaces the values of an existing variable.
    pub fn with_column(&self, symbol: &str, column: Vec<Option<f64>>) -> Result<Self, PanelError> {
        let v = self.var_index(symbol)?;
        if column.len() != self.n_countries() * self.n_years() {
            return Err(PanelError::DimensionMismatch(format!(
                "replacement column has {} cells, expected {}",
                column.len(),
                self.n_countries() * self.n_years()
            )));
        }
        let mut out = self.clone();
        out.columns[v] = column;
        out.log("replace_variable", vec![symbol.to_string()], json!({}));
        Ok(out)
    }

    pub fn transform_log_json(&self) -> String {
        serde_json::to_string_pretty(&self.transform_log).expect("log serializes")
    }
}

fn check_schema(schema: &[VariableDef]) -> Result<(), PanelError> {
    let mut seen = BTreeSet::new();
    for v in schema {
        if v.symbol.is_empty() {
            return Err(PanelError::InvalidSchema("empty symbol".into()));
        }
        if matches!(v.symbol.as_str(), "country" | "year") {
            return Err(PanelError::InvalidSchema(format!("reserved symbol `{}`", v.symbol)));
        }
        if !seen.insert(v.symbol.as_str()) {
            return Err(PanelError::InvalidSchema(format!("duplicate symbol `{}`", v.symbol)));
        }
    }
    Ok(())
}

const MISSING_TOKENS: [&str; 8] = ["", "NA", "N/A", "n/a", "NaN", "nan", "..", "null"];

fn parse_cell(raw: &str, row: u64, column: &str) -> Result<Option<f64>, PanelError> {
    let s = raw.trim();
    if MISSING_TOKENS.contains(&s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(PanelError::UnparseableNumeric { row, column: column.to_string(), value: s.to_string() }),
    }
}

struct Scan {
    dataset: PanelDataset,
    duplicates: Vec<(String, i32)>,
}

fn scan_csv<R: Read>(reader: R, schema: &[VariableDef], strict: bool) -> Result<Scan, PanelError> {
    check_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let country_col = find("country")?;
    let year_col = find("year")?;
    let var_cols = schema.iter().map(|v| find(&v.symbol)).collect::<Result<Vec<_>, _>>()?;

    let mut rows: BTreeMap<(String, i32), Vec<Option<f64>>> = BTreeMap::new();
    let mut duplicates = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 2, |p| p.line());
        let country = rec.get(country_col).unwrap_or("").trim().to_string();
        if country.is_empty() {
            return Err(PanelError::EmptyCountry(line));
        }
        let year_raw = rec.get(year_col).unwrap_or("").trim();
        let year = year_raw.parse::<i32>().map_err(|_| PanelError::UnparseableNumeric {
            row: line,
            column: "year".into(),
            value: year_raw.to_string(),
        })?;
        let values = schema
            .iter()
            .zip(&var_cols)
            .map(|(v, &c)| parse_cell(rec.get(c).unwrap_or(""), line, &v.symbol))
            .collect::<Result<Vec<_>, _>>()?;
        let key = (country, year);
        if rows.contains_key(&key) {
            if strict {
                return Err(PanelError::DuplicateKey { country: key.0, year: key.1 });
            }
            duplicates.push(key);
            continue;
        }
        rows.insert(key, values);
    }
    if rows.is_empty() {
        return Err(PanelError::EmptyPanel);
    }

    let countries: Vec<String> = rows.keys().map(|(c, _)| c.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let min_year = rows.keys().map(|(_, y)| *y).min().unwrap();
    let max_year = rows.keys().map(|(_, y)| *y).max().unwrap();
    let n_years = (max_year - min_year + 1) as usize;
    let cidx: HashMap<&str, usize> = countries.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut columns = vec![vec![None; countries.len() * n_years]; schema.len()];
    for ((c, y), vals) in &rows {
        let cell = cidx[c.as_str()] * n_years + (y - min_year) as usize;
        for (col, v) in columns.iter_mut().zip(vals) {
            col[cell] = *v;
        }
    }
    let dataset = PanelDataset::new(countries, min_year, n_years, schema.to_vec(), columns)?;
    Ok(Scan { dataset, duplicates })
}

/// Reads a long-format panel; duplicate (country, year) keys are an error.
pub fn read_panel_csv<R: Read>(reader: R, schema: &[VariableDef]) -> Result<PanelDataset, PanelError> {
    Ok(scan_csv(reader, schema, true)?.dataset)
}

pub fn load_panel_csv(path: impl AsRef<Path>, schema: &[VariableDef]) -> Result<PanelDataset, PanelError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| PanelError::Io { path: path.display().to_string(), source })?;
    read_panel_csv(std::io::BufReader::new(file), schema)
}

/// Writes every cell of the rectangular panel; missing cells are empty.
pub fn write_panel_csv<W: Write>(ds: &PanelDataset, writer: W) -> Result<(), PanelError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["country".to_string(), "year".to_string()];
    header.extend(ds.symbols().map(str::to_string));
    w.write_record(&header)?;
    for (c, country) in ds.countries.iter().enumerate() {
        for (t, year) in ds.years.iter().enumerate() {
            let mut rec = vec![country.clone(), year.to_string()];
            for col in &ds.columns {
                rec.push(col[ds.cell(c, t)].map_or_else(String::new, |v| format!("{v:?}")));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|source| PanelError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCoverage {
    pub symbol: String,
    pub missing: usize,
    pub coverage: f64,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub variables: Vec<VariableCoverage>,
    pub duplicate_keys: Vec<(String, i32)>,
    pub defects: Vec<String>,
    pub pass: bool,
}

pub fn validate(ds: &PanelDataset) -> ValidationReport {
    build_report(ds, Vec::new())
}

/// Reads a CSV leniently (first occurrence of a duplicated key wins) and
/// validates it, so duplicate keys are reported instead of aborting the read.
pub fn validate_csv<R: Read>(reader: R, schema: &[VariableDef]) -> Result<ValidationReport, PanelError> {
    let scan = scan_csv(reader, schema, false)?;
    Ok(build_report(&scan.dataset, scan.duplicates))
}

fn build_report(ds: &PanelDataset, duplicate_keys: Vec<(String, i32)>) -> ValidationReport {
    let cells = ds.n_countries() * ds.n_years();
    let mut defects = Vec::new();
    let mut variables = Vec::new();
    for (def, col) in ds.variables.iter().zip(&ds.columns) {
        let present: Vec<f64> = col.iter().flatten().copied().collect();
        let missing = cells - present.len();
        let coverage = if cells == 0 { 0.0 } else { present.len() as f64 / cells as f64 };
        let constant = present.windows(2).all(|w| w[0] == w[1]);
        if present.is_empty() {
            defects.push(format!("variable `{}` has no observations", def.symbol));
        } else if constant {
            defects.push(format!("variable `{}` is constant (zero variance)", def.symbol));
        }
        variables.push(VariableCoverage { symbol: def.symbol.clone(), missing, coverage, constant });
    }
    for (c, y) in &duplicate_keys {
        defects.push(format!("duplicate key ({c}, {y})"));
    }
    let pass = defects.is_empty();
    ValidationReport { variables, duplicate_keys, defects, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    None,
    LinearInterior,
}

pub fn fill_gaps(ds: &PanelDataset, policy: GapPolicy) -> PanelDataset {
    let mut out = ds.clone();
    let n_years = ds.n_years();
    let mut filled = 0usize;
    if policy == GapPolicy::LinearInterior {
        for col in &mut out.columns {
            for c in 0..ds.n_countries() {
                let series = &mut col[c * n_years..(c + 1) * n_years];
                let known: Vec<usize> = (0..n_years).filter(|&t| series[t].is_some()).collect();
                for w in known.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (va, vb) = (series[a].unwrap(), series[b].unwrap());
                    for t in (a + 1)..b {
                        let frac = (t - a) as f64 / (b - a) as f64;
                        series[t] = Some(va + frac * (vb - va));
                        filled += 1;
                    }
                }
            }
        }
    }
    let vars = ds.symbols().map(str::to_string).collect();
    out.log("fill_gaps", vars, json!({ "policy": policy, "filled_cells": filled }));
    out
}

/// Negates every variable marked `Inverted`.
pub fn apply_polarity(ds: &PanelDataset, vars: &[String]) -> Result<PanelDataset, PanelError> {
    let mut out = ds.clone();
    let mut touched = Vec::new();
    for sym in vars {
        let v = ds.var_index(sym)?;
        if ds.variables[v].polarity == Polarity::Inverted {
            for x in out.columns[v].iter_mut().flatten() {
                *x = -*x;
            }
            touched.push(sym.clone());
        }
    }
    out.log("apply_polarity", touched, json!({ "multiplier": -1.0 }));
    Ok(out)
}

/// Marks a cell missing on every listed variable unless all of them are present there.
pub fn listwise_complete(ds: &PanelDataset, vars: &[String]) -> Result<PanelDataset, PanelError> {
    let idx = vars.iter().map(|s| ds.var_index(s)).collect::<Result<Vec<_>, _>>()?;
    let mut out = ds.clone();
    let mut dropped = 0usize;
    for cell in 0..ds.n_countries() * ds.n_years() {
        if idx.iter().any(|&v| ds.columns[v][cell].is_none()) {
            if idx.iter().any(|&v| ds.columns[v][cell].is_some()) {
                dropped += 1;
            }
            for &v in &idx {
                out.columns[v][cell] = None;
            }
        }
    }
    out.log("listwise_complete", vars.to_vec(), json!({ "cells_cleared": dropped }));
    Ok(out)
}

/// Pooled standardization (all countries and years) with the n−1 denominator.
pub fn zscore(ds: &PanelDataset, vars: &[String]) -> Result<PanelDataset, PanelError> {
    let mut out = ds.clone();
    let mut means = serde_json::Map::new();
    let mut sds = serde_json::Map::new();
    for sym in vars {
        let v = ds.var_index(sym)?;
        let present: Vec<f64> = ds.columns[v].iter().flatten().copied().collect();
        if present.len() < 2 {
            return Err(PanelError::InsufficientData(sym.clone()));
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let var = present.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(PanelError::ZeroVariance(sym.clone()));
        }
        for x in out.columns[v].iter_mut().flatten() {
            *x = (*x - mean) / sd;
        }
        means.insert(sym.clone(), json!(mean));
        sds.insert(sym.clone(), json!(sd));
    }
    out.log("zscore", vars.to_vec(), json!({ "mean": means, "sd": sds, "ddof": 1 }));
    Ok(out)
}

pub const DEFAULT_SHIFT: f64 = 4.0;

/// x ↦ ln(x + shift).
pub fn shift_log(ds: &PanelDataset, vars: &[String], shift: f64) -> Result<PanelDataset, PanelError> {
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(PanelError::InvalidShift(shift));
    }
    let mut out = ds.clone();
    for sym in vars {
        let v = ds.var_index(sym)?;
        for c in 0..ds.n_countries() {
            for t in 0..ds.n_years() {
                let cell = ds.cell(c, t);
                if let Some(x) = ds.columns[v][cell] {
                    let arg = x + shift;
                    if !(arg > 0.0) {
                        return Err(PanelError::NonPositiveArgument {
                            symbol: sym.clone(),
                            country: ds.countries[c].clone(),
                            year: ds.years[t],
                        });
                    }
                    out.columns[v][cell] = Some(arg.ln());
                }
            }
        }
    }
    out.log("shift_log", vars.to_vec(), json!({ "shift": shift }));
    Ok(out)
}

pub fn lag_symbol(symbol: &str, k: usize) -> String {
    format!("{symbol}_L{k}")
}

/// Appends `<var>_L<k>` holding the value k calendar years earlier.
pub fn lag(ds: &PanelDataset, var: &str, k: usize) -> Result<PanelDataset, PanelError> {
    let v = ds.var_index(var)?;
    if k == 0 {
        return Err(PanelError::ZeroLag);
    }
    if k >= ds.n_years() {
        return Err(PanelError::LagTooLarge { k, n_years: ds.n_years() });
    }
    let n_years = ds.n_years();
    let mut col = vec![None; ds.n_countries() * n_years];
    for c in 0..ds.n_countries() {
        for t in k..n_years {
            col[c * n_years + t] = ds.columns[v][c * n_years + t - k];
        }
    }
    let mut def = ds.variables[v].clone();
    def.symbol = lag_symbol(var, k);
    def.description = format!("lag {k} of {var}");
    let mut out = ds.with_variable(def, col)?;
    out.transform_log.pop();
    out.log("lag", vec![var.to_string()], json!({ "k": k }));
    Ok(out)
}
