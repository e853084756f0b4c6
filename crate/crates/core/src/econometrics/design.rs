use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Effects, EconometricsError, GmmModelSpec};
use crate::numerics::{sym_eigen, SymMatrix};
use crate::paneldata::PanelDataset;

/// Condition number of the column-equilibrated X'X above which regressors count as collinear.
pub const COLLINEARITY_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Regressor,
    LaggedDependent,
    Intercept,
    TimeDummy,
}

/// Estimation rows after lagging and the effects transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    /// (country, year) of every row, sorted by country then year.
    pub keys: Vec<(String, i32)>,
    /// Cluster (country) id per row, contiguous.
    pub cluster: Vec<usize>,
    pub n_countries: usize,
    pub effects: Effects,
    pub notes: Vec<String>,
}

impl Design {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    pub fn lagged_dependent_col(&self) -> Option<usize> {
        self.kinds.iter().position(|k| *k == ColumnKind::LaggedDependent)
    }

    /// Builds a design straight from arrays; each row is its own cluster unless `cluster` is given.
    pub fn from_arrays(y: DVector<f64>, x: DMatrix<f64>, cluster: Option<Vec<usize>>) -> Self {
        let n = y.len();
        let cluster = cluster.unwrap_or_else(|| (0..n).collect());
        let n_countries = cluster.iter().collect::<BTreeSet<_>>().len();
        Design {
            names: (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect(),
            kinds: vec![ColumnKind::Regressor; x.ncols()],
            keys: cluster.iter().enumerate().map(|(i, c)| (format!("G{c}"), i as i32)).collect(),
            y,
            x,
            cluster,
            n_countries,
            effects: Effects::None,
            notes: Vec::new(),
        }
    }
}

struct Resolved {
    dep: usize,
    terms: Vec<(String, Vec<usize>)>,
}

fn resolve(ds: &PanelDataset, spec: &GmmModelSpec) -> Result<Resolved, EconometricsError> {
    let dep = ds.var_index(&spec.dependent)?;
    let terms = spec
        .regressors()
        .iter()
        .map(|r| {
            let idx = r.symbols().iter().map(|s| ds.var_index(s)).collect::<Result<Vec<_>, _>>()?;
            Ok((r.to_string(), idx))
        })
        .collect::<Result<Vec<_>, EconometricsError>>()?;
    Ok(Resolved { dep, terms })
}

/// Level value of a term (product for interactions) at a year offset that may fall outside the panel.
fn term_level(ds: &PanelDataset, vars: &[usize], c: usize, t: isize) -> Option<f64> {
    if t < 0 || t as usize >= ds.n_years() {
        return None;
    }
    vars.iter().try_fold(1.0, |acc, &v| ds.get(c, t as usize, v).map(|x| acc * x))
}

/// Level row at (c, t): dependent plus regressor values in column order, when all are present.
fn level_row(ds: &PanelDataset, spec: &GmmModelSpec, r: &Resolved, c: usize, t: isize) -> Option<(f64, Vec<f64>)> {
    let y = term_level(ds, &[r.dep], c, t)?;
    let mut row = Vec::with_capacity(r.terms.len() + 1);
    for (_, vars) in &r.terms {
        row.push(term_level(ds, vars, c, t)?);
    }
    if spec.lag_dependent {
        row.push(term_level(ds, &[r.dep], c, t - 1)?);
    }
    Some((y, row))
}

struct Row {
    country: usize,
    year: i32,
    y: f64,
    x: Vec<f64>,
}

/// Assembles `y`, `X` and row keys for a model spec.
///
/// Interaction terms are formed from the dataset's level values and then
/// pass through the effects transformation like any other column.
pub fn build_design(ds: &PanelDataset, spec: &GmmModelSpec) -> Result<Design, EconometricsError> {
    spec.check()?;
    let resolved = resolve(ds, spec)?;
    let mut names: Vec<String> = resolved.terms.iter().map(|(n, _)| n.clone()).collect();
    let mut kinds = vec![ColumnKind::Regressor; names.len()];
    if spec.lag_dependent {
        names.push(spec.lagged_dependent_name());
        kinds.push(ColumnKind::LaggedDependent);
    }
    let mut notes = Vec::new();

    let mut rows: Vec<Row> = Vec::new();
    for c in 0..ds.n_countries() {
        let mut country_rows = Vec::new();
        for t in 0..ds.n_years() as isize {
            let year = ds.years()[t as usize];
            let Some((y, x)) = level_row(ds, spec, &resolved, c, t) else { continue };
            match spec.effects {
                Effects::FirstDifferencePlusTime => {
                    if let Some((y0, x0)) = level_row(ds, spec, &resolved, c, t - 1) {
                        let dx = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
                        country_rows.push(Row { country: c, year, y: y - y0, x: dx });
                    }
                }
                _ => country_rows.push(Row { country: c, year, y, x }),
            }
        }
        if spec.effects == Effects::EntityDemeanedPlusTime && country_rows.len() == 1 {
            notes.push(format!("country {} dropped: single row under entity demeaning", ds.countries()[c]));
            continue;
        }
        rows.extend(country_rows);
    }
    if rows.is_empty() {
        return Err(EconometricsError::EmptyDesign);
    }

    let with_intercept = spec.intercept && spec.effects != Effects::EntityDemeanedPlusTime;
    if spec.intercept && !with_intercept {
        notes.push("intercept absorbed by entity demeaning".into());
    }
    if spec.intercept && spec.effects == Effects::FirstDifferencePlusTime {
        notes.push("C is the constant of the differenced equation (a levels trend); levels intercept is differenced out".into());
    }
    let years: Vec<i32> = if spec.effects.has_time_dummies() {
        let all: BTreeSet<i32> = rows.iter().map(|r| r.year).collect();
        let drop_first = with_intercept || spec.effects == Effects::EntityDemeanedPlusTime;
        all.into_iter().skip(usize::from(drop_first)).collect()
    } else {
        Vec::new()
    };
    if with_intercept {
        names.push("C".into());
        kinds.push(ColumnKind::Intercept);
    }
    for y in &years {
        names.push(format!("yr{y}"));
        kinds.push(ColumnKind::TimeDummy);
    }

    let n = rows.len();
    let k = names.len();
    let base = resolved.terms.len() + usize::from(spec.lag_dependent);
    let mut x = DMatrix::<f64>::zeros(n, k);
    let mut y = DVector::<f64>::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        y[i] = r.y;
        for j in 0..base {
            x[(i, j)] = r.x[j];
        }
        let mut j = base;
        if with_intercept {
            x[(i, j)] = 1.0;
            j += 1;
        }
        if let Some(pos) = years.iter().position(|&yr| yr == r.year) {
            x[(i, j + pos)] = 1.0;
        }
    }

    let mut cluster = Vec::with_capacity(n);
    let mut country_ids: Vec<usize> = Vec::new();
    for r in &rows {
        if country_ids.last() != Some(&r.country) {
            country_ids.push(r.country);
        }
        cluster.push(country_ids.len() - 1);
    }

    if spec.effects == Effects::EntityDemeanedPlusTime {
        let mut start = 0;
        while start < n {
            let mut end = start;
            while end < n && cluster[end] == cluster[start] {
                end += 1;
            }
            let len = (end - start) as f64;
            let my = y.rows(start, end - start).sum() / len;
            y.rows_mut(start, end - start).add_scalar_mut(-my);
            for j in 0..k {
                let mut col = x.view_mut((start, j), (end - start, 1));
                let m = col.sum() / len;
                col.add_scalar_mut(-m);
            }
            start = end;
        }
    }

    check_collinearity(&x, &names)?;
    let keys = rows.iter().map(|r| (ds.countries()[r.country].clone(), r.year)).collect();
    Ok(Design { y, x, names, kinds, keys, cluster, n_countries: country_ids.len(), effects: spec.effects, notes })
}

fn check_collinearity(x: &DMatrix<f64>, names: &[String]) -> Result<(), EconometricsError> {
    let k = x.ncols();
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let zero: Vec<String> = norms.iter().zip(names).filter(|(n, _)| **n == 0.0).map(|(_, s)| s.clone()).collect();
    if !zero.is_empty() {
        return Err(EconometricsError::CollinearColumns { condition: f64::INFINITY, columns: zero });
    }
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col.scale_mut(1.0 / norms[j]);
    }
    let xtx = SymMatrix::new(scaled.transpose() * &scaled)?;
    let eig = sym_eigen(&xtx)?;
    let max = eig.values[0];
    let min = eig.values[k - 1];
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > COLLINEARITY_THRESHOLD {
        let v = eig.vector(k - 1);
        let columns = names.iter().zip(v.iter()).filter(|(_, c)| c.abs() > 0.1).map(|(n, _)| n.clone()).collect();
        return Err(EconometricsError::CollinearColumns { condition, columns });
    }
    Ok(())
}
