//! Aggregation of retained component scores into a country-year composite index.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    bartlett, kmo, pca_fit, scores, BartlettResult, KmoResult, MultivariateError, PcaModel, Retention,
};
use crate::paneldata::{self, PanelDataset, PanelError, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// λ_k / Σ_retained λ.
    #[default]
    VarianceShare,
    FirstComponent,
    Equal,
}

/// Weights over components given each component's variance; always sums to 1.
pub fn component_weights(variances: &[f64], weighting: Weighting) -> Vec<f64> {
    let m = variances.len();
    match weighting {
        Weighting::VarianceShare => {
            let total: f64 = variances.iter().sum();
            variances.iter().map(|v| v / total).collect()
        }
        Weighting::FirstComponent => (0..m).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
        Weighting::Equal => vec![1.0 / m as f64; m],
    }
}

/// Row-wise weighted sum of score columns.
pub fn aggregate(scores: &DMatrix<f64>, weights: &[f64]) -> Result<Vec<f64>, MultivariateError> {
    if scores.ncols() != weights.len() {
        return Err(MultivariateError::DimensionMismatch { expected: weights.len(), actual: scores.ncols() });
    }
    Ok(scores.row_iter().map(|r| r.iter().zip(weights).map(|(s, w)| s * w).sum()).collect())
}

/// Index values and the weights used, for scores over the model's retained components.
pub fn build_index(
    scores: &DMatrix<f64>,
    model: &PcaModel,
    weighting: Weighting,
    rotated: bool,
) -> Result<(Vec<f64>, Vec<f64>), MultivariateError> {
    if scores.ncols() != model.retained {
        return Err(MultivariateError::DimensionMismatch { expected: model.retained, actual: scores.ncols() });
    }
    let variances: Vec<f64> = if rotated {
        let rot = model.rotated_loadings().ok_or(MultivariateError::NotRotated)?;
        rot.column_iter().map(|c| c.norm_squared()).collect()
    } else {
        model.retained_eigenvalues().to_vec()
    };
    let weights = component_weights(&variances, weighting);
    Ok((aggregate(scores, &weights)?, weights))
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Negates `values` in place when they correlate negatively with `anchor`.
/// Returns the correlation before orientation and whether a flip happened.
pub fn orient_to_anchor(values: &mut [f64], anchor: &[Option<f64>]) -> (Option<f64>, bool) {
    let pairs: Vec<(f64, f64)> =
        values.iter().zip(anchor).filter_map(|(&v, a)| a.map(|a| (v, a))).collect();
    let corr = pearson(&pairs);
    let flip = corr.is_some_and(|c| c < 0.0);
    if flip {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    (corr, flip)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexOptions {
    pub name: String,
    pub indicators: Vec<String>,
    pub retention: Retention,
    pub rotate: bool,
    pub use_rotated_scores: bool,
    pub weighting: Weighting,
    pub anchor: Option<String>,
    pub kmo_ridge: Option<f64>,
}

impl IndexOptions {
    pub fn new(indicators: Vec<String>) -> Self {
        IndexOptions {
            name: "INCL".into(),
            indicators,
            retention: Retention::Kaiser,
            rotate: true,
            use_rotated_scores: false,
            weighting: Weighting::VarianceShare,
            anchor: Some("LFE".into()),
            kmo_ridge: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMetadata {
    pub name: String,
    pub retained: usize,
    pub component_variances: Vec<f64>,
    pub weights: Vec<f64>,
    pub weighting: Weighting,
    pub rotation_applied: bool,
    pub rotated_scores: bool,
    pub polarity: BTreeMap<String, Polarity>,
    pub anchor: Option<String>,
    pub anchor_correlation: Option<f64>,
    pub negated: bool,
    pub n_obs: usize,
    pub n_incomplete_cells: usize,
}

/// Index value per country-year; a cell is present iff every indicator was present there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub countries: Vec<String>,
    pub years: Vec<i32>,
    pub values: Vec<Option<f64>>,
    pub metadata: IndexMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryAverage {
    pub country: String,
    pub average: f64,
    pub years_observed: usize,
}

impl IndexSeries {
    pub fn get(&self, country: usize, year_offset: usize) -> Option<f64> {
        self.values[country * self.years.len() + year_offset]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "year", "inclusiveness"])?;
        for (c, country) in self.countries.iter().enumerate() {
            for (t, year) in self.years.iter().enumerate() {
                let v = self.get(c, t).map_or_else(String::new, |v| format!("{v:?}"));
                w.write_record([country.as_str(), &year.to_string(), &v])?;
            }
        }
        w.flush().map_err(|source| PanelError::Io { path: "<writer>".into(), source })?;
        Ok(())
    }
}

/// Per-country time averages, highest first (ties by country code).
pub fn country_averages(series: &IndexSeries) -> Vec<CountryAverage> {
    let n_years = series.years.len();
    let mut out: Vec<CountryAverage> = series
        .countries
        .iter()
        .enumerate()
        .filter_map(|(c, country)| {
            let vals: Vec<f64> = (0..n_years).filter_map(|t| series.get(c, t)).collect();
            (!vals.is_empty()).then(|| CountryAverage {
                country: country.clone(),
                average: vals.iter().sum::<f64>() / vals.len() as f64,
                years_observed: vals.len(),
            })
        })
        .collect();
    out.sort_by(|a, b| b.average.partial_cmp(&a.average).unwrap().then_with(|| a.country.cmp(&b.country)));
    out
}

#[derive(Debug, Clone)]
pub struct IndexConstruction {
    pub model: PcaModel,
    pub kmo: KmoResult,
    pub bartlett: BartlettResult,
    pub series: IndexSeries,
    /// Indicator block after polarity, listwise deletion and standardization.
    pub prepared: PanelDataset,
}

/// Polarity → listwise deletion → pooled z-score → PCA → scores → weighted
/// index → anchor orientation.
pub fn construct_index(ds: &PanelDataset, opts: &IndexOptions) -> Result<IndexConstruction, MultivariateError> {
    let vars = &opts.indicators;
    if vars.len() < 2 {
        return Err(MultivariateError::InvalidOption("need at least 2 indicators".into()));
    }
    let anchor_idx = match &opts.anchor {
        Some(a) => Some(ds.var_index(a).map_err(|_| MultivariateError::UnknownAnchor(a.clone()))?),
        None => None,
    };
    let polarized = paneldata::apply_polarity(ds, vars)?;
    let complete = paneldata::listwise_complete(&polarized, vars)?;
    let prepared = paneldata::zscore(&complete, vars)?;

    let idx = vars.iter().map(|s| prepared.var_index(s)).collect::<Result<Vec<_>, _>>()?;
    let n_cells = ds.n_countries() * ds.n_years();
    let mut cells = Vec::new();
    for c in 0..ds.n_countries() {
        for t in 0..ds.n_years() {
            if prepared.get(c, t, idx[0]).is_some() {
                cells.push((c, t));
            }
        }
    }
    let data = DMatrix::from_fn(cells.len(), idx.len(), |r, j| {
        let (c, t) = cells[r];
        prepared.get(c, t, idx[j]).expect("listwise-complete cell")
    });

    let mut model = pca_fit(&data, vars, opts.retention)?;
    let rotation_applied = opts.rotate && model.retained >= 2;
    if rotation_applied {
        model = model.rotate()?;
    }
    if opts.use_rotated_scores && !rotation_applied {
        return Err(MultivariateError::InvalidOption(
            "rotated scores requested but no rotation was applied (needs rotate = true and ≥ 2 components)".into(),
        ));
    }
    let kmo = kmo(&model.correlation, opts.kmo_ridge)?;
    let bartlett = bartlett(&model.correlation, data.nrows())?;

    let comp = scores(&model, &data, opts.use_rotated_scores)?;
    let (mut values, weights) = build_index(&comp, &model, opts.weighting, opts.use_rotated_scores)?;

    let (anchor_correlation, negated) = match anchor_idx {
        Some(a) => {
            let sign = if ds.variables()[a].polarity == Polarity::Inverted { -1.0 } else { 1.0 };
            let anchor: Vec<Option<f64>> = cells.iter().map(|&(c, t)| ds.get(c, t, a).map(|v| sign * v)).collect();
            orient_to_anchor(&mut values, &anchor)
        }
        None => (None, false),
    };

    let mut column = vec![None; n_cells];
    for (&(c, t), v) in cells.iter().zip(&values) {
        column[c * ds.n_years() + t] = Some(*v);
    }
    let component_variances = match (opts.use_rotated_scores, model.rotated_loadings()) {
        (true, Some(r)) => r.column_iter().map(|c| c.norm_squared()).collect(),
        _ => model.retained_eigenvalues().to_vec(),
    };
    let polarity = vars
        .iter()
        .map(|s| (s.clone(), ds.variables()[ds.var_index(s).unwrap()].polarity))
        .collect();
    let metadata = IndexMetadata {
        name: opts.name.clone(),
        retained: model.retained,
        component_variances,
        weights,
        weighting: opts.weighting,
        rotation_applied,
        rotated_scores: opts.use_rotated_scores,
        polarity,
        anchor: opts.anchor.clone(),
        anchor_correlation,
        negated,
        n_obs: cells.len(),
        n_incomplete_cells: n_cells - cells.len(),
    };
    let series = IndexSeries {
        countries: ds.countries().to_vec(),
        years: ds.years().to_vec(),
        values: column,
        metadata,
    };
    Ok(IndexConstruction { model, kmo, bartlett, series, prepared })
}
