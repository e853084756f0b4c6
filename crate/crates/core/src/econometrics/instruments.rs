use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::{ColumnKind, Design, EconometricsError, GmmModelSpec};
use crate::paneldata::PanelDataset;

/// Instrument matrix aligned row-for-row with a [`Design`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instruments {
    pub z: DMatrix<f64>,
    pub names: Vec<String>,
    pub keys: Vec<(String, i32)>,
    /// Requested columns that were identically zero (no usable lags) and were left out.
    pub dropped: Vec<String>,
}

impl Instruments {
    pub fn count(&self) -> usize {
        self.z.ncols()
    }

    /// Just-identified instruments: every design column instruments itself.
    pub fn from_design(design: &Design) -> Self {
        Instruments { z: design.x.clone(), names: design.names.clone(), keys: design.keys.clone(), dropped: Vec::new() }
    }

    pub fn from_matrix(z: DMatrix<f64>, design: &Design) -> Self {
        Instruments {
            names: (0..z.ncols()).map(|j| format!("z{}", j + 1)).collect(),
            z,
            keys: design.keys.clone(),
            dropped: Vec::new(),
        }
    }
}

/// Builds Z for `design` from the recipe in `spec`.
///
/// Lagged-level columns take the undifferenced value `var(t − l)` and are
/// zero where that lag falls outside the observed data. Exogenous columns are
/// copies of the (transformed) design columns.
pub fn build_instruments(
    ds: &PanelDataset,
    spec: &GmmModelSpec,
    design: &Design,
) -> Result<Instruments, EconometricsError> {
    let recipe = &spec.instruments;
    let n = design.n_obs();
    let first_year = ds.years()[0];
    let country_idx: Vec<usize> = design
        .keys
        .iter()
        .map(|(c, _)| ds.countries().iter().position(|x| x == c).expect("design country in dataset"))
        .collect();

    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut dropped = Vec::new();

    for range in &recipe.lagged {
        let v = ds.var_index(&range.var)?;
        let lagged_value = |row: usize, l: usize| -> f64 {
            let t = (design.keys[row].1 - first_year) as isize - l as isize;
            if t < 0 {
                return 0.0;
            }
            ds.get(country_idx[row], t as usize, v).unwrap_or(0.0)
        };
        for l in range.from..=range.to {
            if recipe.collapse {
                cols.push((0..n).map(|r| lagged_value(r, l)).collect());
                names.push(format!("{}(-{l})", range.var));
            } else {
                let years: BTreeSet<i32> = design.keys.iter().map(|k| k.1).collect();
                for year in years {
                    cols.push(
                        (0..n).map(|r| if design.keys[r].1 == year { lagged_value(r, l) } else { 0.0 }).collect(),
                    );
                    names.push(format!("{}(-{l})@{year}", range.var));
                }
            }
        }
    }

    let exog: Vec<usize> = match &recipe.exogenous {
        None => (0..design.n_params()).filter(|&j| design.kinds[j] != ColumnKind::LaggedDependent).collect(),
        Some(list) => {
            let mut idx = list
                .iter()
                .map(|name| {
                    design.names.iter().position(|n| n == name).ok_or_else(|| EconometricsError::UnknownInstrument(name.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if recipe.time_dummies {
                let dummies: Vec<usize> = (0..design.n_params())
                    .filter(|&j| design.kinds[j] == ColumnKind::TimeDummy && !idx.contains(&j))
                    .collect();
                idx.extend(dummies);
            }
            idx
        }
    };
    for j in exog {
        cols.push(design.x.column(j).iter().copied().collect());
        names.push(design.names[j].clone());
    }

    let mut kept_cols = Vec::new();
    let mut kept_names = Vec::new();
    for (col, name) in cols.into_iter().zip(names) {
        if col.iter().all(|&v| v == 0.0) {
            dropped.push(name);
        } else {
            kept_cols.push(col);
            kept_names.push(name);
        }
    }
    let q = kept_cols.len();
    if q < design.n_params() {
        return Err(EconometricsError::OrderConditionViolated { params: design.n_params(), instruments: q });
    }
    let z = DMatrix::from_fn(n, q, |i, j| kept_cols[j][i]);
    Ok(Instruments { z, names: kept_names, keys: design.keys.clone(), dropped })
}
