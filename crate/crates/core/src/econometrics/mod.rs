//! Dynamic-panel two-step GMM: design assembly under country/year effects,
//! lagged-level instruments, estimation and the diagnostic block of the
//! results table.

mod design;
mod diagnostics;
mod gmm;
mod instruments;
mod report;

pub use design::{build_design, ColumnKind, Design, COLLINEARITY_THRESHOLD};
pub use diagnostics::{adjusted_r2, durbin_watson};
pub use gmm::{gmm_two_step, j_statistic, GmmEstimate, JTest, WeightingSpec, WEIGHT_RIDGE};
pub use instruments::{build_instruments, Instruments};
pub use report::{render_table, table_row_labels, TABLE_DIAGNOSTIC_ROWS};

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numerics::NumericsError;
use crate::paneldata::PanelError;

#[derive(Debug, Error)]
pub enum EconometricsError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("no complete rows survive lagging and the effects transformation")]
    EmptyDesign,
    #[error("collinear regressors (condition number {condition:.3e}): {columns:?}")]
    CollinearColumns { condition: f64, columns: Vec<String> },
    #[error("order condition violated: {params} parameters but {instruments} instruments")]
    OrderConditionViolated { params: usize, instruments: usize },
    #[error("instrument `{0}` does not name a design column")]
    UnknownInstrument(String),
    #[error("rank condition violated: Z'X does not have full column rank")]
    RankConditionViolated,
    #[error("design and instrument rows are not aligned (first divergence at row {0})")]
    RowMismatch(usize),
    #[error("need more observations than parameters ({n_obs} rows, {n_params} parameters)")]
    InsufficientObservations { n_obs: usize, n_params: usize },
    #[error("a country contributes fewer than 2 residuals")]
    TooFewResiduals,
    #[error("degenerate variance (all-zero sum of squares)")]
    DegenerateVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effects {
    None,
    TimeDummies,
    EntityDemeanedPlusTime,
    FirstDifferencePlusTime,
}

impl Effects {
    /// First differences for dynamic specs, within-demeaning for static ones.
    pub fn default_for(lag_dependent: bool) -> Self {
        if lag_dependent {
            Effects::FirstDifferencePlusTime
        } else {
            Effects::EntityDemeanedPlusTime
        }
    }

    fn has_time_dummies(self) -> bool {
        !matches!(self, Effects::None)
    }
}

/// A regressor term: a dataset variable or the product of two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Regressor {
    Variable(String),
    Interaction(String, String),
}

impl Regressor {
    pub fn parse(s: &str) -> Result<Self, EconometricsError> {
        let parts: Vec<&str> = s.split('*').map(str::trim).collect();
        match parts.as_slice() {
            [v] if !v.is_empty() => Ok(Regressor::Variable(v.to_string())),
            [a, b] if !a.is_empty() && !b.is_empty() => Ok(Regressor::Interaction(a.to_string(), b.to_string())),
            _ => Err(EconometricsError::InvalidSpec(format!("cannot parse regressor `{s}`"))),
        }
    }

    pub fn symbols(&self) -> Vec<&str> {
        match self {
            Regressor::Variable(v) => vec![v],
            Regressor::Interaction(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regressor::Variable(v) => write!(f, "{v}"),
            Regressor::Interaction(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

impl Serialize for Regressor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Regressor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Regressor::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Lagged levels `var(t − from) … var(t − to)` used as instruments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagRange {
    pub var: String,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentRecipe {
    #[serde(default)]
    pub lagged: Vec<LagRange>,
    /// Design columns entering as their own instruments. `None` means every
    /// design column except the lagged dependent variable.
    #[serde(default)]
    pub exogenous: Option<Vec<String>>,
    /// With an explicit `exogenous` list, also include every year dummy.
    #[serde(default = "yes")]
    pub time_dummies: bool,
    /// One column per lag distance instead of one per (period, lag).
    #[serde(default = "yes")]
    pub collapse: bool,
}

fn yes() -> bool {
    true
}

impl InstrumentRecipe {
    /// Collapsed lags 2..3 of the dependent variable plus all exogenous regressors.
    pub fn default_for(dependent: &str) -> Self {
        InstrumentRecipe {
            lagged: vec![LagRange { var: dependent.to_string(), from: 2, to: 3 }],
            exogenous: None,
            time_dummies: true,
            collapse: true,
        }
    }

    /// Every regressor instruments itself.
    pub fn exogenous_only() -> Self {
        InstrumentRecipe { lagged: Vec::new(), exogenous: None, time_dummies: true, collapse: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModelSpec {
    pub label: String,
    pub dependent: String,
    pub lag_dependent: bool,
    pub controls: Vec<String>,
    pub determinants: Vec<Regressor>,
    pub effects: Effects,
    pub intercept: bool,
    pub instruments: InstrumentRecipe,
}

impl GmmModelSpec {
    pub fn new(dependent: &str, lag_dependent: bool) -> Self {
        GmmModelSpec {
            label: String::new(),
            dependent: dependent.to_string(),
            lag_dependent,
            controls: Vec::new(),
            determinants: Vec::new(),
            effects: Effects::default_for(lag_dependent),
            intercept: true,
            instruments: if lag_dependent {
                InstrumentRecipe::default_for(dependent)
            } else {
                InstrumentRecipe::exogenous_only()
            },
        }
    }

    pub fn regressors(&self) -> Vec<Regressor> {
        self.controls
            .iter()
            .map(|c| Regressor::Variable(c.clone()))
            .chain(self.determinants.iter().cloned())
            .collect()
    }

    pub fn lagged_dependent_name(&self) -> String {
        format!("{}(-1)", self.dependent)
    }

    /// Checks that no symbol is repeated across dependent, controls and determinants.
    pub fn check(&self) -> Result<(), EconometricsError> {
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(self.dependent.clone());
        for r in self.regressors() {
            if !seen.insert(r.to_string()) {
                return Err(EconometricsError::InvalidSpec(format!("`{r}` appears more than once")));
            }
        }
        for l in &self.instruments.lagged {
            if l.from == 0 || l.to < l.from {
                return Err(EconometricsError::InvalidSpec(format!(
                    "instrument lag range {}..{} for `{}` is empty or starts at 0",
                    l.from, l.to, l.var
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regressor_parsing() {
        assert_eq!(Regressor::parse("GOV*GCE").unwrap(), Regressor::Interaction("GOV".into(), "GCE".into()));
        assert_eq!(Regressor::parse("DIG").unwrap().to_string(), "DIG");
        assert!(Regressor::parse("A*B*C").is_err());
        assert!(Regressor::parse("").is_err());
    }

    #[test]
    fn repeated_symbol_rejected() {
        let mut s = GmmModelSpec::new("Y", true);
        s.controls = vec!["A".into()];
        s.determinants = vec![Regressor::Variable("A".into())];
        assert!(s.check().is_err());
        s.determinants = vec![Regressor::Variable("Y".into())];
        assert!(s.check().is_err());
        s.determinants = vec![Regressor::parse("A*B").unwrap()];
        assert!(s.check().is_ok());
    }

    #[test]
    fn default_effects() {
        assert_eq!(GmmModelSpec::new("Y", true).effects, Effects::FirstDifferencePlusTime);
        assert_eq!(GmmModelSpec::new("Y", false).effects, Effects::EntityDemeanedPlusTime);
    }
}
