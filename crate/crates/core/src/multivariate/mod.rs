//! Principal components of a standardized indicator block: fit, varimax
//! rotation, component scores, sampling-adequacy tests and the composite
//! index built from the retained components.

mod adequacy;
mod index;
mod report;
mod varimax;

pub use adequacy::{bartlett, kmo, BartlettResult, KmoResult};
pub use index::{
    aggregate, build_index, component_weights, construct_index, country_averages, orient_to_anchor,
    CountryAverage, IndexConstruction, IndexMetadata, IndexOptions, IndexSeries, Weighting,
};
pub use report::{render_adequacy, render_variance, PcaReport};
pub use varimax::{varimax, varimax_criterion, Varimax, VARIMAX_MAX_SWEEPS};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, EigenDecomposition, NumericsError, SymMatrix};
use crate::paneldata::PanelError;

/// Column mean / sd tolerance for accepting data as standardized.
pub const STANDARDIZED_TOL: f64 = 1e-6;
/// Eigenvalues below this mark the correlation matrix as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MultivariateError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("column {column} is not standardized (mean {mean:.3e}, sd {sd:.6})")]
    NotStandardized { column: usize, mean: f64, sd: f64 },
    #[error("need more observations than variables ({n_obs} rows, {p} variables)")]
    InsufficientObservations { n_obs: usize, p: usize },
    #[error("varimax needs at least 2 retained components, got {0}")]
    RequiresTwoComponents(usize),
    #[error("varimax did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("correlation matrix is singular; enable the ridge fallback to proceed")]
    SingularMatrix,
    #[error("model has no rotated solution")]
    NotRotated,
    #[error("component {0} has a non-positive eigenvalue and cannot be scaled")]
    DegenerateComponent(usize),
    #[error("anchor variable `{0}` is not part of the dataset")]
    UnknownAnchor(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retention {
    /// Keep components with eigenvalue > 1.
    Kaiser,
    TopK(usize),
}

/// One row of a total-variance-explained table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub component: usize,
    pub total: f64,
    pub pct_of_variance: f64,
    pub cumulative_pct: f64,
}

/// Number of eigenvalues strictly greater than one.
pub fn kaiser_count(eigenvalues: &[f64]) -> usize {
    eigenvalues.iter().filter(|&&l| l > 1.0).count()
}

/// Variance accounting for a list of component variances out of `total_variance`
/// (the number of standardized variables for a correlation PCA).
pub fn variance_table(totals: &[f64], total_variance: f64) -> Vec<VarianceRow> {
    let mut cumulative = 0.0;
    totals
        .iter()
        .enumerate()
        .map(|(k, &total)| {
            let pct = 100.0 * total / total_variance;
            cumulative += pct;
            VarianceRow { component: k + 1, total, pct_of_variance: pct, cumulative_pct: cumulative }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub symbols: Vec<String>,
    pub correlation: SymMatrix,
    pub eigen: EigenDecomposition,
    pub retained: usize,
    /// p × m, column k = v_k · √λ_k.
    pub loadings: DMatrix<f64>,
    pub rotation: Option<Varimax>,
    pub variance_table: Vec<VarianceRow>,
    pub n_obs: usize,
    pub rank_deficient: bool,
}

impl PcaModel {
    pub fn p(&self) -> usize {
        self.symbols.len()
    }

    pub fn retained_eigenvalues(&self) -> &[f64] {
        &self.eigen.values[..self.retained]
    }

    pub fn rotated_loadings(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref().map(|r| &r.loadings)
    }

    /// Rotation sums of squared loadings (column sums of squares of the rotated loadings).
    pub fn rotation_sums(&self) -> Option<Vec<VarianceRow>> {
        self.rotation.as_ref().map(|r| {
            let sums: Vec<f64> = r.loadings.column_iter().map(|c| c.norm_squared()).collect();
            variance_table(&sums, self.p() as f64)
        })
    }

    /// Per-variable communality over the retained components.
    pub fn communalities(&self) -> Vec<f64> {
        self.loadings.row_iter().map(|r| r.norm_squared()).collect()
    }

    /// Returns a copy with the varimax-rotated solution attached.
    pub fn rotate(&self) -> Result<Self, MultivariateError> {
        let mut out = self.clone();
        out.rotation = Some(varimax(&self.loadings)?);
        Ok(out)
    }
}

fn check_standardized(data: &DMatrix<f64>) -> Result<(), MultivariateError> {
    let n = data.nrows() as f64;
    for (j, col) in data.column_iter().enumerate() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        if mean.abs() > STANDARDIZED_TOL || (sd - 1.0).abs() > STANDARDIZED_TOL {
            return Err(MultivariateError::NotStandardized { column: j, mean, sd });
        }
    }
    Ok(())
}

/// Fits a correlation PCA on an `n_obs × p` block of standardized columns.
pub fn pca_fit(data: &DMatrix<f64>, symbols: &[String], retention: Retention) -> Result<PcaModel, MultivariateError> {
    let (n_obs, p) = data.shape();
    if symbols.len() != p {
        return Err(MultivariateError::DimensionMismatch { expected: p, actual: symbols.len() });
    }
    if n_obs <= p {
        return Err(MultivariateError::InsufficientObservations { n_obs, p });
    }
    check_standardized(data)?;
    let correlation = numerics::correlation_of_complete(data)?;
    let eigen = numerics::sym_eigen(&correlation)?;
    let retained = match retention {
        Retention::Kaiser => kaiser_count(&eigen.values),
        Retention::TopK(k) if k == 0 || k > p => {
            return Err(MultivariateError::InvalidOption(format!("top_k must be in 1..={p}, got {k}")))
        }
        Retention::TopK(k) => k,
    };
    let rank_deficient = eigen.values.iter().any(|&l| l < RANK_TOL);
    let loadings = DMatrix::from_fn(p, retained, |i, k| eigen.vectors[(i, k)] * eigen.values[k].max(0.0).sqrt());
    let variance_table = variance_table(&eigen.values, p as f64);
    Ok(PcaModel {
        symbols: symbols.to_vec(),
        correlation,
        eigen,
        retained,
        loadings,
        rotation: None,
        variance_table,
        n_obs,
        rank_deficient,
    })
}

/// Component scores for the retained components.
///
/// Unrotated scores use the unit eigenvectors as weights, so their sample
/// variance on the fitting data is λ_k. Rotated scores use regression-method
/// weights R⁻¹·A_rot, which for a principal-component solution reduce to
/// V_m Λ_m^{-1/2} Q and give unit-variance scores.
pub fn scores(model: &PcaModel, data: &DMatrix<f64>, rotated: bool) -> Result<DMatrix<f64>, MultivariateError> {
    if data.ncols() != model.p() {
        return Err(MultivariateError::DimensionMismatch { expected: model.p(), actual: data.ncols() });
    }
    let m = model.retained;
    let vm = model.eigen.vectors.columns(0, m).into_owned();
    if !rotated {
        return Ok(data * vm);
    }
    let rot = model.rotation.as_ref().ok_or(MultivariateError::NotRotated)?;
    let mut weights = vm;
    for k in 0..m {
        let l = model.eigen.values[k];
        if l <= RANK_TOL {
            return Err(MultivariateError::DegenerateComponent(k + 1));
        }
        weights.column_mut(k).scale_mut(1.0 / l.sqrt());
    }
    Ok(data * (weights * &rot.rotation))
}
