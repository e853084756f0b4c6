use serde::{Deserialize, Serialize};

use super::MultivariateError;
use crate::numerics::{chi2_sf, Cholesky, NumericsError, SymMatrix};

/// Below this sum of squared off-diagonal correlations the KMO ratio is numerically meaningless.
const KMO_DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmoResult {
    pub overall: f64,
    pub per_variable_msa: Vec<f64>,
    /// Ridge added to the diagonal before inversion, if any.
    pub ridge: Option<f64>,
    /// Set when the correlations are essentially zero and the ratio carries no information.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BartlettResult {
    pub chi_square: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Kaiser–Meyer–Olkin sampling adequacy from the anti-image partial correlations.
///
/// `ridge` is only used when `r` itself is not positive definite.
pub fn kmo(r: &SymMatrix, ridge: Option<f64>) -> Result<KmoResult, MultivariateError> {
    let p = r.order();
    let (chol, used_ridge) = match Cholesky::factor(r) {
        Ok(c) => (c, None),
        Err(NumericsError::NotPositiveDefinite { .. }) => match ridge {
            Some(eps) => (Cholesky::factor(&r.ridged(eps)).map_err(|_| MultivariateError::SingularMatrix)?, Some(eps)),
            None => return Err(MultivariateError::SingularMatrix),
        },
        Err(e) => return Err(e.into()),
    };
    let inv = chol.inverse();
    let mut r2_row = vec![0.0; p];
    let mut q2_row = vec![0.0; p];
    for j in 0..p {
        for k in 0..p {
            if j == k {
                continue;
            }
            let q = -inv[(j, k)] / (inv[(j, j)] * inv[(k, k)]).sqrt();
            r2_row[j] += r[(j, k)] * r[(j, k)];
            q2_row[j] += q * q;
        }
    }
    let ratio = |a: f64, b: f64| if a + b > 0.0 { a / (a + b) } else { 0.0 };
    let r2: f64 = r2_row.iter().sum();
    let q2: f64 = q2_row.iter().sum();
    Ok(KmoResult {
        overall: ratio(r2, q2),
        per_variable_msa: r2_row.iter().zip(&q2_row).map(|(&a, &b)| ratio(a, b)).collect(),
        ridge: used_ridge,
        degenerate: r2 < KMO_DEGENERATE,
    })
}

/// Bartlett's test of sphericity: χ² = −(n − 1 − (2p + 5)/6)·ln|R| on p(p−1)/2 df.
pub fn bartlett(r: &SymMatrix, n_obs: usize) -> Result<BartlettResult, MultivariateError> {
    let p = r.order();
    if n_obs <= p {
        return Err(MultivariateError::InsufficientObservations { n_obs, p });
    }
    let ln_det = Cholesky::factor(r)?.log_det();
    let factor = n_obs as f64 - 1.0 - (2.0 * p as f64 + 5.0) / 6.0;
    let chi_square = (-factor * ln_det).max(0.0);
    let df = (p * (p - 1) / 2) as u32;
    Ok(BartlettResult { chi_square, df, p_value: chi2_sf(chi_square, df) })
}
