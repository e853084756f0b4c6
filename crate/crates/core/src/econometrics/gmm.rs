use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{adjusted_r2, durbin_watson, ColumnKind, Design, EconometricsError, Instruments};
use crate::numerics::{chi2_sf, Cholesky, NumericsError, SymMatrix};

/// Ridge (relative to the mean diagonal) added when a weighting matrix is singular.
pub const WEIGHT_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightingSpec {
    pub step1: String,
    pub step2: String,
    pub ridge_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub just_identified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmEstimate {
    pub label: String,
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub step1_coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub keys: Vec<(String, i32)>,
    pub j_statistic: f64,
    pub j_df: usize,
    pub j_pvalue: f64,
    pub just_identified: bool,
    pub durbin_watson: Option<f64>,
    pub adjusted_r2: Option<f64>,
    pub n_obs: usize,
    pub n_params: usize,
    pub n_instruments: usize,
    pub n_countries: usize,
    pub weighting_matrix: WeightingSpec,
    pub instrument_names: Vec<String>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl GmmEstimate {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }
}

/// Factors `s`, retrying once with a small ridge when it is not positive definite.
fn factor_with_ridge(s: DMatrix<f64>, ridged: &mut bool) -> Result<Cholesky, EconometricsError> {
    let q = s.nrows();
    let sym = SymMatrix::new((&s + s.transpose()) * 0.5)?;
    match Cholesky::factor(&sym) {
        Ok(c) => Ok(c),
        Err(NumericsError::NotPositiveDefinite { .. }) => {
            *ridged = true;
            let scale = (s.trace() / q as f64).abs().max(1.0);
            Ok(Cholesky::factor(&sym.ridged(WEIGHT_RIDGE * scale))?)
        }
        Err(e) => Err(e.into()),
    }
}

struct Weighted {
    beta: DVector<f64>,
    /// (X'Z S⁻¹ Z'X)⁻¹
    bread: DMatrix<f64>,
}

/// β = (A S⁻¹ A')⁻¹ A S⁻¹ b with A = X'Z, b = Z'y and S the moment covariance.
fn weighted_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, s: &Cholesky) -> Result<Weighted, EconometricsError> {
    let s_inv_at = s.solve(&a.transpose())?;
    let m = a * &s_inv_at;
    let m = SymMatrix::new((&m + m.transpose()) * 0.5)?;
    let m_chol = Cholesky::factor(&m).map_err(|_| EconometricsError::RankConditionViolated)?;
    let rhs = a * s.solve(b)?;
    let beta = m_chol.solve(&rhs)?.column(0).into_owned();
    Ok(Weighted { beta, bread: m_chol.inverse() })
}

/// Cluster-summed moment covariance (1/n) Σ_g (Z_g'u_g)(Z_g'u_g)'.
fn clustered_moment_covariance(z: &DMatrix<f64>, u: &DVector<f64>, cluster: &[usize]) -> DMatrix<f64> {
    let (n, q) = z.shape();
    let mut s = DMatrix::<f64>::zeros(q, q);
    let mut g = DVector::<f64>::zeros(q);
    let mut i = 0;
    while i < n {
        g.fill(0.0);
        let c = cluster[i];
        while i < n && cluster[i] == c {
            for j in 0..q {
                g[j] += z[(i, j)] * u[i];
            }
            i += 1;
        }
        s.ger(1.0, &g, &g, 1.0);
    }
    s / n as f64
}

/// Two-step efficient GMM with a country-clustered step-2 weighting matrix.
///
/// Step 1 weights by (Z'Z/n)⁻¹, which is 2SLS. Step 2 re-weights by the
/// inverse of the clustered moment covariance at the step-1 residuals.
/// Standard errors are the square roots of n·(X'Z W₂ Z'X)⁻¹.
pub fn gmm_two_step(design: &Design, instruments: &Instruments) -> Result<GmmEstimate, EconometricsError> {
    if let Some(i) = design.keys.iter().zip(&instruments.keys).position(|(a, b)| a != b) {
        return Err(EconometricsError::RowMismatch(i));
    }
    if design.keys.len() != instruments.keys.len() || instruments.z.nrows() != design.n_obs() {
        return Err(EconometricsError::RowMismatch(design.keys.len().min(instruments.keys.len())));
    }
    let (n, k) = design.x.shape();
    let q = instruments.z.ncols();
    if n <= k {
        return Err(EconometricsError::InsufficientObservations { n_obs: n, n_params: k });
    }
    if q < k {
        return Err(EconometricsError::OrderConditionViolated { params: k, instruments: q });
    }
    let z = &instruments.z;
    let x = &design.x;
    let y = DMatrix::from_column_slice(n, 1, design.y.as_slice());
    let a = x.transpose() * z;
    let b = z.transpose() * &y;
    let mut warnings = Vec::new();
    let mut ridged = false;

    let s1 = z.transpose() * z / n as f64;
    let step1 = weighted_solve(&a, &b, &factor_with_ridge(s1, &mut ridged)?)?;
    if ridged {
        warnings.push("Z'Z singular: ridge added to the step-1 weighting matrix".to_string());
    }
    let u1 = &design.y - x * &step1.beta;

    let mut ridged2 = false;
    let s2 = factor_with_ridge(clustered_moment_covariance(z, &u1, &design.cluster), &mut ridged2)?;
    if ridged2 {
        warnings.push("clustered moment covariance singular: ridge added to the step-2 weighting matrix".to_string());
    }
    let step2 = weighted_solve(&a, &b, &s2)?;
    let residuals = &design.y - x * &step2.beta;
    let std_errors: Vec<f64> = (0..k).map(|j| (n as f64 * step2.bread[(j, j)]).max(0.0).sqrt()).collect();

    let j = j_from_parts(z, &residuals, &s2, k);

    let durbin_watson = durbin_watson(residuals.as_slice(), &design.cluster).ok();
    if durbin_watson.is_none() {
        warnings.push("Durbin-Watson not computed: a country has fewer than 2 residuals".to_string());
    }
    let adjusted_r2 = adjusted_r2(residuals.as_slice(), design.y.as_slice(), k).ok();

    Ok(GmmEstimate {
        label: String::new(),
        names: design.names.clone(),
        kinds: design.kinds.clone(),
        coefficients: step2.beta.iter().copied().collect(),
        std_errors,
        step1_coefficients: step1.beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        keys: design.keys.clone(),
        j_statistic: j.statistic,
        j_df: j.df,
        j_pvalue: j.p_value,
        just_identified: j.just_identified,
        durbin_watson,
        adjusted_r2,
        n_obs: n,
        n_params: k,
        n_instruments: q,
        n_countries: design.n_countries,
        weighting_matrix: WeightingSpec {
            step1: "(Z'Z/n)^-1".into(),
            step2: "country-clustered (1/n) sum_i Z_i'u_i u_i'Z_i, inverted".into(),
            ridge_applied: ridged || ridged2,
        },
        instrument_names: instruments.names.clone(),
        warnings,
        notes: design.notes.clone(),
    })
}

fn j_from_parts(z: &DMatrix<f64>, u: &DVector<f64>, s: &Cholesky, k: usize) -> JTest {
    let n = z.nrows() as f64;
    let q = z.ncols();
    let gbar = z.transpose() * u / n;
    let gbar = DMatrix::from_column_slice(q, 1, gbar.as_slice());
    let w_g = s.solve(&gbar).expect("moment dimension");
    let statistic = (n * gbar.dot(&w_g)).max(0.0);
    let df = q - k;
    if df == 0 {
        JTest { statistic, df, p_value: 1.0, just_identified: true }
    } else {
        JTest { statistic, df, p_value: chi2_sf(statistic, df as u32), just_identified: false }
    }
}

/// Hansen's J at the two-step estimate: n·ḡ'W₂ḡ with ḡ = Z'û/n.
pub fn j_statistic(est: &GmmEstimate, instruments: &Instruments, design: &Design) -> Result<JTest, EconometricsError> {
    let beta = DVector::from_column_slice(&est.coefficients);
    let x = &design.x;
    let y = DMatrix::from_column_slice(design.n_obs(), 1, design.y.as_slice());
    let z = &instruments.z;
    // rebuild W₂ from the step-1 residuals
    let mut ridged = false;
    let s1 = factor_with_ridge(z.transpose() * z / design.n_obs() as f64, &mut ridged)?;
    let step1 = weighted_solve(&(x.transpose() * z), &(z.transpose() * &y), &s1)?;
    let u1 = &design.y - x * &step1.beta;
    let s2 = factor_with_ridge(clustered_moment_covariance(z, &u1, &design.cluster), &mut ridged)?;
    let u = &design.y - x * &beta;
    Ok(j_from_parts(z, &u, &s2, design.n_params()))
}
