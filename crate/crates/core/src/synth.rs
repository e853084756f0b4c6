//! Synthetic dynamic panels with known parameters.
//!
//! The generator is ChaCha8 seeded from a `u64`; normal deviates come from
//! `rand_distr::StandardNormal` (ziggurat over the ChaCha stream). Both are
//! integer-state and produce identical streams on every platform.
//!
//! Model: `y_it = ρ y_i,t−1 + Σ_j b_j x_j,it + μ_i + μ_t + ε_it`. Periods
//! `−50..0` are simulated and discarded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paneldata::{PanelDataset, PanelError, VariableDef};

pub const BURN_IN: usize = 50;
pub const FIRST_YEAR: i32 = 2000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateMode {
    IndependentNormal,
    /// `x = L f + e` with `e ~ N(0, 1)`; indicator `j` loads on factor `j mod k`.
    FactorStructure { k_factors: usize, loadings_scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpSpec {
    pub n_countries: usize,
    pub n_years: usize,
    pub rho: f64,
    /// Coefficients on the control covariates `X1..`.
    pub beta: Vec<f64>,
    /// Coefficients on the determinant covariates that follow the controls.
    pub gamma: Vec<f64>,
    /// Total covariates emitted; the ones past `beta.len() + gamma.len()` do not enter `y`.
    pub n_covariates: usize,
    pub sigma_mu: f64,
    pub sigma_t: f64,
    pub sigma_eps: f64,
    pub covariates: CovariateMode,
    /// When set, `X1 = Z1 + c·ε` and the excluded instrument `Z1` is emitted.
    pub endogeneity: Option<f64>,
    /// Independent per-cell probability of blanking a covariate or `y`.
    pub missing_fraction: f64,
    pub seed: u64,
    pub dependent: String,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            n_countries: 32,
            n_years: 22,
            rho: 0.5,
            beta: vec![0.5, -0.3],
            gamma: vec![0.2],
            n_covariates: 3,
            sigma_mu: 0.2,
            sigma_t: 0.2,
            sigma_eps: 1.0,
            covariates: CovariateMode::IndependentNormal,
            endogeneity: None,
            missing_fraction: 0.0,
            seed: 42,
            dependent: "Y".into(),
        }
    }
}

impl DgpSpec {
    pub fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.rho.abs() < 1.0) {
            return bad(format!("|rho| must be < 1 for stationarity, got {}", self.rho));
        }
        for (name, v) in [("sigma_mu", self.sigma_mu), ("sigma_t", self.sigma_t), ("sigma_eps", self.sigma_eps)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative scale, got {v}"));
            }
        }
        if self.n_countries == 0 || self.n_years == 0 {
            return bad("n_countries and n_years must be positive".into());
        }
        if self.beta.len() + self.gamma.len() > self.n_covariates {
            return bad(format!(
                "{} coefficients for {} covariates",
                self.beta.len() + self.gamma.len(),
                self.n_covariates
            ));
        }
        if self.beta.iter().chain(&self.gamma).any(|b| !b.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return bad(format!("missing_fraction must be in [0, 1), got {}", self.missing_fraction));
        }
        if let CovariateMode::FactorStructure { k_factors, loadings_scale } = self.covariates {
            if k_factors == 0 || k_factors > self.n_covariates {
                return bad(format!("k_factors must be in 1..={}, got {k_factors}", self.n_covariates));
            }
            if !(loadings_scale >= 0.0 && loadings_scale.is_finite()) {
                return bad(format!("loadings_scale must be non-negative, got {loadings_scale}"));
            }
        }
        if let Some(c) = self.endogeneity {
            if self.n_covariates == 0 || !c.is_finite() {
                return bad("endogeneity needs at least one covariate and a finite strength".into());
            }
        }
        if self.dependent.is_empty() {
            return bad("dependent symbol is empty".into());
        }
        Ok(())
    }

    pub fn covariate_symbols(&self) -> Vec<String> {
        (1..=self.n_covariates).map(|j| format!("X{j}")).collect()
    }

    pub fn control_symbols(&self) -> Vec<String> {
        self.covariate_symbols()[..self.beta.len()].to_vec()
    }

    pub fn determinant_symbols(&self) -> Vec<String> {
        self.covariate_symbols()[self.beta.len()..self.beta.len() + self.gamma.len()].to_vec()
    }
}

/// Every parameter that generated a panel, plus the realized random effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub spec: DgpSpec,
    pub burn_in: usize,
    pub generator: String,
    pub coefficients: Vec<(String, f64)>,
    /// `n_covariates × k_factors`, row-major; empty unless factor structure.
    pub factor_loadings: Vec<Vec<f64>>,
    pub country_effects: Vec<f64>,
    pub year_effects: Vec<f64>,
    pub n_missing: usize,
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: PanelDataset,
    pub truth: TruthRecord,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn simulate_panel(spec: &DgpSpec) -> Result<SimulatedPanel, SynthError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, t_obs, p) = (spec.n_countries, spec.n_years, spec.n_covariates);
    let t_all = t_obs + BURN_IN;

    let loadings: Vec<Vec<f64>> = match spec.covariates {
        CovariateMode::IndependentNormal => Vec::new(),
        CovariateMode::FactorStructure { k_factors, loadings_scale } => (0..p)
            .map(|j| {
                let mut row = vec![0.0; k_factors];
                row[j % k_factors] = loadings_scale * (0.75 + 0.5 * rng.random::<f64>());
                row
            })
            .collect(),
    };
    let country_effects: Vec<f64> = (0..n).map(|_| spec.sigma_mu * normal(&mut rng)).collect();
    let year_effects: Vec<f64> = (0..t_all).map(|_| spec.sigma_t * normal(&mut rng)).collect();

    let coef: Vec<f64> = spec.beta.iter().chain(&spec.gamma).copied().collect();
    let cells = n * t_obs;
    let mut y_col = vec![0.0; cells];
    let mut x_cols = vec![vec![0.0; cells]; p];
    let mut z_col = vec![0.0; cells];
    let mut x = vec![0.0; p];
    let mut f = vec![0.0; loadings.first().map_or(0, Vec::len)];

    for i in 0..n {
        let mut y_prev = 0.0;
        for t in 0..t_all {
            for fk in f.iter_mut() {
                *fk = normal(&mut rng);
            }
            for (j, xj) in x.iter_mut().enumerate() {
                let common: f64 = loadings.get(j).map_or(0.0, |l| l.iter().zip(&f).map(|(a, b)| a * b).sum());
                *xj = common + normal(&mut rng);
            }
            let eps = spec.sigma_eps * normal(&mut rng);
            let z1 = x.first().copied().unwrap_or(0.0);
            if let Some(c) = spec.endogeneity {
                x[0] = z1 + c * eps;
            }
            let xb: f64 = coef.iter().zip(&x).map(|(b, v)| b * v).sum();
            let y = spec.rho * y_prev + xb + country_effects[i] + year_effects[t] + eps;
            y_prev = y;
            if t >= BURN_IN {
                let cell = i * t_obs + (t - BURN_IN);
                y_col[cell] = y;
                z_col[cell] = z1;
                for j in 0..p {
                    x_cols[j][cell] = x[j];
                }
            }
        }
    }

    let mut variables = vec![VariableDef::new(spec.dependent.clone())];
    variables.extend(spec.covariate_symbols().into_iter().map(VariableDef::new));
    let mut columns: Vec<Vec<Option<f64>>> = Vec::with_capacity(p + 2);
    columns.push(y_col.into_iter().map(Some).collect());
    columns.extend(x_cols.into_iter().map(|c| c.into_iter().map(Some).collect()));
    if spec.endogeneity.is_some() {
        variables.push(VariableDef::new("Z1"));
        columns.push(z_col.into_iter().map(Some).collect());
    }

    let mut n_missing = 0;
    if spec.missing_fraction > 0.0 {
        // separate stream so the mask does not perturb the values
        let mut mask_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        mask_rng.set_stream(1);
        for col in columns.iter_mut() {
            for v in col.iter_mut() {
                if mask_rng.random::<f64>() < spec.missing_fraction {
                    *v = None;
                    n_missing += 1;
                }
            }
        }
    }

    let countries: Vec<String> = (1..=n).map(|i| format!("C{i:03}")).collect();
    let panel = PanelDataset::new(countries, FIRST_YEAR, t_obs, variables, columns)?;
    let truth = TruthRecord {
        spec: spec.clone(),
        burn_in: BURN_IN,
        generator: "ChaCha8 (rand_chacha 0.9), StandardNormal ziggurat (rand_distr 0.5)".into(),
        coefficients: std::iter::once(("rho".to_string(), spec.rho))
            .chain(spec.covariate_symbols().into_iter().zip(coef.iter().copied()))
            .collect(),
        factor_loadings: loadings,
        country_effects,
        year_effects: year_effects[BURN_IN..].to_vec(),
        n_missing,
    };
    Ok(SimulatedPanel { panel, truth })
}
